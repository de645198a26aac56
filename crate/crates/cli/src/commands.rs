use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use screenparse::io::{self, EvalRecord};
use screenparse::loss::{self, ScoredSequence, WeightSpec};
use screenparse::metrics::{self, ImageEval, LabelSpace, Metric};
use screenparse::pipeline::{
    CommandJudge, ConstantJudge, FilterConfig, FilterReport, IngestedJudge, Judge, OnJudgeError, PageOutcome,
    Pipeline, Reason, RuleJudge, Stage, Unit,
};
use screenparse::screentag;
use screenparse::synth::{self, NoiseToggles, SynthConfig};
use screenparse::taxonomy::TaxonomyConfig;
use screenparse::{Page, Taxonomy};

use crate::manifest::{self, ManifestBuilder};
use crate::{
    ConvertArgs, EvaluateArgs, FilterArgs, Format, JudgeFailure, JudgePolicy, LossArgs, LossFormat, OverlayArgs,
    PerturbArgs, SynthArgs, UsageError, VocabArgs,
};

fn usage(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(UsageError(msg.into()))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).with_context(|| format!("opening {}", path.display()))?))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn read_records<V: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<V>> {
    io::read_jsonl(open(path)?)
        .collect::<Result<Vec<V>, _>>()
        .with_context(|| format!("reading {}", path.display()))
}

fn finish(m: ManifestBuilder, explicit: Option<&Path>, output: Option<&Path>) -> Result<()> {
    let path = explicit.map(Path::to_path_buf).or_else(|| output.map(manifest::default_path));
    manifest::write(&m.finish(), path.as_deref())
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    #[serde(default)]
    filter: FilterConfig,
    #[serde(default)]
    taxonomy: TaxonomyConfig,
}

#[derive(Serialize)]
struct FilterRun<'a> {
    filter: &'a FilterConfig,
    taxonomy: TaxonomyConfig,
    judge: &'a str,
    on_judge_error: JudgePolicy,
}

enum JudgeKind {
    InProcess(Box<dyn Judge<f64>>),
    External(CommandJudge),
}

fn parse_judge(spec: &str) -> Result<JudgeKind> {
    let (kind, arg) = spec.split_once(':').unwrap_or((spec, ""));
    match kind {
        "ingested" if arg.is_empty() => Ok(JudgeKind::InProcess(Box::new(IngestedJudge))),
        "rule" if arg.is_empty() => Ok(JudgeKind::InProcess(Box::new(RuleJudge::default()))),
        "constant" => {
            let v: f64 = arg.parse().map_err(|_| usage(format!("bad constant judge score `{arg}`")))?;
            if !(0.0..=1.0).contains(&v) {
                return Err(usage(format!("constant judge score {v} is outside [0, 1]")));
            }
            Ok(JudgeKind::InProcess(Box::new(ConstantJudge(v))))
        }
        "exec" => {
            let mut parts = arg.split_whitespace();
            let program = parts.next().ok_or_else(|| usage("exec judge needs a program"))?;
            Ok(JudgeKind::External(CommandJudge::new(program, parts.map(String::from).collect())))
        }
        _ => Err(usage(format!("unknown judge `{spec}`; expected ingested, rule, constant:<v> or exec:<cmd>"))),
    }
}

#[derive(Serialize)]
struct DroppedPage<'a> {
    page_id: &'a str,
    stage: Stage,
    reason: Reason,
    #[serde(skip_serializing_if = "Option::is_none")]
    detail: Option<&'a str>,
}

pub fn filter(a: FilterArgs, manifest_path: Option<&Path>) -> Result<()> {
    let file: ConfigFile = match &a.config {
        None => ConfigFile::default(),
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            toml::from_str(&text).map_err(|e| usage(format!("{}: {e}", p.display())))?
        }
    };
    let mut cfg = file.filter;
    macro_rules! overlay {
        ($($field:ident),*) => { $(if let Some(v) = a.$field { cfg.$field = v; })* };
    }
    overlay!(
        min_area_px2,
        max_area_frac,
        dup_iou,
        cleanup_iou,
        cleanup_containment,
        hash_radius,
        judge_threshold,
        min_visible_frac
    );
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    let taxonomy = Taxonomy::from_config(&file.taxonomy).map_err(|e| usage(e.to_string()))?;
    if a.batch_size == 0 {
        return Err(usage("--batch-size must be at least 1"));
    }
    let judge = parse_judge(&a.judge)?;
    let on_error = match a.on_judge_error {
        JudgePolicy::Keep => OnJudgeError::Keep,
        JudgePolicy::Drop => OnJudgeError::Drop,
    };
    let run = FilterRun { filter: &cfg, taxonomy: taxonomy.to_config(), judge: &a.judge, on_judge_error: a.on_judge_error };
    let mut m = ManifestBuilder::new(
        "filter",
        &run,
        &["validation", "geometry", "duplicate_suppression", "judge_filter", "page_dedup", "ground_truth_cleanup"],
    )?;
    m.input(&a.input).output(&a.output);

    let judge_ref: &dyn Judge<f64> = match &judge {
        JudgeKind::InProcess(j) => j.as_ref(),
        JudgeKind::External(j) => j,
    };
    let mut pipeline = Pipeline::new(cfg, taxonomy, judge_ref, on_error);
    let mut out = create(&a.output)?;
    let mut dropped_out = a.dropped.as_deref().map(create).transpose()?;
    let (mut pages_in, mut pages_out, mut elements_in, mut elements_out) = (0usize, 0usize, 0usize, 0usize);

    let mut reader = io::read_pages::<f64, _>(open(&a.input)?).peekable();
    while reader.peek().is_some() {
        let batch: Vec<Page> = reader
            .by_ref()
            .take(a.batch_size)
            .collect::<Result<_, _>>()
            .with_context(|| format!("reading {}", a.input.display()))?;
        pages_in += batch.len();
        elements_in += batch.iter().map(|p| p.elements.len()).sum::<usize>();
        for outcome in pipeline.process_batch(batch) {
            match outcome {
                PageOutcome::Kept(p) => {
                    pages_out += 1;
                    elements_out += p.elements.len();
                    io::write_jsonl(&mut out, &p)?;
                }
                PageOutcome::Dropped { page_id, stage, reason, detail } => {
                    if let Some(w) = dropped_out.as_mut() {
                        let rec = DroppedPage { page_id: &page_id, stage, reason, detail: detail.as_deref() };
                        io::write_jsonl(w, &rec)?;
                    }
                }
            }
        }
    }
    out.flush()?;
    if let Some(mut w) = dropped_out {
        w.flush()?;
        m.output(a.dropped.as_deref().unwrap());
    }
    let report: FilterReport = pipeline.into_report();
    if let Some(p) = &a.report {
        std::fs::write(p, serde_json::to_string_pretty(&report)? + "\n")
            .with_context(|| format!("writing {}", p.display()))?;
        m.output(p);
    }
    let judge_errors =
        report.judge_errors_kept + report.stage(Stage::JudgeFilter).reasons.get(&Reason::JudgeError).copied().unwrap_or(0);
    m.count("pages_in", pages_in)
        .count("pages_out", pages_out)
        .count("elements_in", elements_in)
        .count("elements_out", elements_out)
        .count("removed_elements", report.total_removed(Unit::Elements))
        .count("removed_pages", report.total_removed(Unit::Pages))
        .count("judge_errors", judge_errors)
        .count("report", &report);
    finish(m, manifest_path, Some(&a.output))?;
    if judge_errors > 0 && matches!(judge, JudgeKind::External(_)) {
        return Err(anyhow::Error::new(JudgeFailure(format!(
            "external judge failed on {judge_errors} page(s); handled per --on-judge-error"
        ))));
    }
    Ok(())
}

fn infer_format(p: &Path) -> Option<Format> {
    match p.extension()?.to_str()? {
        "jsonl" | "json" => Some(Format::Jsonl),
        "st" => Some(Format::St),
        _ => None,
    }
}

pub fn convert(a: ConvertArgs, manifest_path: Option<&Path>) -> Result<()> {
    let from = a.from.or_else(|| infer_format(&a.input)).ok_or_else(|| usage("cannot infer input format; pass --from"))?;
    let to = a.to.or_else(|| infer_format(&a.output)).ok_or_else(|| usage("cannot infer output format; pass --to"))?;
    if from == to {
        return Err(usage("input and output formats are the same"));
    }
    #[derive(Serialize)]
    struct Run {
        from: Format,
        to: Format,
        viewport: screenparse::Viewport,
    }
    let mut m = ManifestBuilder::new("convert", &Run { from, to, viewport: a.viewport }, &["screentag"])?;
    m.input(&a.input).output(&a.output);
    let mut out = create(&a.output)?;
    let mut pages = 0usize;
    match from {
        Format::Jsonl => {
            for page in io::read_pages::<f64, _>(open(&a.input)?) {
                let page = page.with_context(|| format!("reading {}", a.input.display()))?;
                let line = io::to_st_line(&page).with_context(|| format!("page {}", page.page_id))?;
                writeln!(out, "{line}")?;
                pages += 1;
            }
        }
        Format::St => {
            for page in io::read_st::<f64, _>(open(&a.input)?, a.viewport) {
                let page: Page = page.with_context(|| format!("reading {}", a.input.display()))?;
                io::write_jsonl(&mut out, &page)?;
                pages += 1;
            }
        }
    }
    out.flush()?;
    m.count("pages", pages);
    finish(m, manifest_path, Some(&a.output))
}

#[derive(Serialize)]
struct CsvRow<'a> {
    page_id: &'a str,
    n_gt: usize,
    matched: usize,
    matched_label: usize,
    page_iou: Option<f64>,
    label_page_iou: Option<f64>,
    recall_at_50: Option<f64>,
    label_recall_at_50: Option<f64>,
    pix_cov: Option<f64>,
    map_at_50: Option<f64>,
}

fn write_per_image(path: &Path, images: &[ImageEval]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    for e in images {
        let r = &e.report;
        w.serialize(CsvRow {
            page_id: &e.page_id,
            n_gt: e.n_gt,
            matched: e.matched,
            matched_label: e.matched_label,
            page_iou: r.page_iou,
            label_page_iou: r.label_page_iou,
            recall_at_50: r.recall_at_50,
            label_recall_at_50: r.label_recall_at_50,
            pix_cov: r.pix_cov,
            map_at_50: r.map_at_50,
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn evaluate(a: EvaluateArgs, manifest_path: Option<&Path>) -> Result<()> {
    let wanted: Vec<Metric> = if a.metrics.is_empty() { Metric::ALL.to_vec() } else { a.metrics.clone() };
    #[derive(Serialize)]
    struct Run<'a> {
        labels: &'a str,
        metrics: Vec<&'static str>,
        aggregation: String,
    }
    let run = Run {
        labels: a.labels.as_str(),
        metrics: wanted.iter().map(|m| m.as_str()).collect(),
        aggregation: format!("{:?}", a.aggregation).to_lowercase(),
    };
    let mut m = ManifestBuilder::new("evaluate", &run, &["metrics"])?;
    m.input(&a.pred).input(&a.gt);

    let preds: Vec<EvalRecord> = read_records(&a.pred)?;
    let gts: Vec<EvalRecord> = read_records(&a.gt)?;
    let space = LabelSpace::new(a.labels);
    let inputs = io::pair_records::<f64>(preds, gts, &space)?;
    let images = metrics::evaluate_all(&inputs);
    let report = metrics::aggregate(&images, a.aggregation).restrict(&wanted);
    let text = serde_json::to_string_pretty(&report)? + "\n";
    match &a.out {
        Some(p) => {
            std::fs::write(p, &text).with_context(|| format!("writing {}", p.display()))?;
            m.output(p);
        }
        None => print!("{text}"),
    }
    if let Some(p) = &a.per_image {
        write_per_image(p, &images)?;
        m.output(p);
    }
    m.count("images", images.len()).count("report", report);
    finish(m, manifest_path, a.out.as_deref())
}

pub fn overlay(a: OverlayArgs, manifest_path: Option<&Path>) -> Result<()> {
    #[derive(Serialize)]
    struct Run<'a> {
        page_id: &'a str,
        background: Option<&'a str>,
    }
    let mut m = ManifestBuilder::new("overlay", &Run { page_id: &a.page_id, background: a.background.as_deref() }, &[])?;
    m.input(&a.input).output(&a.output);
    let mut found = None;
    for page in io::read_pages::<f64, _>(open(&a.input)?) {
        let page = page.with_context(|| format!("reading {}", a.input.display()))?;
        if page.page_id == a.page_id {
            found = Some(page);
            break;
        }
    }
    let page = found.ok_or_else(|| anyhow!("page {} not found in {}", a.page_id, a.input.display()))?;
    let background = a.background.as_deref().or(page.screenshot_path.as_deref());
    std::fs::write(&a.output, crate::overlay::render_svg(&page, background))
        .with_context(|| format!("writing {}", a.output.display()))?;
    m.count("elements", page.elements.len());
    finish(m, manifest_path, Some(&a.output))
}

pub fn synth(a: SynthArgs, manifest_path: Option<&Path>) -> Result<()> {
    let mut cfg: SynthConfig = match &a.config {
        None => SynthConfig::default(),
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            toml::from_str(&text).map_err(|e| usage(format!("{}: {e}", p.display())))?
        }
    };
    cfg.seed = a.seed;
    if a.config.is_none() || a.noise != "none" {
        cfg.noise = NoiseToggles::parse_list(&a.noise).map_err(|e| usage(e.to_string()))?;
    }
    if let Some(r) = a.noise_rate {
        cfg.noise_rate = r;
    }
    if let Some(v) = a.viewport {
        cfg.viewport = v;
    }
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    #[derive(Serialize)]
    struct Run<'a> {
        synth: &'a SynthConfig,
        count: usize,
    }
    let log_path: PathBuf = a.log.clone().unwrap_or_else(|| {
        let mut s = a.output.as_os_str().to_owned();
        s.push(".injections.jsonl");
        s.into()
    });
    let mut m = ManifestBuilder::new("synth", &Run { synth: &cfg, count: a.count }, &["synth"])?;
    m.output(&a.output).output(&log_path);

    let corpus: synth::Corpus = synth::generate_corpus(&cfg, &Taxonomy::default(), a.count)?;
    let mut out = create(&a.output)?;
    for p in &corpus.pages {
        io::write_jsonl(&mut out, p)?;
    }
    out.flush()?;
    let mut log = create(&log_path)?;
    for i in &corpus.injections {
        io::write_jsonl(&mut log, i)?;
    }
    log.flush()?;
    m.count("pages", corpus.pages.len())
        .count("elements", corpus.pages.iter().map(|p| p.elements.len()).sum::<usize>())
        .count("injections", corpus.injections.len());
    finish(m, manifest_path, Some(&a.output))
}

pub fn perturb(a: PerturbArgs, manifest_path: Option<&Path>) -> Result<()> {
    if !(0.0..=1.0).contains(&a.magnitude) {
        return Err(usage(format!("--magnitude {} is outside [0, 1]", a.magnitude)));
    }
    #[derive(Serialize)]
    struct Run {
        kind: synth::PerturbKind,
        magnitude: f64,
        seed: u64,
    }
    let mut m = ManifestBuilder::new("perturb", &Run { kind: a.kind, magnitude: a.magnitude, seed: a.seed }, &["synth"])?;
    m.input(&a.input).output(&a.output);
    let pages: Vec<Page> = read_records(&a.input)?;
    let degraded: Vec<Page> = pages
        .par_iter()
        .enumerate()
        .map(|(i, p)| synth::perturb(p, a.kind, a.magnitude, a.seed.wrapping_add(i as u64)))
        .collect::<Result<_, _>>()?;
    let mut out = create(&a.output)?;
    for p in &degraded {
        io::write_jsonl(&mut out, p)?;
    }
    out.flush()?;
    m.count("pages", degraded.len());
    finish(m, manifest_path, Some(&a.output))
}

pub fn vocab(a: VocabArgs, manifest_path: Option<&Path>) -> Result<()> {
    let mut m = ManifestBuilder::new("vocab", &(), &["screentag"])?;
    let tokens = screentag::vocabulary();
    let text: String = tokens.iter().map(|t| t.surface() + "\n").collect();
    match &a.output {
        Some(p) => {
            std::fs::write(p, &text).with_context(|| format!("writing {}", p.display()))?;
            m.output(p);
        }
        None => print!("{text}"),
    }
    m.count("tokens", tokens.len());
    finish(m, manifest_path, a.output.as_deref())
}

#[derive(Serialize)]
struct LossLine<'a> {
    index: usize,
    tokens: usize,
    sum: f64,
    mean: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    weights: Option<&'a [f64]>,
}

pub fn loss(a: LossArgs, manifest_path: Option<&Path>) -> Result<()> {
    let format = match a.format {
        Some(f) => f,
        None => match a.input.extension().and_then(|e| e.to_str()) {
            Some("tsv") | Some("txt") => LossFormat::Tsv,
            Some("jsonl") | Some("json") => LossFormat::Jsonl,
            _ => return Err(usage("cannot infer input format; pass --format")),
        },
    };
    let spec = WeightSpec::new(a.lambda_tag, a.lambda_loc).map_err(|e| usage(e.to_string()))?;
    #[derive(Serialize)]
    struct Run {
        format: LossFormat,
        lambda_tag: f64,
        lambda_loc: f64,
        weights: bool,
    }
    let run = Run { format, lambda_tag: a.lambda_tag, lambda_loc: a.lambda_loc, weights: a.weights };
    let mut m = ManifestBuilder::new("loss", &run, &["loss", "screentag"])?;
    m.input(&a.input);
    let reader: Box<dyn BufRead> = Box::new(open(&a.input)?);
    let seqs: Vec<ScoredSequence<f64>> = match format {
        LossFormat::Tsv => loss::read_tsv(reader),
        LossFormat::Jsonl => loss::read_jsonl(reader),
    }
    .with_context(|| format!("reading {}", a.input.display()))?;
    let scored: Vec<(loss::LossValue<f64>, Vec<f64>)> = seqs
        .par_iter()
        .map(|s| (loss::weighted_ce(s, &spec), loss::token_weights(s.tokens(), &spec)))
        .collect();
    let mut text = String::new();
    for (i, (v, w)) in scored.iter().enumerate() {
        let line = LossLine { index: i, tokens: v.tokens, sum: v.sum, mean: v.mean, weights: a.weights.then_some(w) };
        text.push_str(&serde_json::to_string(&line)?);
        text.push('\n');
    }
    match &a.out {
        Some(p) => {
            std::fs::write(p, &text).with_context(|| format!("writing {}", p.display()))?;
            m.output(p);
        }
        None => print!("{text}"),
    }
    m.count("sequences", scored.len())
        .count("total_sum", scored.iter().map(|(v, _)| v.sum).sum::<f64>())
        .count("total_tokens", scored.iter().map(|(v, _)| v.tokens).sum::<usize>());
    finish(m, manifest_path, a.out.as_deref())
}
