//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

mod common;

use std::collections::{BTreeSet, HashMap};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::RawBox;
use screenparse::io::{pair_records, EvalRecord};
use screenparse::loss::{self, ScoredSequence, WeightSpec};
use screenparse::metrics::{self, Aggregation, LabelSpace, LabelSpaceKind, Metric};
use screenparse::pipeline::{
    self, dedup_pages, judge_filter, ConstantJudge, FilterConfig,
    IngestedJudge, OnJudgeError, PageOutcome, Pipeline, Stage,
};
use screenparse::screentag::{self, Token, TokenClass};
use screenparse::synth::{self, NoiseToggles, SynthConfig};
use screenparse::{containment_ratio, iou, BBox, Page, PageRecord, Taxonomy, UiClass, Viewport};

type Outcome = Result<String, String>;
type Check = fn() -> Outcome;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(limit: Duration, start: Instant) -> Result<Duration, String> {
    let t = start.elapsed();
    ensure(t < limit, || format!("took {t:?}, limit {limit:?}"))?;
    Ok(t)
}

fn round_trip() -> Outcome {
    let start = Instant::now();
    for seed in 0..1000u64 {
        let cfg = SynthConfig { seed, ..Default::default() };
        let page: Page = synth::generate(&cfg).map_err(|e| e.to_string())?;
        let markup = screentag::to_markup(&page).map_err(|e| e.to_string())?;
        let back: Page = screentag::parse(&markup, page.viewport).map_err(|e| format!("seed {seed}: {e}"))?;
        let order = common::markup_order(&page);
        ensure(order.len() == back.elements.len(), || format!("seed {seed}: element count"))?;
        let mut new_of = vec![0; order.len()];
        for (new, &old) in order.iter().enumerate() {
            new_of[old] = new;
        }
        let (bw, bh) = (page.viewport.width as f64 / 500.0, page.viewport.height as f64 / 500.0);
        for (new, &old) in order.iter().enumerate() {
            let (a, b) = (&page.elements[old], &back.elements[new]);
            ensure(a.class == b.class, || format!("seed {seed}: class at {new}"))?;
            ensure(a.visible_text() == b.visible_text(), || format!("seed {seed}: text at {new}"))?;
            ensure(a.parent.map(|p| new_of[p]) == b.parent, || format!("seed {seed}: parent at {new}"))?;
            let d = [
                (a.bbox.x1 - b.bbox.x1).abs() / bw,
                (a.bbox.y1 - b.bbox.y1).abs() / bh,
                (a.bbox.x2 - b.bbox.x2).abs() / bw,
                (a.bbox.y2 - b.bbox.y2).abs() / bh,
            ];
            ensure(d.iter().all(|v| *v <= 1.0 + 1e-9), || format!("seed {seed}: coordinate drift {d:?}"))?;
        }
        let again = screentag::to_markup(&back).map_err(|e| e.to_string())?;
        ensure(again == markup, || format!("seed {seed}: second serialization differs"))?;
    }
    let t = within(Duration::from_secs(10), start)?;
    Ok(format!("1000 pages in {t:.2?}"))
}

fn random_instance(rng: &mut ChaCha8Rng) -> (u32, u32, Vec<RawBox>, Vec<RawBox>) {
    let w = rng.gen_range(1..=256);
    let h = rng.gen_range(1..=256);
    let set = |n: usize, rng: &mut ChaCha8Rng| -> Vec<RawBox> {
        (0..n)
            .map(|_| {
                let x1 = rng.gen_range(-20.0..w as f64 + 10.0);
                let y1 = rng.gen_range(-20.0..h as f64 + 10.0);
                let x2 = x1 + rng.gen_range(-2.0..w as f64 * 0.6);
                let y2 = y1 + rng.gen_range(-2.0..h as f64 * 0.6);
                let snap = rng.gen_bool(0.5);
                let f = |v: f64| if snap { v.round() } else { v };
                RawBox {
                    x1: f(x1),
                    y1: f(y1),
                    x2: f(x2),
                    y2: f(y2),
                    label: rng.gen_range(0..4),
                    // coarse confidences so ties happen
                    conf: rng.gen_range(0..5) as f64 / 4.0,
                }
            })
            .collect()
    };
    let np = rng.gen_range(0..=12);
    let ng = rng.gen_range(0..=12);
    let gt = set(ng, rng);
    let mut pred = set(np, rng);
    // near-copies of ground truth so matches occur
    for g in gt.iter().take(4) {
        if rng.gen_bool(0.6) {
            let j = rng.gen_range(-3.0..3.0);
            pred.push(RawBox { x1: g.x1 + j, x2: g.x2 + j, label: if rng.gen_bool(0.7) { g.label } else { 9 }, ..*g });
        }
    }
    (w, h, pred, gt)
}

fn metric_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut matched_any = 0;
    for case in 0..200 {
        let (w, h, pred, gt) = random_instance(&mut rng);
        let grid = Viewport::new(w, h);
        let (p, g) = (common::annotations(&pred), common::annotations(&gt));
        let (inter, union, gt_px, agree) = common::pixel_counts(&pred, &gt, w, h);
        let want_iou = if union == 0 { 1.0 } else { inter as f64 / union as f64 };
        let want_label = if union == 0 { 1.0 } else { agree as f64 / union as f64 };
        let want_cov = (gt_px > 0).then(|| inter as f64 / gt_px as f64);
        ensure(metrics::page_iou(&p, &g, grid) == want_iou, || format!("case {case}: page_iou"))?;
        ensure(metrics::label_page_iou(&p, &g, grid) == want_label, || format!("case {case}: label_page_iou"))?;
        ensure(metrics::pix_cov(&p, &g, grid) == want_cov, || format!("case {case}: pix_cov"))?;
        for aware in [false, true] {
            let got = metrics::recall_at_50(&p, &g, aware);
            let want = common::recall(&pred, &gt, aware);
            ensure((got - want).abs() <= 1e-9, || format!("case {case}: recall {got} vs {want}"))?;
            if want > 0.0 && !gt.is_empty() {
                matched_any += 1;
            }
        }
        let got = metrics::map_at_50(&p, &g);
        let want = common::map50(&pred, &gt);
        let close = match (got, want) {
            (Some(a), Some(b)) => (a - b).abs() <= 1e-9,
            (None, None) => true,
            _ => false,
        };
        ensure(close, || format!("case {case}: map {got:?} vs {want:?}"))?;
    }
    ensure(matched_any > 50, || format!("only {matched_any} instances exercised matching"))?;
    let t = within(Duration::from_secs(30), start)?;
    Ok(format!("200 instances in {t:.2?}"))
}

fn map_fixture_and_self_eval() -> Outcome {
    let g = [metrics::Annotation::new(BBox::new(0., 0., 10., 10.), 0)];
    let p = [
        metrics::Annotation::new(BBox::new(50., 50., 60., 60.), 0).with_confidence(Some(0.9)),
        metrics::Annotation::new(BBox::new(0., 0., 10., 10.), 0).with_confidence(Some(0.8)),
    ];
    let ap = metrics::map_at_50(&p, &g);
    ensure(ap == Some(0.5), || format!("fixture AP {ap:?}"))?;

    let tax = Taxonomy::default();
    let corpus: synth::Corpus = synth::generate_corpus(&SynthConfig { seed: 99, ..Default::default() }, &tax, 100)
        .map_err(|e| e.to_string())?;
    let records: Vec<EvalRecord> = corpus
        .pages
        .iter()
        .map(|p| serde_json::from_value(serde_json::to_value(p).unwrap()).unwrap())
        .collect();
    let space = LabelSpace::new(LabelSpaceKind::Screentag55);
    let inputs = pair_records::<f64>(records.clone(), records, &space).map_err(|e| e.to_string())?;
    let evals = metrics::evaluate_all(&inputs);
    for mode in [Aggregation::Macro, Aggregation::Micro] {
        let r = metrics::aggregate(&evals, mode);
        for m in Metric::ALL {
            ensure(r.get(m) == Some(1.0), || format!("{mode:?} {} = {:?}", m.as_str(), r.get(m)))?;
        }
    }
    Ok("AP 0.5; 100-page self-evaluation 1.0 on all metrics".into())
}

fn check_survivors(pages: &[Page], cfg: &FilterConfig, tax: &Taxonomy) -> Result<(), String> {
    let hashes: Vec<u64> = pages.iter().map(|p| p.phash.unwrap()).collect();
    for (a, ha) in hashes.iter().enumerate() {
        for hb in &hashes[a + 1..] {
            ensure((ha ^ hb).count_ones() > cfg.hash_radius, || "surviving hashes within radius".into())?;
        }
    }
    for p in pages {
        ensure(p.judge_score.is_some_and(|s| s >= cfg.judge_threshold), || format!("{}: judge", p.page_id))?;
        let vp_area = p.viewport.area();
        for (i, e) in p.elements.iter().enumerate() {
            let area = e.bbox.area();
            ensure(e.bbox.is_valid(), || format!("{}: invalid box {i}", p.page_id))?;
            ensure(area >= cfg.min_area_px2 || tax.is_interactive(e.class), || format!("{}: tiny {i}", p.page_id))?;
            ensure(area <= cfg.max_area_frac * vp_area || e.class == UiClass::IMAGE, || {
                format!("{}: oversized {i}", p.page_id)
            })?;
            let vis = e.bbox.intersection_area(&p.viewport.as_box()) / area;
            ensure(vis >= cfg.min_visible_frac, || format!("{}: off-screen {i}", p.page_id))?;
            for (j, f) in p.elements.iter().enumerate().skip(i + 1) {
                let v = iou(&e.bbox, &f.bbox);
                ensure(v < cfg.dup_iou, || format!("{}: duplicate pair {i},{j}", p.page_id))?;
                if e.class == f.class {
                    ensure(v <= cfg.cleanup_iou, || format!("{}: same-class overlap {i},{j}", p.page_id))?;
                    if !tax.is_container(e.class) {
                        ensure(containment_ratio(&e.bbox, &f.bbox) <= cfg.cleanup_containment, || {
                            format!("{}: atomic containment {i},{j}", p.page_id)
                        })?;
                    }
                }
            }
        }
    }
    Ok(())
}

type Removal = (String, Option<usize>, Stage, pipeline::Reason);

fn pipeline_postconditions() -> Outcome {
    let tax = Taxonomy::default();
    let cfg = FilterConfig::default();
    let scfg = SynthConfig { seed: 2024, noise: NoiseToggles::all(), noise_rate: 0.5, ..Default::default() };
    let corpus: synth::Corpus = synth::generate_corpus(&scfg, &tax, 500).map_err(|e| e.to_string())?;
    let input_pages = corpus.pages.len();

    let judge = IngestedJudge;
    let mut pipe = Pipeline::new(cfg.clone(), tax.clone(), &judge, OnJudgeError::Keep);
    let outcomes = pipe.process_batch(corpus.pages);
    let report = pipe.into_report();
    ensure(report.is_conserved(), || "report counts do not add up".into())?;

    let mut observed: BTreeSet<Removal> = BTreeSet::new();
    let mut kept = Vec::new();
    for o in outcomes {
        match o {
            PageOutcome::Kept(p) => {
                if let Some(prov) = &p.provenance {
                    for r in &prov.removed {
                        observed.insert((p.page_id.clone(), Some(r.index), r.stage, r.reason));
                    }
                }
                kept.push(p);
            }
            PageOutcome::Dropped { page_id, stage, reason, .. } => {
                observed.insert((page_id, None, stage, reason));
            }
        }
    }
    let expected: BTreeSet<Removal> = corpus
        .injections
        .iter()
        .map(|i| (i.page_id.clone(), i.element, i.stage, i.reason))
        .collect();
    ensure(expected.len() == corpus.injections.len(), || "injection log has repeats".into())?;
    if observed != expected {
        let missing: Vec<_> = expected.difference(&observed).take(3).collect();
        let extra: Vec<_> = observed.difference(&expected).take(3).collect();
        return Err(format!("removals differ from log; missing {missing:?}, unexpected {extra:?}"));
    }
    let mut kinds: HashMap<String, usize> = HashMap::new();
    for i in &corpus.injections {
        *kinds.entry(format!("{:?}", i.kind)).or_default() += 1;
    }
    ensure(kinds.len() == 8, || format!("not every noise kind was injected: {kinds:?}"))?;

    check_survivors(&kept, &cfg, &tax)?;

    let survivors = kept.len();
    let (again, second) =
        pipeline::run_pipeline(kept.clone(), &cfg, &tax, &judge, OnJudgeError::Keep);
    ensure(second.stages.iter().all(|s| s.removed == 0), || "second pass removed something".into())?;
    ensure(again == kept, || "second pass changed pages".into())?;
    Ok(format!(
        "{input_pages} pages, {} logged removals matched, {survivors} survivors, second pass removes 0",
        expected.len()
    ))
}

fn loss_reference() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let default = WeightSpec::default();
    for seed in 0..1000u64 {
        let page: Page = synth::generate(&SynthConfig { seed, ..Default::default() }).map_err(|e| e.to_string())?;
        let seq = screentag::serialize(&page).map_err(|e| e.to_string())?;
        let w = loss::token_weights(&seq, &default);
        let heavy = w.iter().filter(|v| **v == 2.0).count();
        let n = page.elements.len();
        ensure(heavy == 6 * n + 2, || format!("seed {seed}: {heavy} weighted positions for {n} elements"))?;
        if seed < 200 {
            let lps: Vec<f64> = (0..seq.len()).map(|_| -rng.gen_range(0.0..12.0)).collect();
            let plain: f64 = lps.iter().map(|l| -l).sum();
            let s = ScoredSequence::new(seq, lps).map_err(|e| e.to_string())?;
            let got = loss::weighted_ce(&s, &WeightSpec::uniform()).sum;
            ensure((got - plain).abs() <= 1e-12 * plain.max(1.0), || format!("seed {seed}: {got} vs {plain}"))?;
        }
    }
    let fixture = screenparse::screentag::TokenSeq(vec![
        Token::Open(UiClass::BUTTON),
        Token::Loc(250),
        Token::Text("a".into()),
        Token::Text("b".into()),
    ]);
    let s = ScoredSequence::new(fixture, vec![0.5f64.ln(); 4]).map_err(|e| e.to_string())?;
    let got = loss::weighted_ce(&s, &default).sum;
    let want = 6.0 * std::f64::consts::LN_2;
    ensure((got - want).abs() <= 1e-12, || format!("fixture {got} vs {want}"))?;
    Ok(format!("uniform weights equal CE; fixture {got:.6} = 6 ln 2; 6N+2 on 1000 pages"))
}

fn vocabulary() -> Outcome {
    let v = screentag::vocabulary();
    ensure(v.len() == 613, || format!("{} tokens", v.len()))?;
    let surfaces: BTreeSet<String> = v.iter().map(Token::surface).collect();
    ensure(surfaces.len() == 613, || "duplicate surfaces".into())?;
    for c in UiClass::all() {
        ensure(v.contains(&Token::Open(c)) && v.contains(&Token::Close(c)), || format!("missing {}", c.name()))?;
    }
    for b in 0..=500u16 {
        ensure(surfaces.contains(&format!("<loc_{b}>")), || format!("missing loc_{b}"))?;
    }
    ensure(v.iter().all(|t| t.class() != TokenClass::Other), || "text token in vocabulary".into())?;
    Ok("613 tokens: 55 classes x open/close, loc_0..loc_500, 2 delimiters".into())
}

fn boundaries() -> Outcome {
    let g = [metrics::Annotation::new(BBox::new(0., 0., 100., 100.), 0)];
    let p = [metrics::Annotation::new(BBox::new(0., 0., 100., 50.), 0)];
    ensure(iou(&p[0].bbox, &g[0].bbox) == 0.5, || "fixture IoU is not 0.5".into())?;
    ensure(metrics::recall_at_50(&p, &g, true) == 1.0, || "IoU 0.5 not matched".into())?;

    let cfg = FilterConfig::default();
    let page: Page = PageRecord::new("j", Viewport::DEFAULT);
    let kept = judge_filter(vec![page.clone()], &ConstantJudge(0.70), &cfg, OnJudgeError::Keep);
    ensure(kept.len() == 1 && kept[0].judge_score == Some(0.70), || "score 0.70 dropped".into())?;
    let dropped = judge_filter(vec![page.clone()], &ConstantJudge(0.6999), &cfg, OnJudgeError::Keep);
    ensure(dropped.is_empty(), || "score below 0.70 kept".into())?;

    let mut a = page.clone();
    a.phash = Some(0);
    let mut b = page.clone();
    b.page_id = "k".into();
    b.phash = Some(0xff);
    let mut c = page;
    c.page_id = "l".into();
    c.phash = Some(0x1ff00);
    let out = dedup_pages(vec![a, b, c], &cfg);
    let ids: Vec<String> = out.into_iter().map(|r| r.unwrap().page_id).collect();
    ensure(ids == ["j", "l"], || format!("hamming boundary kept {ids:?}"))?;

    Ok("IoU 0.5 matched; judge 0.70 kept; Hamming 8 dropped, 9 kept".into())
}

fn main() {
    let checks: [(&str, Check); 7] = [
        ("round-trip", round_trip),
        ("metric-oracle", metric_oracle),
        ("map-fixture-and-self-eval", map_fixture_and_self_eval),
        ("pipeline-postconditions", pipeline_postconditions),
        ("loss-reference", loss_reference),
        ("vocabulary", vocabulary),
        ("boundary-semantics", boundaries),
    ];
    let mut failed = 0;
    for (name, check) in checks {
        match check() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL {name}: {why}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", checks.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
