mod commands;
mod manifest;
mod overlay;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use screenparse::metrics::{Aggregation, LabelSpaceKind, Metric};
use screenparse::synth::PerturbKind;
use screenparse::Viewport;

/// Bad flag values that clap cannot catch on its own.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

/// An external judge failed on at least one page.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct JudgeFailure(pub String);

#[derive(Parser)]
#[command(name = "screenparse", version, about = "ScreenTag conversion, annotation filtering and screen-parsing evaluation")]
struct Cli {
    /// Worker threads for per-page work. Output order never depends on it.
    #[arg(long, global = true, env = "SCREENPARSE_WORKERS")]
    workers: Option<usize>,
    /// Where to write the run manifest. Defaults to `<output>.manifest.json`,
    /// or stderr for commands that print to stdout.
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the cleaning pipeline over a JSONL page corpus.
    Filter(FilterArgs),
    /// Convert between JSONL page records and `.st` ScreenTag files.
    Convert(ConvertArgs),
    /// Score predictions against ground truth.
    Evaluate(EvaluateArgs),
    /// Draw one page's boxes as an SVG.
    Overlay(OverlayArgs),
    /// Generate a synthetic corpus and its injection log.
    Synth(SynthArgs),
    /// Degrade every page of a corpus, for building prediction sets.
    Perturb(PerturbArgs),
    /// Print the special-token inventory, one token per line.
    Vocab(VocabArgs),
    /// Structure-weighted cross-entropy over scored token sequences.
    Loss(LossArgs),
}

#[derive(Copy, Clone, Debug, ValueEnum, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum JudgePolicy {
    Keep,
    Drop,
}

#[derive(Args)]
pub struct FilterArgs {
    pub input: PathBuf,
    pub output: PathBuf,
    /// TOML with optional `[filter]` and `[taxonomy]` tables.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// `ingested`, `rule`, `constant:<score>` or `exec:<program> [args]`.
    #[arg(long, default_value = "ingested")]
    pub judge: String,
    #[arg(long, value_enum, default_value_t = JudgePolicy::Keep)]
    pub on_judge_error: JudgePolicy,
    /// JSON summary of per-stage removals.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// JSONL log of dropped pages.
    #[arg(long)]
    pub dropped: Option<PathBuf>,
    #[arg(long, default_value_t = 4096)]
    pub batch_size: usize,
    #[arg(long)]
    pub min_area_px2: Option<f64>,
    #[arg(long)]
    pub max_area_frac: Option<f64>,
    #[arg(long)]
    pub dup_iou: Option<f64>,
    #[arg(long)]
    pub cleanup_iou: Option<f64>,
    #[arg(long)]
    pub cleanup_containment: Option<f64>,
    #[arg(long)]
    pub hash_radius: Option<u32>,
    #[arg(long)]
    pub judge_threshold: Option<f64>,
    #[arg(long)]
    pub min_visible_frac: Option<f64>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Jsonl,
    St,
}

#[derive(Args)]
pub struct ConvertArgs {
    pub input: PathBuf,
    pub output: PathBuf,
    /// Input format; inferred from the extension when omitted.
    #[arg(long, value_enum)]
    pub from: Option<Format>,
    #[arg(long, value_enum)]
    pub to: Option<Format>,
    /// Viewport assigned to pages read from `.st` files.
    #[arg(long, default_value = "1440x900")]
    pub viewport: Viewport,
}

#[derive(Args)]
pub struct EvaluateArgs {
    pub pred: PathBuf,
    pub gt: PathBuf,
    #[arg(long, default_value = "screentag55")]
    pub labels: LabelSpaceKind,
    /// Comma-separated subset of metrics; all by default.
    #[arg(long, value_delimiter = ',')]
    pub metrics: Vec<Metric>,
    #[arg(long, default_value = "macro")]
    pub aggregation: Aggregation,
    /// Per-image CSV.
    #[arg(long)]
    pub per_image: Option<PathBuf>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct OverlayArgs {
    pub input: PathBuf,
    #[arg(long)]
    pub page_id: String,
    pub output: PathBuf,
    /// Background image href; defaults to the record's screenshot path.
    #[arg(long)]
    pub background: Option<String>,
}

#[derive(Args)]
pub struct SynthArgs {
    pub output: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 100)]
    pub count: usize,
    /// Comma-separated noise kinds, `all` or `none`.
    #[arg(long, default_value = "none")]
    pub noise: String,
    #[arg(long)]
    pub noise_rate: Option<f64>,
    #[arg(long)]
    pub viewport: Option<Viewport>,
    /// TOML holding any generator settings; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Injection log path; defaults to `<output>.injections.jsonl`.
    #[arg(long)]
    pub log: Option<PathBuf>,
}

#[derive(Args)]
pub struct PerturbArgs {
    pub input: PathBuf,
    pub output: PathBuf,
    #[arg(long)]
    pub kind: PerturbKind,
    #[arg(long)]
    pub magnitude: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args)]
pub struct VocabArgs {
    pub output: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LossFormat {
    Tsv,
    Jsonl,
}

#[derive(Args)]
pub struct LossArgs {
    pub input: PathBuf,
    /// Inferred from the extension when omitted.
    #[arg(long, value_enum)]
    pub format: Option<LossFormat>,
    #[arg(long, default_value_t = 2.0)]
    pub lambda_tag: f64,
    #[arg(long, default_value_t = 2.0)]
    pub lambda_loc: f64,
    /// Include the per-position weight vector in each output line.
    #[arg(long)]
    pub weights: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn exit_code(e: &anyhow::Error) -> u8 {
    if e.downcast_ref::<UsageError>().is_some() {
        1
    } else if e.downcast_ref::<JudgeFailure>().is_some() {
        3
    } else {
        2
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    if let Some(n) = cli.workers {
        if n == 0 {
            eprintln!("error: --workers must be at least 1");
            return ExitCode::from(1);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let manifest = cli.manifest.as_deref();
    let result = match cli.cmd {
        Cmd::Filter(a) => commands::filter(a, manifest),
        Cmd::Convert(a) => commands::convert(a, manifest),
        Cmd::Evaluate(a) => commands::evaluate(a, manifest),
        Cmd::Overlay(a) => commands::overlay(a, manifest),
        Cmd::Synth(a) => commands::synth(a, manifest),
        Cmd::Perturb(a) => commands::perturb(a, manifest),
        Cmd::Vocab(a) => commands::vocab(a, manifest),
        Cmd::Loss(a) => commands::loss(a, manifest),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
