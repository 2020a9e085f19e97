use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gazeprompt_core::assembly::{GazeMode, TaskKind};
use gazeprompt_core::gaze::Split;

/// Gaze-conditioned prompting for chest X-ray vision-language models:
/// ingest eye-tracking data, render gaze representations, query an
/// OpenAI-compatible endpoint and score the results.
#[derive(Debug, Parser)]
#[command(name = "gazeprompt", version)]
pub struct Cli {
    /// TOML file with [ingest], [render], [endpoint], [paths], [run] and
    /// [score] sections. Flags override it; it overrides built-in defaults.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,

    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a dataset manifest from a fixation CSV.
    Ingest(IngestArgs),
    /// Generate a synthetic dataset (manifest, fixation CSV, image table and
    /// a phantom image).
    Synth(SynthArgs),
    /// Render gaze videos, heatmaps or fixation text for every scanpath.
    Render(RenderArgs),
    /// Assemble prompts and send them to the endpoint.
    Run(RunArgs),
    /// Scale scores against a baseline model and emit the comparison table.
    Score(ScoreArgs),
    /// Print dataset statistics for a manifest.
    Stats(StatsArgs),
    /// Serve a local mock chat-completions endpoint until interrupted.
    MockServe(MockServeArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Fixation CSV (one row per fixation).
    #[arg(long, value_name = "FILE")]
    pub fixations: PathBuf,

    /// Image table: CSV with image_id,path,width,height, or a manifest JSON
    /// whose images are reused.
    #[arg(long, value_name = "FILE")]
    pub images: PathBuf,

    /// Coordinates in the CSV are fractions of width/height.
    #[arg(long)]
    pub normalized: bool,

    /// Split for rows without a split column.
    #[arg(long, value_name = "alpha|beta")]
    pub default_split: Option<Split>,

    /// Where to write the manifest [default: <out>/manifest.json].
    #[arg(long, value_name = "FILE")]
    pub manifest_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    #[arg(long = "images", default_value_t = 10)]
    pub n_images: usize,

    #[arg(long = "scanpaths", default_value_t = 10)]
    pub n_scanpaths: usize,

    #[arg(long, default_value = "alpha", value_name = "alpha|beta")]
    pub split: Split,

    #[arg(long, default_value_t = 512)]
    pub width: u32,

    #[arg(long, default_value_t = 512)]
    pub height: u32,

    #[arg(long, default_value_t = 3)]
    pub min_fixations: usize,

    #[arg(long, default_value_t = 12)]
    pub max_fixations: usize,

    /// Shortest fixation in seconds.
    #[arg(long, default_value_t = 0.05)]
    pub min_duration: f64,

    /// Longest fixation in seconds.
    #[arg(long, default_value_t = 1.5)]
    pub max_duration: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RenderMode {
    Video,
    Heatmap,
    Text,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[arg(long, value_enum)]
    pub mode: RenderMode,

    #[arg(long, value_name = "FILE")]
    pub manifest: Option<PathBuf>,

    #[arg(long)]
    pub fps: Option<u32>,

    /// Frames sampled per gaze video.
    #[arg(long)]
    pub k: Option<usize>,

    #[arg(long, value_name = "PX")]
    pub radius: Option<u32>,

    /// Render threads (0 = one per core).
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// findings_generation, impression_generation or diagnosis; repeat for
    /// several tasks.
    #[arg(long = "task", value_name = "TASK")]
    pub tasks: Vec<TaskKind>,

    /// none, heatmap, fixation_text or video.
    #[arg(long, value_name = "MODE")]
    pub gaze_mode: Option<GazeMode>,

    /// TOML file with the endpoint settings (base_url, model_name,
    /// api_key_env, timeout_s, max_retries, temperature,
    /// temperature_fallback, max_parallel, backoff_ms).
    #[arg(long, value_name = "FILE")]
    pub endpoint_config: Option<PathBuf>,

    #[arg(long, value_name = "URL")]
    pub base_url: Option<String>,

    #[arg(long)]
    pub model: Option<String>,

    #[arg(long)]
    pub max_parallel: Option<usize>,

    #[arg(long)]
    pub max_retries: Option<u32>,

    /// Keep existing records and only send requests without an ok record.
    #[arg(long)]
    pub resume: bool,

    #[arg(long, value_name = "FILE")]
    pub manifest: Option<PathBuf>,

    /// Instruction templates (key=value blocks).
    #[arg(long, value_name = "FILE")]
    pub templates: Option<PathBuf>,

    /// JSON list of exemplar reports.
    #[arg(long, value_name = "FILE")]
    pub exemplars: Option<PathBuf>,

    /// JSONL output [default: <out>/records.jsonl].
    #[arg(long, value_name = "FILE")]
    pub records: Option<PathBuf>,

    /// Treat a wrong exemplar count as an error.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// CSV with model_id,method_id,metric_id,task,split,value.
    #[arg(long, value_name = "FILE")]
    pub scores_csv: PathBuf,

    /// Model whose scores define 100.
    #[arg(long, value_name = "MODEL")]
    pub baseline: Option<String>,

    /// Method of the baseline model to scale against, when it has several.
    #[arg(long, value_name = "METHOD")]
    pub baseline_method: Option<String>,

    /// Method that deltas are measured against.
    #[arg(long, value_name = "METHOD")]
    pub base_method: Option<String>,

    /// Values are already scaled; skip rescaling.
    #[arg(long, conflicts_with_all = ["baseline", "baseline_method"])]
    pub prescaled: bool,

    /// Model never marked best (repeatable).
    #[arg(long = "exclude-best", value_name = "MODEL")]
    pub exclude_best: Vec<String>,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long, value_name = "FILE")]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MockServeArgs {
    #[arg(long, default_value_t = 8000)]
    pub port: u16,

    #[arg(long, default_value = "OK")]
    pub reply: String,

    /// Refuse requests whose temperature is below this value.
    #[arg(long, value_name = "T")]
    pub min_temperature: Option<f64>,

    /// Fail the first N requests with 503.
    #[arg(long, default_value_t = 0)]
    pub fail_first: u32,
}
