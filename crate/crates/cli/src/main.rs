mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use radnet_core::preprocess::Window;

#[derive(Parser)]
#[command(name = "radnet", version, about = "Radar object detection pipeline")]
struct Cli {
    /// Worker threads; 1 gives the deterministic single-threaded mode.
    #[arg(long, global = true, env = "RADNET_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize background, training and validation recordings.
    Simulate(SimulateArgs),
    /// Turn recordings into an RDT1 dataset per foreground recording.
    Preprocess(PreprocessArgs),
    /// Train the network and write RDW1 checkpoints plus a JSONL log.
    Train(TrainArgs),
    /// Score a checkpoint on a dataset.
    Eval(EvalArgs),
    /// Detect the object in one foreground/background frame pair.
    Infer(InferArgs),
    /// Write a PGM spectrum and a PPM detection overlay for one frame.
    Render(RenderArgs),
    /// Print default configuration as JSON.
    PrintConfig(PrintConfigArgs),
}

#[derive(Args)]
pub struct SimulateArgs {
    /// Radar and camera configuration (JSON, see print-config sim).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Scenario (JSON, see print-config scenario).
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Top-level seed; defaults to the radar config's rng_seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Trajectory phase offset of the validation segment (rad).
    #[arg(long, default_value_t = radnet_core::pipeline::DEFAULT_VAL_PHASE)]
    pub val_phase: f64,
}

#[derive(Args)]
pub struct PreprocessOptionsArgs {
    #[arg(long, default_value = "none")]
    pub window: Window,
    /// Skip phase normalization (ablation input).
    #[arg(long)]
    pub no_phase_norm: bool,
}

#[derive(Args)]
pub struct PreprocessArgs {
    #[arg(long)]
    pub background: PathBuf,
    /// Foreground recording; repeat for several.
    #[arg(long = "recording", required = true)]
    pub recordings: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub options: PreprocessOptionsArgs,
    /// Pure-background samples per foreground sample.
    #[arg(long, default_value_t = 0.25)]
    pub bg_ratio: f64,
    #[arg(long, default_value_t = 1)]
    pub disk_radius: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub val: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0.03)]
    pub lr: f64,
    #[arg(long, default_value_t = 0.9)]
    pub momentum: f64,
    #[arg(long, default_value_t = 200)]
    pub epochs: usize,
    #[arg(long, default_value_t = 8)]
    pub batch: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Encoder widths, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = radnet_core::NetworkSpec::DEFAULT_WIDTHS)]
    pub widths: Vec<usize>,
}

#[derive(Args)]
pub struct DetectArgs {
    #[arg(long, default_value_t = 0.5)]
    pub tau: f64,
    #[arg(long, default_value_t = 1)]
    pub min_cells: usize,
}

#[derive(Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Radar and camera configuration the dataset was simulated with.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub detect: DetectArgs,
    #[arg(long, default_value_t = 0.1)]
    pub iou: f64,
}

#[derive(Args)]
pub struct InferArgs {
    #[arg(long)]
    pub recording: PathBuf,
    #[arg(long)]
    pub frame: usize,
    #[arg(long)]
    pub background: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub bg_frame: usize,
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub options: PreprocessOptionsArgs,
    #[command(flatten)]
    pub detect: DetectArgs,
}

#[derive(Args)]
pub struct RenderArgs {
    #[arg(long)]
    pub recording: PathBuf,
    #[arg(long)]
    pub frame: usize,
    /// Index background frames instead of foreground frames.
    #[arg(long)]
    pub background_frame: bool,
    #[arg(long, default_value = "none")]
    pub window: Window,
    /// JSON list of detections, as written by infer.
    #[arg(long)]
    pub detections: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct PrintConfigArgs {
    /// all | sim | scenario | train | preprocess
    #[arg(default_value = "all")]
    pub section: String,
}

fn error_kind(err: &anyhow::Error) -> &'static str {
    use radnet_core::Error as E;
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<E>() {
            return match e {
                E::Config(_) => "config",
                E::Domain(_) | E::OutOfFrame { .. } => "domain",
                E::Shape(_) => "shape",
                E::NonFinite(_) => "non_finite",
                E::AlreadyNormalized => "already_normalized",
                E::Diverged { .. } => "diverged",
                E::Format { .. } => "format",
                E::Io(_) => "io",
                E::Json(_) => "json",
            };
        }
        if cause.is::<std::io::Error>() {
            return "io";
        }
        if cause.is::<serde_json::Error>() {
            return "json";
        }
    }
    "other"
}

fn fail(kind: &str, message: &str, code: u8) -> ExitCode {
    let line = serde_json::json!({ "error": kind, "message": message });
    eprintln!("{line}");
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("").trim_start_matches("error: ");
            return fail("usage", first, 2);
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            return fail("usage", "--threads must be at least 1", 2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            return fail("other", &e.to_string(), 1);
        }
    }
    let result = match cli.command {
        Command::Simulate(a) => commands::simulate(a),
        Command::Preprocess(a) => commands::preprocess(a),
        Command::Train(a) => commands::train(a),
        Command::Eval(a) => commands::eval(a),
        Command::Infer(a) => commands::infer(a),
        Command::Render(a) => commands::render(a),
        Command::PrintConfig(a) => commands::print_config(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(error_kind(&e), &format!("{e:#}").replace('\n', " "), 1),
    }
}
