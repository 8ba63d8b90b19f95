mod commands;
mod config;
mod error;
mod manifest;
mod parse;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::error::{CliError, Result};
use crate::manifest::FileDigest;

#[derive(Debug, Parser)]
#[command(name = "ccfrontier", version, about = "Delay/utilization bounds and rate-control laws for time-varying links")]
struct Cli {
    /// TOML or JSON file of flag values; command-line flags win.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Worker threads for parallel work (results do not depend on it).
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,

    #[command(subcommand)]
    cmd: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Window a Mahimahi delivery trace into a capacity CSV.
    #[command(args_override_self = true)]
    Ingest(IngestArgs),
    /// Generate a synthetic capacity trace from a ratio law or SMF model.
    #[command(args_override_self = true)]
    Synth(SynthArgs),
    /// Compute a lower-bound curve on (queuing delay, underutilization).
    #[command(args_override_self = true)]
    Bound(BoundArgs),
    /// Solve for the optimal law constant.
    #[command(args_override_self = true)]
    Solve(SolveArgs),
    /// Run one law on a capacity trace.
    #[command(args_override_self = true)]
    Simulate(SimulateArgs),
    /// Run a family of laws on one trace.
    #[command(args_override_self = true)]
    Sweep(SweepArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Ingest(_) => "ingest",
            Command::Synth(_) => "synth",
            Command::Bound(_) => "bound",
            Command::Solve(_) => "solve",
            Command::Simulate(_) => "simulate",
            Command::Sweep(_) => "sweep",
        }
    }
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Mahimahi trace: one delivery timestamp (ms) per line.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Round duration in seconds.
    #[arg(long = "T", default_value_t = 0.1)]
    pub t: f64,
    #[arg(long, default_value_t = 1500)]
    pub mtu: u32,
    /// Capacity floor; defaults to one MTU per round.
    #[arg(long)]
    pub floor_bps: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// `loguniform:lo,hi`, `uniform:lo,hi`, `point:v`, `atoms:<json>` or `atoms:@file`.
    #[arg(long, allow_hyphen_values = true)]
    pub dist: Option<String>,
    /// SMF model JSON, used instead of --dist.
    #[arg(long)]
    pub smf_model: Option<PathBuf>,
    #[arg(long, default_value_t = 1e6)]
    pub mu0: f64,
    #[arg(long)]
    pub rounds: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long = "T", default_value_t = 0.1)]
    pub t: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Where the link model comes from. Exactly one source is used.
#[derive(Debug, Args)]
pub struct ModelSource {
    /// Capacity CSV to fit from.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Ratio law given directly (same syntax as `synth --dist`).
    #[arg(long, allow_hyphen_values = true)]
    pub dist: Option<String>,
    /// SMF model JSON.
    #[arg(long)]
    pub smf_model: Option<PathBuf>,
    /// SMF bins when fitting from a trace.
    #[arg(long, default_value_t = 8)]
    pub bins: usize,
    #[arg(long, default_value_t = 50)]
    pub min_samples: usize,
    /// Round duration; taken from the trace when fitting from one.
    #[arg(long = "T")]
    pub t: Option<f64>,
}

#[derive(Debug, Args)]
pub struct BoundArgs {
    #[arg(long, default_value = "mif", value_parser = ["mif", "smf", "lost", "pmif"])]
    pub model: String,
    #[command(flatten)]
    pub src: ModelSource,
    #[arg(long, default_value_t = 512)]
    pub points: usize,
    /// Prediction-error law for `--model pmif`.
    #[arg(long, allow_hyphen_values = true)]
    pub pred_error: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long, default_value = "mif", value_parser = ["mif", "pmif", "smf-approx"])]
    pub law: String,
    #[command(flatten)]
    pub src: ModelSource,
    /// Weight on underutilization.
    #[arg(long)]
    pub w: Option<f64>,
    #[arg(long, default_value_t = 0.9)]
    pub gamma: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub pred_error: Option<String>,
    /// Prediction drift law; fitted from synthetic predictions when absent.
    #[arg(long, allow_hyphen_values = true)]
    pub pred_drift: Option<String>,
    /// Seed for the synthetic predictions used to fit the drift.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub q_max: Option<f64>,
    #[arg(long)]
    pub n_q: Option<usize>,
    #[arg(long)]
    pub rho_min: Option<f64>,
    #[arg(long)]
    pub rho_max: Option<f64>,
    #[arg(long)]
    pub n_rho: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long, value_parser = ["clamp", "linear"])]
    pub tail: Option<String>,
    /// Also write `q_seconds,v,policy_rho` here.
    #[arg(long)]
    pub dump_v: Option<PathBuf>,
    #[arg(long)]
    pub dump_w: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Law selection shared by `simulate` and `sweep`. In `sweep` every
/// numeric flag takes a list.
#[derive(Debug, Args)]
pub struct LawArgs {
    #[arg(long, value_parser = ["optimal-mif", "optimal-pmif", "optimal-smf", "xcp", "abc"])]
    pub law: Option<String>,
    #[arg(long = "c", alias = "C")]
    pub c: Option<String>,
    #[arg(long = "cp", alias = "Cp")]
    pub cp: Option<String>,
    /// `state:C` pairs, e.g. `0:0.8,1:1.1`.
    #[arg(long = "c-map", alias = "C-map")]
    pub c_map: Option<String>,
    #[arg(long)]
    pub alpha: Option<String>,
    #[arg(long)]
    pub beta: Option<String>,
    #[arg(long)]
    pub eta: Option<String>,
    /// Law as JSON, e.g. `{"law":"abc","eta":1,"beta":2}`.
    #[arg(long)]
    pub law_json: Option<String>,
}

#[derive(Debug, Args)]
pub struct RunInputs {
    /// Capacity CSV.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Prediction-error law for optimal-pmif.
    #[arg(long, allow_hyphen_values = true)]
    pub pred_error: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// SMF model JSON giving the state bins for optimal-smf.
    #[arg(long)]
    pub smf_model: Option<PathBuf>,
    #[arg(long, default_value_t = 8)]
    pub bins: usize,
    #[arg(long, default_value_t = 50)]
    pub min_samples: usize,
    /// Initial backlog in bits.
    #[arg(long, default_value_t = 0.0)]
    pub q0: f64,
    #[arg(long)]
    pub xcp_initial_rate: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub law: LawArgs,
    #[command(flatten)]
    pub inputs: RunInputs,
    /// Per-round CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Summary JSON; defaults to `<out>.summary.json`.
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub law: LawArgs,
    /// JSON array of law configs, used instead of the law flags.
    #[arg(long)]
    pub laws_file: Option<PathBuf>,
    #[command(flatten)]
    pub inputs: RunInputs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn main() {
    let argv: Vec<String> = std::env::args().collect();
    if let Err(e) = run(&argv) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

fn run(argv: &[String]) -> Result<()> {
    let first = Cli::try_parse_from(argv).unwrap_or_else(|e| e.exit());
    let (cli, config) = match &first.config {
        None => (first, None),
        Some(path) => {
            let bytes = std::fs::read(path).map_err(|source| CliError::Io {
                path: path.clone(),
                source,
            })?;
            let text = String::from_utf8_lossy(&bytes);
            let name = first.cmd.name();
            let extra = config::flags_for(path, &text, name)?;
            let at = argv.iter().position(|a| a == name).expect("subcommand present");
            let mut merged = argv[..=at].to_vec();
            merged.extend(extra);
            merged.extend_from_slice(&argv[at + 1..]);
            let cli = Cli::try_parse_from(&merged).map_err(|e| CliError::Config {
                path: path.clone(),
                msg: e.to_string().trim().to_string(),
            })?;
            (cli, Some(FileDigest::of(path, &bytes)))
        }
    };

    if let Some(n) = cli.jobs {
        if n == 0 {
            return Err(error::usage("--jobs must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| error::usage(format!("cannot start {n} worker threads: {e}")))?;
    }

    let m = manifest::Manifest::new(argv.to_vec(), config);
    match &cli.cmd {
        Command::Ingest(a) => commands::ingest(a, m),
        Command::Synth(a) => commands::synth(a, m),
        Command::Bound(a) => commands::bound(a, m),
        Command::Solve(a) => commands::solve(a, m),
        Command::Simulate(a) => commands::simulate(a, m),
        Command::Sweep(a) => commands::sweep(a, m),
    }
}
