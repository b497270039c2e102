use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use webest_cli::commands::{
    parse_alphabet, parse_method, parse_weight_spec, run_design, run_metrics, run_sweep,
    DesignArgs,
};

/// Design and evaluate sets of constant-modulus radar sequences with small
/// weighted auto- and cross-correlation sidelobes.
#[derive(Parser)]
#[command(name = "webest", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize a sequence set and write phases.csv, metrics.json, trace.csv.
    Design(DesignCli),
    /// Evaluate metrics of an existing phases.csv (no optimization).
    Metrics(MetricsCli),
    /// Run a seeded Monte Carlo grid and write summary.csv.
    Sweep(SweepCli),
}

#[derive(Args)]
struct DesignCli {
    /// Number of transmitters M.
    #[arg(long, short = 'm')]
    transmitters: usize,
    /// Sequence length N.
    #[arg(long, short = 'n')]
    length: usize,
    /// Alphabet size L, or 'inf' for continuous phases.
    #[arg(long, default_value = "inf")]
    alphabet: String,
    /// Block update rule: 'entry' or 'vector'.
    #[arg(long, default_value = "entry")]
    method: String,
    /// Comma-separated monotone p stages, e.g. 2 or 2,4,8.
    #[arg(long, value_delimiter = ',', default_value = "2")]
    p_schedule: Vec<f64>,
    /// Smooth family for stages with p <= 1: 1 (power), 2 (log), 3 (exp).
    #[arg(long, default_value_t = 1)]
    smooth_h: u8,
    /// Guard width of the smooth low-p approximations.
    #[arg(long, default_value_t = 0.05)]
    epsilon: f64,
    /// Frobenius stopping threshold on the sweep-to-sweep change.
    #[arg(long, default_value_t = 1e-9)]
    zeta: f64,
    /// Iteration budget per stage.
    #[arg(long, default_value_t = 100_000)]
    max_iters: usize,
    /// Lag weights: 'ones', 'band:K', or 'file:PATH'.
    #[arg(long, default_value = "ones")]
    weights: String,
    /// RNG seed for the initial set.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Trace recording stride.
    #[arg(long, default_value_t = 1)]
    record_every: usize,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct MetricsCli {
    /// Input phases.csv.
    #[arg(long)]
    input: PathBuf,
    /// Lag weights: 'ones', 'band:K', or 'file:PATH'.
    #[arg(long, default_value = "ones")]
    weights: String,
    /// Optional metrics.json destination (stdout always gets the report).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepCli {
    /// JSON grid specification.
    #[arg(long)]
    spec: PathBuf,
    /// Seeded trials per grid cell.
    #[arg(long, default_value_t = 1)]
    trials: usize,
    /// Output directory for summary.csv.
    #[arg(long)]
    out: PathBuf,
}

fn run() -> Result<()> {
    match Cli::parse().command {
        Command::Design(a) => {
            let args = DesignArgs {
                transmitters: a.transmitters,
                length: a.length,
                alphabet: parse_alphabet(&a.alphabet)?,
                method: parse_method(&a.method)?,
                p_schedule: a.p_schedule,
                smooth_h: a.smooth_h,
                epsilon: a.epsilon,
                zeta: a.zeta,
                max_iters: a.max_iters,
                weights: parse_weight_spec(&a.weights)?,
                seed: a.seed,
                record_every: a.record_every,
                out: a.out,
            };
            let report = run_design(&args)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::Metrics(a) => {
            let weights = parse_weight_spec(&a.weights)?;
            let report = run_metrics(&a.input, &weights, a.out.as_deref())?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::Sweep(a) => {
            let path = run_sweep(&a.spec, a.trials, &a.out)?;
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
