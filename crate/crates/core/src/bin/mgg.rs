use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::warn;

use mgg::config::{parse_config_with, ExperimentKind, Overrides};
use mgg::runner::{run_experiment, RunOptions};
use mgg::stats::bounds::bounds_table;
use mgg::Error;

#[derive(Parser)]
#[command(name = "mgg", version, about = "Monte Carlo experiments on mobile geometric graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Survival curve of the detection time of a target
    Detect(Common),
    /// Single-node hitting probabilities against a fixed target path
    Tau(Common),
    /// Expected number of detecting steps of a single node
    Mstat(Common),
    /// Expected volume of the discrete sausage of a Brownian path
    Sausage(Common),
    /// Percolation time of a tagged node
    Percolate(Common),
    /// Broadcast time on the torus
    Broadcast(Common),
    /// Repeated runs of the Poisson coupling construction
    Coupling(CouplingArgs),
    /// Dense-cell and escape diagnostics of the tessellation argument
    Diagnose(Common),
    /// Concentration bounds against exact tails
    Bounds(Common),
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment configuration (JSON), or a manifest from an earlier run
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on it
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory (default: out/<experiment>)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the step-0 ensemble of trial 0 and its edge list
    #[arg(long)]
    dump_ensemble: bool,
}

#[derive(Args, Clone)]
struct CouplingArgs {
    #[arg(long, visible_alias = "spec")]
    config: Option<PathBuf>,
    #[arg(long, visible_alias = "runs")]
    trials: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    dump_ensemble: bool,
}

impl From<CouplingArgs> for Common {
    fn from(a: CouplingArgs) -> Self {
        Common {
            config: a.config,
            trials: a.trials,
            seed: a.seed,
            threads: a.threads,
            out: a.out,
            dump_ensemble: a.dump_ensemble,
        }
    }
}

fn split(cmd: Command) -> (ExperimentKind, Common) {
    match cmd {
        Command::Detect(c) => (ExperimentKind::Detect, c),
        Command::Tau(c) => (ExperimentKind::Tau, c),
        Command::Mstat(c) => (ExperimentKind::Mstat, c),
        Command::Sausage(c) => (ExperimentKind::Sausage, c),
        Command::Percolate(c) => (ExperimentKind::Percolate, c),
        Command::Broadcast(c) => (ExperimentKind::Broadcast, c),
        Command::Coupling(c) => (ExperimentKind::Coupling, c.into()),
        Command::Diagnose(c) => (ExperimentKind::Diagnose, c),
        Command::Bounds(c) => (ExperimentKind::Bounds, c),
    }
}

fn print_bounds() {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{:<14} {:<28} {:>14} {:>14}  holds", "kind", "params", "bound", "exact");
    for r in bounds_table() {
        let _ = writeln!(out, "{:<14} {:<28} {:>14.6e} {:>14.6e}  {}", r.kind, r.params, r.bound, r.exact, r.holds);
    }
}

fn run(kind: ExperimentKind, args: Common) -> Result<(), Error> {
    let text = match &args.config {
        Some(path) => fs::read_to_string(path).map_err(|e| Error::Io { path: path.clone(), source: e })?,
        None if kind == ExperimentKind::Bounds => "{}".to_string(),
        None => return Err(Error::Config(vec!["--config FILE is required".into()])),
    };
    let overrides = Overrides { kind: Some(kind), trials: args.trials, seed: args.seed };
    let cfg = parse_config_with(&text, &overrides)?;
    for w in &cfg.warnings {
        warn!("{w}");
    }
    let out_dir = args.out.unwrap_or_else(|| PathBuf::from("out").join(kind.name()));
    let opts = RunOptions { out_dir: out_dir.clone(), threads: args.threads, dump_ensemble: args.dump_ensemble };
    let manifest = run_experiment(&cfg, &opts)?;
    if kind == ExperimentKind::Bounds {
        print_bounds();
    }
    eprintln!(
        "{}: {} trials in {:.2}s, wrote {} to {}",
        kind,
        cfg.trials,
        manifest.wall_clock_seconds,
        manifest.outputs.join(", "),
        out_dir.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (kind, args) = split(cli.command);
    match run(kind, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ Error::Config(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
