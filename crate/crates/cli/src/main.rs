use std::path::{Path, PathBuf};
use std::process::ExitCode;

use apptsched::experiments::{ScenarioGrid, TableKind, TimingOptions};
use apptsched::Channel;
use apptsched_cli::config::Overrides;
use apptsched_cli::{cmd_bench, cmd_loss, cmd_optimize, cmd_simulate, cmd_tables, load, CliError};
use clap::{Args, Parser, Subcommand};

/// Approximate evaluation, optimization and simulation of appointment schedules.
#[derive(Parser)]
#[command(name = "apptsched", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Worker threads for simulation and table grids (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Simulation seed; overrides the config file.
    #[arg(long, global = true, env = "APPTSCHED_SEED")]
    seed: Option<u64>,
    /// Output file (loss/optimize/simulate/bench) or directory (tables).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Approximation family, or service-time class for `simulate`.
    #[arg(long, value_parser = parse_family)]
    family: Option<Channel>,
}

#[derive(Subcommand)]
enum Command {
    /// Approximate loss of the configured schedule.
    Loss(RunArgs),
    /// Optimize the schedule, starting from the configured one.
    Optimize(RunArgs),
    /// Monte Carlo estimate of the loss.
    Simulate(RunArgs),
    /// Regenerate the experiment tables as CSV.
    Tables {
        /// equidistant, bailey_welch, optimized, hetero_eq, hetero_opt, or all.
        #[arg(long, default_value = "all")]
        which: String,
        /// Simulation runs per cell.
        #[arg(long)]
        runs: Option<u64>,
    },
    /// Timing medians as CSV.
    Bench {
        /// Client counts, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "5,10,15,20,25,30,35,40")]
        n: Vec<usize>,
        #[arg(long, default_value_t = 20)]
        reps: usize,
        /// Runs for the simulation timing; 0 skips it.
        #[arg(long, default_value_t = 10_000)]
        sim_runs: u64,
    },
}

fn parse_family(s: &str) -> Result<Channel, String> {
    s.parse().map_err(|e: apptsched::Error| e.to_string())
}

fn emit(value: &serde_json::Value, out: Option<&Path>) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))? + "\n";
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::Io(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(w) = cli.workers {
        if w == 0 {
            return Err(CliError::Validation("invalid workers: must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global()
            .map_err(|e| CliError::Validation(format!("invalid workers: {e}")))?;
    }
    let out = cli.out.as_deref();
    match cli.command {
        Command::Loss(a) => emit(&cmd_loss(&load(&a.config, Overrides { family: a.family, seed: cli.seed })?)?, out),
        Command::Optimize(a) => emit(&cmd_optimize(&load(&a.config, Overrides { family: a.family, seed: cli.seed })?)?, out),
        Command::Simulate(a) => {
            let cfg = load(&a.config, Overrides { family: a.family, seed: cli.seed })?;
            emit(&cmd_simulate(&cfg, cli.workers)?, out)
        }
        Command::Tables { which, runs } => {
            let kinds = if which == "all" {
                TableKind::ALL.to_vec()
            } else {
                which.split(',').map(|s| s.trim().parse::<TableKind>()).collect::<Result<Vec<_>, _>>()?
            };
            let mut grid = ScenarioGrid::paper();
            if let Some(r) = runs {
                grid.runs = r;
            }
            if let Some(s) = cli.seed {
                grid.seed = s;
            }
            let dir = out.unwrap_or(Path::new("tables"));
            for p in cmd_tables(&grid, &kinds, dir)? {
                eprintln!("wrote {}", p.display());
            }
            Ok(())
        }
        Command::Bench { n, reps, sim_runs } => {
            if reps < 1 {
                return Err(CliError::Validation("invalid reps: must be at least 1".into()));
            }
            let opts = TimingOptions { reps, sim_runs, ..TimingOptions::default() };
            cmd_bench(&n, &opts, out.unwrap_or(Path::new("bench.csv")))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
