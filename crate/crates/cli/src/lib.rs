//! Subcommands of the `apptsched` binary.

pub mod config;
pub mod output;

use std::fmt;
use std::path::{Path, PathBuf};

use apptsched::experiments::{run_table, run_timing, ScenarioGrid, TableKind, TimingOptions};
use apptsched::{evaluate_loss, optimize, simulate_loss, Error};
use serde_json::{json, Value};

use crate::config::{Overrides, Resolved, RunConfig};
use crate::output::{cell, num, nums};

/// Failures mapped to process exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Bad input; exit code 2.
    Validation(String),
    /// Numeric failure; exit code 3.
    Numeric(String),
    /// Output could not be written; exit code 1.
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(m) | CliError::Numeric(m) | CliError::Io(m) => f.write_str(m),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        if e.is_validation() { CliError::Validation(e.to_string()) } else { CliError::Numeric(e.to_string()) }
    }
}

fn io_err(path: &Path, e: impl fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

pub fn load(path: &Path, over: Overrides) -> Result<Resolved, CliError> {
    Ok(RunConfig::load(path)?.resolve(over)?)
}

pub fn cmd_loss(cfg: &Resolved) -> Result<Value, CliError> {
    let rep = evaluate_loss(&cfg.profile, &cfg.schedule, &cfg.engine)?;
    let trace: Vec<String> = rep.family_trace.iter().map(|f| f.to_string()).collect();
    Ok(json!({
        "total": num(rep.total),
        "r": nums(&rep.r),
        "v": nums(&rep.v),
        "per_summand": nums(&rep.per_summand),
        "family_trace": trace,
    }))
}

pub fn cmd_optimize(cfg: &Resolved) -> Result<Value, CliError> {
    let res = optimize(&cfg.profile, &cfg.engine, &cfg.schedule, cfg.tol, cfg.max_iter)?;
    Ok(json!({
        "x_star": nums(res.x_star.x()),
        "loss": num(res.loss_at_optimum),
        "iterations": res.iterations,
        "converged": res.converged,
    }))
}

pub fn cmd_simulate(cfg: &Resolved, workers: Option<usize>) -> Result<Value, CliError> {
    let res = simulate_loss(&cfg.profile, &cfg.schedule, &cfg.sim, workers)?;
    Ok(json!({
        "loss_mean": num(res.loss_mean),
        "loss_stderr": num(res.loss_stderr),
        "wait_means": nums(&res.wait_means),
        "idle_means": nums(&res.idle_means),
        "seed": res.seed,
    }))
}

pub const TABLE_HEADER: [&str; 8] = ["table_id", "scenario", "scv_or_label", "y", "family", "value_kind", "value", "stderr"];

/// Write one CSV per table into `dir`; returns the paths written.
pub fn cmd_tables(grid: &ScenarioGrid, which: &[TableKind], dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let mut written = Vec::new();
    for &kind in which {
        let records = run_table(grid, kind)?;
        let path = dir.join(format!("{}.csv", kind.table_id()));
        let mut w = csv::Writer::from_path(&path).map_err(|e| io_err(&path, e))?;
        w.write_record(TABLE_HEADER).map_err(|e| io_err(&path, e))?;
        for r in &records {
            let row = [
                r.table_id.clone(),
                r.scenario.clone(),
                r.scv_or_label.clone(),
                cell(r.y),
                r.family.clone(),
                r.value_kind.name().to_string(),
                cell(r.value),
                cell(r.stderr),
            ];
            w.write_record(&row).map_err(|e| io_err(&path, e))?;
        }
        w.flush().map_err(|e| io_err(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

pub const BENCH_HEADER: [&str; 5] = ["n", "family", "op", "median_seconds", "reps"];

pub fn cmd_bench(n_values: &[usize], opts: &TimingOptions, out: &Path) -> Result<(), CliError> {
    let records = run_timing(n_values, opts)?;
    let mut w = csv::Writer::from_path(out).map_err(|e| io_err(out, e))?;
    w.write_record(BENCH_HEADER).map_err(|e| io_err(out, e))?;
    for r in &records {
        let row = [r.n.to_string(), r.family.clone(), r.op.clone(), cell(Some(r.median_seconds)), r.reps.to_string()];
        w.write_record(&row).map_err(|e| io_err(out, e))?;
    }
    w.flush().map_err(|e| io_err(out, e))
}
