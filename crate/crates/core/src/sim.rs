//! Monte Carlo estimate of the schedule loss by the Lindley recursion.
//!
//! Run `r` draws from its own ChaCha8 stream (`seed`, stream `r`), and runs
//! are grouped into fixed-size shards that are reduced in shard order. The
//! result therefore depends on `(seed, runs)` only, not on the worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::SojournFit;
use crate::engine::{Schedule, ServiceProfile};
use crate::error::{Error, Result};
use crate::fit::{fit, Channel};

/// Runs per shard.
pub const SHARD_RUNS: u64 = 1024;

/// Default number of runs.
pub const DEFAULT_RUNS: u64 = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub runs: u64,
    pub seed: u64,
    /// Service times are drawn from the two-moment fit in this family.
    pub service_family: Channel,
    pub omega: f64,
}

impl SimConfig {
    pub fn new(runs: u64, seed: u64, service_family: Channel, omega: f64) -> Result<Self> {
        if runs == 0 {
            return Err(Error::invalid("sim.runs", "must be at least 1"));
        }
        if !(0.0..=1.0).contains(&omega) {
            return Err(Error::invalid("omega", format!("must lie in [0, 1], got {omega}")));
        }
        Ok(Self { runs, seed, service_family, omega })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub loss_mean: f64,
    pub loss_stderr: f64,
    /// `E W_j`, `j = 1..n`.
    pub wait_means: Vec<f64>,
    /// `E I_j`, `j = 1..n`.
    pub idle_means: Vec<f64>,
    pub runs: u64,
    pub seed: u64,
    /// Largest per-run difference between the idle/wait and sojourn accountings.
    pub max_accounting_gap: f64,
}

#[derive(Clone)]
struct Accum {
    count: u64,
    mean: f64,
    m2: f64,
    wait: Vec<f64>,
    idle: Vec<f64>,
    gap: f64,
}

impl Accum {
    fn new(n: usize) -> Self {
        Self { count: 0, mean: 0.0, m2: 0.0, wait: vec![0.0; n], idle: vec![0.0; n], gap: 0.0 }
    }

    fn push(&mut self, loss: f64) {
        self.count += 1;
        let d = loss - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (loss - self.mean);
    }

    fn merge(&mut self, other: &Accum) {
        if other.count == 0 {
            return;
        }
        let (na, nb) = (self.count as f64, other.count as f64);
        let n = na + nb;
        let d = other.mean - self.mean;
        self.mean += d * nb / n;
        self.m2 += other.m2 + d * d * na * nb / n;
        self.count += other.count;
        for (a, b) in self.wait.iter_mut().zip(&other.wait) {
            *a += b;
        }
        for (a, b) in self.idle.iter_mut().zip(&other.idle) {
            *a += b;
        }
        self.gap = self.gap.max(other.gap);
    }
}

fn run_shard(services: &[SojournFit], x: &[f64], omega: f64, base: &ChaCha8Rng, runs: std::ops::Range<u64>) -> Accum {
    let n = services.len();
    let mut acc = Accum::new(n);
    for run in runs {
        let mut rng = base.clone();
        rng.set_stream(run);
        let mut w = 0.0;
        let (mut sum_w, mut sum_i, mut sojourn_form) = (0.0, 0.0, 0.0);
        for j in 0..n - 1 {
            let b = services[j].sample(&mut rng);
            let r = w + b;
            let next_w = (r - x[j]).max(0.0);
            let next_i = (x[j] - r).max(0.0);
            sum_w += next_w;
            sum_i += next_i;
            acc.wait[j + 1] += next_w;
            acc.idle[j + 1] += next_i;
            sojourn_form += (r - x[j]).max(0.0) + omega * (x[j] - r);
            w = next_w;
        }
        let loss = omega * sum_i + (1.0 - omega) * sum_w;
        acc.gap = acc.gap.max((loss - sojourn_form).abs());
        acc.push(loss);
    }
    acc
}

/// Simulated loss, per-client mean waits and idles.
///
/// `workers` sizes a dedicated thread pool; `None` uses the global pool.
pub fn simulate_loss(profile: &ServiceProfile, sched: &Schedule, cfg: &SimConfig, workers: Option<usize>) -> Result<SimResult> {
    let n = profile.n();
    if sched.len() + 1 != n {
        return Err(Error::invalid("schedule", format!("expected {} interarrival times, got {}", n - 1, sched.len())));
    }
    if cfg.runs == 0 {
        return Err(Error::invalid("sim.runs", "must be at least 1"));
    }
    let services = (0..n)
        .map(|i| fit(profile.moments(i)?, cfg.service_family))
        .collect::<Result<Vec<_>>>()?;
    let base = ChaCha8Rng::seed_from_u64(cfg.seed);
    let shards = cfg.runs.div_ceil(SHARD_RUNS);
    let work = || {
        (0..shards)
            .into_par_iter()
            .map(|s| {
                let lo = s * SHARD_RUNS;
                let hi = (lo + SHARD_RUNS).min(cfg.runs);
                run_shard(&services, sched.x(), cfg.omega, &base, lo..hi)
            })
            .collect::<Vec<_>>()
    };
    let parts = match workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build()
            .map_err(|e| Error::invalid("workers", e.to_string()))?
            .install(work),
        None => work(),
    };
    let mut total = Accum::new(n);
    for p in &parts {
        total.merge(p);
    }
    let runs = cfg.runs as f64;
    let stderr = if cfg.runs > 1 { (total.m2 / (runs - 1.0) / runs).sqrt() } else { 0.0 };
    Ok(SimResult {
        loss_mean: total.mean,
        loss_stderr: stderr,
        wait_means: total.wait.iter().map(|s| s / runs).collect(),
        idle_means: total.idle.iter().map(|s| s / runs).collect(),
        runs: cfg.runs,
        seed: cfg.seed,
        max_accounting_gap: total.gap,
    })
}
