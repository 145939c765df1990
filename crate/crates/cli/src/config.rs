//! JSON run configuration.

use std::path::Path;

use apptsched::opt::{default_max_iter, DEFAULT_TOL};
use apptsched::sim::DEFAULT_RUNS;
use apptsched::{materialize, Channel, EngineConfig, Error, Result, Schedule, ScheduleSpec, ServiceProfile, SimConfig};
use serde::Deserialize;

pub const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    pub runs: Option<u64>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSection {
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
}

/// The file format. Scalar `beta` / `sigma2` broadcast to all `n` clients.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub n: usize,
    #[serde(default = "default_omega")]
    pub omega: f64,
    pub beta: Option<f64>,
    pub betas: Option<Vec<f64>>,
    pub sigma2: Option<f64>,
    pub sigma2s: Option<Vec<f64>>,
    pub schedule: Option<ScheduleSpec>,
    pub family: Option<Channel>,
    #[serde(default)]
    pub sim: SimSection,
    #[serde(default)]
    pub optimizer: OptimizerSection,
}

fn default_omega() -> f64 {
    0.5
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub family: Option<Channel>,
    pub seed: Option<u64>,
}

/// A validated configuration.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub profile: ServiceProfile,
    pub schedule: Schedule,
    pub engine: EngineConfig,
    pub sim: SimConfig,
    pub tol: f64,
    pub max_iter: usize,
}

fn broadcast(n: usize, scalar: Option<f64>, vector: Option<Vec<f64>>, scalar_name: &str, vector_name: &str) -> Result<Vec<f64>> {
    match (scalar, vector) {
        (Some(_), Some(_)) => Err(Error::invalid(vector_name, format!("give either {scalar_name} or {vector_name}, not both"))),
        (Some(s), None) => Ok(vec![s; n]),
        (None, Some(v)) if v.len() == n => Ok(v),
        (None, Some(v)) => Err(Error::invalid(vector_name, format!("length {} does not match n = {n}", v.len()))),
        (None, None) => Err(Error::invalid(scalar_name, format!("missing; give {scalar_name} or {vector_name}"))),
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::invalid("config", e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::invalid("config", format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn resolve(self, over: Overrides) -> Result<Resolved> {
        if self.n == 0 {
            return Err(Error::invalid("n", "need at least one client"));
        }
        let betas = broadcast(self.n, self.beta, self.betas, "beta", "betas")?;
        let sigma2s = broadcast(self.n, self.sigma2, self.sigma2s, "sigma2", "sigma2s")?;
        let profile = ServiceProfile::new(betas, sigma2s)?;
        let spec = self.schedule.unwrap_or(ScheduleSpec::Equidistant { y: 1.5 * profile.mean_beta() });
        let schedule = materialize(&spec, self.n)?;
        let family = over.family.or(self.family).unwrap_or(Channel::Ph);
        let engine = EngineConfig::new(self.omega, family)?;
        let seed = over.seed.or(self.sim.seed).unwrap_or(DEFAULT_SEED);
        let sim = SimConfig::new(self.sim.runs.unwrap_or(DEFAULT_RUNS), seed, family, self.omega)?;
        let tol = self.optimizer.tol.unwrap_or(DEFAULT_TOL);
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(Error::invalid("optimizer.tol", format!("must be positive, got {tol}")));
        }
        let max_iter = self.optimizer.max_iter.unwrap_or_else(|| default_max_iter(self.n));
        Ok(Resolved { profile, schedule, engine, sim, tol, max_iter })
    }
}
