//! Scenario grids and table regeneration for the published experiments.
//!
//! The published grid has 40 interarrival times, so 41 clients; the last
//! client's service time never enters the loss.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{loss_total, EngineConfig, Schedule, ServiceProfile};
use crate::error::{Error, Result};
use crate::fit::Channel;
use crate::opt::{default_max_iter, optimality_gap_min, optimize, relative_error, OptResult, DEFAULT_TOL};
use crate::schedule::{materialize, ScheduleSpec};
use crate::sim::{simulate_loss, SimConfig, SimResult, DEFAULT_RUNS};

/// Clients in the published experiments (40 interarrival times).
pub const PAPER_CLIENTS: usize = 41;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioGrid {
    /// Number of clients.
    pub n: usize,
    pub omega: f64,
    pub beta: f64,
    pub scv_values: Vec<f64>,
    /// Equidistant spacings.
    pub spacings: Vec<f64>,
    /// Spacing of the Bailey-Welch hybrid.
    pub bw_spacing: f64,
    /// Spacing of the heterogeneous equidistant table.
    pub hetero_spacing: f64,
    /// The two batch scv levels of the heterogeneous scenarios.
    pub hetero_scv: (f64, f64),
    pub runs: u64,
    pub seed: u64,
}

impl ScenarioGrid {
    pub fn paper() -> Self {
        Self {
            n: PAPER_CLIENTS,
            omega: 0.5,
            beta: 1.0,
            scv_values: vec![0.4, 0.7, 1.0, 1.3],
            spacings: vec![1.2, 1.5, 1.8],
            bw_spacing: 1.2,
            hetero_spacing: 1.5,
            hetero_scv: (0.7, 1.3),
            runs: DEFAULT_RUNS,
            seed: 20_240_601,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::invalid("grid.n", "need at least two clients"));
        }
        if self.scv_values.is_empty() || self.spacings.is_empty() {
            return Err(Error::invalid("grid", "scv and spacing sets must be nonempty"));
        }
        if self.runs == 0 {
            return Err(Error::invalid("grid.runs", "must be at least 1"));
        }
        Ok(())
    }

    fn engine(&self, family: Channel) -> Result<EngineConfig> {
        EngineConfig::new(self.omega, family)
    }

    fn sim(&self, profile: &ServiceProfile, sched: &Schedule, service: Channel) -> Result<SimResult> {
        simulate_loss(profile, sched, &SimConfig::new(self.runs, self.seed, service, self.omega)?, None)
    }

    fn homogeneous(&self, scv: f64) -> Result<ServiceProfile> {
        ServiceProfile::homogeneous(self.n, self.beta, scv * self.beta * self.beta)
    }
}

/// One of the six heterogeneous scenarios: eight batches of five clients,
/// each batch at the low (1) or high (2) scv level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeteroScenario {
    pub label: char,
    pub pattern: [u8; 8],
}

pub const BATCH_SIZE: usize = 5;

pub const HETERO_SCENARIOS: [HeteroScenario; 6] = [
    HeteroScenario { label: 'A', pattern: [1, 1, 1, 1, 2, 2, 2, 2] },
    HeteroScenario { label: 'B', pattern: [2, 2, 2, 2, 1, 1, 1, 1] },
    HeteroScenario { label: 'C', pattern: [1, 1, 2, 2, 1, 1, 2, 2] },
    HeteroScenario { label: 'D', pattern: [2, 2, 1, 1, 2, 2, 1, 1] },
    HeteroScenario { label: 'E', pattern: [1, 2, 1, 2, 1, 2, 1, 2] },
    HeteroScenario { label: 'F', pattern: [2, 1, 2, 1, 2, 1, 2, 1] },
];

impl HeteroScenario {
    /// Per-client scv; clients past the last batch repeat its level.
    pub fn scvs(&self, n: usize, levels: (f64, f64)) -> Vec<f64> {
        (0..n)
            .map(|j| {
                let batch = (j / BATCH_SIZE).min(self.pattern.len() - 1);
                if self.pattern[batch] == 1 { levels.0 } else { levels.1 }
            })
            .collect()
    }

    pub fn profile(&self, n: usize, beta: f64, levels: (f64, f64)) -> Result<ServiceProfile> {
        let sigma2s = self.scvs(n, levels).into_iter().map(|s| s * beta * beta).collect();
        ServiceProfile::new(vec![beta; n], sigma2s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TableKind {
    Equidistant,
    BaileyWelch,
    Optimized,
    HeteroEq,
    HeteroOpt,
}

impl TableKind {
    pub const ALL: [TableKind; 5] =
        [TableKind::Equidistant, TableKind::BaileyWelch, TableKind::Optimized, TableKind::HeteroEq, TableKind::HeteroOpt];

    pub fn table_id(&self) -> &'static str {
        match self {
            TableKind::Equidistant => "table1",
            TableKind::BaileyWelch => "table2",
            TableKind::Optimized => "table3",
            TableKind::HeteroEq => "table4",
            TableKind::HeteroOpt => "table5",
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            TableKind::Equidistant => "equidistant",
            TableKind::BaileyWelch => "bailey_welch",
            TableKind::Optimized => "optimized",
            TableKind::HeteroEq => "hetero_eq",
            TableKind::HeteroOpt => "hetero_opt",
        }
    }
}

impl std::str::FromStr for TableKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TableKind::ALL
            .into_iter()
            .find(|k| k.name() == s || k.table_id() == s)
            .ok_or_else(|| Error::invalid("which", format!("unknown table {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueKind {
    /// Fast approximation `L^(R)`; `family` names the fit channel.
    Approx,
    /// Monte Carlo estimate; `family` names the service-time class.
    Sim,
    /// A quantity that needs the exact optimum, which is not computed.
    ExactNa,
    /// Percentage error or gap; `family` is `R:C` (approximation vs. class)
    /// or `opt:C` for the simulated optimality gap.
    Delta,
}

impl ValueKind {
    pub fn name(&self) -> &'static str {
        match self {
            ValueKind::Approx => "approx",
            ValueKind::Sim => "sim",
            ValueKind::ExactNa => "exact_na",
            ValueKind::Delta => "delta",
        }
    }
}

/// One table cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub table_id: String,
    /// Schedule the value was computed on: `eq`, `bw`, `opt_ph`, `opt_w`, `opt_ln`.
    pub scenario: String,
    pub scv_or_label: String,
    pub y: Option<f64>,
    pub family: String,
    pub value_kind: ValueKind,
    pub value: Option<f64>,
    pub stderr: Option<f64>,
}

struct Cell<'a> {
    table: TableKind,
    label: String,
    y: Option<f64>,
    out: &'a mut Vec<Record>,
}

impl Cell<'_> {
    fn push(&mut self, scenario: &str, family: &str, kind: ValueKind, value: Option<f64>, stderr: Option<f64>) {
        self.out.push(Record {
            table_id: self.table.table_id().to_string(),
            scenario: scenario.to_string(),
            scv_or_label: self.label.clone(),
            y: self.y,
            family: family.to_string(),
            value_kind: kind,
            value,
            stderr,
        });
    }
    fn approx(&mut self, scenario: &str, family: Channel, v: f64) {
        self.push(scenario, family.name(), ValueKind::Approx, Some(v), None);
    }
    fn sim(&mut self, scenario: &str, family: Channel, s: &SimResult) {
        self.push(scenario, family.name(), ValueKind::Sim, Some(s.loss_mean), Some(s.loss_stderr));
    }
    fn delta(&mut self, scenario: &str, family: &str, v: f64) {
        self.push(scenario, family, ValueKind::Delta, Some(v), None);
    }
}

fn scv_label(scv: f64) -> String {
    format!("{scv}")
}

/// Approximations, simulations and relative errors on a fixed schedule.
fn fixed_schedule_cell(grid: &ScenarioGrid, profile: &ServiceProfile, sched: &Schedule, scenario: &str, cell: &mut Cell) -> Result<()> {
    let mut approx = [0.0; 3];
    for (slot, family) in approx.iter_mut().zip(Channel::ALL) {
        *slot = loss_total(profile, sched, &grid.engine(family)?)?;
        cell.approx(scenario, family, *slot);
    }
    for (i, class) in Channel::ALL.into_iter().enumerate() {
        let s = grid.sim(profile, sched, class)?;
        cell.sim(scenario, class, &s);
        // the phase-type simulation stands in for the exact value
        if class != Channel::Ph {
            cell.delta(scenario, &format!("{}:{}", class.name(), class.name()), relative_error(approx[i], s.loss_mean)?);
        }
        cell.delta(scenario, &format!("ph:{}", class.name()), relative_error(approx[0], s.loss_mean)?);
    }
    Ok(())
}

/// Optimized schedules in every channel, scored by approximation and simulation.
fn optimized_cell(grid: &ScenarioGrid, profile: &ServiceProfile, cell: &mut Cell) -> Result<()> {
    let init = Schedule::new(vec![1.5 * profile.mean_beta(); profile.n() - 1])?;
    let solve = |family: Channel| -> Result<OptResult> {
        optimize(profile, &grid.engine(family)?, &init, DEFAULT_TOL, default_max_iter(profile.n()))
    };
    let opts: Vec<OptResult> = Channel::ALL.into_iter().map(solve).collect::<Result<_>>()?;
    let x_ph = &opts[0].x_star;

    cell.push("opt_exact", "ph", ValueKind::ExactNa, None, None);
    cell.push("opt_exact", "opt:ph", ValueKind::ExactNa, None, None);
    for (family, o) in Channel::ALL.into_iter().zip(&opts) {
        cell.approx(&format!("opt_{}", family.name()), family, o.loss_at_optimum);
    }
    let sim_ph = grid.sim(profile, x_ph, Channel::Ph)?;
    cell.sim("opt_ph", Channel::Ph, &sim_ph);
    cell.delta("opt_ph", "ph:ph", relative_error(opts[0].loss_at_optimum, sim_ph.loss_mean)?);

    for (i, class) in [(1, Channel::W), (2, Channel::Ln)] {
        let own = format!("opt_{}", class.name());
        let at_own = grid.sim(profile, &opts[i].x_star, class)?;
        let at_ph = grid.sim(profile, x_ph, class)?;
        cell.sim(&own, class, &at_own);
        cell.sim("opt_ph", class, &at_ph);
        cell.delta("opt_ph", &format!("opt:{}", class.name()), optimality_gap_min(at_own.loss_mean, at_ph.loss_mean)?);
        let own_at_ph = loss_total(profile, x_ph, &grid.engine(class)?)?;
        cell.approx("opt_ph", class, own_at_ph);
        let tag = class.name();
        cell.delta("opt_ph", &format!("{tag}:{tag}"), relative_error(own_at_ph, at_ph.loss_mean)?);
        cell.delta("opt_ph", &format!("ph:{tag}"), relative_error(opts[0].loss_at_optimum, at_ph.loss_mean)?);
    }
    Ok(())
}

/// Regenerate one table. Cells run in parallel; record order is fixed.
pub fn run_table(grid: &ScenarioGrid, which: TableKind) -> Result<Vec<Record>> {
    grid.validate()?;
    type Job = (String, Option<f64>, ServiceProfile, Option<Schedule>);
    let mut jobs: Vec<Job> = Vec::new();
    match which {
        TableKind::Equidistant => {
            for &scv in &grid.scv_values {
                for &y in &grid.spacings {
                    let s = materialize(&ScheduleSpec::Equidistant { y: y * grid.beta }, grid.n)?;
                    jobs.push((scv_label(scv), Some(y), grid.homogeneous(scv)?, Some(s)));
                }
            }
        }
        TableKind::BaileyWelch => {
            let y = grid.bw_spacing;
            for &scv in &grid.scv_values {
                let s = materialize(&ScheduleSpec::BaileyWelchHybrid { y: y * grid.beta }, grid.n)?;
                jobs.push((scv_label(scv), Some(y), grid.homogeneous(scv)?, Some(s)));
            }
        }
        TableKind::Optimized => {
            for &scv in &grid.scv_values {
                jobs.push((scv_label(scv), None, grid.homogeneous(scv)?, None));
            }
        }
        TableKind::HeteroEq | TableKind::HeteroOpt => {
            for sc in HETERO_SCENARIOS {
                let p = sc.profile(grid.n, grid.beta, grid.hetero_scv)?;
                let (y, s) = if which == TableKind::HeteroEq {
                    let y = grid.hetero_spacing;
                    (Some(y), Some(materialize(&ScheduleSpec::Equidistant { y: y * grid.beta }, grid.n)?))
                } else {
                    (None, None)
                };
                jobs.push((sc.label.to_string(), y, p, s));
            }
        }
    }
    let parts = jobs
        .into_par_iter()
        .map(|(label, y, profile, sched)| {
            let mut out = Vec::new();
            let mut cell = Cell { table: which, label, y, out: &mut out };
            match &sched {
                Some(s) => {
                    let scenario = if which == TableKind::BaileyWelch { "bw" } else { "eq" };
                    fixed_schedule_cell(grid, &profile, s, scenario, &mut cell)?;
                }
                None => optimized_cell(grid, &profile, &mut cell)?,
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(parts.into_iter().flatten().collect())
}

/// Look up a single value in a table's records.
pub fn find_value<'a>(records: &'a [Record], label: &str, y: Option<f64>, scenario: &str, family: &str, kind: ValueKind) -> Option<&'a Record> {
    records.iter().find(|r| {
        r.scv_or_label == label
            && r.scenario == scenario
            && r.family == family
            && r.value_kind == kind
            && match (r.y, y) {
                (Some(a), Some(b)) => (a - b).abs() < 1e-12,
                (None, None) => true,
                _ => false,
            }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRecord {
    pub n: usize,
    pub family: String,
    /// `loss`, `optimize`, or `sim_benchmark` (the Monte Carlo stand-in for
    /// the exact evaluation).
    pub op: String,
    pub median_seconds: f64,
    pub reps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingOptions {
    pub scv: f64,
    pub y: f64,
    pub omega: f64,
    pub reps: usize,
    /// Optimize timings only for `n` up to this bound.
    pub optimize_max_n: usize,
    /// Runs for the simulation benchmark timing; 0 skips it.
    pub sim_runs: u64,
}

impl Default for TimingOptions {
    fn default() -> Self {
        Self { scv: 0.4, y: 1.5, omega: 0.5, reps: 20, optimize_max_n: 40, sim_runs: 10_000 }
    }
}

fn median_seconds<F: FnMut() -> Result<()>>(reps: usize, mut f: F) -> Result<f64> {
    let mut times = Vec::with_capacity(reps);
    for _ in 0..reps.max(1) {
        let t = Instant::now();
        f()?;
        times.push(t.elapsed().as_secs_f64());
    }
    times.sort_by(|a, b| a.total_cmp(b));
    let m = times.len();
    Ok(if m % 2 == 1 { times[m / 2] } else { 0.5 * (times[m / 2 - 1] + times[m / 2]) })
}

/// Median wall-clock times of loss evaluation (and optimization, and the
/// simulation benchmark) per family, on one worker thread.
pub fn run_timing(n_values: &[usize], opts: &TimingOptions) -> Result<Vec<TimingRecord>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .map_err(|e| Error::invalid("workers", e.to_string()))?;
    pool.install(|| {
        let mut out = Vec::new();
        for &n in n_values {
            if n < 2 {
                return Err(Error::invalid("n", format!("timing needs at least two clients, got {n}")));
            }
            let profile = ServiceProfile::homogeneous(n, 1.0, opts.scv)?;
            let sched = materialize(&ScheduleSpec::Equidistant { y: opts.y }, n)?;
            for family in Channel::ALL {
                let cfg = EngineConfig::new(opts.omega, family)?;
                let t = median_seconds(opts.reps, || loss_total(&profile, &sched, &cfg).map(|_| ()))?;
                out.push(TimingRecord { n, family: family.name().into(), op: "loss".into(), median_seconds: t, reps: opts.reps });
                if n <= opts.optimize_max_n {
                    let reps = opts.reps.min(5).max(1);
                    let t = median_seconds(reps, || {
                        optimize(&profile, &cfg, &sched, DEFAULT_TOL, default_max_iter(n)).map(|_| ())
                    })?;
                    out.push(TimingRecord { n, family: family.name().into(), op: "optimize".into(), median_seconds: t, reps });
                }
            }
            if opts.sim_runs > 0 {
                let cfg = SimConfig::new(opts.sim_runs, 1, Channel::Ph, opts.omega)?;
                let reps = opts.reps.min(3).max(1);
                let t = median_seconds(reps, || simulate_loss(&profile, &sched, &cfg, Some(1)).map(|_| ()))?;
                out.push(TimingRecord { n, family: "ph".into(), op: "sim_benchmark".into(), median_seconds: t, reps });
            }
        }
        Ok(out)
    })
}
