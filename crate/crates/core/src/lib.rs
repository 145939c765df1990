//! Approximate evaluation and optimization of appointment schedules for a
//! single-server queue.
//!
//! Sojourn times are propagated through the Lindley recursion by repeated
//! two-moment fits (phase-type, Weibull or Lognormal), giving the weighted
//! idle/wait loss of a schedule in O(n). A seeded Monte Carlo simulator serves
//! as the benchmark.

pub mod dist;
pub mod engine;
pub mod error;
pub mod experiments;
pub mod fit;
pub mod opt;
pub mod quad;
pub mod schedule;
pub mod sim;
pub mod specfun;

pub use dist::{FitFamily, HyperExp, LogNormalDist, MixedErlang, SojournFit, WeibullDist};
pub use engine::{evaluate_loss, evaluate_loss_grad, loss_total, EngineConfig, LossReport, Schedule, ServiceProfile};
pub use error::{Error, Result};
pub use experiments::{find_value, run_table, run_timing, HeteroScenario, Record, ScenarioGrid, TableKind, TimingOptions, TimingRecord, ValueKind};
pub use fit::{Channel, MomentPair};
pub use opt::{optimality_gap, optimality_gap_min, optimize, relative_error, OptResult};
pub use schedule::{materialize, ScheduleSpec};
pub use sim::{simulate_loss, SimConfig, SimResult};
