//! Shared fixtures for the benchmarks.

use apptsched::{materialize, Schedule, ScheduleSpec, ServiceProfile};

/// Homogeneous instance with an equidistant schedule.
pub fn instance(n: usize, scv: f64, y: f64) -> (ServiceProfile, Schedule) {
    let p = ServiceProfile::homogeneous(n, 1.0, scv).expect("valid profile");
    let s = materialize(&ScheduleSpec::Equidistant { y }, n).expect("valid schedule");
    (p, s)
}
