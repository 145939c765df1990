//! Named schedule generators.

use serde::{Deserialize, Serialize};

use crate::engine::Schedule;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScheduleSpec {
    /// Constant interarrival time `y`.
    Equidistant { y: f64 },
    /// Two clients at time 0, then one per time unit.
    BaileyWelch,
    /// Two clients at time 0, then one every `y`.
    BaileyWelchHybrid { y: f64 },
    Explicit { x: Vec<f64> },
}

impl ScheduleSpec {
    pub fn label(&self) -> &'static str {
        match self {
            ScheduleSpec::Equidistant { .. } => "equidistant",
            ScheduleSpec::BaileyWelch => "bailey_welch",
            ScheduleSpec::BaileyWelchHybrid { .. } => "bailey_welch_hybrid",
            ScheduleSpec::Explicit { .. } => "explicit",
        }
    }
}

fn check_spacing(y: f64) -> Result<()> {
    if !(y > 0.0 && y.is_finite()) {
        return Err(Error::invalid("schedule.y", format!("spacing must be positive, got {y}")));
    }
    Ok(())
}

/// Interarrival vector of length `n - 1` for `spec`.
pub fn materialize(spec: &ScheduleSpec, n: usize) -> Result<Schedule> {
    if n == 0 {
        return Err(Error::invalid("n", "need at least one client"));
    }
    let m = n - 1;
    let x = match spec {
        ScheduleSpec::Equidistant { y } => {
            check_spacing(*y)?;
            vec![*y; m]
        }
        ScheduleSpec::BaileyWelch => bailey_welch(m, 1.0),
        ScheduleSpec::BaileyWelchHybrid { y } => {
            check_spacing(*y)?;
            bailey_welch(m, *y)
        }
        ScheduleSpec::Explicit { x } => {
            if x.len() != m {
                return Err(Error::invalid("schedule.x", format!("expected {m} interarrival times, got {}", x.len())));
            }
            x.clone()
        }
    };
    Schedule::new(x)
}

fn bailey_welch(m: usize, y: f64) -> Vec<f64> {
    let mut x = vec![y; m];
    if let Some(first) = x.first_mut() {
        *first = 0.0;
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        assert_eq!(materialize(&ScheduleSpec::Equidistant { y: 1.5 }, 4).unwrap().x(), &[1.5, 1.5, 1.5]);
        assert_eq!(materialize(&ScheduleSpec::BaileyWelch, 5).unwrap().x(), &[0.0, 1.0, 1.0, 1.0]);
        assert_eq!(materialize(&ScheduleSpec::BaileyWelchHybrid { y: 1.2 }, 4).unwrap().x(), &[0.0, 1.2, 1.2]);
        assert!(materialize(&ScheduleSpec::BaileyWelch, 1).unwrap().is_empty());
    }

    #[test]
    fn explicit_is_validated() {
        let ok = ScheduleSpec::Explicit { x: vec![0.0, 2.0] };
        assert_eq!(materialize(&ok, 3).unwrap().x(), &[0.0, 2.0]);
        assert!(materialize(&ScheduleSpec::Explicit { x: vec![1.0, -0.5] }, 3).is_err());
        assert!(materialize(&ScheduleSpec::Explicit { x: vec![1.0] }, 3).is_err());
        assert!(materialize(&ScheduleSpec::Equidistant { y: 0.0 }, 3).is_err());
        assert!(materialize(&ScheduleSpec::Equidistant { y: 1.0 }, 0).is_err());
    }

    #[test]
    fn serde_shape() {
        let s: ScheduleSpec = serde_json::from_str(r#"{"kind":"bailey_welch_hybrid","y":1.2}"#).unwrap();
        assert_eq!(s, ScheduleSpec::BaileyWelchHybrid { y: 1.2 });
        let s: ScheduleSpec = serde_json::from_str(r#"{"kind":"bailey_welch"}"#).unwrap();
        assert_eq!(s, ScheduleSpec::BaileyWelch);
    }

    proptest! {
        #[test]
        fn equidistant_length_and_sum(n in 1usize..200, y in 0.01f64..10.0) {
            let s = materialize(&ScheduleSpec::Equidistant { y }, n).unwrap();
            prop_assert_eq!(s.len(), n - 1);
            let sum: f64 = s.x().iter().sum();
            prop_assert!((sum - (n - 1) as f64 * y).abs() <= 1e-12 * (n as f64) * y);
        }

        #[test]
        fn arrival_times_nondecreasing(n in 1usize..100, y in 0.01f64..5.0, hybrid in any::<bool>()) {
            let spec = if hybrid { ScheduleSpec::BaileyWelchHybrid { y } } else { ScheduleSpec::Equidistant { y } };
            let t = materialize(&spec, n).unwrap().arrival_times();
            prop_assert_eq!(t.len(), n);
            prop_assert_eq!(t[0], 0.0);
            prop_assert!(t.windows(2).all(|w| w[1] >= w[0]));
        }
    }
}
