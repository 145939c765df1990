//! Two-moment fits: map a (mean, variance) pair onto a distribution family.

use serde::{Deserialize, Serialize};

use crate::dist::{HyperExp, LogNormalDist, MixedErlang, SojournFit, WeibullDist};
use crate::error::{Error, Result};

/// Largest Erlang order the mixed-Erlang fit will produce (scv down to 1e-4).
pub const MAX_ERLANG_ORDER: u32 = 10_000;

/// A target mean and variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentPair {
    mean: f64,
    var: f64,
}

impl MomentPair {
    #[inline]
    pub fn new(mean: f64, var: f64) -> Result<Self> {
        if mean > 0.0 && mean.is_finite() && var >= 0.0 && var.is_finite() {
            Ok(Self { mean, var })
        } else {
            Err(Self::reject(mean, var))
        }
    }

    #[cold]
    fn reject(mean: f64, var: f64) -> Error {
        if !(mean > 0.0 && mean.is_finite()) {
            Error::invalid("mean", format!("must be positive and finite, got {mean}"))
        } else {
            Error::invalid("variance", format!("must be nonnegative and finite, got {var}"))
        }
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }
    pub fn var(&self) -> f64 {
        self.var
    }
    /// Squared coefficient of variation.
    pub fn scv(&self) -> f64 {
        self.var / (self.mean * self.mean)
    }

    fn require_spread(&self, family: &str) -> Result<()> {
        if self.var == 0.0 {
            return Err(Error::Degenerate(format!(
                "zero variance (deterministic time) has no {family} representation"
            )));
        }
        Ok(())
    }
}

/// Approximation channel: which family sojourn times are fitted to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    /// Hyperexponential for scv >= 1, mixed Erlang below.
    Ph,
    W,
    Ln,
}

impl Channel {
    pub const ALL: [Channel; 3] = [Channel::Ph, Channel::W, Channel::Ln];

    pub fn name(&self) -> &'static str {
        match self {
            Channel::Ph => "ph",
            Channel::W => "w",
            Channel::Ln => "ln",
        }
    }
}

impl std::fmt::Display for Channel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Channel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ph" => Ok(Channel::Ph),
            "w" => Ok(Channel::W),
            "ln" => Ok(Channel::Ln),
            other => Err(Error::invalid("family", format!("expected ph, w or ln, got {other:?}"))),
        }
    }
}

/// Fit `m` in the family selected by `channel`.
pub fn fit(m: MomentPair, channel: Channel) -> Result<SojournFit> {
    match channel {
        Channel::Ph => fit_phase_type(m),
        Channel::W => fit_weibull(m).map(SojournFit::W),
        Channel::Ln => fit_lognormal(m).map(SojournFit::Ln),
    }
}

/// Hyperexponential with balanced means when `var >= mean²`, otherwise a
/// mixture of Erlang(k-1) and Erlang(k) with a common rate.
pub fn fit_phase_type(m: MomentPair) -> Result<SojournFit> {
    m.require_spread("phase-type")?;
    let scv = m.scv();
    if m.var >= m.mean * m.mean {
        let alpha = 0.5 * (1.0 + ((scv - 1.0) / (scv + 1.0)).max(0.0).sqrt());
        let mu1 = 2.0 * alpha / m.mean;
        let mu2 = 2.0 * (1.0 - alpha) / m.mean;
        return Ok(SojournFit::He(HyperExp::new(alpha, mu1, mu2)?));
    }

    let k = erlang_order(scv)?;
    let kf = k as f64;
    let radicand = (kf * (1.0 + scv) - kf * kf * scv).max(0.0);
    let p = ((kf * scv - radicand.sqrt()) / (1.0 + scv)).clamp(0.0, 1.0);
    let mu = (kf - p) / m.mean;
    // valid by construction: p in [0, 1], k >= 2, mu >= (k - 1) / mean > 0
    Ok(SojournFit::Me(MixedErlang::from_parts(p, k, mu)))
}

/// The `k` with `1/k < scv <= 1/(k-1)`, for `0 < scv < 1`.
fn erlang_order(scv: f64) -> Result<u32> {
    let inv = 1.0 / scv;
    if inv >= MAX_ERLANG_ORDER as f64 {
        return Err(Error::Degenerate(format!(
            "scv {scv:e} needs more than {MAX_ERLANG_ORDER} Erlang phases"
        )));
    }
    // 1/k >= scv  <=>  k scv <= 1
    let mut k = inv.floor() + 1.0;
    while k * scv <= 1.0 {
        k += 1.0;
    }
    while k > 2.0 && (k - 1.0) * scv > 1.0 {
        k -= 1.0;
    }
    Ok(k.max(2.0) as u32)
}

/// `ln(1 + scv(α))` for a Weibull of shape `α`, in log-gamma form.
fn weibull_log_scv1(alpha: f64) -> f64 {
    libm::lgamma(1.0 + 2.0 / alpha) - 2.0 * libm::lgamma(1.0 + 1.0 / alpha)
}

/// Weibull shape from the scv equation by bisection, then the scale from the mean.
pub fn fit_weibull(m: MomentPair) -> Result<WeibullDist> {
    m.require_spread("Weibull")?;
    let target = m.scv().ln_1p();
    let residual = |a: f64| weibull_log_scv1(a) - target;

    // residual decreases in α
    let (mut lo, mut hi) = (0.05, 50.0);
    let mut guard = 0;
    while residual(lo) < 0.0 {
        lo *= 0.5;
        guard += 1;
        if guard > 60 {
            return Err(Error::Convergence { routine: "weibull bracket", detail: format!("scv {} too large", m.scv()) });
        }
    }
    while residual(hi) > 0.0 {
        hi *= 2.0;
        guard += 1;
        if guard > 120 {
            return Err(Error::Convergence { routine: "weibull bracket", detail: format!("scv {} too small", m.scv()) });
        }
    }
    // bisect to machine resolution
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let r = residual(mid);
        if r == 0.0 {
            lo = mid;
            hi = mid;
            break;
        }
        if r > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let alpha = 0.5 * (lo + hi);
    let lambda = libm::tgamma(1.0 + 1.0 / alpha) / m.mean;
    WeibullDist::new(lambda, alpha)
}

pub fn fit_lognormal(m: MomentPair) -> Result<LogNormalDist> {
    m.require_spread("Lognormal")?;
    let tau2 = m.scv().ln_1p();
    let mu = m.mean.ln() - 0.5 * tau2;
    LogNormalDist::new(mu, tau2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::FitFamily;

    fn pair(mean: f64, var: f64) -> MomentPair {
        MomentPair::new(mean, var).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn exponential_boundary_goes_to_he() {
        let f = fit_phase_type(pair(1.0, 1.0)).unwrap();
        let SojournFit::He(h) = f else { panic!("expected HE, got {f:?}") };
        assert_eq!(h.alpha(), 0.5);
        assert!(rel(h.mu1(), 1.0) < 1e-15 && rel(h.mu2(), 1.0) < 1e-15);
    }

    #[test]
    fn scv_half_is_erlang_two() {
        // scv = 1/2 sits on the closed end of (1/3, 1/2], so k = 3 with p = 1:
        // Erlang(2) at rate 2.
        let f = fit_phase_type(pair(1.0, 0.5)).unwrap();
        let SojournFit::Me(d) = f else { panic!() };
        assert_eq!(d.k(), 3);
        assert!((d.p() - 1.0).abs() < 1e-12);
        assert!(rel(d.mu(), 2.0) < 1e-12);
        assert!(rel(f.mean(), 1.0) < 1e-12 && rel(f.variance(), 0.5) < 1e-10);
    }

    #[test]
    fn he_example() {
        let f = fit_phase_type(pair(2.0, 8.0)).unwrap();
        let SojournFit::He(h) = f else { panic!() };
        // scv = 2, so (scv - 1)/(scv + 1) = 1/3
        let alpha = 0.5 * (1.0 + (1.0f64 / 3.0).sqrt());
        assert!(rel(h.alpha(), alpha) < 1e-14);
        assert!(rel(h.mu1(), alpha) < 1e-15);
        assert!(rel(h.mu2(), 1.0 - alpha) < 1e-14);
        assert!(rel(f.mean(), 2.0) < 1e-10 && rel(f.variance(), 8.0) < 1e-10);
    }

    #[test]
    fn weibull_examples() {
        let w = fit_weibull(pair(1.0, 1.0)).unwrap();
        assert!((w.alpha() - 1.0).abs() < 1e-12);
        assert!((w.lambda() - 1.0).abs() < 1e-12);

        let w1 = fit_weibull(pair(1.0, 0.4)).unwrap();
        let f = SojournFit::W(w1);
        assert!((f.variance() - 0.4).abs() < 1e-8);
        assert!((f.mean() - 1.0).abs() < 1e-8);

        let w2 = fit_weibull(pair(2.0, 1.6)).unwrap();
        assert!(rel(w2.alpha(), w1.alpha()) < 1e-10);
        assert!(rel(w2.lambda(), 0.5 * w1.lambda()) < 1e-10);
    }

    #[test]
    fn lognormal_examples() {
        let l = fit_lognormal(pair(1.0, std::f64::consts::E - 1.0)).unwrap();
        assert!(rel(l.tau2(), 1.0) < 1e-14);
        assert!(rel(l.mu(), -0.5) < 1e-14);

        let l1 = fit_lognormal(pair(1.0, 0.7)).unwrap();
        assert!(rel(l1.tau2(), 1.7f64.ln()) < 1e-14);
        assert!(rel(l1.mu(), -(1.7f64.sqrt().ln())) < 1e-13);
        let f = SojournFit::Ln(l1);
        assert!(rel(f.mean(), 1.0) < 1e-12 && rel(f.variance(), 0.7) < 1e-12);

        let l3 = fit_lognormal(pair(3.0, 6.3)).unwrap();
        assert!(rel(l3.tau2(), l1.tau2()) < 1e-14);
        assert!((l3.mu() - l1.mu() - 3f64.ln()).abs() < 1e-13);
    }

    #[test]
    fn zero_variance_is_degenerate_everywhere() {
        let m = pair(1.0, 0.0);
        for c in Channel::ALL {
            assert!(matches!(fit(m, c), Err(Error::Degenerate(_))), "{c}");
        }
        assert!(matches!(fit_phase_type(pair(1.0, 0.5e-4)), Err(Error::Degenerate(_))));
    }

    #[test]
    fn grid_round_trips_and_invariants() {
        let means = [0.1, 0.3, 1.0, 2.5, 10.0];
        let scvs = [0.05, 0.1, 0.25, 0.4, 0.5, 0.7, 0.999, 1.0, 1.3, 2.0, 5.0];
        for &mean in &means {
            for &scv in &scvs {
                let m = pair(mean, scv * mean * mean);
                let ph = fit_phase_type(m).unwrap();
                assert_eq!(ph.family() == FitFamily::He, m.var() >= mean * mean);
                assert!(rel(ph.mean(), mean) < 1e-10 && rel(ph.variance(), m.var()) < 1e-10, "PH {mean} {scv}");
                if let SojournFit::Me(d) = ph {
                    let k = d.k() as f64;
                    assert!(1.0 / k < scv && scv <= 1.0 / (k - 1.0));
                    assert!((0.0..=1.0).contains(&d.p()));
                }
                let w = SojournFit::W(fit_weibull(m).unwrap());
                assert!(rel(w.mean(), mean) < 1e-8 && rel(w.variance(), m.var()) < 1e-8, "W {mean} {scv}");
                let ln = SojournFit::Ln(fit_lognormal(m).unwrap());
                assert!(rel(ln.mean(), mean) < 1e-12 && rel(ln.variance(), m.var()) < 1e-12, "LN {mean} {scv}");
            }
        }
    }

    #[test]
    fn weibull_residual_is_tight() {
        for &scv in &[0.05, 0.4, 1.0, 1.3, 5.0] {
            let w = fit_weibull(pair(1.0, scv)).unwrap();
            let g1 = libm::tgamma(1.0 + 1.0 / w.alpha());
            let g2 = libm::tgamma(1.0 + 2.0 / w.alpha());
            assert!((g2 / (g1 * g1) - 1.0 - scv).abs() <= 1e-10);
        }
    }

    #[test]
    fn scale_equivariance() {
        for &scv in &[0.3, 0.7, 1.0, 2.2] {
            let base = pair(1.0, scv);
            let c = 3.7;
            let scaled = pair(c, c * c * scv);
            match (fit_phase_type(base).unwrap(), fit_phase_type(scaled).unwrap()) {
                (SojournFit::He(a), SojournFit::He(b)) => {
                    assert!(rel(a.alpha(), b.alpha()) < 1e-10);
                    assert!(rel(b.mu1(), a.mu1() / c) < 1e-10);
                    assert!(rel(b.mu2(), a.mu2() / c) < 1e-10);
                }
                (SojournFit::Me(a), SojournFit::Me(b)) => {
                    assert_eq!(a.k(), b.k());
                    assert!((a.p() - b.p()).abs() < 1e-10);
                    assert!(rel(b.mu(), a.mu() / c) < 1e-10);
                }
                other => panic!("family changed under scaling: {other:?}"),
            }
            let (wa, wb) = (fit_weibull(base).unwrap(), fit_weibull(scaled).unwrap());
            assert!(rel(wa.alpha(), wb.alpha()) < 1e-10);
            assert!(rel(wb.lambda(), wa.lambda() / c) < 1e-10);
            let (la, lb) = (fit_lognormal(base).unwrap(), fit_lognormal(scaled).unwrap());
            assert!(rel(la.tau2(), lb.tau2()) < 1e-10);
            assert!((lb.mu() - la.mu() - c.ln()).abs() < 1e-10);
        }
    }

    #[test]
    fn channel_parsing() {
        assert_eq!("PH".parse::<Channel>().unwrap(), Channel::Ph);
        assert_eq!("ln".parse::<Channel>().unwrap(), Channel::Ln);
        assert!("gamma".parse::<Channel>().is_err());
    }
}
