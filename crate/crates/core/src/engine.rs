//! Recursive two-moment approximation of the schedule loss.
//!
//! Client `i`'s sojourn time `R_i` is replaced by a fit to `(r_i, v_i)`; the
//! Lindley step `R_{i+1} = (R_i - x_i)^+ + B_{i+1}` then gives `(r_{i+1}, v_{i+1})`
//! in closed form, and the loss picks up `E(R_i - x_i)^+ + ω (x_i - r_i)`.
//! One fit per client, so an evaluation is O(n).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::{m_scaled, s_scaled, FitFamily, SojournFit};
use crate::error::{Error, Result};
use crate::fit::{fit, Channel, MomentPair};
use crate::specfun::{normal_tail, upper_incomplete_gamma};

/// Floor applied to a propagated variance, relative to the squared mean.
pub const VARIANCE_FLOOR_REL: f64 = 1e-12;

/// Means and variances of the service times `B_1..B_n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceProfile {
    betas: Vec<f64>,
    sigma2s: Vec<f64>,
}

impl ServiceProfile {
    pub fn new(betas: Vec<f64>, sigma2s: Vec<f64>) -> Result<Self> {
        if betas.is_empty() {
            return Err(Error::invalid("betas", "need at least one client"));
        }
        if betas.len() != sigma2s.len() {
            return Err(Error::invalid(
                "sigma2s",
                format!("length {} does not match betas length {}", sigma2s.len(), betas.len()),
            ));
        }
        if let Some((i, b)) = betas.iter().enumerate().find(|(_, b)| !(**b > 0.0 && b.is_finite())) {
            return Err(Error::invalid("betas", format!("entry {i} must be positive and finite, got {b}")));
        }
        if let Some((i, s)) = sigma2s.iter().enumerate().find(|(_, s)| !(**s >= 0.0 && s.is_finite())) {
            return Err(Error::invalid("sigma2s", format!("entry {i} must be nonnegative and finite, got {s}")));
        }
        Ok(Self { betas, sigma2s })
    }

    /// `n` clients with identical service moments.
    pub fn homogeneous(n: usize, beta: f64, sigma2: f64) -> Result<Self> {
        Self::new(vec![beta; n], vec![sigma2; n])
    }

    pub fn n(&self) -> usize {
        self.betas.len()
    }
    pub fn betas(&self) -> &[f64] {
        &self.betas
    }
    pub fn sigma2s(&self) -> &[f64] {
        &self.sigma2s
    }

    /// Mean and variance of client `i`'s service time (0-based).
    pub fn moments(&self, i: usize) -> Result<MomentPair> {
        MomentPair::new(self.betas[i], self.sigma2s[i])
    }

    pub fn mean_beta(&self) -> f64 {
        self.betas.iter().sum::<f64>() / self.n() as f64
    }
}

/// Interarrival times `x_1..x_{n-1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Schedule {
    x: Vec<f64>,
}

impl Schedule {
    pub fn new(x: Vec<f64>) -> Result<Self> {
        if let Some((i, v)) = x.iter().enumerate().find(|(_, v)| !(**v >= 0.0 && v.is_finite())) {
            return Err(Error::invalid("schedule", format!("interarrival {i} must be nonnegative and finite, got {v}")));
        }
        Ok(Self { x })
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }
    pub fn len(&self) -> usize {
        self.x.len()
    }
    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
    pub fn into_inner(self) -> Vec<f64> {
        self.x
    }

    /// Arrival epochs `t_1 = 0, t_{j+1} = t_j + x_j`.
    pub fn arrival_times(&self) -> Vec<f64> {
        let mut t = Vec::with_capacity(self.x.len() + 1);
        let mut acc = 0.0;
        t.push(acc);
        for &xi in &self.x {
            acc += xi;
            t.push(acc);
        }
        t
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    /// Weight of idle time against waiting time, in `[0, 1]`.
    pub omega: f64,
    pub family: Channel,
}

impl EngineConfig {
    pub fn new(omega: f64, family: Channel) -> Result<Self> {
        if !(0.0..=1.0).contains(&omega) {
            return Err(Error::invalid("omega", format!("must lie in [0, 1], got {omega}")));
        }
        Ok(Self { omega, family })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub r: Vec<f64>,
    pub v: Vec<f64>,
    /// `L_{i+1}(x_i)` for `i = 1..n-1`.
    pub per_summand: Vec<f64>,
    pub total: f64,
    /// Fitted family at each step, one entry per interarrival.
    pub family_trace: Vec<FitFamily>,
    pub omega: f64,
    /// Number of times a cancellation-negative moment was clamped.
    pub clamped: usize,
}

/// `E(R - x)^+` and `E((R - x)^+)^2` through the per-family update formulas.
pub fn excess_moments(fit: &SojournFit, x: f64) -> Result<(f64, f64)> {
    Ok(match *fit {
        SojournFit::He(d) => {
            let (a, m1, m2) = (d.alpha(), d.mu1(), d.mu2());
            let (e1, e2) = ((-m1 * x).exp(), (-m2 * x).exp());
            let first = a / m1 * e1 + (1.0 - a) / m2 * e2;
            let second = 2.0 * (a / (m1 * m1) * e1 + (1.0 - a) / (m2 * m2) * e2);
            (first, second)
        }
        SojournFit::Me(d) => {
            if let Some(pair) = d.excess_pair_by_poisson_sum(x) {
                return Ok(pair);
            }
            let (p, k, mu) = (d.p(), d.k() as f64, d.mu());
            let first = p * m_scaled(k - 1.0, x, mu)? + (1.0 - p) * m_scaled(k, x, mu)?;
            let second = p * s_scaled(k - 1.0, x, mu)? + (1.0 - p) * s_scaled(k, x, mu)?;
            (first, second)
        }
        SojournFit::W(d) => {
            let (lambda, alpha) = (d.lambda(), d.alpha());
            let z = (lambda * x).powf(alpha);
            let ez = (-z).exp();
            let g1 = upper_incomplete_gamma(1.0 + 1.0 / alpha, z)?;
            let g2 = upper_incomplete_gamma(1.0 + 2.0 / alpha, z)?;
            let first = g1 / lambda - x * ez;
            let second = g2 / (lambda * lambda) - 2.0 * x * g1 / lambda + x * x * ez;
            (first, second)
        }
        SojournFit::Ln(d) => {
            let (mu, tau2, tau) = (d.mu(), d.tau2(), d.tau());
            // ln 0 = -inf, and Ψ(-inf) = 1
            let lx = x.ln();
            let psi0 = normal_tail((lx - mu) / tau);
            let psi1 = normal_tail((lx - mu - tau2) / tau);
            let psi2 = normal_tail((lx - mu - 2.0 * tau2) / tau);
            let m1 = (mu + 0.5 * tau2).exp();
            let first = m1 * psi1 - x * psi0;
            let second = (2.0 * (mu + tau2)).exp() * psi2 - 2.0 * x * m1 * psi1 + x * x * psi0;
            (first, second)
        }
    })
}

struct Step {
    r_next: f64,
    v_next: f64,
    summand: f64,
    family: FitFamily,
    clamped: usize,
}

fn step(r: f64, v: f64, x: f64, beta_next: f64, sigma2_next: f64, cfg: &EngineConfig) -> Result<Step> {
    let sojourn = fit(MomentPair::new(r, v)?, cfg.family)?;
    let (mut excess, second) = excess_moments(&sojourn, x)?;
    let mut clamped = 0;
    if excess < 0.0 {
        excess = 0.0;
        clamped += 1;
    }
    let mut spread = second - excess * excess;
    if spread < 0.0 {
        spread = 0.0;
        clamped += 1;
    }
    let r_next = excess + beta_next;
    let mut v_next = spread + sigma2_next;
    let floor = VARIANCE_FLOOR_REL * r_next * r_next;
    if v_next < floor {
        v_next = floor;
        clamped += 1;
    }
    Ok(Step { r_next, v_next, summand: excess + cfg.omega * (x - r), family: sojourn.family(), clamped })
}

fn check_lengths(profile: &ServiceProfile, sched: &Schedule) -> Result<()> {
    if sched.len() + 1 != profile.n() {
        return Err(Error::invalid(
            "schedule",
            format!("expected {} interarrival times for {} clients, got {}", profile.n() - 1, profile.n(), sched.len()),
        ));
    }
    Ok(())
}

/// Approximate loss of `sched` with the full per-client trace.
pub fn evaluate_loss(profile: &ServiceProfile, sched: &Schedule, cfg: &EngineConfig) -> Result<LossReport> {
    check_lengths(profile, sched)?;
    let n = profile.n();
    let (betas, sigma2s) = (profile.betas(), profile.sigma2s());
    let mut report = LossReport {
        r: Vec::with_capacity(n),
        v: Vec::with_capacity(n),
        per_summand: Vec::with_capacity(n - 1),
        total: 0.0,
        family_trace: Vec::with_capacity(n - 1),
        omega: cfg.omega,
        clamped: 0,
    };
    report.r.push(betas[0]);
    report.v.push(sigma2s[0]);
    for (i, &x) in sched.x().iter().enumerate() {
        let s = step(report.r[i], report.v[i], x, betas[i + 1], sigma2s[i + 1], cfg)?;
        report.total += s.summand;
        report.per_summand.push(s.summand);
        report.family_trace.push(s.family);
        report.r.push(s.r_next);
        report.v.push(s.v_next);
        report.clamped += s.clamped;
    }
    Ok(report)
}

/// Total loss only.
pub fn loss_total(profile: &ServiceProfile, sched: &Schedule, cfg: &EngineConfig) -> Result<f64> {
    check_lengths(profile, sched)?;
    let prefix = Prefix { r: profile.betas()[0], v: profile.sigma2s()[0], acc: 0.0 };
    suffix_total(profile, sched.x(), cfg, 0, prefix)
}

/// State entering step `i`: `(r_i, v_i)` and the loss accumulated so far.
#[derive(Clone, Copy)]
struct Prefix {
    r: f64,
    v: f64,
    acc: f64,
}

fn suffix_total(profile: &ServiceProfile, x: &[f64], cfg: &EngineConfig, start: usize, from: Prefix) -> Result<f64> {
    let (betas, sigma2s) = (profile.betas(), profile.sigma2s());
    let Prefix { mut r, mut v, mut acc } = from;
    for i in start..x.len() {
        let s = step(r, v, x[i], betas[i + 1], sigma2s[i + 1], cfg)?;
        acc += s.summand;
        r = s.r_next;
        v = s.v_next;
    }
    Ok(acc)
}

fn prefixes(profile: &ServiceProfile, x: &[f64], cfg: &EngineConfig) -> Result<(Vec<Prefix>, f64)> {
    let (betas, sigma2s) = (profile.betas(), profile.sigma2s());
    let mut out = Vec::with_capacity(x.len());
    let mut cur = Prefix { r: betas[0], v: sigma2s[0], acc: 0.0 };
    for i in 0..x.len() {
        out.push(cur);
        let s = step(cur.r, cur.v, x[i], betas[i + 1], sigma2s[i + 1], cfg)?;
        cur = Prefix { r: s.r_next, v: s.v_next, acc: cur.acc + s.summand };
    }
    Ok((out, cur.acc))
}

/// Default finite-difference step at `x`.
pub fn default_step(x: f64) -> f64 {
    1e-6 * x.max(1.0)
}

/// Loss and its finite-difference gradient in one pass.
///
/// Steps before the perturbed coordinate are shared, so each partial
/// derivative costs only the suffix of the recursion. The cached prefix is
/// the exact state a full evaluation would reach, so every difference uses
/// the same totals [`loss_total`] returns.
pub fn loss_and_grad(
    profile: &ServiceProfile,
    sched: &Schedule,
    cfg: &EngineConfig,
    h: Option<f64>,
) -> Result<(f64, Vec<f64>)> {
    check_lengths(profile, sched)?;
    if let Some(h) = h {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::invalid("h", format!("step must be positive, got {h}")));
        }
    }
    let x = sched.x();
    let (pre, total) = prefixes(profile, x, cfg)?;
    let grad = (0..x.len())
        .into_par_iter()
        .map(|i| {
            let hi = h.unwrap_or_else(|| default_step(x[i]));
            let mut xs = x.to_vec();
            let at = |xs: &mut Vec<f64>, xi: f64| {
                xs[i] = xi;
                suffix_total(profile, xs, cfg, i, pre[i])
            };
            if x[i] >= hi {
                let up = at(&mut xs, x[i] + hi)?;
                let down = at(&mut xs, x[i] - hi)?;
                Ok((up - down) / (2.0 * hi))
            } else {
                let up = at(&mut xs, x[i] + hi)?;
                Ok((up - total) / hi)
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok((total, grad))
}

/// Finite-difference gradient of the total loss with respect to each `x_i`:
/// central differences, forward differences where `x_i < h`.
pub fn evaluate_loss_grad(
    profile: &ServiceProfile,
    sched: &Schedule,
    cfg: &EngineConfig,
    h: Option<f64>,
) -> Result<Vec<f64>> {
    loss_and_grad(profile, sched, cfg, h).map(|(_, g)| g)
}
