//! Sojourn-time distribution families: hyperexponential, mixed Erlang,
//! Weibull and Lognormal.
//!
//! Each family provides its first two moments, the excess moments
//! `E[(R - x)^+]` and `E[((R - x)^+)^2]`, the loss summand
//! `E[(R - x)^+] + ω (x - E R)` and a sampler.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad;
use crate::specfun::{normal_tail, regularized_upper_gamma, upper_incomplete_gamma};

/// Relative size below which a negative result is treated as cancellation noise.
const CLAMP_REL: f64 = 1e-12;

fn clamp_tiny_negative(value: f64, scale: f64) -> f64 {
    if value < 0.0 && value > -CLAMP_REL * scale {
        0.0
    } else {
        value
    }
}

fn check_threshold(x: f64) -> Result<()> {
    if !(x >= 0.0) {
        return Err(Error::domain("excess moment", format!("threshold must be nonnegative, got {x}")));
    }
    Ok(())
}

/// Mixture of two exponentials: with probability `alpha` rate `mu1`, else rate `mu2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperExp {
    alpha: f64,
    mu1: f64,
    mu2: f64,
}

impl HyperExp {
    pub fn new(alpha: f64, mu1: f64, mu2: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::invalid("alpha", format!("mixing probability must lie in [0, 1], got {alpha}")));
        }
        if !(mu1 > 0.0 && mu1.is_finite()) || !(mu2 > 0.0 && mu2.is_finite()) {
            return Err(Error::invalid("mu", format!("rates must be positive, got {mu1}, {mu2}")));
        }
        Ok(Self { alpha, mu1, mu2 })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn mu1(&self) -> f64 {
        self.mu1
    }
    pub fn mu2(&self) -> f64 {
        self.mu2
    }
}

/// Mixture of Erlang(k-1, mu) (probability `p`) and Erlang(k, mu).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixedErlang {
    p: f64,
    k: u32,
    mu: f64,
}

impl MixedErlang {
    pub fn new(p: f64, k: u32, mu: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::invalid("p", format!("mixing probability must lie in [0, 1], got {p}")));
        }
        if k < 2 {
            return Err(Error::invalid("k", format!("phase count must be at least 2, got {k}")));
        }
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(Error::invalid("mu", format!("rate must be positive, got {mu}")));
        }
        Ok(Self { p, k, mu })
    }

    /// Unchecked constructor for parameters produced by the fit.
    pub(crate) fn from_parts(p: f64, k: u32, mu: f64) -> Self {
        debug_assert!((0.0..=1.0).contains(&p) && k >= 2 && mu > 0.0);
        Self { p, k, mu }
    }

    pub fn p(&self) -> f64 {
        self.p
    }
    pub fn k(&self) -> u32 {
        self.k
    }
    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// `E[((R - x)^+)^2]` assembled from the two `S(k, x, μ)` terms.
    pub fn excess_second_moment(&self, x: f64) -> Result<f64> {
        check_threshold(x)?;
        let k = self.k as f64;
        let v = self.p * s_scaled(k - 1.0, x, self.mu)? + (1.0 - self.p) * s_scaled(k, x, self.mu)?;
        Ok(clamp_tiny_negative(v, self.raw_second_moment()))
    }

    /// The same quantity by conditioning on the number of phases completed
    /// before `x`: `[c1 Q(k, μx) + c2 (μx)^{k-1} e^{-μx} / (k-1)!] / μ²` with
    /// `c1 = (k - μx)² + k - 2p(k - μx)` and `c2 = μx (1 + k - 2p - μx)`.
    pub fn excess_second_moment_by_phases(&self, x: f64) -> Result<f64> {
        check_threshold(x)?;
        let k = self.k as f64;
        let (p, mu) = (self.p, self.mu);
        let t = mu * x;
        let c1 = (k - t) * (k - t) + k - 2.0 * p * (k - t);
        let c2 = t * (1.0 + k - 2.0 * p - t);
        let q = regularized_upper_gamma(k, t)?;
        let poisson = if x == 0.0 { 0.0 } else { ((k - 1.0) * t.ln() - t - libm::lgamma(k)).exp() };
        let v = (c1 * q + c2 * poisson) / (mu * mu);
        Ok(clamp_tiny_negative(v, self.raw_second_moment()))
    }

    /// `E(R - x)^+` and `E((R - x)^+)^2` from one pass over the Poisson terms
    /// `e^{-μx} (μx)^j / j!`, `j < k`. `None` once `e^{-μx}` would underflow.
    pub(crate) fn excess_pair_by_poisson_sum(&self, x: f64) -> Option<(f64, f64)> {
        let t = self.mu * x;
        if !(t <= 600.0) {
            return None;
        }
        let (p, mu) = (self.p, self.mu);
        let inv_mu = 1.0 / mu;
        let mut term = (-t).exp();
        let mut q_lo = term;
        let kf = self.k as f64;
        let mut j = 1.0;
        while j < kf - 1.0 {
            term *= t / j;
            q_lo += term;
            j += 1.0;
        }
        // term is now the (k-2)th Poisson probability
        let pi_lo = term;
        let pi_hi = term * t / (kf - 1.0);
        let q_hi = q_lo + pi_hi;
        let m = |k: f64, q: f64, pi: f64| q * (k * inv_mu - x) + x * pi;
        let s = |k: f64, q: f64, pi: f64| (q * (k + (k - t) * (k - t)) * inv_mu + x * pi * (k + 1.0 - t)) * inv_mu;
        let first = p * m(kf - 1.0, q_lo, pi_lo) + (1.0 - p) * m(kf, q_hi, pi_hi);
        let second = p * s(kf - 1.0, q_lo, pi_lo) + (1.0 - p) * s(kf, q_hi, pi_hi);
        Some((first, second))
    }

    fn raw_second_moment(&self) -> f64 {
        let k = self.k as f64;
        k * (k + 1.0 - 2.0 * self.p) / (self.mu * self.mu)
    }
}

/// `M(k, x, μ) / (k-1)!` where
/// `M(k, x, μ) = Γ(k, μx)(k/μ - x) + μ^{k-1} x^k e^{-μx}`.
pub(crate) fn m_scaled(k: f64, x: f64, mu: f64) -> Result<f64> {
    let t = mu * x;
    let q = regularized_upper_gamma(k, t)?;
    let tail = if x == 0.0 {
        0.0
    } else {
        ((k - 1.0) * mu.ln() + k * x.ln() - t - libm::lgamma(k)).exp()
    };
    Ok(q * (k / mu - x) + tail)
}

/// `S(k, x, μ) / (k-1)!` where
/// `S(k, x, μ) = Γ(k, μx)(k + (k - μx)^2)/μ^2 + e^{-μx} μ^{k-2} x^k (k + 1 - μx)`.
pub(crate) fn s_scaled(k: f64, x: f64, mu: f64) -> Result<f64> {
    let t = mu * x;
    let q = regularized_upper_gamma(k, t)?;
    let tail = if x == 0.0 {
        0.0
    } else {
        ((k - 2.0) * mu.ln() + k * x.ln() - t - libm::lgamma(k)).exp() * (k + 1.0 - t)
    };
    Ok(q * (k + (k - t) * (k - t)) / (mu * mu) + tail)
}

/// Weibull with rate-type scale `lambda` and shape `alpha`:
/// survival function `exp(-(λy)^α)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeibullDist {
    lambda: f64,
    alpha: f64,
}

impl WeibullDist {
    pub fn new(lambda: f64, alpha: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::invalid("lambda", format!("scale rate must be positive, got {lambda}")));
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::invalid("alpha", format!("shape must be positive, got {alpha}")));
        }
        Ok(Self { lambda, alpha })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `Γ(1 + m/α)` for the raw moment of order `m`.
    fn gamma_moment(&self, m: f64) -> f64 {
        libm::tgamma(1.0 + m / self.alpha)
    }
}

/// Lognormal: `ln R ~ N(mu, tau2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogNormalDist {
    mu: f64,
    tau2: f64,
}

impl LogNormalDist {
    pub fn new(mu: f64, tau2: f64) -> Result<Self> {
        if !mu.is_finite() {
            return Err(Error::invalid("mu", format!("location must be finite, got {mu}")));
        }
        if !(tau2 > 0.0 && tau2.is_finite()) {
            return Err(Error::invalid("tau2", format!("log-variance must be positive, got {tau2}")));
        }
        Ok(Self { mu, tau2 })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }
    pub fn tau2(&self) -> f64 {
        self.tau2
    }
    pub fn tau(&self) -> f64 {
        self.tau2.sqrt()
    }
}

/// Which concrete family a [`SojournFit`] holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum FitFamily {
    He,
    Me,
    W,
    Ln,
}

impl std::fmt::Display for FitFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FitFamily::He => "HE",
            FitFamily::Me => "ME",
            FitFamily::W => "W",
            FitFamily::Ln => "LN",
        })
    }
}

/// A fitted sojourn-time (or service-time) distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family")]
pub enum SojournFit {
    #[serde(rename = "HE")]
    He(HyperExp),
    #[serde(rename = "ME")]
    Me(MixedErlang),
    #[serde(rename = "W")]
    W(WeibullDist),
    #[serde(rename = "LN")]
    Ln(LogNormalDist),
}

impl SojournFit {
    pub fn family(&self) -> FitFamily {
        match self {
            SojournFit::He(_) => FitFamily::He,
            SojournFit::Me(_) => FitFamily::Me,
            SojournFit::W(_) => FitFamily::W,
            SojournFit::Ln(_) => FitFamily::Ln,
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            SojournFit::He(d) => d.alpha / d.mu1 + (1.0 - d.alpha) / d.mu2,
            SojournFit::Me(d) => (d.k as f64 - d.p) / d.mu,
            SojournFit::W(d) => d.gamma_moment(1.0) / d.lambda,
            SojournFit::Ln(d) => (d.mu + 0.5 * d.tau2).exp(),
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            SojournFit::He(d) => {
                let diff = 1.0 / d.mu1 - 1.0 / d.mu2;
                d.alpha / (d.mu1 * d.mu1) + (1.0 - d.alpha) / (d.mu2 * d.mu2) + d.alpha * (1.0 - d.alpha) * diff * diff
            }
            SojournFit::Me(d) => (d.k as f64 - d.p * d.p) / (d.mu * d.mu),
            SojournFit::W(d) => {
                let g1 = d.gamma_moment(1.0);
                (d.gamma_moment(2.0) - g1 * g1) / (d.lambda * d.lambda)
            }
            SojournFit::Ln(d) => d.tau2.exp_m1() * (2.0 * d.mu + d.tau2).exp(),
        }
    }

    /// `E R^2`.
    pub fn raw_second_moment(&self) -> f64 {
        let m = self.mean();
        self.variance() + m * m
    }

    /// `E[(R - x)^+]` for `x >= 0`.
    pub fn excess_mean(&self, x: f64) -> Result<f64> {
        check_threshold(x)?;
        let v = match *self {
            SojournFit::He(d) => d.alpha / d.mu1 * (-d.mu1 * x).exp() + (1.0 - d.alpha) / d.mu2 * (-d.mu2 * x).exp(),
            SojournFit::Me(d) => {
                let k = d.k as f64;
                d.p * m_scaled(k - 1.0, x, d.mu)? + (1.0 - d.p) * m_scaled(k, x, d.mu)?
            }
            SojournFit::W(d) => {
                // ∫_x^∞ exp(-(λy)^α) dy = Γ(1/α, (λx)^α) / (λα)
                let z = (d.lambda * x).powf(d.alpha);
                let a = 1.0 / d.alpha;
                upper_incomplete_gamma(a, z)? / (d.lambda * d.alpha)
            }
            SojournFit::Ln(d) => {
                let tau = d.tau();
                let lx = x.ln();
                (d.mu + 0.5 * d.tau2).exp() * normal_tail((lx - d.mu - d.tau2) / tau)
                    - if x == 0.0 { 0.0 } else { x * normal_tail((lx - d.mu) / tau) }
            }
        };
        Ok(clamp_tiny_negative(v, self.mean()))
    }

    /// `E[((R - x)^+)^2]` for `x >= 0`.
    pub fn excess_second_moment(&self, x: f64) -> Result<f64> {
        check_threshold(x)?;
        let v = match *self {
            SojournFit::He(d) => {
                2.0 * (d.alpha / (d.mu1 * d.mu1) * (-d.mu1 * x).exp()
                    + (1.0 - d.alpha) / (d.mu2 * d.mu2) * (-d.mu2 * x).exp())
            }
            SojournFit::Me(d) => return d.excess_second_moment(x),
            SojournFit::W(d) => {
                // 2 ∫_x^∞ (y - x) exp(-(λy)^α) dy
                let z = (d.lambda * x).powf(d.alpha);
                let a1 = 1.0 / d.alpha;
                let a2 = 2.0 / d.alpha;
                let first = upper_incomplete_gamma(a2, z)? / (d.lambda * d.lambda * d.alpha);
                let second = upper_incomplete_gamma(a1, z)? / (d.lambda * d.alpha);
                2.0 * (first - x * second)
            }
            SojournFit::Ln(d) => {
                let tau = d.tau();
                let lx = x.ln();
                let mut v = (2.0 * (d.mu + d.tau2)).exp() * normal_tail((lx - d.mu - 2.0 * d.tau2) / tau);
                if x > 0.0 {
                    v += -2.0 * x * (d.mu + 0.5 * d.tau2).exp() * normal_tail((lx - d.mu - d.tau2) / tau)
                        + x * x * normal_tail((lx - d.mu) / tau);
                }
                v
            }
        };
        Ok(clamp_tiny_negative(v, self.raw_second_moment()))
    }

    /// Loss summand `E[(R - x)^+] + ω (x - E R)`.
    pub fn loss_summand(&self, x: f64, omega: f64) -> Result<f64> {
        Ok(self.excess_mean(x)? + omega * (x - self.mean()))
    }

    /// Probability density at `y`.
    pub fn density(&self, y: f64) -> f64 {
        if y < 0.0 {
            return 0.0;
        }
        match *self {
            SojournFit::He(d) => d.alpha * d.mu1 * (-d.mu1 * y).exp() + (1.0 - d.alpha) * d.mu2 * (-d.mu2 * y).exp(),
            SojournFit::Me(d) => {
                let k = d.k as f64;
                let erlang = |shape: f64| {
                    if shape == 1.0 {
                        d.mu * (-d.mu * y).exp()
                    } else if y == 0.0 {
                        0.0
                    } else {
                        (shape * d.mu.ln() + (shape - 1.0) * y.ln() - d.mu * y - libm::lgamma(shape)).exp()
                    }
                };
                d.p * erlang(k - 1.0) + (1.0 - d.p) * erlang(k)
            }
            SojournFit::W(d) => {
                if y == 0.0 {
                    return if d.alpha < 1.0 { f64::INFINITY } else if d.alpha == 1.0 { d.lambda } else { 0.0 };
                }
                let ly = d.lambda * y;
                d.alpha * d.lambda * ly.powf(d.alpha - 1.0) * (-ly.powf(d.alpha)).exp()
            }
            SojournFit::Ln(d) => {
                if y == 0.0 {
                    return 0.0;
                }
                let z = (y.ln() - d.mu) / d.tau();
                (-0.5 * z * z).exp() / (y * d.tau() * (2.0 * std::f64::consts::PI).sqrt())
            }
        }
    }

    /// One draw, consuming uniforms from `rng` only.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            SojournFit::He(d) => {
                let rate = if rng.random::<f64>() < d.alpha { d.mu1 } else { d.mu2 };
                exponential(rng, rate)
            }
            SojournFit::Me(d) => {
                let phases = if rng.random::<f64>() < d.p { d.k - 1 } else { d.k };
                (0..phases).map(|_| exponential(rng, d.mu)).sum()
            }
            SojournFit::W(d) => {
                let e = -open_unit(rng).ln();
                e.powf(1.0 / d.alpha) / d.lambda
            }
            SojournFit::Ln(d) => (d.mu + d.tau() * standard_normal(rng)).exp(),
        }
    }
}

/// Uniform on (0, 1].
fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    1.0 - rng.random::<f64>()
}

fn exponential<R: Rng + ?Sized>(rng: &mut R, rate: f64) -> f64 {
    -open_unit(rng).ln() / rate
}

/// Box–Muller, keeping the cosine branch only.
fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u1 = open_unit(rng);
    let u2 = rng.random::<f64>();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Quadrature evaluation of `∫_x^∞ f(y) (y - x)^order dy`, used as an
/// independent oracle for the closed forms.
pub fn excess_moment_by_quadrature(fit: &SojournFit, x: f64, order: i32) -> f64 {
    let scale = fit.mean().max(fit.variance().sqrt());
    let integrand = |y: f64| fit.density(y) * (y - x).powi(order);
    // split at the mean so peaked densities land on a breakpoint
    let m = fit.mean();
    if x < m {
        quad::integrate(integrand, x, m, 1e-13) + quad::integrate_to_infinity(integrand, m, scale, 1e-13)
    } else {
        quad::integrate_to_infinity(integrand, x, scale, 1e-13)
    }
}
