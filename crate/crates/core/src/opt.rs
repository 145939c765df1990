//! Minimization of the approximated loss over `x >= 0`.
//!
//! Projected limited-memory BFGS: the quasi-Newton direction is built on the
//! coordinates not held at the bound, and the Armijo backtracking search runs
//! along the projected path `P(x + t d)`.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::engine::{loss_and_grad, EngineConfig, Schedule, ServiceProfile};
use crate::error::{Error, Result};

pub const DEFAULT_TOL: f64 = 1e-6;
const MEMORY: usize = 10;
const ARMIJO: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 60;

/// Default iteration budget for `n` clients.
pub fn default_max_iter(n: usize) -> usize {
    500 * n.max(1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptResult {
    pub x_star: Schedule,
    pub loss_at_optimum: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Infinity norm of the projected gradient at `x_star`.
    pub grad_norm: f64,
}

fn projected_gradient_norm(x: &[f64], g: &[f64]) -> f64 {
    x.iter()
        .zip(g)
        .map(|(&xi, &gi)| if xi <= 0.0 { gi.min(0.0).abs() } else { gi.abs() })
        .fold(0.0, f64::max)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Two-loop recursion applied to `q`, restricted to `free` coordinates.
fn lbfgs_direction(q: &[f64], free: &[bool], memory: &VecDeque<(Vec<f64>, Vec<f64>)>) -> Vec<f64> {
    let mask = |v: &[f64]| -> Vec<f64> { v.iter().zip(free).map(|(&a, &f)| if f { a } else { 0.0 }).collect() };
    let mut q = mask(q);
    let pairs: Vec<(Vec<f64>, Vec<f64>)> = memory.iter().map(|(s, y)| (mask(s), mask(y))).collect();
    let mut alphas = Vec::with_capacity(pairs.len());
    for (s, y) in pairs.iter().rev() {
        let sy = dot(s, y);
        if sy <= 0.0 {
            alphas.push(0.0);
            continue;
        }
        let a = dot(s, &q) / sy;
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    if let Some((s, y)) = pairs.last() {
        let (sy, yy) = (dot(s, y), dot(y, y));
        if sy > 0.0 && yy > 0.0 {
            let gamma = sy / yy;
            q.iter_mut().for_each(|v| *v *= gamma);
        }
    }
    for ((s, y), a) in pairs.iter().zip(alphas.iter().rev()) {
        let sy = dot(s, y);
        if sy <= 0.0 {
            continue;
        }
        let b = dot(y, &q) / sy;
        for (qi, si) in q.iter_mut().zip(s) {
            *qi += (a - b) * si;
        }
    }
    q.iter().map(|v| -v).collect()
}

/// Minimize the approximated loss from `init`.
///
/// Stops when the projected-gradient infinity norm drops below `tol` or
/// after `max_iter` iterations; the latter is reported as `converged = false`.
pub fn optimize(
    profile: &ServiceProfile,
    cfg: &EngineConfig,
    init: &Schedule,
    tol: f64,
    max_iter: usize,
) -> Result<OptResult> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::invalid("optimizer.tol", format!("must be positive, got {tol}")));
    }
    if init.len() + 1 != profile.n() {
        return Err(Error::invalid("schedule", format!("expected {} interarrival times, got {}", profile.n() - 1, init.len())));
    }
    let eval = |x: &[f64]| loss_and_grad(profile, &Schedule::new(x.to_vec())?, cfg, None);

    let mut x: Vec<f64> = init.x().iter().map(|v| v.max(0.0)).collect();
    let (mut f, mut g) = eval(&x)?;
    let mut memory: VecDeque<(Vec<f64>, Vec<f64>)> = VecDeque::with_capacity(MEMORY);
    let mut iterations = 0;
    let mut pg_norm = projected_gradient_norm(&x, &g);

    while pg_norm >= tol && iterations < max_iter {
        iterations += 1;
        let free: Vec<bool> = x.iter().zip(&g).map(|(&xi, &gi)| !(xi <= 0.0 && gi > 0.0)).collect();
        let pg: Vec<f64> = g.iter().zip(&free).map(|(&gi, &fr)| if fr { gi } else { 0.0 }).collect();

        let mut d = lbfgs_direction(&pg, &free, &memory);
        if dot(&d, &pg) >= 0.0 {
            memory.clear();
            d = pg.iter().map(|v| -v).collect();
        }
        let first_step = if memory.is_empty() { (1.0 / pg_norm).min(1.0) } else { 1.0 };

        let mut accepted = None;
        for attempt in 0..2 {
            let mut t = first_step;
            for _ in 0..MAX_BACKTRACKS {
                let trial: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| (xi + t * di).max(0.0)).collect();
                let decrease: f64 = g.iter().zip(trial.iter().zip(&x)).map(|(gi, (a, b))| gi * (a - b)).sum();
                let (ft, gt) = eval(&trial)?;
                if ft <= f + ARMIJO * decrease && decrease < 0.0 {
                    accepted = Some((trial, ft, gt));
                    break;
                }
                t *= 0.5;
            }
            if accepted.is_some() || attempt == 1 || memory.is_empty() {
                break;
            }
            // quasi-Newton model went stale: fall back to steepest descent
            memory.clear();
            d = pg.iter().map(|v| -v).collect();
        }
        let Some((xn, fn_, gn)) = accepted else { break };

        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            if memory.len() == MEMORY {
                memory.pop_front();
            }
            memory.push_back((s, y));
        }
        x = xn;
        f = fn_;
        g = gn;
        pg_norm = projected_gradient_norm(&x, &g);
    }

    Ok(OptResult {
        x_star: Schedule::new(x)?,
        loss_at_optimum: f,
        iterations,
        converged: pg_norm < tol,
        grad_norm: pg_norm,
    })
}

/// Percentage gap `|a - b| / b` of a loss `a` against a reference optimum `b`.
pub fn optimality_gap(loss: f64, reference: f64) -> Result<f64> {
    if !(loss.is_finite() && reference.is_finite()) || reference <= 0.0 {
        return Err(Error::domain("optimality_gap", format!("need finite losses and a positive reference, got {loss}, {reference}")));
    }
    Ok((loss - reference).abs() / reference * 100.0)
}

/// Percentage gap `|a - b| / min(a, b)` between two estimated losses.
pub fn optimality_gap_min(a: f64, b: f64) -> Result<f64> {
    let m = a.min(b);
    if !(a.is_finite() && b.is_finite()) || m <= 0.0 {
        return Err(Error::domain("optimality_gap_min", format!("need finite positive losses, got {a}, {b}")));
    }
    Ok((a - b).abs() / m * 100.0)
}

/// Percentage error `|approx - reference| / reference`.
pub fn relative_error(approx: f64, reference: f64) -> Result<f64> {
    if reference == 0.0 || !reference.is_finite() || !approx.is_finite() {
        return Err(Error::domain("relative_error", format!("reference must be finite and nonzero, got {reference}")));
    }
    Ok((approx - reference).abs() / reference.abs() * 100.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::loss_total;
    use crate::fit::Channel;

    fn homogeneous(n: usize, scv: f64) -> ServiceProfile {
        ServiceProfile::homogeneous(n, 1.0, scv).unwrap()
    }

    fn solve(p: &ServiceProfile, family: Channel) -> OptResult {
        let cfg = EngineConfig::new(0.5, family).unwrap();
        let init = Schedule::new(vec![1.5 * p.mean_beta(); p.n() - 1]).unwrap();
        optimize(p, &cfg, &init, DEFAULT_TOL, default_max_iter(p.n())).unwrap()
    }

    #[test]
    fn exponential_pair_lands_on_ln2() {
        let p = homogeneous(2, 1.0);
        for init in [0.0, 0.3, 1.5, 4.0] {
            let cfg = EngineConfig::new(0.5, Channel::Ph).unwrap();
            let r = optimize(&p, &cfg, &Schedule::new(vec![init]).unwrap(), DEFAULT_TOL, 1000).unwrap();
            assert!(r.converged);
            assert!((r.x_star.x()[0] - std::f64::consts::LN_2).abs() < 1e-4, "{init}: {:?}", r.x_star);
        }
    }

    #[test]
    fn optimized_flagship_values() {
        for (scv, expected) in [(0.7, 18.31), (1.0, 22.45)] {
            let r = solve(&homogeneous(41, scv), Channel::Ph);
            assert!(r.converged);
            assert!(((r.loss_at_optimum - expected) / expected).abs() < 0.01, "{scv}: {}", r.loss_at_optimum);
        }
    }

    #[test]
    fn optimum_beats_heuristics_and_perturbations() {
        let p = homogeneous(20, 0.7);
        for family in Channel::ALL {
            let cfg = EngineConfig::new(0.5, family).unwrap();
            let r = solve(&p, family);
            assert!(r.converged, "{family}");
            assert_eq!(r.loss_at_optimum, loss_total(&p, &r.x_star, &cfg).unwrap());
            for y in [1.0, 1.2, 1.5, 1.8] {
                let eq = loss_total(&p, &Schedule::new(vec![y; 19]).unwrap(), &cfg).unwrap();
                assert!(r.loss_at_optimum <= eq + 1e-8);
            }
            let xs = r.x_star.x();
            for i in 0..xs.len() {
                for delta in [-1e-3, 1e-3] {
                    let mut x = xs.to_vec();
                    x[i] = (x[i] + delta).max(0.0);
                    let l = loss_total(&p, &Schedule::new(x).unwrap(), &cfg).unwrap();
                    assert!(l >= r.loss_at_optimum - 1e-8, "{family} coordinate {i}");
                }
            }
        }
    }

    #[test]
    fn homogeneous_optimum_is_dome_shaped() {
        let r = solve(&homogeneous(41, 1.0), Channel::Ph);
        let x = r.x_star.x();
        let interior = &x[4..36];
        let hi = interior.iter().cloned().fold(f64::MIN, f64::max);
        let lo = interior.iter().cloned().fold(f64::MAX, f64::min);
        assert!(hi / lo <= 1.1, "{x:?}");
        assert!(x[0] < interior[interior.len() / 2]);
        assert!(x[39] < interior[interior.len() / 2]);
    }

    #[test]
    fn iteration_cap_is_reported() {
        let p = homogeneous(10, 1.0);
        let cfg = EngineConfig::new(0.5, Channel::Ph).unwrap();
        let r = optimize(&p, &cfg, &Schedule::new(vec![3.0; 9]).unwrap(), 1e-12, 1).unwrap();
        assert_eq!(r.iterations, 1);
        assert!(!r.converged);
    }

    #[test]
    fn gap_and_error_examples() {
        assert_eq!(optimality_gap_min(22.55, 22.55).unwrap(), 0.0);
        assert!((optimality_gap_min(13.47, 13.65).unwrap() - 1.35).abs() < 0.05);
        assert!((optimality_gap_min(13.65, 13.47).unwrap() - 1.35).abs() < 0.05);
        assert!((optimality_gap(13.61, 13.59).unwrap() - 0.08).abs() < 0.1);
        assert!((relative_error(17.15, 17.13).unwrap() - 0.12).abs() < 0.01);
        assert!((relative_error(14.46, 14.53).unwrap() - 0.48).abs() < 0.01);
        assert_eq!(relative_error(3.0, 3.0).unwrap(), 0.0);
        assert!(relative_error(1.0, 0.0).is_err());
        assert!(optimality_gap_min(0.0, 1.0).is_err());
        assert!(optimality_gap(1.0, 0.0).is_err());
    }
}
