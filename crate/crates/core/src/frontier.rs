//! The moderate-deviation achievability region.
//!
//! A pair `(β′, μ′)` is achievable when
//!
//! ```text
//! (1 - π) / (μ′ - μ*π) + H2(β′μ′ / (μ′ - μ*π)) < 1    for all π in [0, 1].
//! ```
//!
//! Internally everything is parametrized by `1/μ′`, which keeps the
//! `μ′ → ∞` end of the frontier finite.

use std::io::{self, Write};

use serde::Serialize;

use crate::entropy::{binary_entropy_inv, h2};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::numeric::golden_max;

pub const DEFAULT_MU_STAR: f64 = 3.627;
pub const DEFAULT_PI_GRID: usize = 1000;

/// Margins at or below this count as boundary, not achievable.
pub const STRICT_MARGIN: f64 = 1e-12;

/// Bisection tolerance for [`max_beta`].
pub const BETA_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FrontierPoint {
    /// Error-exponent coordinate.
    pub beta_p: f64,
    /// Gap-exponent coordinate `1/μ′`.
    pub inv_mu_p: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionQuery {
    pub beta_p: f64,
    pub mu_p: f64,
    pub mu_star: f64,
    pub pi_grid: usize,
}

impl RegionQuery {
    pub fn new(beta_p: f64, mu_p: f64, mu_star: f64) -> Self {
        RegionQuery {
            beta_p,
            mu_p,
            mu_star,
            pi_grid: DEFAULT_PI_GRID,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Achievability {
    pub achievable: bool,
    /// `1 - max_π LHS(π)`.
    pub worst_margin: f64,
    pub worst_pi: f64,
}

fn check_mu(mu_p: f64, mu_star: f64) -> Result<()> {
    if !(mu_star > 2.0) {
        return Err(Error::param("mu_star", format!("{mu_star} must exceed 2")));
    }
    if !(mu_p > mu_star) {
        return Err(Error::param("mu_p", format!("{mu_p} must exceed mu_star = {mu_star}")));
    }
    Ok(())
}

/// Left-hand side of the region inequality at `π`.
///
/// The entropy term is taken on its increasing branch: once its argument
/// reaches 1/2 it is held at 1, and past 1 the whole expression is `+∞`.
/// The retention estimate behind the inequality only holds for squaring
/// fractions up to 1/2.
pub fn region_lhs(pi: f64, beta_p: f64, inv_mu_p: f64, mu_star: f64) -> f64 {
    let denom = 1.0 - mu_star * pi * inv_mu_p;
    if denom <= 0.0 {
        return f64::INFINITY;
    }
    let arg = beta_p / denom;
    if arg > 1.0 {
        return f64::INFINITY;
    }
    let entropy = if arg >= 0.5 { 1.0 } else { h2(arg) };
    (1.0 - pi) * inv_mu_p / denom + entropy
}

/// Worst case of the region inequality over `π` in `[0, 1]`, given `1/μ′`.
pub fn achievability_inv(beta_p: f64, inv_mu_p: f64, mu_star: f64, pi_grid: usize) -> Achievability {
    let f = |pi: f64| region_lhs(pi, beta_p, inv_mu_p, mu_star);
    let grid = pi_grid.max(2);
    let (mut best_i, mut best) = (0usize, f64::NEG_INFINITY);
    for i in 0..=grid {
        let v = f(i as f64 / grid as f64);
        if v > best {
            best = v;
            best_i = i;
        }
    }
    let mut worst_pi = best_i as f64 / grid as f64;
    let mut worst = best;
    if worst.is_finite() {
        let lo = best_i.saturating_sub(1) as f64 / grid as f64;
        let hi = (best_i + 1).min(grid) as f64 / grid as f64;
        let (x, v) = golden_max(f, lo, hi, 1e-12);
        if v > worst {
            worst = v;
            worst_pi = x;
        }
    }
    let worst_margin = 1.0 - worst;
    Achievability {
        achievable: worst_margin > STRICT_MARGIN,
        worst_margin,
        worst_pi,
    }
}

/// Evaluates the region inequality for `(β′, μ′)`.
pub fn is_achievable(q: &RegionQuery) -> Result<Achievability> {
    check_mu(q.mu_p, q.mu_star)?;
    if !(q.beta_p >= 0.0) {
        return Err(Error::param("beta_p", format!("{} must be non-negative", q.beta_p)));
    }
    Ok(achievability_inv(q.beta_p, 1.0 / q.mu_p, q.mu_star, q.pi_grid))
}

/// Largest achievable `β′` for a given `1/μ′` in `[0, 1/μ*)`.
pub fn max_beta_inv(inv_mu_p: f64, mu_star: f64, pi_grid: usize) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 0.5f64);
    while hi - lo > BETA_TOL {
        let mid = 0.5 * (lo + hi);
        if achievability_inv(mid, inv_mu_p, mu_star, pi_grid).achievable {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Largest `β′` such that `(β′, μ′)` is achievable.
pub fn max_beta(mu_p: f64, mu_star: f64) -> Result<f64> {
    check_mu(mu_p, mu_star)?;
    Ok(max_beta_inv(1.0 / mu_p, mu_star, DEFAULT_PI_GRID))
}

/// A frontier sample with its binding `π` and residual margin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FrontierSample {
    pub point: FrontierPoint,
    pub worst_pi: f64,
    pub margin: f64,
}

fn frontier_sample(inv_mu_p: f64, mu_star: f64, pi_grid: usize) -> FrontierSample {
    // 1/μ′ = 1/μ* is the limit point where β′ = 0
    let inv = inv_mu_p.min((1.0 - 1e-12) / mu_star);
    let beta_p = max_beta_inv(inv, mu_star, pi_grid);
    let a = achievability_inv(beta_p, inv, mu_star, pi_grid);
    FrontierSample {
        point: FrontierPoint { beta_p, inv_mu_p },
        worst_pi: a.worst_pi,
        margin: a.worst_margin,
    }
}

/// Frontier points at the given `1/μ′` values, in input order.
pub fn frontier_at(inv_mu: &[f64], mu_star: f64, pi_grid: usize) -> Result<Vec<FrontierSample>> {
    frontier_at_with(inv_mu, mu_star, pi_grid, Exec::default())
}

pub fn frontier_at_with(inv_mu: &[f64], mu_star: f64, pi_grid: usize, exec: Exec) -> Result<Vec<FrontierSample>> {
    if !(mu_star > 2.0) {
        return Err(Error::param("mu_star", format!("{mu_star} must exceed 2")));
    }
    if let Some(&bad) = inv_mu.iter().find(|&&y| !(0.0..=1.0 / mu_star).contains(&y)) {
        return Err(Error::param("inv_mu_p", format!("{bad} outside [0, 1/mu_star]")));
    }
    Ok(exec.map_range(inv_mu.len(), |k| frontier_sample(inv_mu[k], mu_star, pi_grid)))
}

/// Sweeps `1/μ′` over `[0, 1/μ*]`; output sorted by `1/μ′` descending.
///
/// Samples are cosine-spaced. Near `1/μ′ = 0` the frontier behaves like
/// `1/2 - c·sqrt(1/μ′)`, so uniform spacing under-resolves that end.
pub fn trace_frontier(mu_star: f64, samples: usize) -> Result<Vec<FrontierSample>> {
    trace_frontier_with(mu_star, samples, DEFAULT_PI_GRID, Exec::default())
}

pub fn trace_frontier_with(mu_star: f64, samples: usize, pi_grid: usize, exec: Exec) -> Result<Vec<FrontierSample>> {
    if samples < 2 {
        return Err(Error::param("samples", "need at least two"));
    }
    let top = 1.0 / mu_star;
    let inv: Vec<f64> = (0..samples)
        .rev()
        .map(|k| {
            let t = std::f64::consts::PI * k as f64 / (samples - 1) as f64;
            top * 0.5 * (1.0 - t.cos())
        })
        .collect();
    frontier_at_with(&inv, mu_star, pi_grid, exec)
}

/// CSV rows `inv_mu_p,beta_p,worst_pi,margin`.
pub fn write_frontier_csv<W: Write>(mut w: W, rows: &[FrontierSample]) -> io::Result<()> {
    writeln!(w, "inv_mu_p,beta_p,worst_pi,margin")?;
    for r in rows {
        writeln!(w, "{},{},{},{}", r.point.inv_mu_p, r.point.beta_p, r.worst_pi, r.margin)?;
    }
    Ok(())
}

/// The single-pocket interpolation curve:
/// `β′ = γ H2⁻¹((γ(μ*+1) - 1) / (γμ*))`, `μ′ = μ* / (1 - γ)`.
pub fn gamma_tradeoff(gamma: f64, mu_star: f64) -> Result<FrontierPoint> {
    if !(mu_star > 2.0) {
        return Err(Error::param("mu_star", format!("{mu_star} must exceed 2")));
    }
    let lo = 1.0 / (1.0 + mu_star);
    if !(gamma > lo && gamma < 1.0) {
        return Err(Error::Domain {
            value: gamma,
            domain: "(1/(1+mu_star), 1)",
        });
    }
    let arg = ((gamma * (mu_star + 1.0) - 1.0) / (gamma * mu_star)).clamp(0.0, 1.0);
    Ok(FrontierPoint {
        beta_p: gamma * binary_entropy_inv(arg)?,
        inv_mu_p: (1.0 - gamma) / mu_star,
    })
}

/// `min_ξ 1 - ((1-ξ)/μ + H2(β*ξ))` over `ξ = i/grid`, with its minimizer.
pub fn linear_bound_margin(beta_star: f64, mu: f64, grid: usize) -> (f64, f64) {
    (0..=grid)
        .map(|i| {
            let xi = i as f64 / grid as f64;
            (1.0 - ((1.0 - xi) / mu + h2(beta_star * xi)), xi)
        })
        .fold((f64::INFINITY, 0.0), |best, c| if c.0 < best.0 { c } else { best })
}

/// Largest `β*` for which the straight segment from `(0, 1/μ)` to `(β*, 0)`
/// stays inside the region, i.e. the linear bound margin stays positive.
pub fn linear_intercept(mu: f64, grid: usize) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 0.5f64);
    while hi - lo > BETA_TOL {
        let mid = 0.5 * (lo + hi);
        if linear_bound_margin(mid, mu, grid).0 > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Default `β*` probed by the linear bound check.
pub const LINEAR_BETA_STAR: f64 = 0.4469;

/// `γ` values probed by the containment check.
pub const CONTAINMENT_GAMMAS: [f64; 5] = [0.30, 0.50, 0.70, 0.90, 0.99];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinearBoundCheck {
    pub beta_star: f64,
    pub mu: f64,
    pub grid: usize,
    pub min_margin: f64,
    pub argmin_xi: f64,
    /// Largest `β*` that still passes on this grid.
    pub max_beta_star: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContainmentCheck {
    pub gamma: f64,
    pub beta_p: f64,
    pub inv_mu_p: f64,
    pub worst_pi: f64,
    pub margin: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorollaryReport {
    pub linear_bound: LinearBoundCheck,
    pub containment: Vec<ContainmentCheck>,
    pub passed: bool,
}

/// Runs the linear-bound check and the curve-containment check.
pub fn verify_corollaries(mu_star: f64, grid: usize) -> Result<CorollaryReport> {
    if grid < 1000 {
        return Err(Error::param("grid", format!("{grid} < 1000")));
    }
    if !(mu_star > 2.0) {
        return Err(Error::param("mu_star", format!("{mu_star} must exceed 2")));
    }
    let (min_margin, argmin_xi) = linear_bound_margin(LINEAR_BETA_STAR, mu_star, grid);
    let linear_bound = LinearBoundCheck {
        beta_star: LINEAR_BETA_STAR,
        mu: mu_star,
        grid,
        min_margin,
        argmin_xi,
        max_beta_star: linear_intercept(mu_star, grid),
        passed: min_margin > 0.0,
    };
    let containment = CONTAINMENT_GAMMAS
        .iter()
        .map(|&gamma| {
            let p = gamma_tradeoff(gamma, mu_star)?;
            let a = achievability_inv(p.beta_p, p.inv_mu_p, mu_star, grid);
            Ok(ContainmentCheck {
                gamma,
                beta_p: p.beta_p,
                inv_mu_p: p.inv_mu_p,
                worst_pi: a.worst_pi,
                margin: a.worst_margin,
                passed: a.achievable,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let passed = linear_bound.passed && containment.iter().all(|c| c.passed);
    Ok(CorollaryReport {
        linear_bound,
        containment,
        passed,
    })
}

/// Margin of the region inequality when every occurrence of `π` is
/// perturbed by up to `9/D` in the unfavourable direction. Positive margins
/// certify that `D` pockets absorb the rounding of the pocket levels.
pub fn perturbation_margin(beta_p: f64, mu_p: f64, mu_star: f64, d: u32, pi_grid: usize) -> Result<f64> {
    check_mu(mu_p, mu_star)?;
    if d == 0 {
        return Err(Error::param("d", "must be positive"));
    }
    let delta = 9.0 / d as f64;
    let grid = pi_grid.max(2);
    let mut worst = f64::NEG_INFINITY;
    for i in 0..=grid {
        let pi = i as f64 / grid as f64;
        let denom2 = mu_p - mu_star * (pi + delta);
        let t1 = if denom2 <= 0.0 {
            f64::INFINITY
        } else {
            ((1.0 - (pi - delta)) / denom2).max((1.0 - (pi - delta)) / (mu_p - mu_star * (pi - delta)))
        };
        let d_hi = mu_p - mu_star * (pi + delta);
        let t2 = if d_hi <= 0.0 {
            f64::INFINITY
        } else {
            let a_hi = beta_p * mu_p / d_hi;
            if a_hi > 1.0 {
                f64::INFINITY
            } else if a_hi >= 0.5 {
                1.0
            } else {
                h2(a_hi)
            }
        };
        worst = worst.max(t1 + t2);
    }
    Ok(1.0 - worst)
}
