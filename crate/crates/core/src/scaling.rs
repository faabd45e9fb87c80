//! Scaling-exponent machinery: the sup-ratio test for a candidate
//! eigenfunction, its conversion to an upper bound `μ*`, and the functional
//! iteration `g_{n+1}(ξ) = (g_n(ξ²) + g_n(2ξ - ξ²)) / 2` used to estimate `μ`
//! numerically.

use std::io::{self, Write};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::numeric::{golden_max, least_squares};

/// Piecewise-linear function sampled on a strictly increasing grid of `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: Vec<f64>,
    values: Vec<f64>,
    // set when grid[i] == i / (len - 1), enabling O(1) lookup
    uniform: bool,
}

impl GridFunction {
    pub fn new(grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if grid.len() != values.len() {
            return Err(Error::Length {
                expected: grid.len(),
                got: values.len(),
            });
        }
        if grid.len() < 2 || grid[0] != 0.0 || *grid.last().unwrap() != 1.0 {
            return Err(Error::param("grid", "must span [0, 1] with at least two samples"));
        }
        if grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::param("grid", "must be strictly increasing"));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::param("values", "must be finite and non-negative"));
        }
        Ok(GridFunction {
            grid,
            values,
            uniform: false,
        })
    }

    /// Samples at `i / intervals`, `i = 0..=intervals`.
    pub fn uniform(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::param("values", "need at least two samples"));
        }
        let m = (values.len() - 1) as f64;
        let grid = (0..values.len()).map(|i| i as f64 / m).collect();
        let mut g = Self::new(grid, values)?;
        g.uniform = true;
        Ok(g)
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Linear interpolation; arguments are clamped to `[0, 1]`.
    pub fn eval(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        let last = self.values.len() - 1;
        let (i, t) = if self.uniform {
            let pos = x * last as f64;
            let i = (pos.floor() as usize).min(last - 1);
            (i, pos - i as f64)
        } else {
            let i = self.grid.partition_point(|&g| g <= x).clamp(1, last) - 1;
            (i, (x - self.grid[i]) / (self.grid[i + 1] - self.grid[i]))
        };
        self.values[i] + t * (self.values[i + 1] - self.values[i])
    }
}

/// A candidate eigenfunction `h` with `h(0) = h(1) = 0` and `h > 0` inside.
#[derive(Debug, Clone, PartialEq)]
pub enum CandidateH {
    /// `h(ξ) = (ξ(1-ξ))^α`, `α` in `(0, 1)`.
    Power { alpha: f64 },
    /// Piecewise-linear tabulation.
    Tabulated(GridFunction),
}

impl CandidateH {
    pub fn power(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidCandidate(format!("exponent {alpha} outside (0, 1)")));
        }
        Ok(CandidateH::Power { alpha })
    }

    pub fn tabulated(f: GridFunction) -> Result<Self> {
        let v = f.values();
        if v[0] != 0.0 || v[v.len() - 1] != 0.0 {
            return Err(Error::InvalidCandidate("h(0) and h(1) must vanish".into()));
        }
        if v[1..v.len() - 1].iter().any(|&x| x <= 0.0) {
            return Err(Error::InvalidCandidate(
                "h must be positive on the open interval".into(),
            ));
        }
        Ok(CandidateH::Tabulated(f))
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            CandidateH::Power { alpha } => (x * (1.0 - x)).powf(*alpha),
            CandidateH::Tabulated(f) => f.eval(x),
        }
    }

    /// `(h(ξ²) + h(2ξ - ξ²)) / (2 h(ξ))`.
    pub fn ratio(&self, x: f64) -> f64 {
        (self.eval(x * x) + self.eval(x * (2.0 - x))) / (2.0 * self.eval(x))
    }
}

/// Outcome of the sup-ratio test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RatioSup {
    /// Supremum over the open interval (grid max refined by golden section).
    pub value: f64,
    pub argmax: f64,
    /// Extrapolated one-sided limits at `ξ → 0+` and `ξ → 1-`.
    pub left_limit: f64,
    pub right_limit: f64,
}

/// Ratio values on the open uniform grid `ξ_i = i / grid_size`, `i = 1..grid_size`.
pub fn ratio_curve(h: &CandidateH, grid_size: usize) -> Result<Vec<(f64, f64)>> {
    ratio_curve_with(h, grid_size, Exec::default())
}

pub fn ratio_curve_with(h: &CandidateH, grid_size: usize, exec: Exec) -> Result<Vec<(f64, f64)>> {
    if grid_size < 2 {
        return Err(Error::param("grid_size", "need at least two intervals"));
    }
    let pts = exec.map_range(grid_size - 1, |i| {
        let x = (i + 1) as f64 / grid_size as f64;
        (x, h.eval(x), h.ratio(x))
    });
    if let Some((x, hx, _)) = pts.iter().find(|(_, hx, _)| !(*hx > 0.0) || !hx.is_finite()) {
        return Err(Error::InvalidCandidate(format!("h({x}) = {hx} is not positive")));
    }
    Ok(pts.into_iter().map(|(x, _, r)| (x, r)).collect())
}

fn extrapolate_to(target: f64, pts: [(f64, f64); 3]) -> f64 {
    // quadratic Lagrange extrapolation through the three nearest samples
    let [(x0, y0), (x1, y1), (x2, y2)] = pts;
    let l0 = (target - x1) * (target - x2) / ((x0 - x1) * (x0 - x2));
    let l1 = (target - x0) * (target - x2) / ((x1 - x0) * (x1 - x2));
    let l2 = (target - x0) * (target - x1) / ((x2 - x0) * (x2 - x1));
    y0 * l0 + y1 * l1 + y2 * l2
}

/// `sup_{0<ξ<1} (h(ξ²) + h(2ξ-ξ²)) / (2h(ξ))`.
pub fn sup_ratio(h: &CandidateH, grid_size: usize) -> Result<RatioSup> {
    sup_ratio_with(h, grid_size, Exec::default())
}

pub fn sup_ratio_with(h: &CandidateH, grid_size: usize, exec: Exec) -> Result<RatioSup> {
    if grid_size < 1000 {
        return Err(Error::param("grid_size", format!("{grid_size} < 1000")));
    }
    let curve = ratio_curve_with(h, grid_size, exec)?;
    // first maximal index, so ties never depend on evaluation order
    let (imax, _) = curve.iter().enumerate().fold(
        (0, f64::NEG_INFINITY),
        |best, (i, &(_, r))| {
            if r > best.1 {
                (i, r)
            } else {
                best
            }
        },
    );
    let lo = if imax == 0 { curve[0].0 * 0.5 } else { curve[imax - 1].0 };
    let hi = curve.get(imax + 1).map(|p| p.0).unwrap_or(0.5 * (1.0 + curve[imax].0));
    let (mut argmax, mut value) = golden_max(|x| h.ratio(x), lo, hi, 1e-12);
    if curve[imax].1 > value {
        (argmax, value) = curve[imax];
    }
    let n = curve.len();
    let left_limit = extrapolate_to(0.0, [curve[0], curve[1], curve[2]]);
    let right_limit = extrapolate_to(1.0, [curve[n - 1], curve[n - 2], curve[n - 3]]);
    Ok(RatioSup {
        value,
        argmax,
        left_limit,
        right_limit,
    })
}

/// `μ* = -1 / log2(r)` for a sup ratio `r` in `(2^-1/2, 1)`.
pub fn mu_star_from_ratio(r: f64) -> Result<f64> {
    if !(r > std::f64::consts::FRAC_1_SQRT_2 && r < 1.0) {
        return Err(Error::RatioOutOfRange { ratio: r });
    }
    Ok(-1.0 / r.log2())
}

/// Iterates `g_0 = 1_(a,b)` through `n_steps` applications of the
/// averaging operator on a uniform grid with `grid_size` intervals.
/// Returns `g_0, …, g_{n_steps}`.
pub fn iterate_g(a: f64, b: f64, n_steps: usize, grid_size: usize) -> Result<Vec<GridFunction>> {
    iterate_g_with(a, b, n_steps, grid_size, Exec::default())
}

pub fn iterate_g_with(a: f64, b: f64, n_steps: usize, grid_size: usize, exec: Exec) -> Result<Vec<GridFunction>> {
    if !(0.0 < a && a < b && b < 1.0) {
        return Err(Error::param("(a, b)", format!("need 0 < a < b < 1, got ({a}, {b})")));
    }
    if grid_size < 4096 {
        return Err(Error::param("grid_size", format!("{grid_size} < 4096")));
    }
    let m = grid_size as f64;
    let g0: Vec<f64> = (0..=grid_size)
        .map(|i| {
            let x = i as f64 / m;
            if a < x && x < b {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    let mut out = vec![GridFunction::uniform(g0)?];
    for _ in 0..n_steps {
        let prev = out.last().unwrap();
        let next = exec.map_range(grid_size + 1, |i| {
            let x = i as f64 / m;
            0.5 * (prev.eval(x * x) + prev.eval(x * (2.0 - x)))
        });
        out.push(GridFunction::uniform(next)?);
    }
    Ok(out)
}

/// A least-squares fit of `-log2 g_n(z0)` against `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MuEstimate {
    pub mu: f64,
    pub slope: f64,
    pub intercept: f64,
    /// First iterate index inside the fit window.
    pub window_start: usize,
}

/// Fits over the last half of the iterates.
pub fn estimate_mu(iterates: &[GridFunction], z0: f64) -> Result<MuEstimate> {
    estimate_mu_from(iterates, z0, iterates.len() / 2)
}

/// Fits over iterates `window_start..`.
pub fn estimate_mu_from(iterates: &[GridFunction], z0: f64, window_start: usize) -> Result<MuEstimate> {
    if iterates.len() < 10 {
        return Err(Error::param("iterates", format!("{} < 10", iterates.len())));
    }
    let samples: Vec<f64> = iterates.iter().map(|g| g.eval(z0)).collect();
    estimate_mu_from_samples(&samples, window_start)
}

/// Same fit applied to raw samples `g_n(z0)`, `n = 0, 1, …`.
pub fn estimate_mu_from_samples(samples: &[f64], window_start: usize) -> Result<MuEstimate> {
    if window_start + 2 > samples.len() {
        return Err(Error::DegenerateFit(format!(
            "window starting at {window_start} leaves fewer than two of {} samples",
            samples.len()
        )));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (n, &g) in samples.iter().enumerate().skip(window_start) {
        if !(g > 0.0) {
            return Err(Error::DegenerateFit(format!("g_{n}(z0) = {g} underflowed")));
        }
        xs.push(n as f64);
        ys.push(-g.log2());
    }
    let (slope, intercept) = least_squares(&xs, &ys).ok_or_else(|| Error::DegenerateFit("singular design".into()))?;
    if !(slope > 0.0) {
        return Err(Error::DegenerateFit(format!("non-positive decay slope {slope}")));
    }
    Ok(MuEstimate {
        mu: 1.0 / slope,
        slope,
        intercept,
        window_start,
    })
}

/// CSV rows `n,g_n` for the iterates evaluated at `z0`.
pub fn write_g_csv<W: Write>(mut w: W, iterates: &[GridFunction], z0: f64) -> io::Result<()> {
    writeln!(w, "n,g_n")?;
    for (n, g) in iterates.iter().enumerate() {
        writeln!(w, "{n},{}", g.eval(z0))?;
    }
    Ok(())
}

/// CSV rows `xi,ratio`.
pub fn write_ratio_csv<W: Write>(mut w: W, curve: &[(f64, f64)]) -> io::Result<()> {
    writeln!(w, "xi,ratio")?;
    for (x, r) in curve {
        writeln!(w, "{x},{r}")?;
    }
    Ok(())
}
