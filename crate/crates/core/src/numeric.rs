//! Small numerical helpers shared across modules.

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    /// Folds another partial sum into this one, keeping both compensations.
    pub fn merge(&mut self, other: CompensatedSum) {
        self.add(other.sum);
        self.add(other.comp);
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::new();
        for x in iter {
            s.add(x);
        }
        s
    }
}

/// `-log2(Σ 2^(-l_i))` with a max-shift so that exponents far below the
/// f64 range still combine correctly. Returns `+∞` for an empty input or
/// when every term is zero.
pub fn neg_log2_sum_exp2(logs: impl IntoIterator<Item = f64>) -> f64 {
    let logs: Vec<f64> = logs.into_iter().collect();
    let shift = logs.iter().copied().fold(f64::INFINITY, f64::min);
    if shift == f64::INFINITY {
        return f64::INFINITY;
    }
    let s: CompensatedSum = logs.iter().map(|&l| (-(l - shift)).exp2()).collect();
    shift - s.value().log2()
}

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Golden-section search for a maximum of a unimodal `f` on `[lo, hi]`.
/// Returns `(argmax, max)`; the endpoints are included as candidates.
pub fn golden_max<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    let (a0, b0) = (lo, hi);
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > tol {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        }
    }
    let mid = 0.5 * (lo + hi);
    [(mid, f(mid)), (a0, f(a0)), (b0, f(b0))]
        .into_iter()
        .fold((mid, f64::NEG_INFINITY), |best, c| if c.1 > best.1 { c } else { best })
}

/// Wilson score interval for `successes` out of `trials` at `z` standard deviations.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    // the bounds are exact at the extremes; rounding would leave dust
    let lo = if successes == 0 { 0.0 } else { (centre - half).max(0.0) };
    let hi = if successes == trials {
        1.0
    } else {
        (centre + half).min(1.0)
    };
    (lo, hi)
}

/// Ordinary least-squares fit `y ≈ intercept + slope * x`.
pub fn least_squares(xs: &[f64], ys: &[f64]) -> Option<(f64, f64)> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

/// Round half away from zero for non-negative inputs: ties go up.
pub fn round_half_up(x: f64) -> i64 {
    (x + 0.5).floor() as i64
}
