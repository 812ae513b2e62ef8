//! Bracketing univariate solvers: golden-section maximization and bisection.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// `1/φ`.
const INV_PHI: f64 = 0.618_033_988_749_894_9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("no sign change on [{lo}, {hi}]: g(lo) = {g_lo}, g(hi) = {g_hi}")]
    NoSignChange { lo: f64, hi: f64, g_lo: f64, g_hi: f64 },
    #[error("solver did not converge within {0} iterations")]
    MaxIterExceeded(usize),
}

/// Tolerances and bracket for one solve.
///
/// The search stops once the bracket is narrower than
/// `max(abs_tol, rel_tol * |midpoint|)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_iter: usize,
    pub bracket: (f64, f64),
}

impl SolveConfig {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 1e-12,
            max_iter: 500,
            bracket: (lo, hi),
        }
    }

    pub fn abs_tol(mut self, tol: f64) -> Self {
        self.abs_tol = tol;
        self
    }

    pub fn rel_tol(mut self, tol: f64) -> Self {
        self.rel_tol = tol;
        self
    }

    pub fn max_iter(mut self, n: usize) -> Self {
        self.max_iter = n;
        self
    }

    pub fn validate(&self) -> Result<(), SolveError> {
        let (lo, hi) = self.bracket;
        if !(lo.is_finite() && hi.is_finite()) {
            return Err(SolveError::InvalidConfig("bracket must be finite"));
        }
        if lo >= hi {
            return Err(SolveError::InvalidConfig("bracket requires lo < hi"));
        }
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0) {
            return Err(SolveError::InvalidConfig("tolerances must be positive"));
        }
        if self.max_iter < 1 {
            return Err(SolveError::InvalidConfig("max_iter must be at least 1"));
        }
        Ok(())
    }

    fn converged(&self, lo: f64, hi: f64) -> bool {
        let mid = 0.5 * (lo + hi);
        hi - lo <= self.abs_tol.max(self.rel_tol * mid.abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Maximum {
    pub x: f64,
    pub value: f64,
    pub iterations: usize,
}

/// Maximizes `f` on the configured bracket by golden-section search.
///
/// `f` must be unimodal on the bracket for the result to be the global maximum.
/// The returned point is the midpoint of the final bracket.
pub fn golden_section_max<F>(mut f: F, cfg: &SolveConfig) -> Result<Maximum, SolveError>
where
    F: FnMut(f64) -> f64,
{
    cfg.validate()?;
    let (mut a, mut b) = cfg.bracket;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    let mut iterations = 0;
    while !cfg.converged(a, b) {
        if iterations >= cfg.max_iter {
            return Err(SolveError::MaxIterExceeded(iterations));
        }
        iterations += 1;
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
        // interior points can collapse onto the ends once the bracket hits f64 spacing
        if !(a < c && c <= d && d < b) {
            break;
        }
    }
    let x = 0.5 * (a + b);
    Ok(Maximum {
        x,
        value: f(x),
        iterations,
    })
}

/// Finds a root of `g` on the configured bracket by bisection.
///
/// Requires `g(lo)·g(hi) <= 0`. Returns as soon as `g` vanishes exactly or the
/// bracket is below tolerance.
pub fn bisect_root<G>(mut g: G, cfg: &SolveConfig) -> Result<f64, SolveError>
where
    G: FnMut(f64) -> f64,
{
    cfg.validate()?;
    let (mut lo, mut hi) = cfg.bracket;
    let g_lo = g(lo);
    if g_lo == 0.0 {
        return Ok(lo);
    }
    let g_hi = g(hi);
    if g_hi == 0.0 {
        return Ok(hi);
    }
    if g_lo.signum() == g_hi.signum() || g_lo.is_nan() || g_hi.is_nan() {
        return Err(SolveError::NoSignChange { lo, hi, g_lo, g_hi });
    }
    let lo_negative = g_lo < 0.0;
    let mut iterations = 0;
    while !cfg.converged(lo, hi) {
        if iterations >= cfg.max_iter {
            return Err(SolveError::MaxIterExceeded(iterations));
        }
        iterations += 1;
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let gm = g(mid);
        if gm == 0.0 {
            return Ok(mid);
        }
        if (gm < 0.0) == lo_negative {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Guards a golden-section result against non-unimodal objectives: the best of
/// `points` equally spaced samples must lie within one grid step of `x_max`.
pub fn grid_agrees_with_max<F>(mut f: F, lo: f64, hi: f64, points: usize, x_max: f64) -> bool
where
    F: FnMut(f64) -> f64,
{
    let step = (hi - lo) / (points - 1) as f64;
    let best =
        (0..points)
            .map(|i| lo + step * i as f64)
            .map(|x| (x, f(x)))
            .fold(
                (lo, f64::NEG_INFINITY),
                |acc, (x, v)| if v > acc.1 { (x, v) } else { acc },
            );
    (best.0 - x_max).abs() <= step * (1.0 + 1e-9)
}
