//! Real Lambert W and the integer-shape regularized incomplete gamma.

use std::f64::consts::E;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Branch of the real Lambert W function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WBranch {
    /// `W₀`, defined on `[-1/e, ∞)`, returns `w >= -1`.
    Principal,
    /// `W₋₁`, defined on `[-1/e, 0)`, returns `w <= -1`.
    MinusOne,
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("lambert W argument {x} outside the domain of branch {branch:?}")]
pub struct DomainError {
    pub x: f64,
    pub branch: WBranch,
}

// 1/e split so that x + 1/e keeps full precision near the branch point.
const INV_E_HI: f64 = 0.367_879_441_171_442_33;
const INV_E_LO: f64 = -1.242_875_367_278_836_3e-17;

const MAX_ITER: usize = 50;
const BRANCH_SLACK: f64 = 1e-12;

/// Real Lambert W: the `w` on the requested branch with `w·e^w = x`.
///
/// Arguments up to `1e-12` below `-1/e` are treated as the branch point.
pub fn lambert_w(branch: WBranch, x: f64) -> Result<f64, DomainError> {
    let err = DomainError { x, branch };
    if x.is_nan() {
        return Err(err);
    }
    let dist = (x + INV_E_HI) + INV_E_LO;
    if dist < -BRANCH_SLACK {
        return Err(err);
    }
    if dist <= 0.0 {
        return Ok(-1.0);
    }
    match branch {
        WBranch::Principal => {
            if x == 0.0 {
                return Ok(0.0);
            }
            if x == f64::INFINITY {
                return Ok(f64::INFINITY);
            }
            Ok(halley(x, principal_guess(x, dist)))
        }
        WBranch::MinusOne => {
            if x >= 0.0 {
                return Err(err);
            }
            Ok(halley(x, minus_one_guess(x, dist)))
        }
    }
}

/// Series about the branch point in `p = ±sqrt(2(e·x + 1))`.
fn branch_series(p: f64) -> f64 {
    -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p - 43.0 / 540.0 * p.powi(4)
}

fn principal_guess(x: f64, dist: f64) -> f64 {
    if dist < 0.3 {
        branch_series((2.0 * E * dist).sqrt())
    } else if x < 3.0 {
        // Padé-style start, good on (-0.07, 3)
        x * (1.0 + 4.0 / 3.0 * x) / (1.0 + 7.0 / 3.0 * x + 5.0 / 6.0 * x * x)
    } else {
        let l1 = x.ln();
        let l2 = l1.ln();
        l1 - l2 + l2 / l1
    }
}

fn minus_one_guess(x: f64, dist: f64) -> f64 {
    if dist < 0.25 {
        branch_series(-(2.0 * E * dist).sqrt())
    } else {
        let l1 = (-x).ln();
        let l2 = (-l1).ln();
        l1 - l2 + l2 / l1
    }
}

fn halley(x: f64, mut w: f64) -> f64 {
    for _ in 0..MAX_ITER {
        let ew = w.exp();
        let f = w * ew - x;
        let wp1 = w + 1.0;
        if wp1 == 0.0 {
            break;
        }
        let denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1);
        if denom == 0.0 || !denom.is_finite() {
            break;
        }
        let step = f / denom;
        w -= step;
        if step.abs() < 1e-14 * (1.0 + w.abs()) {
            break;
        }
    }
    w
}

/// `W₀(e^y)` without forming `e^y`.
///
/// For `y >= 1` this solves `w + ln w = y` directly, which stays finite for
/// arguments far beyond the range of `f64::exp`.
pub fn lambert_w0_of_exp(y: f64) -> f64 {
    if y.is_nan() {
        return f64::NAN;
    }
    if y < 1.0 {
        // e^y < e, no overflow
        return halley(y.exp(), principal_guess(y.exp(), y.exp() + 1.0 / E));
    }
    if y == f64::INFINITY {
        return f64::INFINITY;
    }
    let mut w = if y < 3.0 { 1.0 + 0.5 * (y - 1.0) } else { y - y.ln() };
    for _ in 0..MAX_ITER {
        let g = w + w.ln() - y;
        let g1 = 1.0 + 1.0 / w;
        let g2 = -1.0 / (w * w);
        let step = g / (g1 - g * g2 / (2.0 * g1));
        w -= step;
        if step.abs() < 1e-15 * w.abs() {
            break;
        }
    }
    w
}

/// `W₋₁(-e^l)` for `l <= -1`, solving `w + ln(-w) = l` so that arguments
/// below the smallest positive `f64` are still resolved.
pub fn lambert_wm1_of_neg_exp(l: f64) -> Result<f64, DomainError> {
    if l.is_nan() || l > -1.0 + BRANCH_SLACK {
        return Err(DomainError {
            x: -l.exp(),
            branch: WBranch::MinusOne,
        });
    }
    if l >= -1.0 {
        return Ok(-1.0);
    }
    if l > -700.0 {
        return lambert_w(WBranch::MinusOne, -l.exp());
    }
    // u = -w solves u - ln u = -l with u > 1
    let t = -l;
    let mut u = t + t.ln();
    for _ in 0..MAX_ITER {
        let g = u - u.ln() - t;
        let g1 = 1.0 - 1.0 / u;
        let g2 = 1.0 / (u * u);
        let step = g / (g1 - g * g2 / (2.0 * g1));
        u -= step;
        if step.abs() < 1e-15 * u {
            break;
        }
    }
    Ok(-u)
}

/// Regularized lower incomplete gamma `P(n, z)` for integer shape `n >= 1`.
pub fn reg_lower_gamma_int(n: u32, z: f64) -> f64 {
    assert!(n >= 1, "shape must be a positive integer");
    if z <= 0.0 {
        return 0.0;
    }
    if z == f64::INFINITY {
        return 1.0;
    }
    if z < f64::from(n) {
        lower_series(n, z)
    } else {
        1.0 - upper_sum(n, z)
    }
}

/// Regularized upper incomplete gamma `Q(n, z) = 1 - P(n, z)`.
pub fn reg_upper_gamma_int(n: u32, z: f64) -> f64 {
    assert!(n >= 1, "shape must be a positive integer");
    if z <= 0.0 {
        return 1.0;
    }
    if z == f64::INFINITY {
        return 0.0;
    }
    if z < f64::from(n) {
        1.0 - lower_series(n, z)
    } else {
        upper_sum(n, z)
    }
}

/// `e^{-z} Σ_{j<n} z^j/j!`, accumulated in log space so large `z` cannot underflow early.
fn upper_sum(n: u32, z: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    for j in 1..n {
        term *= z / f64::from(j);
        sum += term;
    }
    (sum.ln() - z).exp()
}

/// `e^{-z} Σ_{j>=n} z^j/j!`; converges quickly for `z < n`.
fn lower_series(n: u32, z: f64) -> f64 {
    // first term z^n e^{-z} / n!
    let log_first = f64::from(n) * z.ln() - z - (1..=n).map(|j| f64::from(j).ln()).sum::<f64>();
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut j = n;
    loop {
        j += 1;
        term *= z / f64::from(j);
        sum += term;
        if term < 1e-17 * sum || j > n + 1000 {
            break;
        }
    }
    (log_first + sum.ln()).exp()
}
