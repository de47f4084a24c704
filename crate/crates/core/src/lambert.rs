//! Real branches of the Lambert W function, the inverse of `w e^w`.

use std::f64::consts::E;

use crate::error::{Error, Result};

const INV_E: f64 = 0.367_879_441_171_442_33;
const MAX_HALLEY_STEPS: usize = 50;

/// Real branch of W.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// W0, defined on [-1/e, inf), values >= -1.
    Principal,
    /// W-1, defined on [-1/e, 0), values <= -1.
    Negative,
}

/// Evaluates W on the requested branch.
///
/// A branch-specific starting point (branch-point series near -1/e,
/// logarithmic asymptotes elsewhere) is refined by Halley's method. If
/// Halley does not settle within 50 steps the root is bracketed and bisected.
pub fn lambert_w(branch: Branch, x: f64) -> Result<f64> {
    if x.is_nan() {
        return Err(Error::domain("lambert_w of NaN"));
    }
    // distance from the branch point, computed once
    let from_branch = x + INV_E;
    if from_branch < 0.0 {
        // -1/e is not representable; accept values within rounding of it
        if from_branch > -4.0 * f64::EPSILON * INV_E {
            return Ok(-1.0);
        }
        return Err(Error::domain(format!("lambert_w argument {x} is below -1/e")));
    }
    match branch {
        Branch::Principal => {
            if x == 0.0 {
                return Ok(0.0);
            }
            if x == f64::INFINITY {
                return Ok(f64::INFINITY);
            }
        }
        Branch::Negative => {
            if x >= 0.0 {
                return Err(Error::domain(format!("W-1 is defined on [-1/e, 0), got {x}")));
            }
        }
    }
    if from_branch == 0.0 {
        return Ok(-1.0);
    }

    let guess = initial_guess(branch, x, from_branch);
    let w = match halley(x, guess) {
        Some(w) => w,
        None => bisect(branch, x),
    };
    Ok(match branch {
        Branch::Principal => w.max(-1.0),
        Branch::Negative => w.min(-1.0),
    })
}

fn initial_guess(branch: Branch, x: f64, from_branch: f64) -> f64 {
    let near_branch_point = from_branch < 0.25;
    if near_branch_point {
        let p = (2.0 * E * from_branch).sqrt();
        let p = match branch {
            Branch::Principal => p,
            Branch::Negative => -p,
        };
        return branch_point_series(p);
    }
    match branch {
        Branch::Principal => {
            if x < 3.0 {
                // Winitzki's approximation
                let l = x.ln_1p();
                l * (1.0 - l.ln_1p() / (2.0 + l))
            } else {
                let l1 = x.ln();
                let l2 = l1.ln();
                l1 - l2 + l2 / l1
            }
        }
        Branch::Negative => {
            let l1 = (-x).ln();
            let l2 = (-l1).ln();
            l1 - l2 + l2 / l1
        }
    }
}

/// Series of W around -1/e in `p = +-sqrt(2(e x + 1))`.
fn branch_point_series(p: f64) -> f64 {
    const C: [f64; 7] = [
        -1.0,
        1.0,
        -1.0 / 3.0,
        11.0 / 72.0,
        -43.0 / 540.0,
        769.0 / 17280.0,
        -221.0 / 8505.0,
    ];
    C.iter().rev().fold(0.0, |acc, &c| acc * p + c)
}

fn halley(x: f64, mut w: f64) -> Option<f64> {
    for _ in 0..MAX_HALLEY_STEPS {
        let ew = w.exp();
        let f = w * ew - x;
        if f == 0.0 {
            return Some(w);
        }
        let wp1 = w + 1.0;
        if wp1 == 0.0 {
            return Some(w);
        }
        let denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1);
        let step = f / denom;
        if !step.is_finite() {
            return None;
        }
        w -= step;
        if step.abs() <= 4.0 * f64::EPSILON * (1.0 + w.abs()) {
            return Some(w);
        }
    }
    None
}

fn bisect(branch: Branch, x: f64) -> f64 {
    let f = |w: f64| w * w.exp() - x;
    // w e^w is increasing on [-1, inf) and decreasing on (-inf, -1]
    let (mut lo, mut hi) = match branch {
        Branch::Principal => {
            let mut hi = 1.0f64;
            while f(hi) < 0.0 {
                hi *= 2.0;
            }
            (-1.0, hi)
        }
        Branch::Negative => {
            let mut lo = -2.0f64;
            while f(lo) < 0.0 {
                lo *= 2.0;
            }
            (lo, -1.0)
        }
    };
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let below = f(mid) < 0.0;
        let increasing = branch == Branch::Principal;
        if below == increasing {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
