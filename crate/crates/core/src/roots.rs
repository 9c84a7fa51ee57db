//! Bracketed scalar root finding shared by the quantile inversions.

use crate::error::{Error, Result};

const MAX_ITER: usize = 300;

/// Finds a root of an increasing function `f` inside `[lo, hi]` where
/// `f(lo) <= 0 <= f(hi)`, using Newton steps from `df` when they stay inside
/// the bracket and bisection otherwise.
pub(crate) fn newton_bisect<F, D>(f: F, df: D, mut lo: f64, mut hi: f64, x0: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let mut x = x0.clamp(lo, hi);
    for _ in 0..MAX_ITER {
        let fx = f(x);
        if fx == 0.0 {
            return Ok(x);
        }
        if fx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let slope = df(x);
        let newton = x - fx / slope;
        let next = if slope > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - x).abs() <= 4.0 * f64::EPSILON * next.abs().max(f64::MIN_POSITIVE)
            || hi - lo <= 4.0 * f64::EPSILON * hi.abs()
        {
            return Ok(next);
        }
        x = next;
    }
    Err(Error::NoConvergence {
        routine: "newton_bisect",
        iterations: MAX_ITER,
    })
}

/// Bisection for a sign change of `f` on `[lo, hi]`, to within `xtol`
/// absolute plus machine relative precision. Only the sign of `f` is used.
pub(crate) fn bisect<F>(f: F, mut lo: f64, mut hi: f64, xtol: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let lo_sign = f(lo) < 0.0;
    for _ in 0..MAX_ITER {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= xtol + 2.0 * f64::EPSILON * mid.abs() {
            return Ok(mid);
        }
        if (f(mid) < 0.0) == lo_sign {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::NoConvergence {
        routine: "bisect",
        iterations: MAX_ITER,
    })
}

/// Doubles `hi` until `f(hi) >= 0`, returning the expanded upper bound.
pub(crate) fn expand_upper<F>(f: F, mut hi: f64, limit: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let mut steps = 0;
    while f(hi) < 0.0 {
        hi *= 2.0;
        steps += 1;
        if hi > limit {
            return Err(Error::NoConvergence {
                routine: "expand_upper",
                iterations: steps,
            });
        }
    }
    Ok(hi)
}
