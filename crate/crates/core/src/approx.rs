//! Closed-form approximation of the negative-binomial law around its mode.
//!
//! The log-mass is expanded to third order about the continuous mode
//! `n₀ = N(1 - s²) - ½`, with curvature `-1/σ²` and third derivative
//! `(1 + 2Ns²)/σ⁴`. The cubic term is kept as a first-order perturbation of a
//! Gaussian, which makes the density exactly normalized and gives closed
//! forms for the cdf and for quantiles.

use serde::Serialize;

use crate::error::Result;
use crate::negbin::CountModel;
use crate::probability::Probability;
use crate::specfun::{normal_cdf, normal_pdf, normal_quantile};

/// Parameters of the third-order expansion about the mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ApproxExpansion {
    /// Continuous mode location `n₀ = N(1 - s²) - ½`.
    pub mode_n0: f64,
    /// Leading-order mode `N(1 - s²)`, before the half-count shift.
    pub mode_leading: f64,
    /// `σ = √(N + s²N²)`.
    pub sigma: f64,
    /// Third-derivative coefficient `(1 + 2Ns²)/σ⁴`.
    pub cubic_coeff: f64,
    /// `1 + 2Ns²`.
    pub skew_factor: f64,
}

pub fn expansion(model: &CountModel) -> ApproxExpansion {
    let n = model.mean_count();
    let s2 = model.trsd() * model.trsd();
    let variance = model.variance();
    let skew_factor = 1.0 + 2.0 * n * s2;
    let mode_leading = n * (1.0 - s2);
    ApproxExpansion {
        mode_n0: mode_leading - 0.5,
        mode_leading,
        sigma: variance.sqrt(),
        cubic_coeff: skew_factor / (variance * variance),
        skew_factor,
    }
}

/// Value of the approximate density at a point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ApproxDensity {
    /// Density clamped at zero.
    pub value: f64,
    /// Unclamped Gaussian-times-cubic value; integrates to exactly one.
    pub raw: f64,
    /// Set when the cubic factor is negative, i.e. the expansion has broken
    /// down in the far tail.
    pub tail_invalid: bool,
}

/// Gaussian density about `n₀` with the cubic correction
/// `1 + (1/6)(1 + 2Ns²)σ⁻⁴(n - n₀)³`.
pub fn approx_pdf(n: f64, model: &CountModel) -> ApproxDensity {
    let e = expansion(model);
    let d = n - e.mode_n0;
    let gauss = normal_pdf(d / e.sigma) / e.sigma;
    let cubic = 1.0 + e.cubic_coeff * d * d * d / 6.0;
    let raw = gauss * cubic;
    ApproxDensity {
        value: raw.max(0.0),
        raw,
        tail_invalid: cubic < 0.0,
    }
}

/// Closed-form integral of [`approx_pdf`] up to `n`:
/// `Φ(z) - (1/6)(1 + 2Ns²)/σ · φ(z)(2 + z²)` with `z = (n - n₀)/σ`.
pub fn approx_cdf(n: f64, model: &CountModel) -> f64 {
    let e = expansion(model);
    let z = (n - e.mode_n0) / e.sigma;
    let v = normal_cdf(z) - e.skew_factor / (6.0 * e.sigma) * normal_pdf(z) * (2.0 + z * z);
    v.clamp(0.0, 1.0)
}

/// Discreteness correction `Δ = -½ + (1/6)(1 + 2Ns²)(2 + z_b²)`.
pub fn delta_correction(b: Probability, model: &CountModel) -> Result<f64> {
    let z = normal_quantile(b)?;
    Ok(delta_from_z(z, model))
}

fn delta_from_z(z: f64, model: &CountModel) -> f64 {
    -0.5 + expansion(model).skew_factor * (2.0 + z * z) / 6.0
}

/// A quantile estimate that may have been floored at zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Floored<T> {
    pub value: T,
    /// True when the unfloored estimate was negative. Such values come from
    /// the small-count region where the continuum model is only suggestive.
    pub floored: bool,
}

/// Integer quantile `1 + IntegerPart[n₀ + z_b σ + Δ]`, floored at 0.
/// `IntegerPart` truncates toward zero.
pub fn quantile_discrete(b: Probability, model: &CountModel) -> Result<Floored<u64>> {
    let z = normal_quantile(b)?;
    let e = expansion(model);
    let arg = e.mode_n0 + z * e.sigma + delta_from_z(z, model);
    let q = 1.0 + arg.trunc();
    Ok(if q < 0.0 {
        Floored {
            value: 0,
            floored: true,
        }
    } else {
        Floored {
            value: q as u64,
            floored: false,
        }
    })
}

/// Smooth quantile `N + z_b σ + (1/6)(z_b² - 1)(1 + 2Ns²)`, without flooring.
pub fn quantile_smooth_raw(b: Probability, model: &CountModel) -> Result<f64> {
    let z = normal_quantile(b)?;
    Ok(smooth_from_z(z, model))
}

pub(crate) fn smooth_from_z(z: f64, model: &CountModel) -> f64 {
    let e = expansion(model);
    model.mean_count() + z * e.sigma + (z * z - 1.0) * e.skew_factor / 6.0
}

/// Smooth quantile floored at zero.
pub fn quantile_smooth(b: Probability, model: &CountModel) -> Result<Floored<f64>> {
    let raw = quantile_smooth_raw(b, model)?;
    Ok(if raw < 0.0 {
        Floored {
            value: 0.0,
            floored: true,
        }
    } else {
        Floored {
            value: raw,
            floored: false,
        }
    })
}

/// Large-`N` limit of the normalized quantile `(n̄_b - N)/σ`:
/// `l_b = z_b + (1/3)(z_b² - 1)s`.
pub fn pivot_limit(b: Probability, trsd: f64) -> Result<f64> {
    let z = normal_quantile(b)?;
    Ok(pivot_limit_from_z(z, trsd))
}

pub(crate) fn pivot_limit_from_z(z: f64, trsd: f64) -> f64 {
    z + (z * z - 1.0) * trsd / 3.0
}
