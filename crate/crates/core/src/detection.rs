//! Decision limit (LOD) and detection limit (DL) for counts on a filter
//! that also carries interfering background fibers.
//!
//! Densities are in mm⁻², areas in mm². The count on area `A` with true
//! analyte density `N'_a` and background density `N'_i` is negative
//! binomial with mean `(N'_a + N'_i)·A` and relative sd `s`. Limits are
//! reported on the bias-corrected scale, i.e. with `N'_i` subtracted.

use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::negbin::{nb_cdf, nb_quantile_exact, CountModel};
use crate::probability::Probability;
use crate::specfun::normal_cdf;

/// Upper end of the DL search, mm⁻².
pub const DL_SEARCH_MAX: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DetectionConfig {
    /// Counted filter area, mm².
    pub area: f64,
    /// Mean interfering-fiber density `N'_i`, mm⁻².
    pub background_density: f64,
    pub trsd: f64,
    /// False-positive rate.
    pub alpha: Probability,
    /// Required probability of exceeding LOD at the DL.
    pub beta_power: Probability,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        Self {
            area: 0.785,
            background_density: 2.5,
            trsd: 0.2,
            alpha: Probability::new(0.001).expect("valid"),
            beta_power: Probability::new(0.8).expect("valid"),
        }
    }
}

impl DetectionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.area > 0.0 && self.area.is_finite()) {
            return Err(domain(format!("area must be positive, got {}", self.area)));
        }
        if !(self.background_density >= 0.0 && self.background_density.is_finite()) {
            return Err(domain(format!(
                "background density must be nonnegative, got {}",
                self.background_density
            )));
        }
        if !(0.0..1.0).contains(&self.trsd) {
            return Err(domain(format!(
                "trsd must lie in [0, 1), got {}",
                self.trsd
            )));
        }
        let a = self.alpha.value();
        if !(a > 0.0 && a < 0.5) {
            return Err(domain(format!("alpha must lie in (0, 0.5), got {a}")));
        }
        let p = self.beta_power.value();
        if !(p > 0.5 && p < 1.0) {
            return Err(domain(format!(
                "detection power must lie in (0.5, 1), got {p}"
            )));
        }
        Ok(())
    }

    /// Count model on area `A` at analyte density `analyte`; `None` when the
    /// total mean is zero and every count is 0.
    fn count_model(&self, analyte: f64) -> Result<Option<CountModel>> {
        let mean = (analyte + self.background_density) * self.area;
        if mean == 0.0 {
            Ok(None)
        } else {
            CountModel::new(mean, self.trsd).map(Some)
        }
    }
}

/// Normal model `m = M + √(σ₀² + M²s²)·ε` used historically.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormalSignalModel {
    pub sigma0: f64,
    pub trsd: f64,
}

impl NormalSignalModel {
    pub fn new(sigma0: f64, trsd: f64) -> Result<Self> {
        if !(sigma0 >= 0.0 && sigma0.is_finite()) {
            return Err(domain(format!("sigma0 must be nonnegative, got {sigma0}")));
        }
        if !(0.0..1.0).contains(&trsd) {
            return Err(domain(format!("trsd must lie in [0, 1), got {trsd}")));
        }
        Ok(Self { sigma0, trsd })
    }
}

/// Standard deviation of the background density, `√(N'_i/A + s²N'_i²)`.
pub fn background_sd(cfg: &DetectionConfig) -> Result<f64> {
    cfg.validate()?;
    let ni = cfg.background_density;
    Ok((ni / cfg.area + cfg.trsd * cfg.trsd * ni * ni).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Lod {
    /// Bias-corrected decision limit, mm⁻².
    pub lod: f64,
    /// Background count quantile at `1 - alpha`.
    pub count_quantile: u64,
}

/// Decision limit `(n'_i A)_{1-α}/A - N'_i` from the exact background
/// count quantile.
pub fn lod_nb(cfg: &DetectionConfig) -> Result<Lod> {
    cfg.validate()?;
    let q = match cfg.count_model(0.0)? {
        Some(model) => nb_quantile_exact(cfg.alpha.complement(), &model)?,
        None => 0,
    };
    Ok(Lod {
        lod: q as f64 / cfg.area - cfg.background_density,
        count_quantile: q,
    })
}

/// Normal-model decision limit, `3σ₀`.
pub fn lod_normal(model: &NormalSignalModel) -> f64 {
    3.0 * model.sigma0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DetectionLimit {
    /// Analyte density `N'_a` at the detection limit, mm⁻².
    pub dl: f64,
    /// Mean count `(DL + N'_i)·A` at the limit.
    pub mean_count: f64,
    /// A count must exceed this to clear the LOD.
    pub count_threshold: u64,
    /// Achieved `Pr[count > threshold]` at the returned density.
    pub power: f64,
}

/// Probability that a filter with analyte density `analyte` reads above
/// LOD, i.e. that its count exceeds `threshold`.
pub fn detection_power(cfg: &DetectionConfig, analyte: f64, threshold: u64) -> Result<f64> {
    Ok(match cfg.count_model(analyte)? {
        Some(model) => 1.0 - nb_cdf(threshold, &model),
        None => 0.0,
    })
}

/// Smallest analyte density whose count exceeds the LOD threshold with
/// probability `beta_power`, by bisection on `[0, DL_SEARCH_MAX]`.
pub fn detection_limit_dl(cfg: &DetectionConfig) -> Result<DetectionLimit> {
    let lod = lod_nb(cfg)?;
    let threshold = lod.count_quantile;
    let target = cfg.beta_power.value();
    // Errors inside the closure cannot occur: validate() has run and
    // analyte is nonnegative.
    let shortfall = |na: f64| detection_power(cfg, na, threshold).unwrap_or(0.0) - target;
    if shortfall(DL_SEARCH_MAX) < 0.0 {
        return Err(Error::NoConvergence {
            routine: "detection_limit_dl",
            iterations: 0,
        });
    }
    let dl = if shortfall(0.0) >= 0.0 {
        0.0
    } else {
        // Power is increasing in N'_a; keep `hi` on the passing side.
        let (mut lo, mut hi) = (0.0, DL_SEARCH_MAX);
        while hi - lo > 1e-10 {
            let mid = 0.5 * (lo + hi);
            if shortfall(mid) >= 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    };
    Ok(DetectionLimit {
        dl,
        mean_count: (dl + cfg.background_density) * cfg.area,
        count_threshold: threshold,
        power: detection_power(cfg, dl, threshold)?,
    })
}

/// One point of the background-density distribution on the bias-corrected
/// scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BackgroundCdfPoint {
    pub count: u64,
    /// `count/A - N'_i`, mm⁻².
    pub density: f64,
    pub cdf_nb: f64,
    /// Normal cdf with sd [`background_sd`] at the same density.
    pub cdf_normal: f64,
}

/// Cumulative background distributions (negative binomial and its normal
/// counterpart) at every count up to the one where the NB cdf reaches
/// `1 - alpha/10`.
pub fn background_cdf_curve(cfg: &DetectionConfig) -> Result<Vec<BackgroundCdfPoint>> {
    let sd = background_sd(cfg)?;
    let Some(model) = cfg.count_model(0.0)? else {
        return Ok(vec![BackgroundCdfPoint {
            count: 0,
            density: 0.0,
            cdf_nb: 1.0,
            cdf_normal: 1.0,
        }]);
    };
    let last = nb_quantile_exact(Probability::open(1.0 - 0.1 * cfg.alpha.value())?, &model)?;
    Ok((0..=last)
        .map(|k| {
            let density = k as f64 / cfg.area - cfg.background_density;
            BackgroundCdfPoint {
                count: k,
                density,
                cdf_nb: nb_cdf(k, &model),
                cdf_normal: if sd > 0.0 {
                    normal_cdf(density / sd)
                } else {
                    1.0
                },
            }
        })
        .collect())
}
