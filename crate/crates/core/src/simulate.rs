//! Monte-Carlo coverage of the interval constructions.
//!
//! Each grid point draws `reps` counts from its own ChaCha8 stream
//! (`seed_from_u64(seed)` then `set_stream(point_index)`), so reports are
//! bit-identical regardless of how many threads run the grid. All methods at
//! a point see the same draws.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Poisson};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{domain, Result};
use crate::intervals::{
    interval, scatter_envelope, two_sided_envelope, EnvelopeBand, IntervalResult, Method,
};
use crate::negbin::CountModel;
use crate::probability::Probability;

pub const DEFAULT_REPS: usize = 10_000;

/// Means 5.1, 5.2, ..., 30.0.
pub fn default_grid() -> Vec<f64> {
    (51..=300).map(|k| k as f64 / 10.0).collect()
}

/// 26 means from 5 to 30 in unit steps.
pub fn coarse_grid() -> Vec<f64> {
    (5..=30).map(f64::from).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationPlan {
    pub grid: Vec<f64>,
    pub trsd: f64,
    pub reps: usize,
    /// Two-sided nominal level; each side is nominally `(1 - level)/2`.
    pub level: Probability,
    pub methods: Vec<Method>,
    pub seed: u64,
}

impl Default for SimulationPlan {
    fn default() -> Self {
        Self {
            grid: default_grid(),
            trsd: 0.2,
            reps: DEFAULT_REPS,
            level: Probability::new(0.90).expect("valid"),
            methods: vec![Method::Pivot],
            seed: 1,
        }
    }
}

impl SimulationPlan {
    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(domain("reps must be at least 1"));
        }
        if self.grid.is_empty() || self.grid.iter().any(|&n| !(n > 0.0 && n.is_finite())) {
            return Err(domain("grid must be a nonempty list of positive means"));
        }
        if self.methods.is_empty() {
            return Err(domain("at least one method is required"));
        }
        if !(0.0..1.0).contains(&self.trsd) {
            return Err(domain(format!(
                "trsd must lie in [0, 1), got {}",
                self.trsd
            )));
        }
        let l = self.level.value();
        if !(l > 0.0 && l < 1.0) {
            return Err(domain(format!("level must lie in (0, 1), got {l}")));
        }
        Ok(())
    }

    /// Nominal single-sided miss rate.
    pub fn nominal_tail(&self) -> f64 {
        0.5 * (1.0 - self.level.value())
    }
}

/// One draw from the count model: Poisson at `s = 0`, otherwise a Poisson
/// at a gamma-distributed rate with shape `1/s²` and mean `N`.
pub fn sample_nb<R: Rng + ?Sized>(model: &CountModel, rng: &mut R) -> u64 {
    let mean = model.mean_count();
    let lambda = if model.is_poisson() {
        mean
    } else {
        let shape = 1.0 / (model.trsd() * model.trsd());
        Gamma::new(shape, mean / shape)
            .expect("shape and scale are positive")
            .sample(rng)
    };
    if lambda <= 0.0 {
        return 0;
    }
    let draw: f64 = Poisson::new(lambda).expect("rate is positive").sample(rng);
    draw as u64
}

/// Coverage of one method at one grid point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointCoverage {
    pub mean_count: f64,
    pub method: Method,
    /// Fraction of draws with `N < LCL`.
    pub lower_miss: f64,
    /// Fraction of draws with `N > UCL`.
    pub upper_miss: f64,
    pub two_sided_miss: f64,
    /// Scatter bands for the three miss rates; `None` when undefined.
    pub lower_band: Option<EnvelopeBand>,
    pub upper_band: Option<EnvelopeBand>,
    pub two_sided_band: Option<EnvelopeBand>,
    /// Interval or envelope failure at this point; rates are then NaN.
    pub error: Option<String>,
}

impl PointCoverage {
    fn inside(rate: f64, band: &Option<EnvelopeBand>) -> bool {
        band.as_ref().is_some_and(|b| b.contains(rate))
    }

    pub fn lower_inside(&self) -> bool {
        Self::inside(self.lower_miss, &self.lower_band)
    }

    pub fn upper_inside(&self) -> bool {
        Self::inside(self.upper_miss, &self.upper_band)
    }

    pub fn two_sided_inside(&self) -> bool {
        Self::inside(self.two_sided_miss, &self.two_sided_band)
    }

    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageReport {
    pub plan: SimulationPlan,
    /// Grid-major, then in plan method order.
    pub points: Vec<PointCoverage>,
}

/// Grid-wide aggregates for one method over the points without errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoverageSummary {
    pub method: Method,
    pub points: usize,
    pub failed_points: usize,
    pub mean_lower_miss: f64,
    pub mean_upper_miss: f64,
    pub mean_two_sided_miss: f64,
    pub frac_lower_inside: f64,
    pub frac_upper_inside: f64,
    /// Lower and upper single-sided points pooled.
    pub frac_single_sided_inside: f64,
    pub frac_two_sided_inside: f64,
    /// Fraction of points whose two-sided miss rate is at most nominal.
    pub frac_two_sided_conservative: f64,
    /// Fraction of single-sided points (pooled) at most nominal.
    pub frac_single_sided_conservative: f64,
}

impl CoverageReport {
    pub fn for_method(&self, method: Method) -> impl Iterator<Item = &PointCoverage> {
        self.points.iter().filter(move |p| p.method == method)
    }

    pub fn summary(&self, method: Method) -> CoverageSummary {
        let all: Vec<_> = self.for_method(method).collect();
        let ok: Vec<_> = all.iter().filter(|p| p.is_ok()).collect();
        let n = ok.len() as f64;
        let mean = |f: &dyn Fn(&PointCoverage) -> f64| ok.iter().map(|p| f(p)).sum::<f64>() / n;
        let frac =
            |f: &dyn Fn(&PointCoverage) -> bool| ok.iter().filter(|p| f(p)).count() as f64 / n;
        let tail = self.plan.nominal_tail();
        let two_nominal = 1.0 - self.plan.level.value();
        CoverageSummary {
            method,
            points: ok.len(),
            failed_points: all.len() - ok.len(),
            mean_lower_miss: mean(&|p| p.lower_miss),
            mean_upper_miss: mean(&|p| p.upper_miss),
            mean_two_sided_miss: mean(&|p| p.two_sided_miss),
            frac_lower_inside: frac(&|p| p.lower_inside()),
            frac_upper_inside: frac(&|p| p.upper_inside()),
            frac_single_sided_inside: 0.5
                * (frac(&|p| p.lower_inside()) + frac(&|p| p.upper_inside())),
            frac_two_sided_inside: frac(&|p| p.two_sided_inside()),
            frac_two_sided_conservative: frac(&|p| p.two_sided_miss <= two_nominal),
            frac_single_sided_conservative: 0.5
                * (frac(&|p| p.lower_miss <= tail) + frac(&|p| p.upper_miss <= tail)),
        }
    }
}

struct Bands {
    lower: Option<EnvelopeBand>,
    upper: Option<EnvelopeBand>,
    two_sided: Option<EnvelopeBand>,
}

fn bands(mean: f64, s: f64, level: Probability) -> Result<Bands> {
    let b = Probability::open(0.5 * (1.0 + level.value()))?;
    // N < LCL when n lies above the b-quantile: miss rate scatters around 1 - b.
    let lower = scatter_envelope(mean, s, b).ok().map(|e| e.for_miss_rate());
    // N > UCL when n lies below the (1 - b)-quantile: around 1 - b directly.
    let upper = scatter_envelope(mean, s, b.complement()).ok();
    let two_sided = two_sided_envelope(mean, s, level)
        .ok()
        .map(|e| e.for_miss_rate());
    Ok(Bands {
        lower,
        upper,
        two_sided,
    })
}

fn run_point(plan: &SimulationPlan, index: usize, mean: f64) -> Vec<PointCoverage> {
    let failed = |method: Method, msg: String| PointCoverage {
        mean_count: mean,
        method,
        lower_miss: f64::NAN,
        upper_miss: f64::NAN,
        two_sided_miss: f64::NAN,
        lower_band: None,
        upper_band: None,
        two_sided_band: None,
        error: Some(msg),
    };
    let model = match CountModel::new(mean, plan.trsd) {
        Ok(m) => m,
        Err(e) => {
            return plan
                .methods
                .iter()
                .map(|&m| failed(m, e.to_string()))
                .collect()
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    rng.set_stream(index as u64);
    let counts: Vec<u64> = (0..plan.reps)
        .map(|_| sample_nb(&model, &mut rng))
        .collect();
    let max_count = counts.iter().copied().max().unwrap_or(0);
    let bands = bands(mean, plan.trsd, plan.level);

    plan.methods
        .iter()
        .map(|&method| {
            let table: Result<Vec<IntervalResult>> = (0..=max_count)
                .map(|n| interval(n, plan.trsd, plan.level, method))
                .collect();
            let table = match table {
                Ok(t) => t,
                Err(e) => return failed(method, e.to_string()),
            };
            let bands = match &bands {
                Ok(b) => b,
                Err(e) => return failed(method, e.to_string()),
            };
            let (mut lo, mut hi) = (0usize, 0usize);
            for &n in &counts {
                let ci = &table[n as usize];
                lo += usize::from(mean < ci.lower);
                hi += usize::from(mean > ci.upper);
            }
            let reps = plan.reps as f64;
            PointCoverage {
                mean_count: mean,
                method,
                lower_miss: lo as f64 / reps,
                upper_miss: hi as f64 / reps,
                two_sided_miss: (lo + hi) as f64 / reps,
                lower_band: bands.lower,
                upper_band: bands.upper,
                two_sided_band: bands.two_sided,
                error: None,
            }
        })
        .collect()
}

/// Runs every method of the plan at every grid point in parallel.
pub fn run_coverage(plan: &SimulationPlan) -> Result<CoverageReport> {
    plan.validate()?;
    let points = plan
        .grid
        .par_iter()
        .enumerate()
        .map(|(i, &mean)| run_point(plan, i, mean))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();
    Ok(CoverageReport {
        plan: plan.clone(),
        points,
    })
}
