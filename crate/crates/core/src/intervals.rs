//! Confidence limits on the mean count `N` given a single observed count.
//!
//! Several constructions are provided:
//!
//! * **pivot**: treat `(n - N)/σ[N]` as having the fixed quantiles
//!   `l_b = z_b + (z_b² - 1)s/3` and solve the resulting quadratic in `N`;
//! * **direct**: solve the smooth quantile relation `n̄_b(N) = n` for `N`;
//! * **poisson closed form**: the direct route at `s = 0`, which is a
//!   quadratic in `√N`;
//! * **chi-square**: the classical Garwood interval for Poisson counts;
//! * **ogden**: the same quadratic as the pivot route with empirical
//!   constants in place of `l_b`.
//!
//! Discreteness of the counts means no construction attains its nominal
//! level exactly. [`scatter_envelope`] gives the approximate band within
//! which realized coverage scatters.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::approx::{pivot_limit_from_z, Floored};
use crate::error::{domain, Error, Result};
use crate::negbin::{rsd_of_count, variance};
use crate::probability::Probability;
use crate::roots;
use crate::specfun::{chi_square_quantile, normal_quantile};

/// Counts below this are flagged: the continuum model is only suggestive
/// there.
pub const SMALL_COUNT: u64 = 5;

/// Below this `s` the pivot is not accurate and [`two_sided`] falls back to
/// the direct route.
pub const PIVOT_MIN_TRSD: f64 = 0.2;

/// Empirical constants of the legacy limits: 2.0 in the lower limit and
/// 1.5 in the upper.
pub const OGDEN_LOWER: f64 = 2.0;
pub const OGDEN_UPPER: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Pivot,
    Direct,
    PoissonClosedForm,
    ChiSquare,
    Ogden,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Pivot,
        Method::Direct,
        Method::PoissonClosedForm,
        Method::ChiSquare,
        Method::Ogden,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Pivot => "pivot",
            Method::Direct => "direct",
            Method::PoissonClosedForm => "poisson_closed_form",
            Method::ChiSquare => "chi_square",
            Method::Ogden => "ogden",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        Method::ALL
            .into_iter()
            .find(|m| m.name() == key || (key == "poisson" && *m == Method::PoissonClosedForm))
            .ok_or_else(|| domain(format!("unknown interval method `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct IntervalFlags {
    /// Count below [`SMALL_COUNT`].
    pub small_count: bool,
    /// The lower limit had no root on the monotone branch and was set to 0.
    pub lower_floored: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntervalResult {
    pub lower: f64,
    pub upper: f64,
    /// Two-sided nominal level.
    pub level: Probability,
    pub method: Method,
    pub flags: IntervalFlags,
}

impl IntervalResult {
    pub fn contains(&self, mean_count: f64) -> bool {
        self.lower <= mean_count && mean_count <= self.upper
    }
}

/// Rounding applied to the pivot limits `l_b`, `l_{1-b}` before the
/// quadratic is solved.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PivotLimits {
    /// Use `l_b` at full precision.
    #[default]
    Exact,
    /// Round `l_b` to one decimal, e.g. (-1.8, 2.1) at the 97.5% level and
    /// s = 0.2. The default for [`confidence_table`].
    OneDecimal,
}

impl PivotLimits {
    fn apply(self, l: f64) -> f64 {
        match self {
            PivotLimits::Exact => l,
            PivotLimits::OneDecimal => (l * 10.0).round() / 10.0,
        }
    }
}

fn one_sided_level(b: Probability) -> Result<f64> {
    let v = b.value();
    if v > 0.5 && v < 1.0 {
        Ok(v)
    } else {
        Err(domain(format!(
            "one-sided level must lie in (0.5, 1), got {v}"
        )))
    }
}

fn check_trsd(s: f64) -> Result<()> {
    if (0.0..1.0).contains(&s) {
        Ok(())
    } else {
        Err(domain(format!("trsd must lie in [0, 1), got {s}")))
    }
}

/// Roots of `(n - N)² = l²(N + s²N²)`:
/// `(1 - l²s²)N² - (2n + l²)N + n² = 0`.
fn pivot_quadratic(n: f64, s: f64, l: f64) -> Result<(f64, f64)> {
    let l2 = l * l;
    let a = 1.0 - l2 * s * s;
    if !(a > 0.0) {
        return Err(Error::InvalidRegime(format!(
            "pivot limit {l:.4} with trsd {s} gives l²s² = {:.4} >= 1",
            l2 * s * s
        )));
    }
    let b = 2.0 * n + l2;
    // b² - 4an², expanded so that no cancellation occurs.
    let disc = l2 * (4.0 * n + l2 + 4.0 * s * s * n * n);
    debug_assert!(disc >= 0.0);
    let root = disc.sqrt();
    let upper = (b + root) / (2.0 * a);
    let lower = 2.0 * n * n / (b + root);
    Ok((lower, upper))
}

/// Lower limit from the pivot quadratic with an arbitrary constant `l`.
pub fn lcl_from_limit(n: u64, s: f64, l: f64) -> Result<f64> {
    check_trsd(s)?;
    Ok(pivot_quadratic(n as f64, s, l)?.0)
}

/// Upper limit from the pivot quadratic with an arbitrary constant `l`.
pub fn ucl_from_limit(n: u64, s: f64, l: f64) -> Result<f64> {
    check_trsd(s)?;
    Ok(pivot_quadratic(n as f64, s, l)?.1)
}

/// The pivot constants `(l_b, l_{1-b})` used for the lower and upper limit.
pub fn pivot_limit_pair(b: Probability, s: f64, mode: PivotLimits) -> Result<(f64, f64)> {
    let b = one_sided_level(b)?;
    let z = normal_quantile(Probability::open(b)?)?;
    Ok((
        mode.apply(pivot_limit_from_z(z, s)),
        mode.apply(pivot_limit_from_z(-z, s)),
    ))
}

/// One-sided lower confidence limit at level `b` from the pivot.
pub fn lcl_pivot(n: u64, s: f64, b: Probability) -> Result<f64> {
    let (l, _) = pivot_limit_pair(b, s, PivotLimits::Exact)?;
    lcl_from_limit(n, s, l)
}

/// One-sided upper confidence limit at level `b` from the pivot.
pub fn ucl_pivot(n: u64, s: f64, b: Probability) -> Result<f64> {
    let (_, l) = pivot_limit_pair(b, s, PivotLimits::Exact)?;
    ucl_from_limit(n, s, l)
}

/// Two-sided pivot interval with a choice of limit rounding.
pub fn pivot_interval(
    n: u64,
    s: f64,
    level: Probability,
    mode: PivotLimits,
) -> Result<IntervalResult> {
    let b = two_sided_tail(level)?;
    let (l_lo, l_hi) = pivot_limit_pair(b, s, mode)?;
    Ok(IntervalResult {
        lower: lcl_from_limit(n, s, l_lo)?,
        upper: ucl_from_limit(n, s, l_hi)?,
        level: two_sided_level(b),
        method: Method::Pivot,
        flags: IntervalFlags {
            small_count: n < SMALL_COUNT,
            lower_floored: false,
        },
    })
}

/// `b = (1 + level)/2`.
fn two_sided_tail(level: Probability) -> Result<Probability> {
    let level = level.require_open()?;
    Probability::open(0.5 * (1.0 + level.value()))
}

fn two_sided_level(b: Probability) -> Probability {
    Probability::new(2.0 * b.value() - 1.0).expect("b lies in (0.5, 1)")
}

/// Two-sided interval at `level`, routed by `s`: Poisson closed form at
/// `s = 0`, the direct route for `0 < s < 0.2` and the pivot otherwise.
/// The route taken is recorded in [`IntervalResult::method`].
pub fn two_sided(n: u64, s: f64, level: Probability) -> Result<IntervalResult> {
    check_trsd(s)?;
    let method = if s == 0.0 {
        Method::PoissonClosedForm
    } else if s < PIVOT_MIN_TRSD {
        Method::Direct
    } else {
        Method::Pivot
    };
    interval(n, s, level, method)
}

/// Two-sided interval at `level` by an explicit method. The Poisson-only
/// methods reject `s > 0`; the Ogden method uses its default constants.
pub fn interval(n: u64, s: f64, level: Probability, method: Method) -> Result<IntervalResult> {
    check_trsd(s)?;
    let poisson_only = |m: Method| {
        if s == 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidRegime(format!(
                "{m} intervals require trsd = 0, got {s}"
            )))
        }
    };
    match method {
        Method::Pivot => pivot_interval(n, s, level, PivotLimits::Exact),
        Method::Direct => direct_interval(n, s, level),
        Method::PoissonClosedForm => {
            poisson_only(method)?;
            poisson_interval(n, level)
        }
        Method::ChiSquare => {
            poisson_only(method)?;
            chi_square_ci(n, level)
        }
        Method::Ogden => {
            let mut r = ogden_ci(n, s, OGDEN_LOWER, OGDEN_UPPER)?;
            r.level = level;
            Ok(r)
        }
    }
}

/// `N + z√(N + s²N²) + (z² - 1)(1 + 2Ns²)/6` and its derivative in `N`.
fn smooth_quantile_in_mean(n_mean: f64, s: f64, z: f64) -> f64 {
    let s2 = s * s;
    n_mean + z * variance(n_mean, s).sqrt() + (z * z - 1.0) * (1.0 + 2.0 * n_mean * s2) / 6.0
}

fn smooth_quantile_slope(n_mean: f64, s: f64, z: f64) -> f64 {
    let s2 = s * s;
    let sigma = variance(n_mean, s).sqrt();
    1.0 + z * (1.0 + 2.0 * n_mean * s2) / (2.0 * sigma) + (z * z - 1.0) * s2 / 3.0
}

/// Solves `n̄_b(N; s) = n` for `N` on the increasing branch of `n̄_b`.
///
/// For `z_b < 0` the smooth quantile first decreases in `N` (the `zσ` term
/// dominates near zero) and then increases, so the root is taken to the
/// right of its minimum. When `n` lies below the branch minimum there is no
/// root and the result is 0 with the floor flag set.
pub fn ci_direct(n: u64, s: f64, b: Probability) -> Result<Floored<f64>> {
    check_trsd(s)?;
    let z = normal_quantile(b)?;
    direct_root(n as f64, s, z)
}

fn direct_root(n: f64, s: f64, z: f64) -> Result<Floored<f64>> {
    // Far-right slope of n̄_b(N) is 1 + s·l_b.
    let slope_inf = 1.0 + s * pivot_limit_from_z(z, s);
    if !(slope_inf > 0.0) {
        return Err(Error::InvalidRegime(format!(
            "smooth quantile is not increasing in N for z = {z:.4}, trsd = {s}"
        )));
    }
    let q = |m: f64| smooth_quantile_in_mean(m, s, z);
    let dq = |m: f64| smooth_quantile_slope(m, s, z);

    let branch_start = if z >= 0.0 {
        0.0
    } else {
        let hi = roots::expand_upper(dq, 1.0, 1e300)?;
        roots::bisect(dq, 0.0, hi, 1e-13 * hi)?
    };
    let f = |m: f64| q(m) - n;
    if f(branch_start) > 0.0 {
        return Ok(Floored {
            value: 0.0,
            floored: true,
        });
    }
    let hi = roots::expand_upper(f, (2.0 * n).max(branch_start).max(1.0), 1e300)?;
    let guess = n.clamp(branch_start, hi);
    let root = roots::newton_bisect(f, dq, branch_start, hi, guess)?;
    Ok(Floored {
        value: root,
        floored: false,
    })
}

fn direct_interval(n: u64, s: f64, level: Probability) -> Result<IntervalResult> {
    let b = two_sided_tail(level)?;
    let lower = ci_direct(n, s, b)?;
    let upper = ci_direct(n, s, b.complement())?;
    Ok(IntervalResult {
        lower: lower.value,
        upper: upper.value,
        level: two_sided_level(b),
        method: Method::Direct,
        flags: IntervalFlags {
            small_count: n < SMALL_COUNT,
            lower_floored: lower.floored,
        },
    })
}

/// Mean count whose smooth Poisson quantile at normal deviate `z` equals
/// `n`: `N = (-z/2 + ½√(z²/3 + 2/3 + 4n))²`, clamped to 0 when the
/// bracketed expression is negative.
pub fn poisson_mean_from_count(n: u64, z: f64) -> f64 {
    let root = -0.5 * z + 0.5 * (z * z / 3.0 + 2.0 / 3.0 + 4.0 * n as f64).sqrt();
    if root <= 0.0 {
        0.0
    } else {
        root * root
    }
}

/// Poisson interval `[N(n, z_b), N(n, z_{1-b})]` with `b = (1 + level)/2`.
pub fn poisson_interval(n: u64, level: Probability) -> Result<IntervalResult> {
    let b = two_sided_tail(level)?;
    let z = normal_quantile(b)?;
    let raw_lower = -0.5 * z + 0.5 * (z * z / 3.0 + 2.0 / 3.0 + 4.0 * n as f64).sqrt();
    Ok(IntervalResult {
        lower: poisson_mean_from_count(n, z),
        upper: poisson_mean_from_count(n, -z),
        level: two_sided_level(b),
        method: Method::PoissonClosedForm,
        flags: IntervalFlags {
            small_count: n < SMALL_COUNT,
            lower_floored: raw_lower <= 0.0,
        },
    })
}

/// Garwood interval: `χ²(2n; (1-level)/2)/2` to `χ²(2n+2; (1+level)/2)/2`.
pub fn chi_square_ci(n: u64, level: Probability) -> Result<IntervalResult> {
    let level = level.require_open()?;
    let lower_tail = Probability::open(0.5 * (1.0 - level.value()))?;
    let upper_tail = Probability::open(0.5 * (1.0 + level.value()))?;
    let lower = if n == 0 {
        0.0
    } else {
        0.5 * chi_square_quantile(2.0 * n as f64, lower_tail)?
    };
    let upper = 0.5 * chi_square_quantile(2.0 * (n as f64 + 1.0), upper_tail)?;
    Ok(IntervalResult {
        lower,
        upper,
        level,
        method: Method::ChiSquare,
        flags: IntervalFlags {
            small_count: n < SMALL_COUNT,
            lower_floored: false,
        },
    })
}

/// Legacy limits: the pivot quadratic with empirical constants,
/// `c_lower` in the lower limit and `c_upper` in the upper. Each side is a
/// one-sided 95% statement, so the recorded two-sided level is 0.90.
pub fn ogden_ci(n: u64, s: f64, c_lower: f64, c_upper: f64) -> Result<IntervalResult> {
    check_trsd(s)?;
    Ok(IntervalResult {
        lower: lcl_from_limit(n, s, c_lower)?,
        upper: ucl_from_limit(n, s, c_upper)?,
        level: Probability::new(0.90)?,
        method: Method::Ogden,
        flags: IntervalFlags {
            small_count: n < SMALL_COUNT,
            lower_floored: false,
        },
    })
}

/// Approximate band of discreteness scatter around a nominal level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnvelopeBand {
    /// Nominal level the realized rate scatters around.
    pub center: f64,
    pub half_width: f64,
    /// Mean count the band was evaluated at.
    pub mean_count: f64,
}

impl EnvelopeBand {
    pub fn lower(&self) -> f64 {
        self.center - self.half_width
    }

    pub fn upper(&self) -> f64 {
        self.center + self.half_width
    }

    pub fn contains(&self, rate: f64) -> bool {
        (rate - self.center).abs() <= self.half_width
    }

    /// The same band re-centred on the complementary (miss) rate.
    pub fn for_miss_rate(&self) -> Self {
        Self {
            center: 1.0 - self.center,
            ..*self
        }
    }
}

/// Scatter band for the realized one-sided level `b` at mean `N`:
///
/// * `s > 0`: half-width `½ / ((1 + z_b s/3)·√(2π)·e^{z_b²/2}·σ[N])`;
/// * `s = 0`: half-width `½ / ((√N + z_b/3)·√(2π)·e^{z_b²/2})`.
pub fn scatter_envelope(mean_count: f64, s: f64, b: Probability) -> Result<EnvelopeBand> {
    if !(mean_count > 0.0) {
        return Err(domain(format!("envelope requires N > 0, got {mean_count}")));
    }
    check_trsd(s)?;
    let z = normal_quantile(b)?;
    let gauss = (2.0 * std::f64::consts::PI).sqrt() * (0.5 * z * z).exp();
    let scale = if s > 0.0 {
        (1.0 + z * s / 3.0) * variance(mean_count, s).sqrt()
    } else {
        mean_count.sqrt() + z / 3.0
    };
    if !(scale > 0.0) {
        return Err(Error::InvalidRegime(format!(
            "scatter envelope undefined at N = {mean_count}, trsd = {s}, level = {b}"
        )));
    }
    Ok(EnvelopeBand {
        center: b.value(),
        half_width: 0.5 / (scale * gauss),
        mean_count,
    })
}

/// Two-sided band: the one-sided half-widths at `b` and `1 - b` summed,
/// centred on `level`.
pub fn two_sided_envelope(mean_count: f64, s: f64, level: Probability) -> Result<EnvelopeBand> {
    let b = two_sided_tail(level)?;
    let upper_side = scatter_envelope(mean_count, s, b)?;
    let lower_side = scatter_envelope(mean_count, s, b.complement())?;
    Ok(EnvelopeBand {
        center: level.value(),
        half_width: upper_side.half_width + lower_side.half_width,
        mean_count,
    })
}

/// One row of the single-count confidence table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TableRow {
    pub count: u64,
    /// Relative standard deviation of the count in percent; `None` at 0.
    pub rsd_percent: Option<f64>,
    pub lower: f64,
    pub upper: f64,
    pub small_count: bool,
}

impl TableRow {
    pub fn rsd_rounded(&self) -> Option<f64> {
        self.rsd_percent.map(f64::round)
    }

    pub fn lower_rounded(&self) -> f64 {
        self.lower.round()
    }

    pub fn upper_rounded(&self) -> f64 {
        self.upper.round()
    }
}

/// Counts tabulated by default.
pub const DEFAULT_TABLE_COUNTS: [u64; 9] = [1, 3, 5, 7, 10, 20, 50, 100, 200];

/// Two-sided pivot limits and count RSD for each count.
pub fn confidence_table(
    s: f64,
    level: Probability,
    counts: &[u64],
    mode: PivotLimits,
) -> Result<Vec<TableRow>> {
    counts
        .iter()
        .map(|&n| {
            let ci = pivot_interval(n, s, level, mode)?;
            Ok(TableRow {
                count: n,
                rsd_percent: if n >= 1 {
                    Some(rsd_of_count(n as f64, s)?)
                } else {
                    None
                },
                lower: ci.lower,
                upper: ci.upper,
                small_count: ci.flags.small_count,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::approx::quantile_smooth_raw;
    use crate::negbin::CountModel;
    use proptest::prelude::*;

    fn p(v: f64) -> Probability {
        Probability::open(v).unwrap()
    }

    const Z975: f64 = 1.959_963_984_540_054;

    #[test]
    fn pivot_limits_zero_count() {
        assert_eq!(lcl_pivot(0, 0.2, p(0.975)).unwrap(), 0.0);
        let l = pivot_limit_from_z(-Z975, 0.2);
        let u = ucl_pivot(0, 0.2, p(0.975)).unwrap();
        assert!((u - l * l / (1.0 - l * l * 0.04)).abs() < 1e-12);
    }

    #[test]
    fn pivot_limit_examples() {
        assert!((lcl_pivot(10, 0.2, p(0.975)).unwrap() - 4.836_195_512_367_674).abs() < 1e-9);
        assert!((ucl_pivot(10, 0.2, p(0.975)).unwrap() - 21.009_423_669_425).abs() < 1e-9);
        assert!((ucl_pivot(20, 0.2, p(0.975)).unwrap() - 36.937_216_758_063_96).abs() < 1e-9);
        assert_eq!(lcl_pivot(10, 0.2, p(0.975)).unwrap().round(), 5.0);
        assert_eq!(ucl_pivot(20, 0.2, p(0.975)).unwrap().round(), 37.0);
    }

    #[test]
    fn pivot_regime_and_level_errors() {
        // l ≈ 2.47 at b = 0.99, s = 0.45: l²s² > 1.
        assert!(matches!(
            lcl_pivot(10, 0.45, p(0.999)),
            Err(Error::InvalidRegime(_))
        ));
        assert!(lcl_pivot(10, 0.2, p(0.4)).is_err());
        assert!(ucl_pivot(10, 0.2, p(0.5)).is_err());
        assert!(lcl_from_limit(3, 0.5, 2.0).is_err());
    }

    #[test]
    fn two_sided_examples() {
        let r = two_sided(10, 0.2, p(0.95)).unwrap();
        assert_eq!(r.method, Method::Pivot);
        assert!((r.lower - 4.84).abs() < 0.005 && (r.upper - 21.01).abs() < 0.005);
        assert!((r.level.value() - 0.95).abs() < 1e-12);
        assert!(!r.flags.small_count);
        let r = two_sided(1, 0.2, p(0.95)).unwrap();
        assert!(r.flags.small_count);
        assert_eq!((r.lower.round(), r.upper.round()), (0.0, 6.0));
        let r = pivot_interval(50, 0.2, p(0.95), PivotLimits::OneDecimal).unwrap();
        assert_eq!((r.lower.round(), r.upper.round()), (32.0, 85.0));
        assert_eq!(two_sided(10, 0.1, p(0.95)).unwrap().method, Method::Direct);
        assert_eq!(
            two_sided(10, 0.0, p(0.95)).unwrap().method,
            Method::PoissonClosedForm
        );
    }

    #[test]
    fn table_reproduces_reference_rows() {
        let reference: [(u64, f64, f64, f64); 9] = [
            (1, 102.0, 0.0, 6.0),
            (3, 61.0, 1.0, 10.0),
            (5, 49.0, 2.0, 13.0),
            (7, 43.0, 3.0, 16.0),
            (10, 37.0, 5.0, 21.0),
            (20, 30.0, 11.0, 37.0),
            (50, 24.0, 32.0, 85.0),
            (100, 22.0, 67.0, 163.0),
            (200, 21.0, 137.0, 319.0),
        ];
        let rows =
            confidence_table(0.2, p(0.95), &DEFAULT_TABLE_COUNTS, PivotLimits::OneDecimal).unwrap();
        for (row, &(n, rsd, lo, hi)) in rows.iter().zip(&reference) {
            assert_eq!(row.count, n);
            assert_eq!(row.rsd_rounded(), Some(rsd), "n={n}");
            assert_eq!(row.lower_rounded(), lo, "n={n}");
            assert_eq!(row.upper_rounded(), hi, "n={n}");
        }
        assert!(confidence_table(0.2, p(0.95), &[], PivotLimits::Exact)
            .unwrap()
            .is_empty());
        let zero = confidence_table(0.2, p(0.95), &[0], PivotLimits::Exact).unwrap();
        assert_eq!(zero[0].rsd_percent, None);
        assert_eq!(zero[0].lower, 0.0);
    }

    #[test]
    fn poisson_closed_form_examples() {
        assert!((poisson_mean_from_count(10, Z975) - 5.100_140_6).abs() < 1e-6);
        assert!((poisson_mean_from_count(10, -Z975) - 17.794_165).abs() < 1e-5);
        for n in 0..50 {
            assert!((poisson_mean_from_count(n, 0.0) - (n as f64 + 1.0 / 6.0)).abs() < 1e-12);
        }
        assert_eq!(poisson_mean_from_count(0, 3.0), 0.0);
        let r = poisson_interval(0, p(0.95)).unwrap();
        assert!(r.flags.lower_floored && r.lower == 0.0);
    }

    #[test]
    fn direct_matches_poisson_closed_form() {
        // Root finding on n̄_b(N) = n against the quadratic in √N.
        for n in 0..=100u64 {
            for &b in &[0.025, 0.05, 0.95, 0.975] {
                let z = normal_quantile(p(b)).unwrap();
                let closed = poisson_mean_from_count(n, z);
                let root = ci_direct(n, 0.0, p(b)).unwrap();
                assert!(
                    (root.value - closed).abs() < 1e-9 * closed.max(1.0),
                    "n={n} b={b}"
                );
            }
        }
        let r = direct_interval(10, 0.0, p(0.95)).unwrap();
        let c = poisson_interval(10, p(0.95)).unwrap();
        assert!((r.lower - c.lower).abs() < 1e-9 && (r.upper - c.upper).abs() < 1e-9);
    }

    #[test]
    fn direct_close_to_pivot_at_trsd_02() {
        // Frozen from an independent root-finding oracle: direct limits at
        // n = 10 are (4.71, 20.86) against the pivot's (4.84, 21.01).
        let lo = ci_direct(10, 0.2, p(0.975)).unwrap().value;
        let hi = ci_direct(10, 0.2, p(0.025)).unwrap().value;
        assert!(
            (lo - 4.71).abs() < 0.01 && (hi - 20.86).abs() < 0.01,
            "{lo} {hi}"
        );
        assert!((lo - lcl_pivot(10, 0.2, p(0.975)).unwrap()).abs() < 0.2);
        assert!((hi - ucl_pivot(10, 0.2, p(0.975)).unwrap()).abs() < 0.2);
    }

    #[test]
    fn direct_floors_without_root() {
        // n̄_b(0) = (z² - 1)/6 > 0 for b = 0.975, so n = 0 has no root.
        let r = ci_direct(0, 0.2, p(0.975)).unwrap();
        assert!(r.floored && r.value == 0.0);
        assert!(
            direct_interval(0, 0.2, p(0.95))
                .unwrap()
                .flags
                .lower_floored
        );
    }

    #[test]
    fn direct_solves_smooth_quantile() {
        for &s in &[0.05, 0.2, 0.4] {
            for n in [1u64, 5, 20, 100] {
                for &b in &[0.05, 0.975] {
                    let r = ci_direct(n, s, p(b)).unwrap();
                    if r.floored {
                        continue;
                    }
                    let m = CountModel::new(r.value, s).unwrap();
                    let q = quantile_smooth_raw(p(b), &m).unwrap();
                    assert!((q - n as f64).abs() < 1e-8, "s={s} n={n} b={b}");
                }
            }
        }
    }

    #[test]
    fn chi_square_examples() {
        assert_eq!(chi_square_ci(0, p(0.95)).unwrap().lower, 0.0);
        let r = chi_square_ci(10, p(0.95)).unwrap();
        assert!((r.lower - 4.795_388_696_132_434).abs() < 1e-8);
        assert!((r.upper - 18.390_356_042_017_78).abs() < 1e-8);
    }

    #[test]
    fn chi_square_brackets_poisson_closed_form() {
        for n in 0..=100u64 {
            let chi = chi_square_ci(n, p(0.95)).unwrap();
            let pois = poisson_interval(n, p(0.95)).unwrap();
            let lower_ok = chi.lower <= pois.lower + 0.5;
            let upper_ok = chi.upper >= pois.upper - 0.5;
            assert!(lower_ok && upper_ok, "n={n}: {chi:?} vs {pois:?}");
        }
    }

    #[test]
    fn ogden_examples() {
        let r = ogden_ci(10, 0.2, OGDEN_LOWER, OGDEN_UPPER).unwrap();
        // Direct evaluation of the two quadratics.
        assert!((r.lower - 5.064_325_366_172_817).abs() < 1e-9);
        assert!((r.upper - 18.515_523_704_316_106).abs() < 1e-9);
        assert_eq!(ogden_ci(0, 0.2, 2.0, 1.5).unwrap().lower, 0.0);
        let (l_lo, l_hi) = pivot_limit_pair(p(0.975), 0.2, PivotLimits::Exact).unwrap();
        let o = ogden_ci(10, 0.2, l_lo, l_hi).unwrap();
        assert_eq!(o.lower, lcl_pivot(10, 0.2, p(0.975)).unwrap());
        assert_eq!(o.upper, ucl_pivot(10, 0.2, p(0.975)).unwrap());
    }

    #[test]
    fn method_round_trips_through_names() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert_eq!("chi-square".parse::<Method>().unwrap(), Method::ChiSquare);
        assert_eq!(
            "poisson".parse::<Method>().unwrap(),
            Method::PoissonClosedForm
        );
        assert!("bayes".parse::<Method>().is_err());
        assert!(interval(3, 0.2, p(0.95), Method::ChiSquare).is_err());
    }

    #[test]
    fn envelope_examples() {
        let e = scatter_envelope(10.0, 0.2, p(0.95)).unwrap();
        assert!((e.half_width - 0.012_420_126_942_805_99).abs() < 1e-6);
        let e = scatter_envelope(10.0, 0.0, p(0.95)).unwrap();
        assert!((e.half_width - 0.013_897_575_993_509_22).abs() < 1e-6);
        let far = scatter_envelope(1e8, 0.2, p(0.95)).unwrap();
        assert!(far.half_width < 1e-8);
        let two = two_sided_envelope(10.0, 0.2, p(0.90)).unwrap();
        let a = scatter_envelope(10.0, 0.2, p(0.95)).unwrap().half_width;
        let b = scatter_envelope(10.0, 0.2, p(0.05)).unwrap().half_width;
        assert!((two.half_width - (a + b)).abs() < 1e-15);
        assert!((two.center - 0.90).abs() < 1e-15);
        assert!(e.for_miss_rate().contains(0.05));
        assert!(scatter_envelope(0.0, 0.2, p(0.95)).is_err());
    }

    #[test]
    fn envelope_decreasing_in_mean() {
        for &s in &[0.0, 0.2, 0.4] {
            let mut prev = f64::INFINITY;
            for i in 1..300 {
                let hw = scatter_envelope(5.0 + i as f64 * 0.1, s, p(0.05))
                    .unwrap()
                    .half_width;
                assert!(hw > 0.0 && hw < prev);
                prev = hw;
            }
        }
    }

    #[test]
    fn pivot_inversion_recovers_count() {
        for n in 20..=400u64 {
            let lcl = lcl_pivot(n, 0.2, p(0.975)).unwrap();
            let m = CountModel::new(lcl, 0.2).unwrap();
            let q = quantile_smooth_raw(p(0.975), &m).unwrap();
            assert!(((q - n as f64) / n as f64).abs() < 0.02, "n={n}: {q}");
        }
    }

    proptest! {
        #[test]
        fn limits_straddle_count(n in 1u64..5000, s in 0.0f64..0.45) {
            let lo = lcl_pivot(n, s, p(0.95)).unwrap();
            let hi = ucl_pivot(n, s, p(0.95)).unwrap();
            prop_assert!(lo < n as f64 && (n as f64) < hi);
        }

        #[test]
        fn limits_nondecreasing_in_count(n in 0u64..5000, s in 0.0f64..0.4) {
            prop_assert!(lcl_pivot(n + 1, s, p(0.975)).unwrap() >= lcl_pivot(n, s, p(0.975)).unwrap());
            prop_assert!(ucl_pivot(n + 1, s, p(0.975)).unwrap() >= ucl_pivot(n, s, p(0.975)).unwrap());
        }
    }
}
