//! Exact negative-binomial law in the (mean, relative standard deviation)
//! parameterization used for fiber counts.
//!
//! A [`CountModel`] with mean `N` and large-count relative standard deviation
//! `s` has variance `N + s²N²`. For `s > 0` it is the negative binomial with
//! `p = Ns²/(1 + Ns²)` and `r = 1/s²`; `s = 0` is the Poisson law and is
//! evaluated on its own branch since `r` diverges there.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::probability::Probability;
use crate::specfun::ln_gamma_pos;

/// Counts beyond `N + TAIL_SIGMAS·σ` are never visited by summation.
const TAIL_SIGMAS: f64 = 20.0;
/// Summation also stops once the remaining tail mass is below this.
pub const TAIL_EPS: f64 = 1e-12;

/// Mean count `N` and true relative standard deviation `s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountModel {
    mean_count: f64,
    trsd: f64,
}

impl CountModel {
    pub fn new(mean_count: f64, trsd: f64) -> Result<Self> {
        if !(mean_count > 0.0) || !mean_count.is_finite() {
            return Err(domain(format!(
                "mean count must be finite and > 0, got {mean_count}"
            )));
        }
        if !(0.0..1.0).contains(&trsd) {
            return Err(domain(format!("trsd must lie in [0, 1), got {trsd}")));
        }
        Ok(Self { mean_count, trsd })
    }

    pub fn poisson(mean_count: f64) -> Result<Self> {
        Self::new(mean_count, 0.0)
    }

    #[inline]
    pub fn mean_count(&self) -> f64 {
        self.mean_count
    }

    #[inline]
    pub fn trsd(&self) -> f64 {
        self.trsd
    }

    #[inline]
    pub fn is_poisson(&self) -> bool {
        self.trsd == 0.0
    }

    /// `σ² = N + s²N²`.
    #[inline]
    pub fn variance(&self) -> f64 {
        variance(self.mean_count, self.trsd)
    }

    #[inline]
    pub fn sd(&self) -> f64 {
        self.variance().sqrt()
    }

    /// Classical (p, r) parameters. Fails for the Poisson model.
    pub fn to_nb_params(&self) -> Result<NBParams> {
        if self.is_poisson() {
            return Err(Error::DegenerateModel);
        }
        let ns2 = self.mean_count * self.trsd * self.trsd;
        Ok(NBParams {
            p: ns2 / (1.0 + ns2),
            q: 1.0 / (1.0 + ns2),
            r: 1.0 / (self.trsd * self.trsd),
        })
    }

    /// Last count that exact summation will visit.
    pub(crate) fn summation_cap(&self) -> u64 {
        (self.mean_count + TAIL_SIGMAS * self.sd()).ceil() as u64 + 10
    }
}

/// `N + s²N²`.
#[inline]
pub fn variance(mean_count: f64, trsd: f64) -> f64 {
    mean_count + trsd * trsd * mean_count * mean_count
}

/// Negative-binomial parameters as in `P[n] = C(n+r-1, n) (1-p)^r p^n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawNBParams", into = "RawNBParams")]
pub struct NBParams {
    p: f64,
    /// `1 - p`, held separately so that `p` near 1 keeps full precision.
    q: f64,
    r: f64,
}

#[derive(Serialize, Deserialize)]
struct RawNBParams {
    p: f64,
    r: f64,
}

impl TryFrom<RawNBParams> for NBParams {
    type Error = Error;

    fn try_from(raw: RawNBParams) -> Result<Self> {
        NBParams::new(raw.p, raw.r)
    }
}

impl From<NBParams> for RawNBParams {
    fn from(v: NBParams) -> Self {
        RawNBParams { p: v.p, r: v.r }
    }
}

impl NBParams {
    pub fn new(p: f64, r: f64) -> Result<Self> {
        if !(p > 0.0 && p < 1.0) {
            return Err(domain(format!("p must lie in (0, 1), got {p}")));
        }
        if !(r > 0.0) || !r.is_finite() {
            return Err(domain(format!("r must be finite and > 0, got {r}")));
        }
        Ok(Self { p, q: 1.0 - p, r })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    /// `pr / (1 - p)`.
    pub fn mean(&self) -> f64 {
        self.p * self.r / self.q
    }

    /// `pr / (1 - p)²`.
    pub fn variance(&self) -> f64 {
        self.p * self.r / (self.q * self.q)
    }

    /// Back to (N, s). Fails when `r <= 1`, i.e. `s >= 1`.
    pub fn to_count_model(&self) -> Result<CountModel> {
        CountModel::new(self.mean(), self.r.sqrt().recip())
    }
}

impl TryFrom<CountModel> for NBParams {
    type Error = Error;

    fn try_from(model: CountModel) -> Result<Self> {
        model.to_nb_params()
    }
}

/// Free-function form of [`CountModel::to_nb_params`].
pub fn to_nb_params(model: &CountModel) -> Result<NBParams> {
    model.to_nb_params()
}

/// Relative standard deviation of a single count, in percent:
/// `100·√(n + s²n²)/n`.
pub fn rsd_of_count(n: f64, trsd: f64) -> Result<f64> {
    if !(n >= 1.0) {
        return Err(domain(format!("rsd_of_count requires n >= 1, got {n}")));
    }
    Ok(100.0 * variance(n, trsd).sqrt() / n)
}

/// `ln P[n]`.
pub fn nb_ln_pmf(n: u64, model: &CountModel) -> f64 {
    let nf = n as f64;
    let mean = model.mean_count;
    if model.is_poisson() {
        return nf * mean.ln() - mean - ln_gamma_pos(nf + 1.0);
    }
    let s2 = model.trsd * model.trsd;
    let r = 1.0 / s2;
    let ns2 = mean * s2;
    // ln p = ln(Ns²) - ln(1 + Ns²), ln(1 - p) = -ln(1 + Ns²).
    let ln_1p = ns2.ln_1p();
    let ln_coeff = ln_gamma_pos(nf + r) - ln_gamma_pos(r) - ln_gamma_pos(nf + 1.0);
    let ln_p_term = if n == 0 { 0.0 } else { nf * (ns2.ln() - ln_1p) };
    ln_coeff - r * ln_1p + ln_p_term
}

/// Probability mass at count `n`.
pub fn nb_pmf(n: u64, model: &CountModel) -> f64 {
    nb_ln_pmf(n, model).exp()
}

/// `Pr[count <= n]` by direct summation of the mass function.
pub fn nb_cdf(n: u64, model: &CountModel) -> f64 {
    let mut acc = 0.0;
    for k in 0..=n.min(model.summation_cap()) {
        acc += nb_pmf(k, model);
        if 1.0 - acc < TAIL_EPS {
            break;
        }
    }
    acc.min(1.0)
}

/// Cumulative probabilities `Pr[count <= k]` for `k = 0..`, stopping once the
/// tail is below [`TAIL_EPS`] or the summation cap is reached.
pub fn nb_cdf_table(model: &CountModel) -> Vec<f64> {
    let cap = model.summation_cap();
    let mut out = Vec::new();
    let mut acc = 0.0;
    for k in 0..=cap {
        acc += nb_pmf(k, model);
        out.push(acc.min(1.0));
        if 1.0 - acc < TAIL_EPS {
            break;
        }
    }
    out
}

/// Smallest count `n` with `Pr[count <= n] >= b`.
pub fn nb_quantile_exact(b: Probability, model: &CountModel) -> Result<u64> {
    let b = b.require_open()?.value();
    let cap = model.summation_cap();
    let mut acc = 0.0;
    for k in 0..=cap {
        acc += nb_pmf(k, model);
        if acc >= b {
            return Ok(k);
        }
    }
    Err(Error::NoConvergence {
        routine: "nb_quantile_exact",
        iterations: cap as usize + 1,
    })
}

/// `(n - N) / √(N + s²N²)`.
pub fn pivot(n: f64, mean_count: f64, trsd: f64) -> Result<f64> {
    if !(mean_count > 0.0) {
        return Err(domain(format!("pivot requires N > 0, got {mean_count}")));
    }
    Ok((n - mean_count) / variance(mean_count, trsd).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn model(n: f64, s: f64) -> CountModel {
        CountModel::new(n, s).unwrap()
    }

    fn p(v: f64) -> Probability {
        Probability::open(v).unwrap()
    }

    /// Mean and variance by summing the mass function until the tail is
    /// below `1e-12`.
    fn summed_moments(m: &CountModel) -> (f64, f64) {
        let (mut mass, mut m1, mut m2) = (0.0, 0.0, 0.0);
        let mut k = 0u64;
        while 1.0 - mass >= 1e-12 || k < 5 {
            let w = nb_pmf(k, m);
            let kf = k as f64;
            mass += w;
            m1 += kf * w;
            m2 += kf * kf * w;
            k += 1;
        }
        (m1, m2 - m1 * m1)
    }

    #[test]
    fn model_validation() {
        assert!(CountModel::new(0.0, 0.2).is_err());
        assert!(CountModel::new(-1.0, 0.2).is_err());
        assert!(CountModel::new(5.0, 1.0).is_err());
        assert!(CountModel::new(5.0, -0.1).is_err());
        assert!(CountModel::new(f64::INFINITY, 0.2).is_err());
        assert!(CountModel::new(5.0, 0.0).unwrap().is_poisson());
    }

    #[test]
    fn nb_params_examples() {
        let a = model(5.0, 0.2).to_nb_params().unwrap();
        assert!((a.p() - 1.0 / 6.0).abs() < 1e-15);
        assert!((a.r() - 25.0).abs() < 1e-12);
        assert!((a.mean() - 5.0).abs() < 1e-12);
        let b = model(10.0, 0.2).to_nb_params().unwrap();
        assert!((b.p() - 2.0 / 7.0).abs() < 1e-15);
        assert!((b.r() - 25.0).abs() < 1e-12);
        assert!((b.variance() - 14.0).abs() < 1e-12);
        assert_eq!(model(5.0, 0.0).to_nb_params(), Err(Error::DegenerateModel));
        // Poisson limit: p -> 0 with the mean held at N.
        for &s in &[1e-2, 1e-3, 1e-4] {
            let nb = model(7.0, s).to_nb_params().unwrap();
            assert!(nb.p() < 7.0 * s * s * 1.0001);
            assert!((nb.mean() - 7.0).abs() < 1e-9);
        }
    }

    #[test]
    fn nb_params_validation() {
        assert!(NBParams::new(0.0, 1.0).is_err());
        assert!(NBParams::new(1.0, 1.0).is_err());
        assert!(NBParams::new(0.5, 0.0).is_err());
        // r <= 1 corresponds to s >= 1, outside the count model.
        assert!(NBParams::new(0.5, 0.5).unwrap().to_count_model().is_err());
    }

    #[test]
    fn variance_examples() {
        assert_eq!(model(3.0, 0.0).variance(), 3.0);
        assert!((model(10.0, 0.2).variance() - 14.0).abs() < 1e-12);
        assert!((model(5.0, 0.2).variance() - 6.0).abs() < 1e-12);
    }

    #[test]
    fn rsd_examples() {
        assert_eq!(rsd_of_count(1.0, 0.2).unwrap().round(), 102.0);
        assert_eq!(rsd_of_count(10.0, 0.2).unwrap().round(), 37.0);
        assert!((rsd_of_count(1e9, 0.2).unwrap() - 20.0).abs() < 1e-3);
        assert!(rsd_of_count(0.5, 0.2).is_err());
    }

    #[test]
    fn pmf_at_zero_is_closed_form() {
        let got = nb_pmf(0, &model(5.0, 0.2));
        let expect = (5.0f64 / 6.0).powi(25);
        assert!((got - expect).abs() < 1e-15);
        assert!((got - 0.010_48).abs() < 1e-5);
    }

    #[test]
    fn pmf_matches_closed_form_binomial_coefficient() {
        // r = 25 is an integer, so C(n + 24, n) can be built exactly.
        let m = model(5.0, 0.2);
        let (pp, r) = (1.0 / 6.0, 25.0);
        let mut coeff = 1.0;
        for n in 0..40u64 {
            if n > 0 {
                coeff *= (n as f64 + r - 1.0) / n as f64;
            }
            let expect = coeff * (1.0f64 - pp).powf(r) * pp.powi(n as i32);
            assert!(
                (nb_pmf(n, &m) - expect).abs() <= 1e-13 * expect.max(1e-300),
                "n={n}"
            );
        }
    }

    #[test]
    fn poisson_branch_matches_poisson_pmf() {
        for &mean in &[0.5, 1.0, 4.0, 17.5, 50.0] {
            let m = model(mean, 0.0);
            let mut pois = (-mean).exp();
            for n in 0..=200u64 {
                if n > 0 {
                    pois *= mean / n as f64;
                }
                assert!((nb_pmf(n, &m) - pois).abs() < 1e-12, "N={mean} n={n}");
            }
        }
    }

    #[test]
    fn small_trsd_approaches_poisson() {
        let pois = model(20.0, 0.0);
        let near = model(20.0, 1e-4);
        for n in 0..60 {
            assert!((nb_pmf(n, &pois) - nb_pmf(n, &near)).abs() < 1e-6);
        }
    }

    #[test]
    fn moments_on_grid() {
        for &s in &[0.0, 0.2, 0.4] {
            for n in 1..=100 {
                let m = model(n as f64, s);
                let (mean, var) = summed_moments(&m);
                assert!(
                    ((mean - m.mean_count()) / m.mean_count()).abs() < 1e-6,
                    "N={n} s={s}"
                );
                assert!(
                    ((var - m.variance()) / m.variance()).abs() < 1e-6,
                    "N={n} s={s}"
                );
            }
        }
    }

    #[test]
    fn normalization() {
        for &(n, s) in &[(0.3, 0.0), (5.0, 0.2), (25.0, 0.4), (100.0, 0.9)] {
            let m = model(n, s);
            let total: f64 = (0..=m.summation_cap()).map(|k| nb_pmf(k, &m)).sum();
            assert!((total - 1.0).abs() < 1e-9, "N={n} s={s}: {total}");
        }
    }

    #[test]
    fn cdf_examples() {
        let m = model(1.9625, 0.2);
        assert_eq!(nb_cdf(0, &m), nb_pmf(0, &m));
        assert!(nb_cdf(7, &m) < 0.999);
        assert!(nb_cdf(8, &m) >= 0.999);
        let pois = model(4.0, 0.0);
        assert!((nb_cdf(7, &pois) - 0.948_866_384_207_152_7).abs() < 1e-12);
        let table = nb_cdf_table(&m);
        for (k, &c) in table.iter().enumerate() {
            assert!((c - nb_cdf(k as u64, &m)).abs() < 1e-15);
        }
        assert!(nb_cdf(10_000, &m) > 1.0 - 1e-12);
    }

    #[test]
    fn quantile_examples() {
        assert_eq!(nb_quantile_exact(p(0.999), &model(1.9625, 0.2)).unwrap(), 8);
        assert_eq!(nb_quantile_exact(p(0.95), &model(4.0, 0.0)).unwrap(), 8);
        assert_eq!(nb_quantile_exact(p(1e-9), &model(4.0, 0.2)).unwrap(), 0);
        assert!(nb_quantile_exact(Probability::new(1.0).unwrap(), &model(4.0, 0.2)).is_err());
        // Beyond what the summation cap can resolve.
        assert!(matches!(
            nb_quantile_exact(p(1.0 - 1e-15), &model(4.0, 0.0)),
            Err(Error::NoConvergence { .. })
        ));
    }

    #[test]
    fn pivot_examples() {
        assert_eq!(pivot(10.0, 10.0, 0.2).unwrap(), 0.0);
        assert!((pivot(20.0, 10.0, 0.2).unwrap() - 10.0 / 14f64.sqrt()).abs() < 1e-15);
        assert!((pivot(9.0 + 3.0, 9.0, 0.0).unwrap() - 1.0).abs() < 1e-15);
        assert!(pivot(1.0, 0.0, 0.2).is_err());
    }

    proptest! {
        #[test]
        fn params_round_trip(n in 0.01f64..1e4, s in 0.01f64..0.99) {
            let m = model(n, s);
            let back = m.to_nb_params().unwrap().to_count_model().unwrap();
            prop_assert!(((back.mean_count() - n) / n).abs() < 1e-12);
            prop_assert!(((back.trsd() - s) / s).abs() < 1e-12);
            let nb = m.to_nb_params().unwrap();
            prop_assert!(((nb.variance() - m.variance()) / m.variance()).abs() < 1e-12);
        }

        #[test]
        fn quantile_monotone_in_level(n in 0.5f64..80.0, s in prop::sample::select(vec![0.0, 0.2, 0.4]),
                                      b1 in 0.001f64..0.999, b2 in 0.001f64..0.999) {
            let m = model(n, s);
            let (lo, hi) = if b1 <= b2 { (b1, b2) } else { (b2, b1) };
            prop_assert!(nb_quantile_exact(p(lo), &m).unwrap() <= nb_quantile_exact(p(hi), &m).unwrap());
        }

        #[test]
        fn quantile_monotone_in_mean(n1 in 0.5f64..80.0, n2 in 0.5f64..80.0,
                                     s in prop::sample::select(vec![0.0, 0.2, 0.4]), b in 0.01f64..0.99) {
            let (lo, hi) = if n1 <= n2 { (n1, n2) } else { (n2, n1) };
            prop_assert!(nb_quantile_exact(p(b), &model(lo, s)).unwrap()
                <= nb_quantile_exact(p(b), &model(hi, s)).unwrap());
        }

        #[test]
        fn cdf_monotone(n in 0.1f64..50.0, s in 0.0f64..0.6, k in 0u64..200) {
            let m = model(n, s);
            prop_assert!(nb_cdf(k + 1, &m) >= nb_cdf(k, &m));
        }
    }
}
