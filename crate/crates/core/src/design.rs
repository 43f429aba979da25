//! Sampling designs, Horvitz–Thompson estimation and design variances.

use itertools::Itertools;
use rand::Rng;

use crate::error::{Error, Result};
use crate::estimators::EstimatorKind;

/// Largest number of samples [`enumerate_srswor`] will visit.
pub const ENUMERATION_LIMIT: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DesignKind {
    /// Simple random sampling without replacement of fixed size `n`.
    Srswor { n: usize },
    /// Inclusion probabilities supplied with the sample.
    External,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SurveyDesign {
    population_size: usize,
    kind: DesignKind,
}

impl SurveyDesign {
    pub fn srswor(population_size: usize, n: usize) -> Result<Self> {
        if n == 0 || n > population_size {
            return Err(Error::InvalidParameter(format!(
                "sample size {n} must be in 1..={population_size}"
            )));
        }
        Ok(Self {
            population_size,
            kind: DesignKind::Srswor { n },
        })
    }

    pub fn external(population_size: usize) -> Self {
        Self {
            population_size,
            kind: DesignKind::External,
        }
    }

    pub fn population_size(&self) -> usize {
        self.population_size
    }

    pub fn kind(&self) -> DesignKind {
        self.kind
    }

    /// Draws a sample; only SRSWOR has a built-in sampler.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Sample> {
        match self.kind {
            DesignKind::Srswor { n } => draw_srswor(self.population_size, n, rng),
            DesignKind::External => Err(Error::InvalidParameter(
                "externally supplied designs have no sampler".into(),
            )),
        }
    }
}

/// A sample `s` with the inclusion probability of each sampled unit.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    design: SurveyDesign,
    units: Vec<usize>,
    pi: Vec<f64>,
}

impl Sample {
    /// An SRSWOR sample consisting of the given units.
    pub fn srswor(population_size: usize, mut units: Vec<usize>) -> Result<Self> {
        let design = SurveyDesign::srswor(population_size, units.len())?;
        units.sort_unstable();
        check_units(&units, population_size)?;
        let pi = vec![units.len() as f64 / population_size as f64; units.len()];
        Ok(Self { design, units, pi })
    }

    /// A sample with externally supplied inclusion probabilities.
    pub fn with_inclusion(population_size: usize, units: Vec<usize>, pi: Vec<f64>) -> Result<Self> {
        if units.len() != pi.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} sampled units with {} inclusion probabilities",
                units.len(),
                pi.len()
            )));
        }
        if units.is_empty() {
            return Err(Error::InvalidParameter("empty sample".into()));
        }
        let mut pairs: Vec<(usize, f64)> = units.into_iter().zip(pi).collect();
        pairs.sort_by_key(|&(u, _)| u);
        let (units, pi): (Vec<usize>, Vec<f64>) = pairs.into_iter().unzip();
        check_units(&units, population_size)?;
        if let Some((&u, &p)) = units.iter().zip(&pi).find(|(_, &p)| !(p > 0.0 && p <= 1.0)) {
            return Err(Error::InvalidParameter(format!(
                "inclusion probability {p} of unit {u} is outside (0, 1]"
            )));
        }
        Ok(Self {
            design: SurveyDesign::external(population_size),
            units,
            pi,
        })
    }

    pub fn design(&self) -> &SurveyDesign {
        &self.design
    }

    /// Sampled units in ascending order.
    pub fn units(&self) -> &[usize] {
        &self.units
    }

    /// Inclusion probabilities, parallel to [`units`](Self::units).
    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    pub fn population_size(&self) -> usize {
        self.design.population_size
    }

    /// `1 - n/N`.
    pub fn finite_population_correction(&self) -> f64 {
        1.0 - self.units.len() as f64 / self.design.population_size as f64
    }
}

fn check_units(units: &[usize], population_size: usize) -> Result<()> {
    if let Some(w) = units.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::InvalidParameter(format!(
            "unit {} sampled twice",
            w[0]
        )));
    }
    if let Some(&u) = units.iter().find(|&&u| u >= population_size) {
        return Err(Error::UnknownUnit { unit: u });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    Total,
    Mean,
}

/// A point estimate with its design-based variance estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub estimator: EstimatorKind,
    pub target: Target,
    pub value: f64,
    pub variance: Option<f64>,
    pub coefficients: Option<Vec<f64>>,
    pub residuals: Option<Vec<f64>>,
    pub population_size: usize,
}

impl Estimate {
    pub fn standard_error(&self) -> Option<f64> {
        self.variance.map(f64::sqrt)
    }

    /// Re-expresses the estimate for `target`; means are totals over `N`.
    pub fn to_target(&self, target: Target) -> Estimate {
        let n = self.population_size as f64;
        let factor = match (self.target, target) {
            (Target::Total, Target::Mean) => 1.0 / n,
            (Target::Mean, Target::Total) => n,
            _ => 1.0,
        };
        Estimate {
            target,
            value: self.value * factor,
            variance: self.variance.map(|v| v * factor * factor),
            ..self.clone()
        }
    }
}

/// Selection of `n` distinct units out of `0..N`, each subset equally likely.
pub fn draw_srswor<R: Rng + ?Sized>(population_size: usize, n: usize, rng: &mut R) -> Result<Sample> {
    SurveyDesign::srswor(population_size, n)?;
    let units = rand::seq::index::sample(rng, population_size, n).into_vec();
    Sample::srswor(population_size, units)
}

/// Variance estimate of `Σ_s u_i/π_i`.
///
/// `(1 - n/N) n/(n-1) Σ (u_i/π_i - mean)²`, which is the unbiased
/// `N²(1-f)s²/n` under SRSWOR and the with-replacement approximation with a
/// finite-population correction otherwise.
pub fn ht_variance(values: &[f64], sample: &Sample) -> Result<f64> {
    if values.len() != sample.len() {
        return Err(Error::MissingValue(format!(
            "{} values for {} sampled units",
            values.len(),
            sample.len()
        )));
    }
    scaled_variance(values, sample.pi(), sample.finite_population_correction())
}

pub(crate) fn scaled_variance(values: &[f64], pi: &[f64], fpc: f64) -> Result<f64> {
    let n = values.len();
    if n < 2 {
        return Err(Error::TooFewUnits);
    }
    let expanded: Vec<f64> = values.iter().zip(pi).map(|(v, p)| v / p).collect();
    let mean = expanded.iter().sum::<f64>() / n as f64;
    let ss: f64 = expanded.iter().map(|u| (u - mean) * (u - mean)).sum();
    Ok(fpc * n as f64 / (n - 1) as f64 * ss)
}

/// SRSWOR variance estimator applied to regression residuals.
pub fn residual_variance(residuals: &[f64], sample: &Sample) -> Result<f64> {
    ht_variance(residuals, sample)
}

/// Horvitz–Thompson estimate of the total.
pub fn ht_total(y: &[f64], sample: &Sample) -> Result<Estimate> {
    if y.len() != sample.len() {
        return Err(Error::MissingValue(format!(
            "{} y values for {} sampled units",
            y.len(),
            sample.len()
        )));
    }
    if let Some(k) = y.iter().position(|v| !v.is_finite()) {
        return Err(Error::MissingValue(format!(
            "y of sampled unit {}",
            sample.units()[k]
        )));
    }
    let value = y.iter().zip(sample.pi()).map(|(v, p)| v / p).sum();
    let variance = ht_variance(y, sample).ok();
    Ok(Estimate {
        estimator: EstimatorKind::Ht,
        target: Target::Total,
        value,
        variance,
        coefficients: None,
        residuals: None,
        population_size: sample.population_size(),
    })
}

/// `C(N, n)`, saturating at `u64::MAX`.
pub fn binomial(big_n: usize, n: usize) -> u64 {
    if n > big_n {
        return 0;
    }
    let k = n.min(big_n - n) as u128;
    let mut acc: u128 = 1;
    for j in 0..k {
        acc = acc * (big_n as u128 - j) / (j + 1);
        if acc > u64::MAX as u128 {
            return u64::MAX;
        }
    }
    acc as u64
}

/// Calls `visit` on every SRSWOR sample of size `n` from `0..N`.
pub fn enumerate_srswor<F>(big_n: usize, n: usize, mut visit: F) -> Result<u64>
where
    F: FnMut(&Sample) -> Result<()>,
{
    SurveyDesign::srswor(big_n, n)?;
    let count = binomial(big_n, n);
    if count > ENUMERATION_LIMIT {
        return Err(Error::EnumerationTooLarge {
            big_n,
            n,
            limit: ENUMERATION_LIMIT,
        });
    }
    for units in (0..big_n).combinations(n) {
        visit(&Sample::srswor(big_n, units)?)?;
    }
    Ok(count)
}

/// Exact design moments of an estimator under SRSWOR.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactMoments {
    pub samples: u64,
    pub expectation: f64,
    pub variance: f64,
    /// Expectation of the variance estimator, when the estimator provides one.
    pub expected_variance_estimate: Option<f64>,
}

/// Exact moments of any estimator by enumeration of all samples.
pub fn exact_moments<F>(big_n: usize, n: usize, mut estimator: F) -> Result<ExactMoments>
where
    F: FnMut(&Sample) -> Result<(f64, Option<f64>)>,
{
    let mut values = Vec::new();
    let mut var_sum = 0.0;
    let mut var_all = true;
    let samples = enumerate_srswor(big_n, n, |s| {
        let (v, var) = estimator(s)?;
        values.push(v);
        match var {
            Some(x) => var_sum += x,
            None => var_all = false,
        }
        Ok(())
    })?;
    let k = samples as f64;
    let expectation = values.iter().sum::<f64>() / k;
    let variance = values
        .iter()
        .map(|v| (v - expectation) * (v - expectation))
        .sum::<f64>()
        / k;
    Ok(ExactMoments {
        samples,
        expectation,
        variance,
        expected_variance_estimate: var_all.then(|| var_sum / k),
    })
}

/// Exact moments of the HT estimator of the total of `y` over `U`.
pub fn ht_exact_moments(y: &[f64], n: usize) -> Result<ExactMoments> {
    exact_moments(y.len(), n, |s| {
        let ys: Vec<f64> = s.units().iter().map(|&i| y[i]).collect();
        let e = ht_total(&ys, s)?;
        Ok((e.value, e.variance))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashMap;

    #[test]
    fn census_draw() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = draw_srswor(5, 5, &mut rng).unwrap();
        assert_eq!(s.units(), &[0, 1, 2, 3, 4]);
        assert!(s.pi().iter().all(|&p| p == 1.0));
    }

    #[test]
    fn draw_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(draw_srswor(5, 6, &mut rng).is_err());
        assert!(draw_srswor(5, 0, &mut rng).is_err());
        assert!(SurveyDesign::external(5).draw(&mut rng).is_err());
    }

    #[test]
    fn large_draw_is_distinct() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let s = draw_srswor(5000, 100, &mut rng).unwrap();
        assert_eq!(s.len(), 100);
        assert!(s.units().windows(2).all(|w| w[0] < w[1]));
        assert!(s.units().iter().all(|&u| u < 5000));
    }

    #[test]
    fn subsets_are_equally_likely() {
        // Chi-square goodness of fit over the 6 subsets of size 2 from 4 units.
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let draws = 60_000;
        let mut counts: HashMap<Vec<usize>, usize> = HashMap::new();
        for _ in 0..draws {
            let s = draw_srswor(4, 2, &mut rng).unwrap();
            *counts.entry(s.units().to_vec()).or_default() += 1;
        }
        assert_eq!(counts.len(), 6);
        let expected = draws as f64 / 6.0;
        let chi2: f64 = counts
            .values()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        // 0.999 quantile of chi-square with 5 degrees of freedom.
        assert!(chi2 < 20.515, "chi2 = {chi2}");
    }

    #[test]
    fn ht_by_hand() {
        let s = Sample::srswor(4, vec![0, 2]).unwrap();
        let e = ht_total(&[1.0, 3.0], &s).unwrap();
        assert_relative_eq!(e.value, 8.0);
        // N²(1-f)s²/n = 16 * 0.5 * 2 / 2.
        assert_relative_eq!(e.variance.unwrap(), 8.0);
        let m = e.to_target(Target::Mean);
        assert_relative_eq!(m.value, 2.0);
        assert_relative_eq!(m.variance.unwrap(), 0.5);
    }

    #[test]
    fn ht_census_is_exact() {
        let y = [1.5, 2.0, -3.0];
        let s = Sample::srswor(3, vec![0, 1, 2]).unwrap();
        let e = ht_total(&y, &s).unwrap();
        assert_relative_eq!(e.value, 0.5, epsilon = 1e-15);
        assert_eq!(e.variance, Some(0.0));
    }

    #[test]
    fn ht_missing_value() {
        let s = Sample::srswor(4, vec![0, 2]).unwrap();
        assert!(matches!(ht_total(&[1.0], &s), Err(Error::MissingValue(_))));
        assert!(matches!(
            ht_total(&[1.0, f64::NAN], &s),
            Err(Error::MissingValue(_))
        ));
    }

    #[test]
    fn residual_variance_cases() {
        let s = Sample::srswor(4, vec![1, 3]).unwrap();
        assert_relative_eq!(residual_variance(&[1.0, -1.0], &s).unwrap(), 8.0);
        assert_eq!(residual_variance(&[0.3, 0.3], &s).unwrap(), 0.0);
        let one = Sample::srswor(4, vec![1]).unwrap();
        let err = residual_variance(&[1.0], &one).unwrap_err();
        assert_eq!(err.to_string(), "variance needs at least 2 units");
    }

    #[test]
    fn external_design_reduces_to_srswor() {
        let a = Sample::srswor(10, vec![3, 1, 7]).unwrap();
        let b = Sample::with_inclusion(10, vec![7, 3, 1], vec![0.3; 3]).unwrap();
        let ya = [4.0, 1.0, 2.5];
        let yb = [4.0, 1.0, 2.5];
        let ea = ht_total(&ya, &a).unwrap();
        let eb = ht_total(&yb, &b).unwrap();
        assert_relative_eq!(ea.value, eb.value, max_relative = 1e-14);
        assert_relative_eq!(ea.variance.unwrap(), eb.variance.unwrap(), max_relative = 1e-14);
        assert!(Sample::with_inclusion(10, vec![1], vec![0.0]).is_err());
    }

    #[test]
    fn binomial_values() {
        assert_eq!(binomial(8, 3), 56);
        assert_eq!(binomial(30, 15), 155_117_520);
        assert_eq!(binomial(3, 5), 0);
    }

    #[test]
    fn enumeration_guard() {
        let y = vec![1.0; 30];
        assert!(matches!(
            ht_exact_moments(&y, 15),
            Err(Error::EnumerationTooLarge { .. })
        ));
    }

    #[test]
    fn ht_moments_small() {
        let y = [1.0, 2.0, 3.0, 4.0];
        let m = ht_exact_moments(&y, 2).unwrap();
        assert_eq!(m.samples, 6);
        assert_relative_eq!(m.expectation, 10.0, max_relative = 1e-12);
        // N²(1-f)S²/n with S² = 5/3.
        assert_relative_eq!(m.variance, 16.0 * 0.5 * (5.0 / 3.0) / 2.0, max_relative = 1e-12);
        assert_relative_eq!(
            m.expected_variance_estimate.unwrap(),
            m.variance,
            max_relative = 1e-12
        );
    }
}
