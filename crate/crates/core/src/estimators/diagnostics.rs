//! Observable checks of the conditions under which the sample-link estimators
//! are design-consistent.

use std::fmt;

use crate::design::{ht_variance, Sample};
use crate::error::{Error, Result};
use crate::linkage::{AuxDatabase, DerivedCovariates, LinkageStructure, Scope, WeightKind, WeightScheme};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiagnosticKind {
    /// `X̂_ω/N - X̄_A`.
    Sri,
    /// `X̂*/N - X̄_A`.
    Sbl,
    /// `X̂_L/N̂_L - X̄_A`.
    Sls,
}

impl fmt::Display for DiagnosticKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DiagnosticKind::Sri => "SRI",
            DiagnosticKind::Sbl => "SBL",
            DiagnosticKind::Sls => "SLS",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticComponent {
    pub value: f64,
    pub variance: f64,
    /// `value / sqrt(variance)`; absent when the variance is zero.
    pub z: Option<f64>,
}

impl DiagnosticComponent {
    fn new(value: f64, variance: f64) -> Self {
        let z = (variance > 0.0).then(|| value / variance.sqrt());
        Self { value, variance, z }
    }

    /// Two-sided test at the given critical value.
    pub fn rejects(&self, critical: f64) -> bool {
        self.z.is_some_and(|z| z.abs() > critical)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsReport {
    pub kind: DiagnosticKind,
    /// One entry per auxiliary component.
    pub components: Vec<DiagnosticComponent>,
    pub npa: Option<NpaCovariances>,
}

impl DiagnosticsReport {
    pub fn rejects(&self, critical: f64) -> bool {
        self.components.iter().any(|c| c.rejects(critical))
    }

    pub fn with_npa(mut self, npa: NpaCovariances) -> Self {
        self.npa = Some(npa);
        self
    }
}

/// Componentwise z-statistics with linearisation-based variances.
pub fn consistency_diagnostics(
    kind: DiagnosticKind,
    covariates: &DerivedCovariates,
    linkage: &LinkageStructure,
    aux: &AuxDatabase,
    sample: &Sample,
) -> Result<DiagnosticsReport> {
    let dim = covariates.dim();
    let n = sample.len();
    let positions = sample
        .units()
        .iter()
        .map(|&i| linkage.position(i).ok_or(Error::UnknownUnit { unit: i }))
        .collect::<Result<Vec<_>>>()?;
    let big_n = sample.population_size() as f64;

    let components = match kind {
        DiagnosticKind::Sri | DiagnosticKind::Sbl => {
            if kind == DiagnosticKind::Sri && covariates.kind() != WeightKind::Reverse {
                return Err(Error::InvalidParameter(
                    "SRI diagnostic needs reverse incidence weights".into(),
                ));
            }
            let row = |p: usize| -> Result<&[f64]> {
                match kind {
                    DiagnosticKind::Sri => Ok(covariates.weighted(p)),
                    _ => covariates
                        .best(p)
                        .ok_or_else(|| Error::MissingValue("best links".into())),
                }
            };
            (0..dim)
                .map(|c| {
                    let u = positions
                        .iter()
                        .map(|&p| row(p).map(|r| r[c]))
                        .collect::<Result<Vec<_>>>()?;
                    let mean_hat = u.iter().zip(sample.pi()).map(|(u, p)| u / p).sum::<f64>() / big_n;
                    let var = ht_variance(&u, sample)? / (big_n * big_n);
                    Ok(DiagnosticComponent::new(mean_hat - aux.mean()[c], var))
                })
                .collect::<Result<Vec<_>>>()?
        }
        DiagnosticKind::Sls => {
            let n_links_hat: f64 = positions
                .iter()
                .zip(sample.pi())
                .map(|(&p, pi)| covariates.link_count(p) as f64 / pi)
                .sum();
            (0..dim)
                .map(|c| {
                    let x_hat: f64 = positions
                        .iter()
                        .zip(sample.pi())
                        .map(|(&p, pi)| covariates.link_sum(p)[c] / pi)
                        .sum();
                    let ratio = x_hat / n_links_hat;
                    let u: Vec<f64> = positions
                        .iter()
                        .map(|&p| {
                            (covariates.link_sum(p)[c] - covariates.link_count(p) as f64 * ratio)
                                / n_links_hat
                        })
                        .collect();
                    let var = ht_variance(&u, sample)?;
                    Ok(DiagnosticComponent::new(ratio - aux.mean()[c], var))
                })
                .collect::<Result<Vec<_>>>()?
        }
    };
    debug_assert!(n >= 1);
    Ok(DiagnosticsReport {
        kind,
        components,
        npa: None,
    })
}

/// Empirical covariances behind the non-informativeness condition.
#[derive(Debug, Clone, PartialEq)]
pub struct NpaCovariances {
    /// Over `L`: `Σ ω x_ℓ / N_L - (Σ ω / N_L) X̄_L`.
    pub link_covariance: Vec<f64>,
    /// Over `A`: `Σ a_ℓ x_ℓ / N_A - (Σ a_ℓ / N_A) X̄_A`.
    pub record_covariance: Vec<f64>,
    /// `N_AL`, the number of linked records.
    pub linked_records: usize,
    /// `X_AL`, the total of `x` over linked records.
    pub linked_total: Vec<f64>,
    /// `Σ_L ω_iℓ`.
    pub weight_sum: f64,
}

pub fn npa_covariances(
    linkage: &LinkageStructure,
    weights: &WeightScheme,
    aux: &AuxDatabase,
) -> Result<NpaCovariances> {
    if linkage.scope() != Scope::Population {
        return Err(Error::RequiresPopulationScope);
    }
    if !weights.matches(linkage) {
        return Err(Error::SchemeMismatch(
            "weights were built for a different linkage structure".into(),
        ));
    }
    let dim = aux.dim();
    let n_links = linkage.n_links() as f64;
    let mut weight_sum = 0.0;
    let mut weighted_x = vec![0.0; dim];
    let mut link_x = vec![0.0; dim];
    for p in 0..linkage.units().len() {
        for (&l, &w) in linkage.alpha_at(p).iter().zip(weights.row(p)) {
            weight_sum += w;
            for ((a, b), &x) in weighted_x.iter_mut().zip(link_x.iter_mut()).zip(aux.row(l)) {
                *a += w * x;
                *b += x;
            }
        }
    }
    let link_covariance = (0..dim)
        .map(|c| weighted_x[c] / n_links - weight_sum / n_links * (link_x[c] / n_links))
        .collect();

    let linked = linkage.linked_records();
    let n_records = aux.len() as f64;
    let mut linked_total = vec![0.0; dim];
    for &l in &linked {
        for (t, &x) in linked_total.iter_mut().zip(aux.row(l)) {
            *t += x;
        }
    }
    let record_covariance = (0..dim)
        .map(|c| linked_total[c] / n_records - linked.len() as f64 / n_records * aux.mean()[c])
        .collect();

    Ok(NpaCovariances {
        link_covariance,
        record_covariance,
        linked_records: linked.len(),
        linked_total,
        weight_sum,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linkage::{build_linkage, derive_covariates, multiplicity_weights, BestLinks};
    use approx::assert_relative_eq;

    fn four_units() -> (AuxDatabase, LinkageStructure) {
        let aux = AuxDatabase::from_scalars(&[1.0, 2.0, 4.0, 8.0, 3.0]).unwrap();
        let links = [(0, 0), (0, 1), (1, 1), (2, 1), (2, 2), (3, 3), (3, 0), (3, 2)];
        let l = build_linkage(&links, &[0, 1, 2, 3], 4, &aux).unwrap();
        (aux, l)
    }

    #[test]
    fn npa_by_hand() {
        let (aux, l) = four_units();
        let w = multiplicity_weights(&l).unwrap();
        let npa = npa_covariances(&l, &w, &aux).unwrap();
        // Spreadsheet route over the 8 links: (ω, x) pairs.
        let pairs = [
            (0.5, 1.0),
            (1.0 / 3.0, 2.0),
            (1.0 / 3.0, 2.0),
            (1.0 / 3.0, 2.0),
            (0.5, 4.0),
            (1.0, 8.0),
            (0.5, 1.0),
            (0.5, 4.0),
        ];
        let nl = pairs.len() as f64;
        let sw: f64 = pairs.iter().map(|p| p.0).sum();
        let swx: f64 = pairs.iter().map(|p| p.0 * p.1).sum();
        let xbar_l = pairs.iter().map(|p| p.1).sum::<f64>() / nl;
        assert_relative_eq!(npa.link_covariance[0], swx / nl - sw / nl * xbar_l, max_relative = 1e-12);
        // Records 0..3 are linked, record 4 (x = 3) is not.
        assert_eq!(npa.linked_records, 4);
        assert_relative_eq!(npa.weight_sum, 4.0, max_relative = 1e-12);
        assert_relative_eq!(npa.linked_total[0], 15.0);
        assert_relative_eq!(npa.record_covariance[0], 15.0 / 5.0 - 0.8 * 18.0 / 5.0, max_relative = 1e-12);
    }

    #[test]
    fn npa_degenerate_cases() {
        let aux = AuxDatabase::from_scalars(&[2.0; 4]).unwrap();
        let links = [(0, 0), (0, 1), (1, 1), (2, 2), (3, 3), (3, 0)];
        let l = build_linkage(&links, &[0, 1, 2, 3], 4, &aux).unwrap();
        let w = multiplicity_weights(&l).unwrap();
        let npa = npa_covariances(&l, &w, &aux).unwrap();
        assert_eq!(npa.link_covariance[0], 0.0);
        assert_eq!(npa.record_covariance[0], 0.0);

        let aux = AuxDatabase::from_scalars(&[1.0, 5.0, 2.0, 9.0]).unwrap();
        let l = build_linkage(&links, &[0, 1, 2, 3], 4, &aux).unwrap();
        let npa = npa_covariances(&l, &multiplicity_weights(&l).unwrap(), &aux).unwrap();
        assert_eq!(npa.record_covariance[0], 0.0);

        let ls = l.restrict(&[0, 1], &aux).unwrap();
        let ws = crate::linkage::equal_reverse_weights(&ls).unwrap();
        assert!(matches!(npa_covariances(&ls, &ws, &aux), Err(Error::RequiresPopulationScope)));
    }

    #[test]
    fn one_to_one_census_statistics_vanish() {
        let x = [0.2, 0.9, 0.4, 0.6, 0.1];
        let aux = AuxDatabase::from_scalars(&x).unwrap();
        let links: Vec<_> = (0..5).map(|i| (i, i)).collect();
        let l = build_linkage(&links, &[0, 1, 2, 3, 4], 5, &aux).unwrap();
        let best = BestLinks::from_positions(&l, (0..5).collect()).unwrap();
        let w = crate::linkage::reverse_weights_best_link(&l, &best, 0.5).unwrap();
        let cov = derive_covariates(&l, &w, &aux, Some(&best)).unwrap();
        let s = Sample::srswor(5, vec![0, 1, 2, 3, 4]).unwrap();
        for kind in [DiagnosticKind::Sri, DiagnosticKind::Sbl, DiagnosticKind::Sls] {
            let r = consistency_diagnostics(kind, &cov, &l, &aux, &s).unwrap();
            assert!(r.components[0].value.abs() < 1e-15, "{kind}");
            assert!(!r.rejects(1.96));
        }
    }

    #[test]
    fn sri_statistic_by_hand() {
        let (aux, l) = four_units();
        let w = crate::linkage::equal_reverse_weights(&l).unwrap();
        let cov = derive_covariates(&l, &w, &aux, None).unwrap();
        let s = Sample::srswor(4, vec![0, 3]).unwrap();
        let r = consistency_diagnostics(DiagnosticKind::Sri, &cov, &l, &aux, &s).unwrap();
        // x_ω: unit 0 -> 1.5, unit 3 -> 13/3; X̄_A = 18/5.
        let u = [1.5, 13.0 / 3.0];
        let est = (u[0] + u[1]) * 2.0 / 4.0;
        assert_relative_eq!(r.components[0].value, est - 3.6, max_relative = 1e-12);
        let s2 = (u[0] - u[1]).powi(2) / 2.0;
        let var = 16.0 * 0.5 * s2 / 2.0 / 16.0;
        assert_relative_eq!(r.components[0].variance, var, max_relative = 1e-12);
        assert_relative_eq!(r.components[0].z.unwrap(), (est - 3.6) / var.sqrt(), max_relative = 1e-12);
        assert!(consistency_diagnostics(DiagnosticKind::Sbl, &cov, &l, &aux, &s).is_err());
    }
}
