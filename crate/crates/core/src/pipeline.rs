//! One place that turns linked data plus a sample into any estimator's output.

use crate::design::{ht_total, Estimate, Sample};
use crate::error::{Error, Result};
use crate::estimators::{
    consistency_diagnostics, greg, sls_greg, sub_greg, DiagnosticKind, DiagnosticsReport,
    EstimatorKind, GregSpec, SlsSpec, SubSpec,
};
use crate::linkage::{
    best_link_indicator_weights, derive_covariates, equal_reverse_weights, AuxDatabase, BestLinks,
    DerivedCovariates, LinkageStructure, WeightKind, WeightScheme,
};

/// Linked auxiliary data with covariates derived once, reused across samples.
#[derive(Debug, Clone)]
pub struct EstimationContext {
    aux: AuxDatabase,
    linkage: LinkageStructure,
    intercept: bool,
    link_sums: DerivedCovariates,
    incidence: Option<(WeightScheme, DerivedCovariates)>,
    reverse: Option<(WeightScheme, DerivedCovariates)>,
    best: Option<(BestLinks, DerivedCovariates)>,
    unit_x: Option<Vec<f64>>,
}

impl EstimationContext {
    pub fn new(aux: AuxDatabase, linkage: LinkageStructure) -> Result<Self> {
        let equal = equal_reverse_weights(&linkage)?;
        let link_sums = derive_covariates(&linkage, &equal, &aux, None)?;
        Ok(Self {
            aux,
            linkage,
            intercept: true,
            link_sums,
            incidence: None,
            reverse: None,
            best: None,
            unit_x: None,
        })
    }

    /// Fit the assisting models without an intercept column.
    pub fn without_intercept(mut self) -> Self {
        self.intercept = false;
        self
    }

    pub fn with_weights(mut self, weights: WeightScheme) -> Result<Self> {
        let cov = derive_covariates(&self.linkage, &weights, &self.aux, None)?;
        match weights.kind() {
            WeightKind::Incidence => self.incidence = Some((weights, cov)),
            WeightKind::Reverse => self.reverse = Some((weights, cov)),
        }
        Ok(self)
    }

    pub fn with_best_links(mut self, best: BestLinks) -> Result<Self> {
        let indicator = best_link_indicator_weights(&self.linkage, &best)?;
        let cov = derive_covariates(&self.linkage, &indicator, &self.aux, Some(&best))?;
        self.best = Some((best, cov));
        Ok(self)
    }

    /// True covariates of every population unit, `N * dim` values, for Ideal.
    pub fn with_unit_covariates(mut self, x: Vec<f64>) -> Result<Self> {
        if x.len() != self.linkage.population_size() * self.aux.dim() {
            return Err(Error::DimensionMismatch(format!(
                "{} unit covariates for {} units of dimension {}",
                x.len(),
                self.linkage.population_size(),
                self.aux.dim()
            )));
        }
        self.unit_x = Some(x);
        Ok(self)
    }

    pub fn aux(&self) -> &AuxDatabase {
        &self.aux
    }

    pub fn linkage(&self) -> &LinkageStructure {
        &self.linkage
    }

    pub fn best_links(&self) -> Option<&BestLinks> {
        self.best.as_ref().map(|(b, _)| b)
    }

    pub fn weights(&self, kind: WeightKind) -> Option<&WeightScheme> {
        match kind {
            WeightKind::Incidence => self.incidence.as_ref().map(|(w, _)| w),
            WeightKind::Reverse => self.reverse.as_ref().map(|(w, _)| w),
        }
    }

    /// Estimate of the total; `y` is parallel to `sample.units()`.
    pub fn estimate(&self, kind: EstimatorKind, sample: &Sample, y: &[f64]) -> Result<Estimate> {
        let missing = |what: &str| Error::MissingValue(format!("{what} for {kind}-GREG"));
        match kind {
            EstimatorKind::Ht => ht_total(y, sample),
            EstimatorKind::Ideal => {
                let x = self
                    .unit_x
                    .as_ref()
                    .ok_or_else(|| missing("true unit covariates"))?;
                let dim = self.aux.dim();
                let rows: Vec<f64> = sample
                    .units()
                    .iter()
                    .flat_map(|&i| x[i * dim..(i + 1) * dim].iter().copied())
                    .collect();
                let spec = GregSpec::new(kind, &rows, dim, self.aux.total(), self.intercept, sample)?;
                greg(&spec, y, sample)
            }
            EstimatorKind::Sub => {
                let spec = SubSpec::from_linkage(&self.linkage, &self.aux, sample, self.intercept)?;
                sub_greg(&spec, y, sample)
            }
            EstimatorKind::Pi => {
                let (_, cov) = self
                    .incidence
                    .as_ref()
                    .ok_or_else(|| missing("incidence weights"))?;
                self.greg_from(kind, cov, sample, y)
            }
            EstimatorKind::Pri | EstimatorKind::Sri => {
                let (_, cov) = self
                    .reverse
                    .as_ref()
                    .ok_or_else(|| missing("reverse incidence weights"))?;
                self.greg_from(kind, cov, sample, y)
            }
            EstimatorKind::Sbl => {
                let (_, cov) = self.best.as_ref().ok_or_else(|| missing("best links"))?;
                self.greg_from(kind, cov, sample, y)
            }
            EstimatorKind::Sls => {
                let (w, _) = self
                    .reverse
                    .as_ref()
                    .ok_or_else(|| missing("reverse incidence weights"))?;
                let spec = SlsSpec::from_linkage(&self.linkage, w, &self.aux, sample, self.intercept)?;
                sls_greg(&spec, y, sample)
            }
        }
    }

    fn greg_from(
        &self,
        kind: EstimatorKind,
        cov: &DerivedCovariates,
        sample: &Sample,
        y: &[f64],
    ) -> Result<Estimate> {
        let spec =
            GregSpec::from_covariates(kind, cov, &self.linkage, &self.aux, sample, self.intercept)?;
        greg(&spec, y, sample)
    }

    pub fn diagnose(&self, kind: DiagnosticKind, sample: &Sample) -> Result<DiagnosticsReport> {
        let cov = match kind {
            DiagnosticKind::Sri => {
                &self
                    .reverse
                    .as_ref()
                    .ok_or_else(|| Error::MissingValue("reverse incidence weights".into()))?
                    .1
            }
            DiagnosticKind::Sbl => {
                &self
                    .best
                    .as_ref()
                    .ok_or_else(|| Error::MissingValue("best links".into()))?
                    .1
            }
            DiagnosticKind::Sls => &self.link_sums,
        };
        consistency_diagnostics(kind, cov, &self.linkage, &self.aux, sample)
    }
}
