use crate::design::{residual_variance, Estimate, Sample, Target};
use crate::error::{Error, Result};
use crate::linalg::{dot, solve_normal, SquareMatrix};
use crate::linkage::{AuxDatabase, DerivedCovariates, LinkageStructure, WeightKind};

use super::EstimatorKind;

/// Weighted least squares `b = (Σ w x xᵀ)⁻¹ Σ w x y` over row-major `rows`.
pub fn wls_coefficients(rows: &[f64], dim: usize, y: &[f64], weights: &[f64]) -> Result<Vec<f64>> {
    if rows.len() != y.len() * dim || weights.len() != y.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} covariate values, {} responses and {} weights for dimension {dim}",
            rows.len(),
            y.len(),
            weights.len()
        )));
    }
    let mut normal = SquareMatrix::zeros(dim);
    let mut rhs = vec![0.0; dim];
    for ((row, &yi), &w) in rows.chunks_exact(dim.max(1)).zip(y).zip(weights) {
        normal.add_outer(row, w);
        for (r, &x) in rhs.iter_mut().zip(row) {
            *r += w * x * yi;
        }
    }
    solve_normal(&normal, &rhs)
}

/// Covariates and calibration total of one GREG estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct GregSpec {
    kind: EstimatorKind,
    dim: usize,
    rows: Vec<f64>,
    total: Vec<f64>,
    constants: Option<Vec<f64>>,
}

impl GregSpec {
    /// `rows` holds one covariate vector per sampled unit, in sample order.
    /// With `intercept`, a constant 1 is prepended to every row and `N` to the
    /// total.
    pub fn new(
        kind: EstimatorKind,
        rows: &[f64],
        dim: usize,
        total: &[f64],
        intercept: bool,
        sample: &Sample,
    ) -> Result<Self> {
        if total.len() != dim || rows.len() != dim * sample.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} covariate values and a total of length {} for {} units of dimension {dim}",
                rows.len(),
                total.len(),
                sample.len()
            )));
        }
        if !intercept && dim == 0 {
            return Err(Error::InvalidParameter("GREG needs at least one covariate".into()));
        }
        let (rows, total, dim) = if intercept {
            let mut r = Vec::with_capacity(rows.len() + sample.len());
            for k in 0..sample.len() {
                r.push(1.0);
                r.extend_from_slice(&rows[k * dim..(k + 1) * dim]);
            }
            let mut t = Vec::with_capacity(dim + 1);
            t.push(sample.population_size() as f64);
            t.extend_from_slice(total);
            (r, t, dim + 1)
        } else {
            (rows.to_vec(), total.to_vec(), dim)
        };
        Ok(Self {
            kind,
            dim,
            rows,
            total,
            constants: None,
        })
    }

    /// Intercept-only assisting model.
    pub fn intercept_only(kind: EstimatorKind, sample: &Sample) -> Self {
        Self::new(kind, &[], 0, &[], true, sample).expect("intercept-only spec is always valid")
    }

    /// Builds the PI, PRI, SRI or SBL spec from derived covariates.
    pub fn from_covariates(
        kind: EstimatorKind,
        covariates: &DerivedCovariates,
        linkage: &LinkageStructure,
        aux: &AuxDatabase,
        sample: &Sample,
        intercept: bool,
    ) -> Result<Self> {
        let dim = covariates.dim();
        let positions = sample
            .units()
            .iter()
            .map(|&i| linkage.position(i).ok_or(Error::UnknownUnit { unit: i }))
            .collect::<Result<Vec<_>>>()?;
        let gather = |best: bool| -> Option<Vec<f64>> {
            let mut rows = Vec::with_capacity(positions.len() * dim);
            for &p in &positions {
                let row = if best {
                    covariates.best(p)?
                } else {
                    covariates.weighted(p)
                };
                rows.extend_from_slice(row);
            }
            Some(rows)
        };
        let scaled_mean = || -> Vec<f64> {
            let n = sample.population_size() as f64;
            aux.mean().iter().map(|m| n * m).collect()
        };
        let requires = |label: &str| {
            Error::InvalidParameter(format!("{label}-GREG requires population-scope links"))
        };

        let (rows, total) = match kind {
            EstimatorKind::Pi => {
                if covariates.kind() != WeightKind::Incidence {
                    return Err(Error::InvalidParameter(
                        "PI-GREG needs incidence weights".into(),
                    ));
                }
                let totals = covariates.totals().ok_or_else(|| requires("PI"))?;
                (
                    gather(false),
                    totals.weighted.clone(),
                )
            }
            EstimatorKind::Pri => {
                if covariates.kind() != WeightKind::Reverse {
                    return Err(Error::InvalidParameter(
                        "PRI-GREG needs reverse incidence weights".into(),
                    ));
                }
                let totals = covariates.totals().ok_or_else(|| requires("PRI"))?;
                (
                    gather(false),
                    totals.weighted.clone(),
                )
            }
            EstimatorKind::Sri => {
                if covariates.kind() != WeightKind::Reverse {
                    return Err(Error::InvalidParameter(
                        "SRI-GREG needs reverse incidence weights".into(),
                    ));
                }
                (gather(false), scaled_mean())
            }
            EstimatorKind::Sbl => (gather(true), scaled_mean()),
            other => {
                return Err(Error::InvalidParameter(format!(
                    "{other} is not built from derived covariates"
                )))
            }
        };
        let rows = rows.ok_or_else(|| Error::MissingValue("best links".into()))?;
        Self::new(kind, &rows, dim, &total, intercept, sample)
    }

    /// Regression constants `c_i`, one per sampled unit.
    pub fn with_constants(mut self, constants: Vec<f64>) -> Result<Self> {
        if constants.len() * self.dim != self.rows.len() {
            return Err(Error::DimensionMismatch(
                "one regression constant per sampled unit".into(),
            ));
        }
        if let Some(c) = constants.iter().find(|&&c| !(c > 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "regression constant {c} is not positive"
            )));
        }
        self.constants = Some(constants);
        Ok(self)
    }

    pub fn kind(&self) -> EstimatorKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn total(&self) -> &[f64] {
        &self.total
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.rows[k * self.dim..(k + 1) * self.dim]
    }

    fn fit_weights(&self, sample: &Sample) -> Vec<f64> {
        match &self.constants {
            Some(c) => c.iter().zip(sample.pi()).map(|(c, p)| c / p).collect(),
            None => sample.pi().iter().map(|p| 1.0 / p).collect(),
        }
    }

    fn check(&self, sample: &Sample) -> Result<()> {
        if self.rows.len() != self.dim * sample.len() {
            return Err(Error::DimensionMismatch(format!(
                "spec built for {} units, sample has {}",
                self.rows.len() / self.dim.max(1),
                sample.len()
            )));
        }
        Ok(())
    }
}

/// `Tᵀb + Σ_s (y_i - x_iᵀb)/π_i` with the residual variance estimate.
pub fn greg(spec: &GregSpec, y: &[f64], sample: &Sample) -> Result<Estimate> {
    spec.check(sample)?;
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
    let b = wls_coefficients(&spec.rows, spec.dim, y, &spec.fit_weights(sample))?;
    let residuals: Vec<f64> = (0..y.len())
        .map(|k| y[k] - dot(spec.row(k), &b))
        .collect();
    let value = dot(&spec.total, &b)
        + residuals
            .iter()
            .zip(sample.pi())
            .map(|(e, p)| e / p)
            .sum::<f64>();
    Ok(Estimate {
        estimator: spec.kind,
        target: Target::Total,
        value,
        variance: residual_variance(&residuals, sample).ok(),
        coefficients: Some(b),
        residuals: Some(residuals),
        population_size: sample.population_size(),
    })
}

/// Sample weights `w_i` with `greg(..).value == Σ w_i y_i`.
pub fn implied_weights(spec: &GregSpec, sample: &Sample) -> Result<Vec<f64>> {
    spec.check(sample)?;
    let fit = spec.fit_weights(sample);
    let mut normal = SquareMatrix::zeros(spec.dim);
    let mut ht = vec![0.0; spec.dim];
    for (k, (&w, &p)) in fit.iter().zip(sample.pi()).enumerate() {
        normal.add_outer(spec.row(k), w);
        for (h, &x) in ht.iter_mut().zip(spec.row(k)) {
            *h += x / p;
        }
    }
    let gap: Vec<f64> = spec.total.iter().zip(&ht).map(|(t, h)| t - h).collect();
    let lambda = solve_normal(&normal, &gap)?;
    Ok((0..sample.len())
        .map(|k| 1.0 / sample.pi()[k] + fit[k] * dot(spec.row(k), &lambda))
        .collect())
}
