use crate::design::{residual_variance, Estimate, Sample, Target};
use crate::error::{Error, Result};
use crate::linalg::{dot, solve_normal, SquareMatrix};
use crate::linkage::{AuxDatabase, LinkageStructure, WeightKind, WeightScheme};

use super::EstimatorKind;

/// Link-level regression data for the sample link-set estimator.
///
/// For sampled unit `k` the links `offsets[k]..offsets[k+1]` carry the record
/// covariate `x_ℓ`, the reverse weight `ω_iℓ` and the constant `c_iℓ`.
#[derive(Debug, Clone, PartialEq)]
pub struct SlsSpec {
    dim: usize,
    offsets: Vec<usize>,
    rows: Vec<f64>,
    omega: Vec<f64>,
    constants: Vec<f64>,
    aux_mean: Vec<f64>,
}

impl SlsSpec {
    pub fn from_linkage(
        linkage: &LinkageStructure,
        weights: &WeightScheme,
        aux: &AuxDatabase,
        sample: &Sample,
        intercept: bool,
    ) -> Result<Self> {
        if weights.kind() != WeightKind::Reverse {
            return Err(Error::InvalidParameter(
                "SLS-GREG needs reverse incidence weights".into(),
            ));
        }
        if !weights.matches(linkage) {
            return Err(Error::SchemeMismatch(
                "weights were built for a different linkage structure".into(),
            ));
        }
        let base = aux.dim();
        let dim = base + usize::from(intercept);
        let mut offsets = vec![0];
        let mut rows = Vec::new();
        let mut omega = Vec::new();
        for &i in sample.units() {
            let p = linkage.position(i).ok_or(Error::UnknownUnit { unit: i })?;
            for (&l, &w) in linkage.alpha_at(p).iter().zip(weights.row(p)) {
                if intercept {
                    rows.push(1.0);
                }
                rows.extend_from_slice(aux.row(l));
                omega.push(w);
            }
            offsets.push(omega.len());
        }
        let mut aux_mean = Vec::with_capacity(dim);
        if intercept {
            aux_mean.push(1.0);
        }
        aux_mean.extend_from_slice(aux.mean());
        let constants = vec![1.0; omega.len()];
        Ok(Self {
            dim,
            offsets,
            rows,
            omega,
            constants,
            aux_mean,
        })
    }

    /// Link constants `c_iℓ`, in link order.
    pub fn with_constants(mut self, constants: Vec<f64>) -> Result<Self> {
        if constants.len() != self.omega.len() {
            return Err(Error::DimensionMismatch(
                "one constant per sampled link".into(),
            ));
        }
        if let Some(c) = constants.iter().find(|&&c| !(c > 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "link constant {c} is not positive"
            )));
        }
        self.constants = constants;
        Ok(self)
    }

    pub fn n_links(&self) -> usize {
        self.omega.len()
    }

    fn row(&self, j: usize) -> &[f64] {
        &self.rows[j * self.dim..(j + 1) * self.dim]
    }
}

/// Sample link-set GREG with Taylor-linearised variance.
pub fn sls_greg(spec: &SlsSpec, y: &[f64], sample: &Sample) -> Result<Estimate> {
    let n = sample.len();
    if spec.offsets.len() != n + 1 || y.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "spec built for {} units, sample has {n} units and {} y values",
            spec.offsets.len() - 1,
            y.len()
        )));
    }
    let big_n = sample.population_size() as f64;
    let dim = spec.dim;

    let mut n_links_hat = 0.0;
    let mut x_links_hat = vec![0.0; dim];
    let mut link_sums = vec![0.0; n * dim];
    let mut normal = SquareMatrix::zeros(dim);
    let mut rhs = vec![0.0; dim];
    for k in 0..n {
        let inv_pi = 1.0 / sample.pi()[k];
        let links = spec.offsets[k]..spec.offsets[k + 1];
        n_links_hat += links.len() as f64 * inv_pi;
        let sum = &mut link_sums[k * dim..(k + 1) * dim];
        for j in links {
            let x = spec.row(j);
            let c = spec.constants[j];
            normal.add_outer(x, c * inv_pi);
            for ((r, s), &v) in rhs.iter_mut().zip(sum.iter_mut()).zip(x) {
                *r += c * v * spec.omega[j] * y[k] * inv_pi;
                *s += v;
            }
        }
        for (t, &s) in x_links_hat.iter_mut().zip(&sum[..]) {
            *t += s * inv_pi;
        }
    }
    let r_hat = n_links_hat / big_n;
    let link_mean: Vec<f64> = x_links_hat.iter().map(|t| t / n_links_hat).collect();
    let b: Vec<f64> = solve_normal(&normal, &rhs)?
        .into_iter()
        .map(|v| r_hat * v)
        .collect();

    let mut value = big_n * dot(&spec.aux_mean, &b);
    let mean_fit = dot(&link_mean, &b);
    let mut residuals = Vec::with_capacity(n);
    for k in 0..n {
        let d = (spec.offsets[k + 1] - spec.offsets[k]) as f64;
        let e = y[k] - dot(&link_sums[k * dim..(k + 1) * dim], &b) / r_hat;
        value += e / sample.pi()[k];
        residuals.push(e + d / r_hat * mean_fit);
    }

    Ok(Estimate {
        estimator: EstimatorKind::Sls,
        target: Target::Total,
        value,
        variance: residual_variance(&residuals, sample).ok(),
        coefficients: Some(b),
        residuals: Some(residuals),
        population_size: sample.population_size(),
    })
}
