use crate::design::{scaled_variance, Estimate, Sample, Target};
use crate::error::{Error, Result};
use crate::linalg::dot;
use crate::linkage::{AuxDatabase, LinkageStructure};

use super::{wls_coefficients, EstimatorKind};

/// GREG restricted to the sampled units whose single link is taken as the match.
#[derive(Debug, Clone, PartialEq)]
pub struct SubSpec {
    members: Vec<usize>,
    dim: usize,
    rows: Vec<f64>,
    aux_mean: Vec<f64>,
}

impl SubSpec {
    /// `members` index into the sample; `rows` carries their matched `x`.
    pub fn new(
        members: Vec<usize>,
        rows: &[f64],
        dim: usize,
        aux_mean: &[f64],
        intercept: bool,
        sample: &Sample,
    ) -> Result<Self> {
        if rows.len() != members.len() * dim || aux_mean.len() != dim {
            return Err(Error::DimensionMismatch(format!(
                "{} covariate values for {} subsample units of dimension {dim}",
                rows.len(),
                members.len()
            )));
        }
        if let Some(&k) = members.iter().find(|&&k| k >= sample.len()) {
            return Err(Error::InvalidParameter(format!(
                "subsample member {k} is outside the sample"
            )));
        }
        let (rows, aux_mean, dim) = if intercept {
            let mut r = Vec::with_capacity(rows.len() + members.len());
            for k in 0..members.len() {
                r.push(1.0);
                r.extend_from_slice(&rows[k * dim..(k + 1) * dim]);
            }
            let mut m = vec![1.0];
            m.extend_from_slice(aux_mean);
            (r, m, dim + 1)
        } else {
            (rows.to_vec(), aux_mean.to_vec(), dim)
        };
        Ok(Self {
            members,
            dim,
            rows,
            aux_mean,
        })
    }

    /// Sampled units with `d_i = 1`, using their unique link as the match.
    pub fn from_linkage(
        linkage: &LinkageStructure,
        aux: &AuxDatabase,
        sample: &Sample,
        intercept: bool,
    ) -> Result<Self> {
        let mut members = Vec::new();
        let mut rows = Vec::new();
        for (k, &i) in sample.units().iter().enumerate() {
            let alpha = linkage.alpha(i).ok_or(Error::UnknownUnit { unit: i })?;
            if let [l] = alpha {
                members.push(k);
                rows.extend_from_slice(aux.row(*l));
            }
        }
        Self::new(members, &rows, aux.dim(), aux.mean(), intercept, sample)
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }
}

/// Hájek-weighted GREG over the unique-link subsample.
pub fn sub_greg(spec: &SubSpec, y: &[f64], sample: &Sample) -> Result<Estimate> {
    if y.len() != sample.len() {
        return Err(Error::MissingValue(format!(
            "{} y values for {} sampled units",
            y.len(),
            sample.len()
        )));
    }
    let n1 = spec.members.len();
    if n1 <= spec.dim {
        return Err(Error::SubsampleTooSmall {
            n1,
            params: spec.dim,
        });
    }
    let y1: Vec<f64> = spec.members.iter().map(|&k| y[k]).collect();
    let pi1: Vec<f64> = spec.members.iter().map(|&k| sample.pi()[k]).collect();
    let w: Vec<f64> = pi1.iter().map(|p| 1.0 / p).collect();
    let b = wls_coefficients(&spec.rows, spec.dim, &y1, &w)?;
    let residuals: Vec<f64> = (0..n1)
        .map(|k| y1[k] - dot(&spec.rows[k * spec.dim..(k + 1) * spec.dim], &b))
        .collect();
    let hajek = residuals.iter().zip(&w).map(|(e, w)| e * w).sum::<f64>() / w.iter().sum::<f64>();
    let big_n = sample.population_size() as f64;
    let value = big_n * (dot(&spec.aux_mean, &b) + hajek);

    // Expansion factors rescaled to the effective subsample size.
    let scale = n1 as f64 / sample.len() as f64;
    let pi_eff: Vec<f64> = pi1.iter().map(|p| p * scale).collect();
    let variance = scaled_variance(&residuals, &pi_eff, sample.finite_population_correction()).ok();

    Ok(Estimate {
        estimator: EstimatorKind::Sub,
        target: Target::Total,
        value,
        variance,
        coefficients: Some(b),
        residuals: Some(residuals),
        population_size: sample.population_size(),
    })
}
