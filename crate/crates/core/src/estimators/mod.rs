//! The regression estimator family and its consistency diagnostics.
//!
//! Every estimator works on the total scale; use
//! [`Estimate::to_target`](crate::design::Estimate::to_target) for means.

mod diagnostics;
mod greg;
mod sls;
mod sub;

use std::fmt;
use std::str::FromStr;

pub use diagnostics::{
    consistency_diagnostics, npa_covariances, DiagnosticComponent, DiagnosticKind,
    DiagnosticsReport, NpaCovariances,
};
pub use greg::{greg, implied_weights, wls_coefficients, GregSpec};
pub use sls::{sls_greg, SlsSpec};
pub use sub::{sub_greg, SubSpec};

use crate::error::Error;

/// Estimator families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EstimatorKind {
    /// Horvitz–Thompson.
    Ht,
    /// GREG with the true matched covariates.
    Ideal,
    /// GREG over the unique-link subsample.
    Sub,
    /// Population incidence GREG, covariate `z_i`, total `Z`.
    Pi,
    /// Population reverse incidence GREG, covariate `x_iω`, total `X_ω`.
    Pri,
    /// Sample reverse incidence GREG, covariate `x_iω`, total `N X̄_A`.
    Sri,
    /// Sample best-link GREG, covariate `x*_i`, total `N X̄_A`.
    Sbl,
    /// Sample link-set GREG.
    Sls,
}

impl EstimatorKind {
    pub fn label(self) -> &'static str {
        match self {
            EstimatorKind::Ht => "HT",
            EstimatorKind::Ideal => "Ideal",
            EstimatorKind::Sub => "Sub",
            EstimatorKind::Pi => "PI",
            EstimatorKind::Pri => "PRI",
            EstimatorKind::Sri => "SRI",
            EstimatorKind::Sbl => "SBL",
            EstimatorKind::Sls => "SLS",
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "ht" => EstimatorKind::Ht,
            "ideal" | "greg" => EstimatorKind::Ideal,
            "sub" => EstimatorKind::Sub,
            "pi" => EstimatorKind::Pi,
            "pri" => EstimatorKind::Pri,
            "sri" => EstimatorKind::Sri,
            "sbl" => EstimatorKind::Sbl,
            "sls" => EstimatorKind::Sls,
            _ => return Err(Error::InvalidParameter(format!("unknown estimator '{s}'"))),
        })
    }
}
