//! Regression estimation of survey totals when auxiliary data reach the sample
//! only through a probabilistic record linkage.

pub mod design;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod io;
pub mod linalg;
pub mod linkage;
pub mod pipeline;
pub mod rng;
pub mod synthpop;

pub use design::{Estimate, Sample, SurveyDesign, Target};
pub use error::{Error, Result};
pub use estimators::EstimatorKind;
pub use pipeline::EstimationContext;
pub use linkage::{AuxDatabase, BestLinks, LinkageStructure, MatchSet, Population, WeightScheme};
