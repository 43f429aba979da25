use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unit {unit} has no links")]
    UncoveredUnit { unit: usize },

    #[error("duplicate link ({unit}, {record})")]
    DuplicateLink { unit: usize, record: usize },

    #[error("link ({unit}, {record}) references a record that is not in the auxiliary database")]
    DanglingRecord { unit: usize, record: usize },

    #[error("link references unit {unit} which is not a covered unit")]
    UnknownUnit { unit: usize },

    #[error("duplicate record id {0}")]
    DuplicateRecord(String),

    #[error("PI-GREG requires population-scope links; incidence weights are undefined on sample links")]
    RequiresPopulationScope,

    #[error("weight scheme does not match the linkage structure: {0}")]
    SchemeMismatch(String),

    #[error("weight {value} on link ({unit}, {record}) is outside [0, 1]")]
    WeightOutOfRange { unit: usize, record: usize, value: f64 },

    #[error("{kind} weights for {owner} sum to {sum}, expected 1")]
    WeightSum {
        kind: &'static str,
        owner: String,
        sum: f64,
    },

    #[error("best link {record} of unit {unit} is not among its links")]
    BestLinkNotLinked { unit: usize, record: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("missing value: {0}")]
    MissingValue(String),

    #[error("normal-equation matrix is singular (reciprocal condition {rcond:.3e}); collinear columns {columns:?}")]
    Singular { columns: Vec<usize>, rcond: f64 },

    #[error("subsample too small: {n1} unique-link units for {params} coefficients")]
    SubsampleTooSmall { n1: usize, params: usize },

    #[error("variance needs at least 2 units")]
    TooFewUnits,

    #[error("enumeration of C({big_n}, {n}) samples exceeds the guard of {limit}")]
    EnumerationTooLarge { big_n: usize, n: usize, limit: u64 },

    #[error("{failed} of {total} replicates failed for estimator {estimator}")]
    TooManyFailures {
        estimator: String,
        failed: usize,
        total: usize,
    },

    #[error("numerical check failed: {0}")]
    Numerical(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Numerical failures, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Singular { .. }
                | Error::SubsampleTooSmall { .. }
                | Error::TooFewUnits
                | Error::TooManyFailures { .. }
                | Error::Numerical(_)
        )
    }
}
