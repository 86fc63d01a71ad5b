use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A conditional probability was requested on an event of probability zero.
    #[error("undefined quantity: {0} has zero probability mass")]
    ZeroMassCondition(String),

    #[error("invalid probability for `{field}`: {value} (must lie in [0, 1])")]
    InvalidProbability { field: String, value: f64 },

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid query: {0}")]
    InvalidQuery(String),

    #[error("marginals inconsistent with model: {0}")]
    InconsistentMarginals(String),

    #[error("missing cell: {0}")]
    MissingCell(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid sampler configuration: {0}")]
    InvalidConfig(String),

    #[error("rejection budget exhausted after {attempts} attempts{}{}",
        trial.map(|t| format!(" (trial {t})")).unwrap_or_default(),
        grid_value.map(|g| format!(" (grid point {g})")).unwrap_or_default())]
    RejectionBudgetExhausted {
        attempts: u32,
        trial: Option<u64>,
        grid_value: Option<f64>,
    },

    #[error("empty sample")]
    EmptySample,

    #[error("line {line}: {reason}")]
    MalformedRow { line: u64, reason: String },

    #[error("mixed schema: column `{0}` is present in some rows and empty in others")]
    MixedSchema(String),

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("all {0} bootstrap replicates were degenerate")]
    AllReplicatesDegenerate(usize),
}

pub(crate) fn check_probability(field: &str, value: f64) -> Result<()> {
    if value.is_finite() && (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::InvalidProbability {
            field: field.to_string(),
            value,
        })
    }
}
