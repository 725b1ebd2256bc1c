use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("invalid power model: {0}")]
    InvalidPowerModel(String),
    #[error("invalid solver options: {0}")]
    InvalidOptions(String),
    #[error("invalid experiment config: {0}")]
    InvalidConfig(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("distance {0} m is below the 1 m reference distance")]
    DistanceTooShort(f64),
    #[error("receive filter of user {0} is zero")]
    ZeroFilter(usize),
    #[error("argument must be strictly positive: {0}")]
    NonPositive(&'static str),
    #[error("surrogate expansion is degenerate for user {0}: |c^H A gamma| vanishes")]
    DegenerateExpansion(usize),
    #[error("matrix is not positive semidefinite (min eigenvalue {0:e})")]
    NotPsd(f64),
    #[error("matrix is not Hermitian (asymmetry {0:e})")]
    NotHermitian(f64),
    #[error("starting point is infeasible: {0}")]
    InfeasibleStart(String),
    #[error("denominator is not positive on the box (min {0:e})")]
    NonPositiveDenominator(f64),
    #[error("objective or gradient is not finite")]
    NonFinite,
    #[error("matrix factorization failed: {0}")]
    Factorization(&'static str),
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}
