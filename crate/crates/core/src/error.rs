use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid cell: {0}")]
    InvalidCell(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("fold would self-intersect: smallest radius {min_radius} is not positive")]
    SelfIntersectingFold { min_radius: f64 },
    #[error("unsupported input: {0}")]
    UnsupportedInput(String),
    #[error("unsupported neighborhood policy: {0}")]
    UnsupportedPolicy(String),
    #[error("neighbor enumeration exceeds the limit of {limit} pairs")]
    ResourceLimit { limit: usize },
    #[error("fingerprints were produced with different configurations ({0})")]
    IncomparableFingerprints(String),
    #[error("degenerate parameters: {0}")]
    DegenerateParameters(String),
    #[error("certification failed: {0}")]
    CertificationFailed(String),
    #[error("sampling failed after {attempts} attempts: {diagnostics}")]
    SamplingFailure { attempts: usize, diagnostics: String },
    #[error("{points} points exceeds the exact-search limit of {limit}")]
    UnsupportedSize { points: usize, limit: usize },
    #[error("evaluator {function} failed on argument {argument}: {message}")]
    Evaluator {
        function: &'static str,
        argument: String,
        message: String,
    },
    #[error("evaluation budget of {budget} calls exhausted")]
    BudgetExhausted { budget: usize },
    #[error("internal consistency check failed: {0}")]
    InternalConsistency(String),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unsupported lattice: {0}")]
    UnsupportedLattice(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}
