use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("family file line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid family: {0}")]
    InvalidFamily(String),

    #[error("chart denominator vanished (|t| = {modulus:e})")]
    ChartOverflow { modulus: f64 },

    #[error("root finding failed: residual {residual:e}")]
    RootFindingFailure { residual: f64 },

    #[error("unsupported family: {0}")]
    UnsupportedFamily(String),

    #[error("lift nearly vanishes at a point (norm {norm:e})")]
    DegenerateAtPoint { norm: f64 },

    #[error("too many sampled points on the critical set ({rejected} rejected)")]
    JacobianSingular { rejected: usize },

    #[error("grid too small: {nx}x{ny}, need at least 3x3")]
    GridTooSmall { nx: usize, ny: usize },

    #[error("expansion hypothesis failed: K' = {k_prime} <= 3")]
    ExpansionHypothesisFailed { k_prime: f64 },

    #[error("contraction violated at step {step}: |h_(n+1) - h_n| = {diff:e} > {bound:e}")]
    ContractionViolated { step: usize, diff: f64, bound: f64 },

    #[error("inverse branch ambiguous: preimages {separation:e} apart")]
    BranchAmbiguity { separation: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable name used on the CLI diagnostic stream.
    pub fn name(&self) -> &'static str {
        match self {
            Error::Parse { .. } => "ParseError",
            Error::InvalidFamily(_) => "InvalidFamily",
            Error::ChartOverflow { .. } => "ChartOverflow",
            Error::RootFindingFailure { .. } => "RootFindingFailure",
            Error::UnsupportedFamily(_) => "UnsupportedFamily",
            Error::DegenerateAtPoint { .. } => "DegenerateAtPoint",
            Error::JacobianSingular { .. } => "JacobianSingular",
            Error::GridTooSmall { .. } => "GridTooSmall",
            Error::ExpansionHypothesisFailed { .. } => "ExpansionHypothesisFailed",
            Error::ContractionViolated { .. } => "ContractionViolated",
            Error::BranchAmbiguity { .. } => "BranchAmbiguity",
            Error::InvalidArgument(_) => "InvalidArgument",
            Error::Io(_) => "IoError",
            Error::Json(_) => "JsonError",
        }
    }
}
