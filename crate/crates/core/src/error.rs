use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("natural spline of order {} needs at least {needed} knots, got {p}", 2 * .m)]
    UnderdeterminedBasis { p: usize, m: usize, needed: usize },

    #[error("unsupported spline order m = {0} (supported: 1..=3)")]
    UnsupportedOrder(usize),

    #[error("ill-conditioned matrix (condition estimate {condition:.3e})")]
    IllConditioned { condition: f64 },

    #[error("system matrix is not numerically positive definite (smallest pivot {min_pivot:.3e})")]
    Conditioning { min_pivot: f64 },

    #[error("degenerate smoother at rho = {rho:.3e}: {reason}")]
    DegenerateSmoother { rho: f64, reason: String },

    #[error("no grid value of rho produced a valid GCV score")]
    NoValidRho,

    #[error("noise-variance estimation needs p >= 3 grid points, got {p}")]
    InsufficientGrid { p: usize },

    #[error("target grid p = {p} must exceed the largest curve size {max_points}")]
    GridTooCoarse { p: usize, max_points: usize },

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("unsupported model file version {found} (this build reads version {supported})")]
    UnsupportedVersion { found: u32, supported: u32 },

    #[error("rate study failed at n = {n}, replicate {replicate}: {source}")]
    Study {
        n: usize,
        replicate: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short stable identifier of the error variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "invalid_argument",
            Error::InvalidInput(_) => "invalid_input",
            Error::UnderdeterminedBasis { .. } => "underdetermined_basis",
            Error::UnsupportedOrder(_) => "unsupported_order",
            Error::IllConditioned { .. } => "ill_conditioned",
            Error::Conditioning { .. } => "conditioning",
            Error::DegenerateSmoother { .. } => "degenerate_smoother",
            Error::NoValidRho => "no_valid_rho",
            Error::InsufficientGrid { .. } => "insufficient_grid",
            Error::GridTooCoarse { .. } => "grid_too_coarse",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::Parse { .. } => "parse",
            Error::UnsupportedVersion { .. } => "unsupported_version",
            Error::Study { .. } => "study",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}

pub(crate) fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}
