use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("shape mismatch: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("SVD did not converge for a {rows}x{cols} matrix")]
    SvdNoConvergence { rows: usize, cols: usize },

    #[error("point has numerical rank {rank}, exceeding the bound {bound}")]
    InfeasiblePoint { rank: usize, bound: usize },

    #[error("outside operation domain: {0}")]
    Domain(String),

    #[error("line search failed after {backtracks} backtracks (last alpha = {last_alpha:e}){}",
        candidate.map(|j| format!(" on rank-reduction candidate j = {j}")).unwrap_or_default())]
    LineSearchFailure {
        last_alpha: f64,
        backtracks: usize,
        candidate: Option<usize>,
    },

    #[error("malformed document: {0}")]
    Format(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
