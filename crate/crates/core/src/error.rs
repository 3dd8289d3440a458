use thiserror::Error;

/// Errors raised across the crate.
///
/// Variants are grouped by the category reported on the command line, see
/// [`Error::category`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite value encountered: {0}")]
    Overflow(String),

    #[error("invalid network structure: {0}")]
    Structure(String),

    #[error("squared-ReLU depth budget exceeded: L2 = {l2} > C*log2(L) = {limit:.6}")]
    Budget { l2: usize, limit: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid specification: {0}")]
    Spec(String),

    #[error("point outside domain: {0}")]
    Domain(String),

    #[error("quadrature did not converge: {0}")]
    Accuracy(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("training diverged: {0}")]
    Divergence(String),

    #[error("internal assembly error: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Short machine-readable category tag.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Dimension(_) => "dimension",
            Error::Overflow(_) => "overflow",
            Error::Structure(_) => "structure",
            Error::Budget { .. } => "budget",
            Error::Parse(_) => "parse",
            Error::Spec(_) => "spec",
            Error::Domain(_) => "domain",
            Error::Accuracy(_) => "accuracy",
            Error::Config(_) => "config",
            Error::Precondition(_) => "precondition",
            Error::Divergence(_) => "divergence",
            Error::Internal(_) => "internal",
            Error::Io(_) => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
