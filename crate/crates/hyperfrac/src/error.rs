use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("non-finite value encountered: {0}")]
    NonFinite(String),
    #[error("pole of the Gamma function at x = {0}")]
    Pole(f64),
    #[error("argument outside the domain: {0}")]
    Domain(String),
    #[error("unsupported dimension n = {0}; only n = 2 and n = 3 are available")]
    Dimension(usize),
    #[error("radial tail too heavy for truncation: {0}")]
    Tail(String),
    #[error("spectral truncation error: {0}")]
    Truncation(String),
    #[error("quadrature self-check failed: {0}")]
    Quadrature(String),
    #[error("principal-value refinement did not converge: {0}")]
    Singularity(String),
    #[error("invalid geometry: {0}")]
    Geometry(String),
    #[error("assembly failed: {0}")]
    Assembly(String),
    #[error("singular discrete system (smallest singular value {sigma_min:.3e})")]
    SingularSystem { sigma_min: f64 },
    #[error("ill-conditioned problem (condition number {condition_number:.3e})")]
    IllConditioned {
        condition_number: f64,
        singular_values: Vec<f64>,
    },
    #[error("support condition violated: {0}")]
    Support(String),
    #[error("eigenvalue condition fails along the iteration: {0}")]
    EigenvalueCondition(String),
    #[error("line search failed: {0}")]
    LineSearch(String),
    #[error("invalid operator specification: {0}")]
    Spec(String),
    #[error("i/o failure: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
