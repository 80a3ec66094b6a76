use thiserror::Error;

/// Errors produced by the deblurring engine.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum DeblurError {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid data: {0}")]
    Data(String),

    #[error("invalid parameter: {0}")]
    Params(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error(
        "the PSF is not quadrantally symmetric, so the {0} system cannot be diagonalized \
         by a fast transform; use an enlarged domain instead (e.g. mode enlarge:{0}:<pad>)"
    )]
    Symmetry(String),

    #[error("singular system: {0}")]
    Singular(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("iterative solve did not converge: {0}")]
    Convergence(String),
}

impl DeblurError {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(self, DeblurError::Singular(_) | DeblurError::Convergence(_))
    }
}

pub type Result<T> = std::result::Result<T, DeblurError>;
