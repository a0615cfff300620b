use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A parameter or argument lies outside its mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),

    #[error(
        "s = {re}{im:+}i lies within {radius:e} of the root of unity omega^{index}; \
         evaluate the tabulated series instead"
    )]
    NearRootOfUnity { re: f64, im: f64, index: usize, radius: f64 },

    #[error(
        "s = {re}{im:+}i is too close to the origin for the closed form \
         (|s|^{power} < {limit:e}); evaluate the tabulated series instead"
    )]
    NearOrigin { re: f64, im: f64, power: i32, limit: f64 },

    /// The complex series left an imaginary part above tolerance.
    #[error("numerical inconsistency: imaginary residual {residual:e} exceeds {limit:e}")]
    ImaginaryResidual { residual: f64, limit: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("likelihood has no maximum: {0}")]
    NoMaximum(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// Short machine-readable category.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::NearRootOfUnity { .. } | Error::NearOrigin { .. } => "pole-guard",
            Error::ImaginaryResidual { .. } | Error::Numerical(_) | Error::NoMaximum(_) => "numerical",
            Error::Unsupported(_) => "unsupported",
            Error::Parse(_) => "parse",
        }
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
