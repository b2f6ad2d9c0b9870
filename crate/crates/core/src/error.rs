use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("newton inversion stalled at residual {residual:.3e} (point {point:?})")]
    NoConvergence { residual: f64, point: [f64; 2] },
    #[error("map is not anosov: {0}")]
    NotAnosov(String),
    #[error("base expansion {measured:.6} below required {required:.6}")]
    ExpansionTooWeak { measured: f64, required: f64 },
    #[error("frame determinant {0:.3e} underflowed")]
    SingularFrame(f64),
    #[error("{0}")]
    InvalidParams(String),
    #[error("curve tangent enters the stable cone at parameter {0}")]
    NotTransverse(f64),
    #[error("leading eigenvalue is not simple (gap {0:.3e})")]
    NotSimple(f64),
    #[error("contour passes within {0:.3e} of the spectrum")]
    ContourHitsSpectrum(f64),
    #[error("finite-difference step fell below {0:.1e} without stabilizing")]
    StepUnderflow(f64),
    #[error("z violates the resolvent domain: {0}")]
    DomainViolation(String),
    #[error("linear solve failed: {0}")]
    SolveFailure(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Validation problems are user errors; everything else is numerical.
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::InvalidParams(_) | Error::Json(_) | Error::Io(_))
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Error::NoConvergence { .. } => "NoConvergence",
            Error::NotAnosov(_) => "NotAnosov",
            Error::ExpansionTooWeak { .. } => "ExpansionTooWeak",
            Error::SingularFrame(_) => "SingularFrame",
            Error::InvalidParams(_) => "InvalidParams",
            Error::NotTransverse(_) => "NotTransverse",
            Error::NotSimple(_) => "NotSimple",
            Error::ContourHitsSpectrum(_) => "ContourHitsSpectrum",
            Error::StepUnderflow(_) => "StepUnderflow",
            Error::DomainViolation(_) => "DomainViolation",
            Error::SolveFailure(_) => "SolveFailure",
            Error::Io(_) => "Io",
            Error::Json(_) => "Json",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
