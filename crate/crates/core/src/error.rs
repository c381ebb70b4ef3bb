use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),

    #[error("sign constraint violated: eps1*eps2*eps3 = {product}, expected 1")]
    ConstraintViolation { product: i32 },

    #[error("degenerate wave width: |C1| = {c1:e} collapses the profile to a constant")]
    DegenerateWidth { c1: f64 },

    #[error("degenerate amplitudes: B1 and D1 are both zero")]
    DegenerateAmplitudes,

    #[error("stray term E^{exponent} with magnitude {magnitude:e} survived denominator clearing")]
    NonvanishingStrayTerms { exponent: i32, magnitude: f64 },

    #[error("Gauss-Newton did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("Gauss-Newton converged to a constant solution (profile slope {slope:e})")]
    ConvergedToDegenerate { slope: f64 },

    #[error("time step {dt:e} exceeds the dispersive stability bound {bound:e}")]
    StepTooLarge { dt: f64, bound: f64 },

    #[error("field blew up at t = {t}")]
    BlowUp { t: f64 },

    #[error("domain too narrow: kink not contained ({0})")]
    DomainTooNarrow(String),

    #[error("sweep outside validity region: {0}")]
    SweepOutsideValidity(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Stable machine-readable name of the variant.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidParameters(_) => "InvalidParameters",
            Error::ConstraintViolation { .. } => "ConstraintViolation",
            Error::DegenerateWidth { .. } => "DegenerateWidth",
            Error::DegenerateAmplitudes => "DegenerateAmplitudes",
            Error::NonvanishingStrayTerms { .. } => "NonvanishingStrayTerms",
            Error::NoConvergence { .. } => "NoConvergence",
            Error::ConvergedToDegenerate { .. } => "ConvergedToDegenerate",
            Error::StepTooLarge { .. } => "StepTooLarge",
            Error::BlowUp { .. } => "BlowUp",
            Error::DomainTooNarrow(_) => "DomainTooNarrow",
            Error::SweepOutsideValidity(_) => "SweepOutsideValidity",
            Error::Io(_) => "Io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
