use thiserror::Error;

/// Errors raised by the numerical modules.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("delay {delay} is not an integer multiple of the grid spacing {dt}")]
    NonCommensurateDelay { delay: f64, dt: f64 },

    #[error("shifting by {delta} along axis {axis} pushes non-zero amplitude off the grid")]
    SupportClipped { axis: usize, delta: f64 },

    #[error("grid too small: {0}")]
    GridTooSmall(String),

    #[error("sampled amplitude is identically zero")]
    ZeroAmplitude,

    #[error("frequency weight is negative ({weight}) at omega = {omega} inside the occupied band")]
    NegativeWeight { omega: f64, weight: f64 },

    #[error("overlap needs exactly two terms, got {0}")]
    WrongTermCount(usize),

    #[error("matrix factorization did not converge")]
    ConvergenceFailure,

    #[error("beam splitter already applied; the pipeline allows a single splitter")]
    SplitterAlreadyApplied,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

impl Error {
    /// True for errors caused by the physical setup (as opposed to bad input values).
    pub fn is_physics(&self) -> bool {
        matches!(
            self,
            Error::SupportClipped { .. }
                | Error::GridTooSmall(_)
                | Error::ZeroAmplitude
                | Error::NegativeWeight { .. }
                | Error::ConvergenceFailure
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
