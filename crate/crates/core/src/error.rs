use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A caller-supplied parameter is outside its domain.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("matrix is not Hermitian (max deviation {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("Bloch vector length {norm} exceeds 1")]
    OutsideBlochBall { norm: f64 },

    /// Information (or its inverse) is infinite; the bound is zero or undefined.
    #[error("divergent: {0}")]
    Divergent(String),

    #[error("singular Fisher matrix; no information on {divergent:?}")]
    SingularFisher { divergent: Vec<String> },

    #[error("state invariant violated at step {step} (t = {time}): {reason}")]
    InvariantViolation {
        step: usize,
        time: f64,
        reason: String,
    },

    #[error("optimizer did not converge after {iterations} iterations (best value {best_value})")]
    NonConvergence { iterations: usize, best_value: f64 },
}

impl Error {
    /// `true` for failures of a numerical procedure, `false` for rejected inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Divergent(_)
                | Error::SingularFisher { .. }
                | Error::InvariantViolation { .. }
                | Error::NonConvergence { .. }
        )
    }
}
