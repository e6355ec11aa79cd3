use thiserror::Error;

/// Errors produced by the simulator and its tooling.
#[derive(Debug, Error)]
pub enum Error {
    #[error("link matrix is not unitary (|U^dag U - 1|_F = {deviation:.3e})")]
    NonUnitary { deviation: f64 },

    #[error("phonon number {phonon} exceeds the lattice cutoff {cutoff}")]
    PhononOutOfRange { phonon: usize, cutoff: usize },

    #[error("matrix is not Hermitian (|H - H^dag|_F = {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("dimension mismatch: expected {expected}, got {found}")]
    Dimension { expected: usize, found: usize },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("integrator failed at t = {time} ms: {reason}")]
    Integrator { time: f64, reason: String },

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("conservation check failed: {0}")]
    Conservation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_)
            | Error::NonUnitary { .. }
            | Error::PhononOutOfRange { .. }
            | Error::InvalidParameter(_)
            | Error::InvalidState(_)
            | Error::Io(_) => 2,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
