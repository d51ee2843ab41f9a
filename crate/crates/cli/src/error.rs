use thiserror::Error;

/// Failures of a CLI run, each mapped to a process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("unstable system: max Re λ = {max_real_part_over_omega_b:.6e} ω_b")]
    Unstable { max_real_part_over_omega_b: f64 },

    #[error("verification failed: {0}")]
    Verification(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("{0}")]
    Compute(magsqueeze::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Unstable { .. } => 3,
            CliError::Verification(_) => 4,
            CliError::Io(_) | CliError::Compute(_) => 1,
        }
    }

    /// Maps a library error, scaling an instability by ω_b.
    pub fn from_library(err: magsqueeze::Error, omega_b: f64) -> Self {
        use magsqueeze::Error as E;
        match err {
            E::Unstable { max_real_part } => CliError::Unstable {
                max_real_part_over_omega_b: max_real_part / omega_b,
            },
            E::InvalidParameter { .. } | E::InvalidGrid(_) | E::NoCrossing { .. } => {
                CliError::Config(err.to_string())
            }
            other => CliError::Compute(other),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
