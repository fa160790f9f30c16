use thiserror::Error;

/// Error type shared by all modules.
#[derive(Debug, Error)]
pub enum Error {
    /// Bad scenario, topology, or sweep configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// An iterative numerical routine failed to converge or stalled.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Block diagonalization could not find a null-space direction for a user.
    #[error("rank deficiency: user {user} has no interference-free direction (null space empty)")]
    RankDeficient { user: usize },

    /// Degenerate bandwidth split (both link capacities are zero).
    #[error("bandwidth split undefined: access and backhaul capacities are both zero")]
    UndefinedSplit,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("config parse error: {0}")]
    Parse(String),
}

impl Error {
    /// Process exit code for the CLI: 1 for configuration problems,
    /// 2 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Parse(_) | Error::Io(_) => 1,
            _ => 2,
        }
    }
}
