use thiserror::Error;

/// Failure taxonomy shared by the library and the experiment harness.
///
/// The variants map onto process exit codes: `Config` and `Domain` are caller
/// mistakes (exit 2), `Precondition` and `OracleFailure` mean the problem
/// instance does not satisfy what a scheme or oracle requires (exit 3), and
/// `Divergence` is a run that left the admissible region (exit 4).
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("oracle failure: {0}")]
    OracleFailure(String),
    #[error("divergence: {0}")]
    Divergence(String),
}

impl Error {
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Domain(_) => 2,
            Error::Precondition(_) | Error::OracleFailure(_) => 3,
            Error::Divergence(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
