use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("decode failure at frame {frame}: {reason}")]
    DecodeFailure { frame: usize, reason: String },
    #[error("ill-conditioned decoy intensities: mu = {mu}, nu = {nu}")]
    IllConditioned { mu: f64, nu: f64 },
    #[error("inconsistent tallies: {0}")]
    Inconsistent(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
