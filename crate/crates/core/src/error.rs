use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid network specification: {0}")]
    InvalidSpec(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("network specifications differ")]
    SpecMismatch,
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("replay buffer holds {count} transitions but a batch of {requested} was requested")]
    BufferUnderfull { count: usize, requested: usize },
    #[error("unknown environment `{0}` (expected `toy` or `pendulum`)")]
    UnknownEnv(String),
    #[error("unknown algorithm `{0}` (expected `ddpg`, `td3` or `sac`)")]
    UnknownAlgo(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}
