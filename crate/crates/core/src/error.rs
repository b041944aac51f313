use alloc::vec::Vec;

/// Errors raised by samplers, programs and oracles.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("distribution has no outcomes")]
    EmptyDistribution,
    #[error("invalid weight {weight} at index {index}")]
    InvalidWeight { index: usize, weight: f64 },
    #[error("all weights are zero")]
    ZeroMass,
    #[error("trace does not match the program: {0}")]
    TraceMismatch(&'static str),
    #[error("no more unique traces exist")]
    Exhausted,
    #[error("node has {expected} children but the distribution has {found} outcomes")]
    DistributionMismatch { expected: usize, found: usize },
    #[error("a distribution is required at an unexpanded node")]
    MissingDistribution,
    #[error("no run in progress")]
    NotMidRun,
    #[error("operation not allowed while a run is in progress")]
    MidRun,
    #[error("no trie node at path {0:?}")]
    UnknownPath(Vec<usize>),
    #[error("expected {expected} values, got {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("k = {k} exceeds the {available} available outcomes")]
    KTooLarge { k: usize, available: usize },
    #[error("search space has no terminal state")]
    EmptySpace,
    #[error("invalid sample probabilities: {0}")]
    InvalidProbabilities(&'static str),
    #[error("search exhausted the space so no threshold exists")]
    MissingThreshold,
    #[error("no samples to average")]
    EmptySample,
    #[error("instance needs at least 3 nodes, got {0}")]
    DegenerateInstance(usize),
    #[error("invalid tour: {0}")]
    InvalidTour(&'static str),
    #[error("trace space exceeds the cap of {0} traces")]
    SpaceTooLarge(usize),
    #[error("instance with {n} nodes exceeds the solver limit of {limit}")]
    TooLarge { n: usize, limit: usize },
    #[error("invalid program definition: {0}")]
    InvalidProgram(&'static str),
    /// Internal signal used to stop a replayed program at a choice point.
    #[error("program paused at a probe point")]
    Paused,
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
