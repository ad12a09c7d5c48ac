use thiserror::Error;

/// Errors raised by the simulators, solvers and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid duration law: {0}")]
    Duration(String),

    #[error("sampled infectious period {eta} exceeds the hard cap {cap}; the duration law is probably mis-specified")]
    HorizonCap { eta: f64, cap: f64 },

    #[error("cannot condition the duration on exceeding age {age}: survival is zero there")]
    ImpossibleConditioning { age: f64 },

    #[error("thinning acceptance ratio {ratio} exceeds 1 at t = {time} ({process})")]
    ThinningBound {
        ratio: f64,
        time: f64,
        process: &'static str,
    },

    #[error("population not conserved at t = {time}: S + I + R = {total}, expected {expected}")]
    Conservation {
        time: f64,
        total: usize,
        expected: usize,
    },

    #[error("no infected individual carries positive hazard; a recovery cannot be drawn")]
    NoRecoveryMass,

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("degenerate per-node equation at t = {time} (coefficient {coefficient}); reduce the time step")]
    DegenerateStep { time: f64, coefficient: f64 },

    #[error("node {index} has no centered difference (grid has {len} nodes)")]
    BoundaryNode { index: usize, len: usize },

    #[error("covariance block `{block}` is not positive semidefinite (last jitter {jitter:e})")]
    NotPositiveSemidefinite { block: String, jitter: f64 },

    #[error("test function is not integrable against the limit measure: {0}")]
    NotIntegrable(String),

    #[error("too few replicas for band estimation: {0}")]
    InsufficientReplicas(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
