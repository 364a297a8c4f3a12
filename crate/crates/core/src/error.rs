use alloc::string::String;

/// Errors raised by model construction, solvers and checks.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("logarithmic kernel evaluated at distance {distance} >= 1")]
    LogDomain { distance: f64 },

    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("matrix kernels are evaluated on node indices, not points")]
    MatrixKernelNeedsIndices,

    #[error("index {index} out of range for {len} nodes")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("discretization is not positive definite (smallest eigenvalue {min_eigenvalue:e})")]
    IllConditioned { min_eigenvalue: f64 },

    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error("cannot build {stages} stages from {available} nodes")]
    StageCount { stages: usize, available: usize },

    #[error("measure and Gram form live on different node sets")]
    NodeSetMismatch,

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("matrix is not symmetric positive definite")]
    NotPositiveDefinite,

    #[error("problem dimension {dim} exceeds oracle limit {max}")]
    TooLarge { dim: usize, max: usize },

    #[error("self-energy integral diverges: {0}")]
    NonIntegrable(String),

    #[error("candidate {candidate} violates the constraint at node {node}")]
    InfeasibleCandidate { candidate: usize, node: usize },

    #[error("kernel certification failed after {attempts} attempts (worst violation {worst:e})")]
    CertificationFailed { attempts: usize, worst: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
