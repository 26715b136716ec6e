use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("node index {index} out of range for graph with {n} nodes")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(usize, usize),

    #[error("graph already carries self-loops")]
    AlreadyAugmented,

    #[error("missing parameter: {0}")]
    MissingParameter(&'static str),

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("node {0} is isolated (degree 0)")]
    IsolatedNode(usize),

    #[error("operator requires a graph with self-loops")]
    MissingSelfLoops,

    #[error("laziness parameter {0} outside the open interval (0, 1)")]
    GammaOutOfRange(f64),

    #[error("probability {0} outside its admissible range")]
    ProbabilityOutOfRange(f64),

    #[error("graph has {0} edges; at least 2 are required")]
    TooFewEdges(usize),

    #[error("no logit supplied for directed edge ({0}, {1})")]
    MissingLogit(usize, usize),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("inverse temperature must be positive, got {0}")]
    BetaNotPositive(f64),

    #[error("graph is disconnected")]
    Disconnected,

    #[error("precondition violated: {0}")]
    PreconditionViolated(String),

    #[error("power iteration did not converge within {0} iterations")]
    NotConverged(usize),

    #[error("distribution is not stationary for the operator (L1 residual {0:e})")]
    NotStationary(f64),

    #[error("chain did not mix within {0} steps")]
    NotMixedBy(usize),

    #[error("epsilon {0} outside (0, 1)")]
    EpsOutOfRange(f64),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("at least {min} samples required, got {got}")]
    TooFewSamples { min: usize, got: usize },

    #[error("at least 2 nodes required")]
    TooFewNodes,

    #[error("threshold {0} outside (0, 1)")]
    ThresholdOutOfRange(f64),

    #[error("sequence too short: need at least {min} entries, got {got}")]
    TooShort { min: usize, got: usize },

    #[error("hypothesis C(P) < 1 violated at layer {layer}: C = {coefficient}")]
    HypothesisViolated { layer: usize, coefficient: f64 },

    #[error("no labeled nodes")]
    NoLabels,

    #[error("training diverged at epoch {0}: loss is not finite")]
    Diverged(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code used by the command-line front end:
    /// 1 for I/O and input errors, 2 for violated preconditions,
    /// 3 for numeric non-convergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NotConverged(_) | Error::NotMixedBy(_) | Error::Diverged(_) => 3,
            Error::Io(_)
            | Error::Json(_)
            | Error::Csv(_)
            | Error::Parse { .. }
            | Error::InvalidArgument(_)
            | Error::MissingParameter(_) => 1,
            _ => 2,
        }
    }
}
