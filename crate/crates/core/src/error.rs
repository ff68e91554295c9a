use thiserror::Error;

/// Errors produced by graph construction, sparsification and the dynamic
/// structures.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("unknown vertex {0}")]
    UnknownVertex(usize),
    #[error("unknown edge {0}")]
    UnknownEdge(usize),
    #[error("no edge between {0} and {1}")]
    NoSuchEdge(usize, usize),
    #[error("edge weight must be positive and finite, got {0}")]
    BadWeight(f64),
    #[error("self-loop at vertex {0}")]
    SelfLoop(usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("graphs do not share a vertex id space ({0} vs {1})")]
    IdSpaceMismatch(usize, usize),
    #[error("demand is infeasible: {0}")]
    InfeasibleDemand(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid terminal set: {0}")]
    InvalidTerminals(String),
    #[error("non-positive weight {weight} produced while eliminating vertex {vertex}")]
    Degenerate { vertex: usize, weight: f64 },
    #[error("r-division invariant violated: {0}")]
    DivisionInvariant(String),
    #[error("cut sparsifier lower bound violated for terminal subset {subset:?}: {sparsifier} < {original}")]
    CutLowerBound {
        subset: Vec<usize>,
        original: f64,
        sparsifier: f64,
    },
    #[error("vertex {0} is not active")]
    Inactive(usize),
    #[error("vertex {0} is already active")]
    AlreadyActive(usize),
    #[error("solver did not converge: relative residual {0:e}")]
    NoConvergence(f64),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("work budget exceeded: {used} units > {budget}")]
    WorkBudget { used: usize, budget: usize },
    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl Error {
    /// Whether the error reports a broken structural guarantee rather than
    /// bad input.
    pub fn is_invariant_violation(&self) -> bool {
        matches!(
            self,
            Error::DivisionInvariant(_) | Error::CutLowerBound { .. } | Error::WorkBudget { .. }
        )
    }
}
