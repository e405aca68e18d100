use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("matrix is rank deficient (smallest singular value {sigma_min:e})")]
    RankDeficient { sigma_min: f64 },

    #[error("matrix is not a rotation: {0}")]
    NotARotation(String),

    #[error("vector is not unit length (norm {0})")]
    NotUnit(f64),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InvariantError {
    #[error("degenerate subset: {0}")]
    DegenerateSubset(&'static str),

    #[error("noise bound must be positive and finite, got {0}")]
    InvalidNoiseBound(f64),

    #[error("invalid measurement set: {0}")]
    InvalidMeasurements(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("too few measurements: {have} available, invariant needs {need}")]
    TooFewMeasurements { have: usize, need: usize },

    #[error("graph has {0} vertices, brute force is limited to 25")]
    GraphTooLarge(usize),

    #[error("subset budget must allow at least one subset")]
    EmptyBudget,

    #[error("invalid edge ({0}, {1})")]
    InvalidEdge(usize, usize),

    #[error("edge list line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
}

impl From<GeometryError> for SolveError {
    fn from(e: GeometryError) -> Self {
        SolveError::DegenerateGeometry(e.to_string())
    }
}

/// Malformed input files and experiment settings.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum InputError {
    #[error("invalid JSON: {0}")]
    Json(String),

    #[error("{path}: {reason}")]
    Field { path: String, reason: String },

    #[error("line {line}: {reason}")]
    Line { line: usize, reason: String },

    #[error("invalid experiment: {0}")]
    Spec(String),
}
