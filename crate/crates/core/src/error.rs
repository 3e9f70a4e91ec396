use thiserror::Error;

/// Errors raised by the geometry, operator and report layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected} coordinates, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid ambient point: {0}")]
    InvalidPoint(String),

    #[error("point coincides with the pole (distance {0:e})")]
    PoleSingularity(f64),

    #[error("invalid tangent vector: {0}")]
    InvalidVector(String),

    #[error("degenerate cell {cell}: {reason}")]
    DegenerateCell { cell: usize, reason: String },

    #[error("non-manifold facet {facet:?} shared by {count} cells")]
    NonManifoldFacet { facet: Vec<usize>, count: usize },

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("unsupported generator '{0}'")]
    UnsupportedGenerator(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("facet {0:?} is not a boundary facet")]
    InteriorFacet(Vec<usize>),

    #[error("mean curvature unavailable: {0}")]
    MissingMeanCurvature(String),

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("invalid scalar field: {0}")]
    InvalidField(String),

    #[error("excision schedule has {0} points, at least 3 are required")]
    TooFewSchedulePoints(usize),

    #[error("boundary is not contained in a sphere about the pole (radial spread {0:e})")]
    BoundaryNotSpherical(f64),

    #[error("mesh has empty boundary: {0}")]
    EmptyBoundary(String),

    #[error("mesh has nonempty boundary: {0}")]
    NonemptyBoundary(String),

    #[error("did not converge: {0}")]
    NoConvergence(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
