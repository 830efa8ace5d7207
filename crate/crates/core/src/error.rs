use thiserror::Error;

/// Errors raised anywhere along the geometry → mesh → FEM → optimizer pipeline.
///
/// Variants carry the module they originate from in their message so the CLI
/// can surface them without extra wrapping.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("geometry: invalid input: {0}")]
    InvalidInput(String),

    #[error("geometry: degenerate boundary: {0}")]
    DegenerateBoundary(String),

    #[error("geometry: diameter point set is empty")]
    EmptyDiameterSet,

    #[error("meshing: boundary edges {0} and {1} intersect")]
    SelfIntersection(usize, usize),

    #[error("meshing: {0}")]
    MeshFailure(String),

    #[error("fem: {0}")]
    SolverFailure(String),

    #[error("fem: boundary trace vanishes, Rayleigh quotient undefined")]
    ZeroBoundaryTrace,

    #[error("gradient: eigenvalue {index} is clustered (relative gap {gap:.3e}); use the cluster matrix")]
    ClusteredEigenvalue { index: usize, gap: f64 },

    #[error("optimizer: projection did not converge: {0}")]
    ProjectionFailure(String),

    #[error("optimizer: no feasible ascent step at minimum step size")]
    NoAscent,
}

impl Error {
    /// True for errors that mean "this candidate shape is unusable" rather than
    /// a programming or configuration mistake. The optimizer rejects such
    /// candidates and shrinks its step.
    pub fn is_candidate_rejection(&self) -> bool {
        matches!(
            self,
            Error::SelfIntersection(..)
                | Error::MeshFailure(_)
                | Error::DegenerateBoundary(_)
                | Error::SolverFailure(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
