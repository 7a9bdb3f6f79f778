use thiserror::Error;

/// Errors raised by the library layers.
///
/// Outcomes that the contracts treat as valid results (an empty free
/// boundary, an annulus without free-boundary points, a solve that did not
/// reach its tolerance) are reported through flags on the returned values
/// instead of through this type.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("lambda_plus ({lambda_plus}) must exceed lambda_minus ({lambda_minus}) >= 0")]
    NonPositiveLambda { lambda_plus: f64, lambda_minus: f64 },
    #[error("boundary data degenerate: alpha_plus + alpha_minus must be positive and finite")]
    DegenerateData,
    #[error("alpha_minus ({alpha_minus}) exceeds alpha_plus ({alpha_plus})")]
    TwoPhaseOrderError { alpha_plus: f64, alpha_minus: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("gamma is undefined for this problem (no free boundary)")]
    GammaAbsent,
    #[error("point ({0}, {1}) lies on the free-boundary ray")]
    OnFreeBoundary(f64, f64),
    #[error("bad cone parameter: {0}")]
    BadConeParam(String),
    #[error("mesh would have {count} triangles, above the cap of {cap}")]
    BudgetExceeded { count: usize, cap: usize },
    #[error("outer datum disagrees with the fixed-boundary datum at corner ({x1}, {x2}) by {mismatch:e}")]
    TraceMismatch { x1: f64, x2: f64, mismatch: f64 },
    #[error("radius {0} is not aligned with a mesh ring")]
    UnalignedRadius(f64),
    #[error("region radius {0} is not aligned with a mesh ring")]
    RegionUnaligned(f64),
    #[error("scale {0} is not a self-similar ring scale of the mesh")]
    UnalignedScale(f64),
    #[error("radii not aligned with mesh rings: {0:?}")]
    RadiiUnaligned(Vec<f64>),
    #[error("perturbation g is not set (g_coeff = 0)")]
    GNotSet,
    #[error("linear system is singular or not positive definite")]
    SingularSystem,
    #[error("boundary data inconsistent: {0}")]
    InconsistentBoundary(String),
    #[error("fields live on different meshes")]
    MeshMismatch,
    #[error("free boundary curve too short for the requested statistics")]
    CurveTooShort,
    #[error("center ({0}, {1}) lies outside the closed half-disc")]
    CenterOutside(f64, f64),
    #[error("need at least {needed} scales, got {got}")]
    TooFewScales { needed: usize, got: usize },
    #[error("curve has no points in annulus [{0}, {1}]")]
    EmptyInAnnulus(f64, f64),
    #[error("free boundary does not cross the positive x1-axis")]
    NoCrossing,
    #[error("parse error: {0}")]
    Parse(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
