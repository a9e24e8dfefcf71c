use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("frame is rank deficient (column {column} has residual norm {residual:.3e})")]
    Rank { column: usize, residual: f64 },
    #[error("dimension mismatch: expected {expected}, got {found}")]
    Dim { expected: usize, found: usize },
    #[error("field evaluation failed at {point:?}: {reason}")]
    FieldEval { point: Vec<f64>, reason: String },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("fiber is empty at {0:?}")]
    EmptyFiber(Vec<f64>),
    #[error("form lies in P(G); no separating plane exists (min trace {min_trace:.3e})")]
    NoWitness { min_trace: f64 },
    #[error("non-closedness probe hypothesis violated: {0}")]
    ProbeInvalid(String),
    #[error("search budget exceeded: {0}")]
    BudgetExceeded(String),
    #[error("operation not supported for this Grassmannian variant: {0}")]
    UnsupportedVariant(String),

    #[error("defining function has no sign change inside the box")]
    EmptyBoundary,
    #[error("defining function gradient {grad_norm:.3e} is degenerate at {point:?}")]
    DegenerateDefiningFunction { point: Vec<f64>, grad_norm: f64 },
    #[error("boundary is not strictly G-convex (min tangential trace {min_trace:.3e} at {point:?})")]
    NotStrictlyConvex { point: Vec<f64>, min_trace: f64 },
    #[error("lambda search exceeded {cap:e} (margin {margin:.3e})")]
    LambdaSearchFailed { cap: f64, margin: f64 },
    #[error("point {point:?} is outside the domain (rho = {rho:.3e})")]
    Domain { point: Vec<f64>, rho: f64 },
    #[error("composition profile is not convex increasing at t = {t}: {reason}")]
    CompositionRuleViolated { t: f64, reason: String },

    #[error("metric is singular at {point:?} (min eigenvalue {min_eigenvalue:.3e})")]
    MetricSingular { point: Vec<f64>, min_eigenvalue: f64 },
    #[error("frame error: {0}")]
    Frame(String),
    #[error("rank is not numerically {p}: eigenvalues {eigenvalues:?}")]
    RankAmbiguous { p: usize, eigenvalues: Vec<f64> },
    #[error("surface parametrization is degenerate at ({s}, {t})")]
    SurfaceDegenerate { s: f64, t: f64 },

    #[error("plane cannot be resolved by the stencil: nearest frame is {angle_deg:.1} degrees away")]
    StencilResolution { angle_deg: f64 },
    #[error("iteration did not converge in {sweeps} sweeps (residual {residual:.3e})")]
    NotConverged { sweeps: usize, residual: f64 },
    #[error("precondition failed at lattice point {index} ({point:?}): {reason}")]
    PreconditionFailed { index: usize, point: Vec<f64>, reason: String },
    #[error("form field leaves the positive hull of G at {point:?} (residual {residual:.3e})")]
    ConeViolation { point: Vec<f64>, residual: f64 },

    #[error("serialization: {0}")]
    Serialization(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serialization(e.to_string())
    }
}
