use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("grid needs at least 16 nodes, got {0}")]
    DegenerateDomain(usize),

    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("e^-F is not a usable weight: {0}")]
    NonFiniteWeight(String),

    #[error("truncation tail mass {tail:e} exceeds tolerance {tolerance:e}")]
    TailMassTooLarge { tail: f64, tolerance: f64 },

    #[error("potential not defined at x = {x}: {reason}")]
    DomainError { x: f64, reason: String },

    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("field has {got} values but the grid has {expected} nodes")]
    AlignmentMismatch { expected: usize, got: usize },

    #[error("negative density {value:e} at node {node}")]
    NegativeDensity { node: usize, value: f64 },

    #[error("density {value:e} at node {node} is below the floor {floor:e}")]
    FloorViolation { node: usize, value: f64, floor: f64 },

    #[error("mass {mass} is not normalized to 1")]
    MassNotNormalized { mass: f64 },

    #[error("eigensolver did not converge: residual {residual:e} after {iterations} iterations")]
    SolverDiverged { residual: f64, iterations: usize },

    #[error("DF.n = {value} < 0 at boundary point {x}")]
    BoundaryConditionViolated { x: f64, value: f64 },

    #[error("tridiagonal solve failed: zero pivot at row {0}")]
    LinearSolveFailure(usize),

    #[error("Newton iteration failed at t = {t} after {halvings} step halvings")]
    NewtonDiverged { t: f64, halvings: usize },

    #[error("(m, p) = ({m}, {p}) lies outside the admissible ellipse for theta = {theta}")]
    OutsideEllipse { m: f64, p: f64, theta: f64 },

    #[error("q = {q} is outside (1, 4/3); need 1 < m < p + 1 (m = {m}, p = {p})")]
    QOutOfRange { q: f64, m: f64, p: f64 },

    #[error("eigenvalue lambda_1 = {0} is not positive")]
    NonpositiveLambda(f64),

    #[error("fit window holds {0} snapshots, need at least 10")]
    WindowTooShort(usize),

    #[error("non-positive value {value:e} at t = {t} in fit window")]
    NonPositiveData { t: f64, value: f64 },

    #[error("trace format: {0}")]
    TraceFormat(String),

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
