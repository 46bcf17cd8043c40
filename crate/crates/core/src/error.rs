use thiserror::Error;

/// Every failure mode raised by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("form is degenerate (|det| = {det:e})")]
    Nondegeneracy { det: f64 },
    #[error("matrix is not antisymmetric (defect {0:e})")]
    NotAntisymmetric(f64),
    #[error("metric is not symmetric positive definite")]
    NotSpd,
    #[error("J + J0 is singular (|det| = {det:e})")]
    SingularSum { det: f64 },
    #[error("parameter lies outside the admissible ball (min eig of I - W^T W = {margin:e})")]
    OutOfDomain { margin: f64 },
    #[error("W does not anticommute with J0 (defect {0:e})")]
    NotAntilinear(f64),
    #[error("operator does not square to -I (defect {0:e})")]
    NotComplexStructure(f64),
    #[error("point ({c1}, {c2}, {s}) is not on the unit sphere")]
    OffSphere { c1: f64, c2: f64, s: f64 },
    #[error("frame is not orthonormal (defect {0:e})")]
    NotOrthonormal(f64),
    #[error("division by zero: {0}")]
    DivByZero(&'static str),
    #[error("no contraction: residual ratio {ratio:.3} at step {step}")]
    NoContraction { ratio: f64, step: usize },
    #[error("iteration stalled with residual {residual:e} above tolerance")]
    Stalled { residual: f64 },
    #[error("maximum iterations ({0}) reached")]
    MaxIter(usize),
    #[error("map leaves the structure domain at cell {cell} (|u| = {norm:.3})")]
    DomainEscape { cell: usize, norm: f64 },
    #[error("J_st + J(u) singular at cell {cell}")]
    SingularCell { cell: usize },
    #[error("genus expression is not an integer")]
    NonIntegral,
    #[error("negative genus {0}: inconsistent surface data")]
    NegativeGenus(i64),
    #[error("Bennequin bound violated: b = {b} < 2*ord - 1 = {bound}")]
    BoundViolation { b: i64, bound: i64 },
    #[error("Bennequin index {0} is even")]
    EvenBennequin(i64),
    #[error("parity error: chi + S^2 +- c1.S must be even")]
    Parity,
    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),
    #[error("unsupported ambient surface: {0}")]
    UnsupportedAmbient(String),
    #[error("negative double points are not supported")]
    NegativeNodes,
    #[error("rho = {rho} lies outside the collar |rho| < {limit}")]
    OutOfCollar { rho: f64, limit: f64 },
    #[error("no real root for gamma = {0}")]
    NoRealRoot(f64),
    #[error("subspace is not totally real")]
    NotTotallyReal,
    #[error("degenerate pair: smallest nonzero singular value {0:e}")]
    DegeneratePair(f64),
    #[error("Newton iterate left the branch (|z1| = {0:.3})")]
    BranchEscape(f64),
    #[error("point leaves the chart: {0}")]
    ChartOverflow(String),
    #[error("point is off the neck annulus (|n x1 t - 1| = {0:e})")]
    OffNeck(f64),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("field file: {0}")]
    Format(String),
    #[error("field file checksum mismatch (stored {stored:08x}, computed {computed:08x})")]
    Checksum { stored: u32, computed: u32 },
    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
