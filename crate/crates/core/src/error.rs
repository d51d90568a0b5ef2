use thiserror::Error;

/// Every failure the library can report, grouped by the module that raises it.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid curve: {0}")]
    InvalidCurve(String),
    #[error("branch points {i} and {j} are closer than the separation threshold {eps:e}")]
    BranchPointsTooClose { i: usize, j: usize, eps: f64 },
    #[error("branch point {index} is not finite")]
    NonFiniteBranchPoint { index: usize },
    #[error("invalid cut system: {0}")]
    InvalidCuts(String),
    #[error("no non-crossing straight-segment cut system exists")]
    CutConstructionFailed,
    #[error("ambiguous square-root continuation near z = {re} + {im}i")]
    StepTooLarge { re: f64, im: f64 },
    #[error("path invalid: {0}")]
    PathInvalid(String),
    #[error("no path avoiding the cuts could be found")]
    PathBlocked,
    #[error("homology basis construction failed: {0}")]
    BasisConstructionFailed(String),
    #[error("quadrature failed to converge: {0}")]
    QuadratureFailed(String),
    #[error("a-period matrix is numerically singular (condition number {cond:e})")]
    SingularC { cond: f64 },
    #[error("transformation is not symplectic")]
    NotSymplectic,
    #[error("theta compensating factor overflows (log modulus {log_modulus})")]
    Overflow { log_modulus: f64 },
    #[error("argument lies on the theta divisor (|theta| / scale = {ratio:e})")]
    OnThetaDivisor { ratio: f64 },
    #[error("flow hits the theta divisor at site {site} (|theta| / scale = {ratio:e})")]
    OnThetaDivisorAtSite { site: i64, ratio: f64 },
    #[error("window too narrow: {0}")]
    WindowTooNarrow(String),
    #[error("coefficient a vanishes at site {site}")]
    ZeroA { site: i64 },
    #[error("anchor least-squares residual {residual:e} exceeds tolerance")]
    AnchorInconsistent { residual: f64 },
    #[error("coefficients are not stationary: cross-site deviation {deviation:e}")]
    NotStationary { deviation: f64 },
    #[error("root finding failed: {0}")]
    RootFindFailed(String),
    #[error("divisor is special (|theta| / scale = {ratio:e})")]
    SpecialDivisor { ratio: f64 },
    #[error("invalid divisor: {0}")]
    InvalidDivisor(String),
    #[error("Dirichlet points are not pairwise distinct; trace calibration is degenerate")]
    CalibrationDegenerate,
    #[error("point is a pole of phi (F_p(z, n) = 0)")]
    PoleAtDivisor,
    #[error("mean values not converged: half/full discrepancy {discrepancy:e}")]
    MeanNotConverged { discrepancy: f64 },
    #[error("arc left the bounding box at {re} + {im}i")]
    ArcEscapedBox { re: f64, im: f64 },
    #[error("arc tracing stalled near {re} + {im}i")]
    SeedStalled { re: f64, im: f64 },
    #[error("eigenvalue iteration failed: {0}")]
    EigenFailed(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("input/output error: {0}")]
    Io(String),
}

impl Error {
    /// True for errors caused by malformed input rather than numerical trouble.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidCurve(_)
                | Error::BranchPointsTooClose { .. }
                | Error::NonFiniteBranchPoint { .. }
                | Error::InvalidCuts(_)
                | Error::InvalidDivisor(_)
                | Error::InvalidConfig(_)
                | Error::Io(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
