use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("unknown family `{0}`")]
    UnknownFamily(String),
    #[error("parameter `{name}` = {value} outside [{lo}, {hi}]")]
    ParamOutOfRange { name: String, value: f64, lo: f64, hi: f64 },
    #[error("unknown parameter `{0}`")]
    UnknownParam(String),
    #[error(
        "non-degeneracy check failed for critical spec {spec} at x = {x}: needs C = {needed}, family allows {allowed}"
    )]
    NondegeneracyCheckFailed { spec: usize, x: f64, needed: f64, allowed: f64 },
    #[error("invalid map: {0}")]
    InvalidMap(String),
    #[error("point {0} is outside the domain")]
    OutOfDomain(f64),
    #[error("point {0} is a branch boundary; a side hint is required")]
    AmbiguousSide(f64),
    #[error("derivative is infinite at the singular point {0}")]
    InfiniteDerivative(f64),
    #[error("derivative vanishes at the critical point {0}")]
    ZeroDerivative(f64),
    #[error("critical orbit left the domain at k = {k} (value {value})")]
    OrbitEscapedDomain { k: usize, value: f64 },
    #[error("no sampled orbit segment stays outside the critical neighbourhood")]
    NoAdmissibleSegments,
    #[error("branch inversion failed at y = {y} on branch {branch}")]
    InversionFailure { branch: usize, y: f64 },
    #[error("maps have different critical structure ({left} vs {right} points)")]
    IncompatibleCriticalStructure { left: usize, right: usize },
    #[error("no finite eta up to half the domain length satisfies the distance conditions")]
    NoFiniteEta,
    #[error("delta = {0} is not e^-k for a positive integer k")]
    DeltaNotAdmissible(f64),
    #[error("critical neighbourhoods of specs {0} and {1} overlap")]
    OverlappingCriticalNeighborhoods(usize, usize),
    #[error("alpha = {alpha} violates alpha < lambda / (5 ell_hat) = {bound}")]
    AlphaConstraintViolated { alpha: f64, bound: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("no preimage of c* of depth <= {t_star} fits inside the interval")]
    NoReturnWithinHorizon { t_star: usize },
    #[error("every candidate pullback of the return domain crosses a critical point")]
    PullbackCrossesCritical,
    #[error("only {usable} usable points for the tail fit (need 5)")]
    InsufficientData { usable: usize },
    #[error("theta for critical spec {spec} is {theta} <= 0")]
    ThetaNonpositive { spec: usize, theta: f64 },
    #[error("theta_hat = {value} outside (0, {upper})")]
    ThetaHatOutOfRange { value: f64, upper: f64 },
    #[error("every seed orbit was trapped or degenerate")]
    AllOrbitsDegenerate,
    #[error("power iteration stalled at residual {residual}")]
    PowerIterationStalled { residual: f64 },
    #[error("residual mass fraction {fraction} exceeds 20%")]
    ResidualTooLarge { fraction: f64 },
    #[error("densities live on different domains")]
    DomainMismatch,
    #[error("return domains differ too much to align ({sym_diff} vs {half})")]
    DomainAlignmentFailed { sym_diff: f64, half: f64 },
    #[error("induced map has no branches")]
    EmptyInducedMap,
    #[error("at parameter {a}: {inner}")]
    AtParameter { a: f64, inner: alloc::boxed::Box<Error> },
}

impl Error {
    pub fn at(self, a: f64) -> Error {
        Error::AtParameter { a, inner: alloc::boxed::Box::new(self) }
    }
}
