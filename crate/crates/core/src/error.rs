use thiserror::Error;

/// Errors raised by the simulation and reconstruction routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("states use different particle statistics ({0} vs {1})")]
    StatisticsMismatch(&'static str, &'static str),

    #[error("pump exponent {0} outside the four-photon range -4..=4")]
    PumpExponentOutOfRange(i32),

    #[error("fermionic mode {0} cannot hold {1} particles")]
    PauliViolation(String, u32),

    #[error("signal mode {0} is emitted by both sources")]
    OverlappingSignalModes(String),

    #[error("sources must carry distinct pump exponents (both are {0})")]
    DependentSources(i32),

    #[error("pump gains differ in magnitude (|g1| = {0}, |g2| = {1}); set allow_unequal_gains to explore this")]
    UnequalGains(f64, f64),

    #[error("invalid source: {0}")]
    InvalidSource(String),

    #[error("idler mode {0} is present in the state but not covered by the path-identity map")]
    UnmappedIdlerMode(String),

    #[error("path identity has already been applied to this state")]
    PathIdentityAlreadyApplied,

    #[error("path-identity map is not injective: {0} is targeted twice")]
    NonInjectivePathIdentity(String),

    #[error("detector operator {0} shares no mode with the state")]
    ModeMismatch(String),

    #[error("invalid detector operator: {0}")]
    InvalidDetector(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("correlation table is identically zero")]
    ZeroCorrelation,

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("object is unobservable: {0}")]
    Unobservable(String),

    #[error("reference pixels ({0}, {1}) are degenerate; choose references whose phase difference is away from 0 and pi")]
    DegenerateReference(usize, usize),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
