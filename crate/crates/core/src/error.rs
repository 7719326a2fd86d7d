use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("point {0:?} lies outside the domain")]
    PointOutsideDomain(Vec<f64>),
    #[error("point {point:?} is within {tol:e} of interface {label}")]
    AmbiguousPoint { point: Vec<f64>, label: usize, tol: f64 },
    #[error("point {point:?} is not on interface {label} (level set {value:e})")]
    NotOnInterface { point: Vec<f64>, label: usize, value: f64 },
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("invalid network shape: {0}")]
    InvalidShape(String),
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("network has no time axis")]
    NoTimeAxis,
    #[error("analytic derivatives need a single hidden layer, network has {0}")]
    UnsupportedDepth(usize),
    #[error("infeasible sampling plan: {0}")]
    InfeasiblePlan(String),
    #[error("no collocation points in region {0}")]
    EmptyRegion(String),
    #[error("formulation does not support dimension {0}")]
    UnsupportedDimension(usize),
    #[error("space-time problem has no initial condition")]
    MissingInitialCondition,
    #[error("non-finite value in least-squares input")]
    NonFiniteInput,
    #[error("LAPACK routine {routine} failed with info = {info}")]
    Lapack { routine: &'static str, info: i32 },
    #[error("reference norm {0:e} is too small for a relative error")]
    ZeroDenominator(f64),
    #[error("unknown example {0}")]
    UnknownExample(usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}
