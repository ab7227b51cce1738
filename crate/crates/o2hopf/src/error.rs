use thiserror::Error;

use crate::linalg::LinalgError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("genericity violation: {0}")]
    GenericityViolation(String),
    #[error("point is not an equilibrium of the stated branch (residual {0:.3e})")]
    BranchMismatch(f64),
    #[error("newton did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("singular jacobian (condition {0:.3e})")]
    SingularJacobian(f64),
    #[error("no profile: {0}")]
    NoProfile(String),
    #[error("blow-up at t = {t:.4}: norm {norm:.3e}")]
    BlowUp { t: f64, norm: f64 },
    #[error("step rejected: {0}")]
    StepRejected(String),
    #[error("weight overflow: boundary weight {0:.3e} exceeds 1e8")]
    WeightOverflow(f64),
    #[error("solver failure: {0}")]
    SolverFailure(String),
    #[error("splitting failure: real-part gap {0:.3e}")]
    SplittingFailure(f64),
    #[error("stiffness failure: {0}")]
    StiffnessFailure(String),
    #[error("contour too coarse after {0} refinements")]
    ContourTooCoarse(usize),
    #[error("root on contour near lambda = {0}")]
    RootOnContour(String),
    #[error("no crossing in the interval: {0}")]
    NoCrossing(String),
    #[error("multiplicity anomaly: modes {0:?} carry crossings")]
    MultiplicityAnomaly(Vec<usize>),
    #[error("projection leak: imaginary residual {0:.3e}")]
    ProjectionLeak(f64),
    #[error("kernel dimension mismatch: {0}")]
    KernelDimensionMismatch(String),
    #[error("ill-conditioned: condition {0:.3e}")]
    IllConditioned(f64),
    #[error("no contraction: factor {0:.3}")]
    NoContraction(f64),
    #[error("degenerate fit: condition {0:.3e}")]
    FitDegenerate(f64),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "InvalidInput",
            Error::GenericityViolation(_) => "GenericityViolation",
            Error::BranchMismatch(_) => "BranchMismatch",
            Error::NoConvergence { .. } => "NoConvergence",
            Error::SingularJacobian(_) => "SingularJacobian",
            Error::NoProfile(_) => "NoProfile",
            Error::BlowUp { .. } => "BlowUp",
            Error::StepRejected(_) => "StepRejected",
            Error::WeightOverflow(_) => "WeightOverflow",
            Error::SolverFailure(_) => "SolverFailure",
            Error::SplittingFailure(_) => "SplittingFailure",
            Error::StiffnessFailure(_) => "StiffnessFailure",
            Error::ContourTooCoarse(_) => "ContourTooCoarse",
            Error::RootOnContour(_) => "RootOnContour",
            Error::NoCrossing(_) => "NoCrossing",
            Error::MultiplicityAnomaly(_) => "MultiplicityAnomaly",
            Error::ProjectionLeak(_) => "ProjectionLeak",
            Error::KernelDimensionMismatch(_) => "KernelDimensionMismatch",
            Error::IllConditioned(_) => "IllConditioned",
            Error::NoContraction(_) => "NoContraction",
            Error::FitDegenerate(_) => "FitDegenerate",
            Error::Parse(_) => "ParseError",
            Error::Io(_) => "IoError",
        }
    }

    /// Process exit code: 2 validation, 3 numerical, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidInput(_) | Error::Parse(_) | Error::GenericityViolation(_) => 2,
            Error::Io(_) => 4,
            _ => 3,
        }
    }
}

impl From<LinalgError> for Error {
    fn from(e: LinalgError) -> Self {
        Error::SolverFailure(e.to_string())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
