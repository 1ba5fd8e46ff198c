use thiserror::Error;

/// Errors raised while building or validating a [`MetricGraph`](crate::MetricGraph).
#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("malformed graph document: {0}")]
    Malformed(String),
    #[error("edge `{edge}`: non-positive length {length}")]
    NonPositiveLength { edge: String, length: f64 },
    #[error("vertex `{vertex}`: sigma must be finite, got {value}")]
    NonFiniteSigma { vertex: String, value: f64 },
    #[error("graph is disconnected: vertex `{vertex}` is unreachable from `{root}`")]
    Disconnected { vertex: String, root: String },
    #[error("edge `{edge}`: unknown potential kind `{kind}`")]
    UnknownPotential { edge: String, kind: String },
    #[error("edge `{edge}`: invalid potential parameters: {reason}")]
    InvalidPotential { edge: String, reason: String },
    #[error("edge `{edge}` references unknown vertex `{vertex}`")]
    UnknownVertex { edge: String, vertex: String },
    #[error("duplicate {what} id `{id}`")]
    DuplicateId { what: &'static str, id: String },
    #[error("graph has no edges")]
    Empty,
    #[error("vertex `{vertex}` is a Dirichlet vertex; {operation} requires finite couplings")]
    DirichletVertex { vertex: String, operation: &'static str },
    #[error("unknown {what} `{id}`")]
    UnknownId { what: &'static str, id: String },
}

/// Failures of the edge ODE integrator.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum OdeError {
    #[error("hyperbolic overflow guard: kappa * length = {growth:.1} exceeds 700 on edge {edge}")]
    Overflow { edge: usize, growth: f64 },
    #[error("step-size underflow on edge {edge}: {panels} panels requested at lambda = {lambda}")]
    StepUnderflow { edge: usize, panels: usize, lambda: f64 },
    #[error("point x = {x} lies outside the edge [0, {length}]")]
    OutOfRange { x: f64, length: f64 },
    #[error("non-finite spectral parameter {0}")]
    NonFiniteLambda(f64),
}

/// Failures of the spectral solvers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpectralError {
    #[error(transparent)]
    Ode(#[from] OdeError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(
        "eigenvalue count mismatch on [{lower}, {upper}]: secular roots {secular}, oracle count {oracle} after {refinements} refinements"
    )]
    CountMismatch { lower: f64, upper: f64, secular: usize, oracle: usize, refinements: usize },
    #[error("lambda = {0} is not within bracket tolerance of a secular root")]
    NotARoot(f64),
    #[error("eigenfunction Gram matrix is numerically singular (condition number {0:.3e})")]
    DependentBasis(f64),
    #[error("vertex `{vertex}`: continuity residual {residual:.3e} exceeds tolerance")]
    ContinuityResidual { vertex: String, residual: f64 },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("finite element oracle: {0}")]
    Fem(String),
    #[error("heat series truncation not reached: tail bound {tail:.3e} at lambda = {lambda}")]
    Truncation { tail: f64, lambda: f64 },
    #[error("bisection bracket failure on [{lower}, {upper}]")]
    Bracket { lower: f64, upper: f64 },
}

pub type Result<T, E = SpectralError> = std::result::Result<T, E>;
