//! Crate-wide error type.
//!
//! Construction-time violations (shape rules, linearity) and numerical
//! failures (solver breakdown, CFL) share one enum so that errors surfaced
//! from a lower layer (e.g. an operator implementation reached during
//! assembly) propagate without wrapping.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("argument {number} appears on both sides of a multiplicative node; forms must stay linear in each argument")]
    NonlinearArgumentUse { number: u32 },

    #[error("argument number {number} is used with two different function spaces")]
    DuplicateArgumentNumber { number: u32 },

    #[error("expressions mix different domains")]
    DomainMismatch,

    #[error("cannot add integrands with different argument sets ({left:?} vs {right:?})")]
    ArgumentSetMismatch { left: Vec<u32>, right: Vec<u32> },

    #[error("function space mismatch: {0}")]
    SpaceMismatch(String),

    #[error("derivative direction reuses argument number {0} already present in the form")]
    DirectionNotFresh(u32),

    #[error("form has arity {found}, expected {expected}")]
    ArityError { expected: usize, found: usize },

    #[error("operand index {index} out of range for an operator with {count} operands")]
    IndexOutOfRange { index: usize, count: usize },

    #[error("no operator implementation registered under id {0}")]
    UnknownImplementation(u64),

    #[error("coefficient `{0}` has no bound values")]
    UnboundCoefficient(String),

    #[error("external operator derivatives above first order are not supported (multi-index sum {0})")]
    HigherDerivativeUnsupported(u32),

    #[error("expression cannot be evaluated at dof nodes: {0}")]
    UnsupportedOperand(String),

    #[error("iterative solver did not converge: {detail} after {iterations} iterations (residual {residual:e})")]
    NonConvergence {
        detail: String,
        iterations: usize,
        residual: f64,
    },

    #[error("matrix is singular (pivot {pivot:e} at column {column})")]
    SingularMatrix { column: usize, pivot: f64 },

    #[error("Newton iteration diverged after {iterations} iterations; residual history {history:?}")]
    NewtonDivergence {
        iterations: usize,
        history: Vec<f64>,
    },

    #[error("CFL condition violated: dt = {dt:e} exceeds limit {limit:e} (h_min = {h_min:e}, max |c| = {c_max:e})")]
    CflViolation {
        dt: f64,
        limit: f64,
        h_min: f64,
        c_max: f64,
    },

    #[error("non-finite state detected at time step {step}")]
    NonFiniteState { step: usize },

    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    #[error("tape is stale: recorded control differs from the requested one")]
    StaleTape,

    #[error("line search failed after {backtracks} backtracking steps at iteration {iteration}")]
    LineSearchFailure {
        iteration: usize,
        backtracks: usize,
    },

    #[error("training loss became non-finite at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },

    #[error("invalid weights file: {0}")]
    InvalidWeightsFile(String),

    #[error("invalid field file: {0}")]
    InvalidFieldFile(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
