use thiserror::Error;

/// Errors raised by grid construction, problem setup and the solvers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid index ({i}, {j}) out of range for n = {n}")]
    IndexOutOfRange { i: usize, j: usize, n: usize },

    #[error("invalid density: {0}")]
    InvalidDensity(String),

    #[error("density floor must be positive, got {0}")]
    InvalidFloor(f64),

    #[error("degenerate problem: {0}")]
    DegenerateProblem(String),

    #[error("degenerate target: {0}")]
    DegenerateTarget(String),

    #[error("operation requires an ordered polygon; sort the boundary points by angle first")]
    RequiresPolygon,

    #[error("admissible directions requested at an interior point")]
    NotBoundaryPoint,

    #[error("stencil {kind} does not fit inside the grid at ({i}, {j})")]
    OutOfStencil { kind: &'static str, i: usize, j: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("linear solve failed at iteration {iteration}: {reason}")]
    LinearSolve { iteration: usize, reason: String },

    #[error("line search stagnated at iteration {iteration} with residual {residual:e}")]
    Stagnation { iteration: usize, residual: f64 },

    #[error("explicit iteration diverged after {sweeps} sweeps (residual {residual:e})")]
    Instability { sweeps: usize, residual: f64 },

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
