//! Nonlinear solvers for the discrete transport system.

mod euler;
mod init;
mod linear;
mod newton;
mod projection;

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use euler::euler_solve;
pub use init::{initialize, initialize_from_boxes, initialize_from_moments, InitialGuess};
pub use linear::linear_solve;
pub use newton::newton_solve;
pub use projection::{boundary_gradient, projection_solve, NeumannSystem};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Newton,
    Euler,
    Projection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub method: Method,
    /// Stopping threshold on the max-norm of the residual.
    pub tol: f64,
    /// Newton iterations, or explicit sweeps for Euler.
    pub max_iter: usize,
    /// Smallest damping factor tried by the Newton line search.
    pub alpha_min: f64,
    /// Multiplier on the explicit stability step.
    pub euler_dt_safety: f64,
    /// Sweeps without a new residual minimum after which Euler reports instability.
    pub euler_divergence_window: usize,
    /// Stopping threshold on boundary-gradient movement for the projection
    /// method. Inner solves stop at `tol`, which bounds how small the movement
    /// can get, so this should stay well above `tol`.
    pub projection_tol: f64,
    pub projection_max_outer: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            method: Method::Newton,
            tol: 1e-8,
            max_iter: 50,
            alpha_min: 1.0 / 1024.0,
            euler_dt_safety: 0.9,
            euler_divergence_window: 100,
            projection_tol: 1e-7,
            projection_max_outer: 500,
        }
    }
}

impl SolverConfig {
    pub fn euler() -> Self {
        SolverConfig { method: Method::Euler, max_iter: 1_000_000, ..Self::default() }
    }

    pub fn projection() -> Self {
        SolverConfig { method: Method::Projection, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha_min > 0.0 && self.alpha_min <= 1.0) {
            return Err(Error::Config(format!("alpha_min must lie in (0, 1], got {}", self.alpha_min)));
        }
        if !(self.tol > 0.0) || !(self.projection_tol > 0.0) {
            return Err(Error::Config("tolerances must be positive".into()));
        }
        if !(self.euler_dt_safety > 0.0) {
            return Err(Error::Config(format!("euler_dt_safety must be positive, got {}", self.euler_dt_safety)));
        }
        if self.max_iter == 0 || self.euler_divergence_window == 0 {
            return Err(Error::Config("iteration limits must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub method: Method,
    pub iterations: usize,
    /// Max-norm residual before each iteration and after the last one.
    pub residual_history: Vec<f64>,
    /// Accepted Newton damping factors, one per iteration.
    pub damping: Vec<f64>,
    pub converged: bool,
    /// Newton iterations summed over projection outer steps.
    pub inner_iterations: usize,
    #[serde(skip)]
    pub wall_time: Duration,
}

impl SolveReport {
    pub(crate) fn new(method: Method) -> Self {
        SolveReport {
            method,
            iterations: 0,
            residual_history: Vec::new(),
            damping: Vec::new(),
            converged: false,
            inner_iterations: 0,
            wall_time: Duration::ZERO,
        }
    }

    pub fn final_residual(&self) -> f64 {
        self.residual_history.last().copied().unwrap_or(f64::NAN)
    }
}

/// Run the solver selected by `cfg.method` on the full transport problem.
pub fn solve(cfg: &SolverConfig, problem: &crate::boundary::OtProblem, u0: Vec<f64>) -> Result<(Vec<f64>, SolveReport)> {
    match cfg.method {
        Method::Newton => newton_solve(cfg, problem, u0),
        Method::Euler => euler_solve(cfg, problem, u0),
        Method::Projection => projection_solve(cfg, problem, u0),
    }
}
