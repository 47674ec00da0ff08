use std::time::Instant;

use crate::boundary::{max_norm, SystemBuilder};
use crate::error::{Error, Result};

use super::linear::linear_solve;
use super::{Method, SolveReport, SolverConfig};

/// Damped Newton iteration with backtracking on the max-norm of the residual.
pub fn newton_solve<S: SystemBuilder + ?Sized>(cfg: &SolverConfig, system: &S, u0: Vec<f64>) -> Result<(Vec<f64>, SolveReport)> {
    cfg.validate()?;
    let start = Instant::now();
    let mut report = SolveReport::new(Method::Newton);
    let mut u = u0;
    let mut sys = system.assemble(&u, true)?;
    let mut norm = sys.residual_norm();
    report.residual_history.push(norm);
    while norm > cfg.tol {
        if !norm.is_finite() {
            return Err(Error::NotConverged { iterations: report.iterations, residual: norm });
        }
        if report.iterations >= cfg.max_iter {
            report.wall_time = start.elapsed();
            return Err(Error::NotConverged { iterations: report.iterations, residual: norm });
        }
        let rows = sys.jacobian.take().expect("assembled with jacobian");
        let step = linear_solve(&rows, &sys.residual).map_err(|e| match e {
            Error::LinearSolve { reason, .. } => Error::LinearSolve { iteration: report.iterations, reason },
            other => other,
        })?;
        let mut alpha = 1.0;
        let accepted = loop {
            let trial: Vec<f64> = u.iter().zip(&step).map(|(a, d)| a - alpha * d).collect();
            let r = system.residual(&trial)?;
            let trial_norm = max_norm(&r);
            if trial_norm < norm {
                break Some((trial, alpha));
            }
            alpha *= 0.5;
            if alpha < cfg.alpha_min * (1.0 - 1e-12) {
                break None;
            }
        };
        let Some((next, alpha)) = accepted else {
            return Err(Error::Stagnation { iteration: report.iterations, residual: norm });
        };
        u = next;
        report.iterations += 1;
        report.damping.push(alpha);
        sys = system.assemble(&u, true)?;
        norm = sys.residual_norm();
        log::debug!("newton iteration {}: residual {:e}, alpha {}", report.iterations, norm, alpha);
        report.residual_history.push(norm);
    }
    report.converged = true;
    report.wall_time = start.elapsed();
    Ok((u, report))
}
