use std::time::Instant;

use crate::boundary::SystemBuilder;
use crate::error::{Error, Result};

use super::{Method, SolveReport, SolverConfig};

/// Forward-Euler pseudo-time stepping to steady state.
///
/// Interior points evolve by `u_t = MA[u]` and boundary points by
/// `u_t = -H[u]`; see [`SystemBuilder::explicit_sign`]. The step is
/// recomputed every sweep from the largest Jacobian diagonal entry.
pub fn euler_solve<S: SystemBuilder + ?Sized>(cfg: &SolverConfig, system: &S, u0: Vec<f64>) -> Result<(Vec<f64>, SolveReport)> {
    cfg.validate()?;
    let start = Instant::now();
    let mut report = SolveReport::new(Method::Euler);
    let dx = system.grid().dx();
    let signs: Vec<f64> = (0..u0.len()).map(|k| system.explicit_sign(k)).collect();
    let mut u = u0;
    // Sweeps since the residual last reached a new minimum.
    let mut growth = 0usize;
    let mut best = f64::INFINITY;
    loop {
        let sys = system.assemble(&u, true)?;
        let norm = sys.residual_norm();
        report.residual_history.push(norm);
        if !norm.is_finite() {
            return Err(Error::Instability { sweeps: report.iterations, residual: norm });
        }
        if norm <= cfg.tol {
            break;
        }
        if norm < best {
            best = norm;
            growth = 0;
        } else {
            growth += 1;
        }
        if growth >= cfg.euler_divergence_window {
            return Err(Error::Instability { sweeps: report.iterations, residual: norm });
        }
        if report.iterations >= cfg.max_iter {
            return Err(Error::NotConverged { iterations: report.iterations, residual: norm });
        }
        let diag = sys.max_diagonal().unwrap_or(0.0);
        let bound = if diag > 0.0 { 1.0 / diag } else { f64::INFINITY };
        let dt = cfg.euler_dt_safety * (0.25 * dx * dx).min(bound);
        for ((v, r), s) in u.iter_mut().zip(&sys.residual).zip(&signs) {
            *v += dt * s * r;
        }
        report.iterations += 1;
    }
    report.converged = true;
    report.wall_time = start.elapsed();
    Ok((u, report))
}
