use serde::{Deserialize, Serialize};

use crate::density::{ScalarField, TargetDensity};
use crate::error::{Error, Result};
use crate::geometry::TargetShape;
use crate::grid::{Grid2D, Point};

type Mat2 = [[f64; 2]; 2];

/// Convex quadratic `1/2 (x - c)^T A (x - c) + b . x` with `A` symmetric
/// positive definite.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitialGuess {
    pub hessian: Mat2,
    pub center: Point,
    pub shift: Point,
}

impl InitialGuess {
    pub fn eval(&self, x: Point) -> f64 {
        let d = [x[0] - self.center[0], x[1] - self.center[1]];
        let a = &self.hessian;
        0.5 * (a[0][0] * d[0] * d[0] + 2.0 * a[0][1] * d[0] * d[1] + a[1][1] * d[1] * d[1]) + self.shift[0] * x[0] + self.shift[1] * x[1]
    }

    pub fn gradient(&self, x: Point) -> Point {
        let d = [x[0] - self.center[0], x[1] - self.center[1]];
        [0, 1].map(|r| self.hessian[r][0] * d[0] + self.hessian[r][1] * d[1] + self.shift[r])
    }

    pub fn sample(&self, grid: &Grid2D) -> Vec<f64> {
        (0..grid.len()).map(|k| self.eval(grid.point_at(k))).collect()
    }
}

/// Quadratic whose gradient maps the box `source` onto the box `target`,
/// axis by axis.
pub fn initialize_from_boxes(source: (Point, Point), target: (Point, Point)) -> Result<InitialGuess> {
    let (slo, shi) = source;
    let (tlo, thi) = target;
    let mut hessian = [[0.0; 2]; 2];
    for d in 0..2 {
        let ws = shi[d] - slo[d];
        let wt = thi[d] - tlo[d];
        if !(wt > 0.0) || !wt.is_finite() {
            return Err(Error::DegenerateTarget(format!("target bounding box has width {wt} along axis {d}")));
        }
        if !(ws > 0.0) {
            return Err(Error::DegenerateProblem(format!("source bounding box has width {ws} along axis {d}")));
        }
        hessian[d][d] = wt / ws;
    }
    Ok(InitialGuess {
        hessian,
        center: [0.5 * (slo[0] + shi[0]), 0.5 * (slo[1] + shi[1])],
        shift: [0.5 * (tlo[0] + thi[0]), 0.5 * (tlo[1] + thi[1])],
    })
}

/// Initial iterate fitted to the bounding boxes of the source support and
/// the target. Axes along which the support is a single grid line fall back
/// to the full square.
pub fn initialize(grid: &Grid2D, rho_x: &ScalarField, target: &TargetShape) -> Result<InitialGuess> {
    let (lo, hi) = grid.bounds();
    let (mut slo, mut shi) = rho_x.support_box().unwrap_or(([lo, lo], [hi, hi]));
    for d in 0..2 {
        if shi[d] - slo[d] < 0.5 * grid.dx() {
            slo[d] = lo;
            shi[d] = hi;
        }
    }
    initialize_from_boxes((slo, shi), target.bounding_box())
}

fn mul(a: Mat2, b: Mat2) -> Mat2 {
    [0, 1].map(|r| [0, 1].map(|c| a[r][0] * b[0][c] + a[r][1] * b[1][c]))
}

/// Square root of a symmetric positive definite 2x2 matrix.
fn sqrt_spd(m: Mat2) -> Option<Mat2> {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let tr = m[0][0] + m[1][1];
    if !(det > 0.0 && tr > 0.0) {
        return None;
    }
    let s = det.sqrt();
    let t = (tr + 2.0 * s).sqrt();
    Some([[(m[0][0] + s) / t, m[0][1] / t], [m[1][0] / t, (m[1][1] + s) / t]])
}

fn inverse(m: Mat2) -> Mat2 {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    [[m[1][1] / det, -m[0][1] / det], [-m[1][0] / det, m[0][0] / det]]
}

/// Quadratic whose gradient is the optimal affine map between Gaussians with
/// the means and covariances of the two densities. Exact when the target is
/// an affine image of the source with uniform densities.
pub fn initialize_from_moments(rho_x: &ScalarField, rho_y: &TargetDensity) -> Result<InitialGuess> {
    let mx = rho_x.moments()?;
    let my = rho_y.moments(MOMENT_RESOLUTION)?;
    let degenerate = || Error::DegenerateProblem("source covariance is singular".into());
    let r = sqrt_spd(mx.cov).ok_or_else(degenerate)?;
    let ri = inverse(r);
    let middle = sqrt_spd(mul(mul(r, my.cov), r)).ok_or_else(|| Error::DegenerateTarget("target covariance is singular".into()))?;
    let mut a = mul(mul(ri, middle), ri);
    let sym = 0.5 * (a[0][1] + a[1][0]);
    a[0][1] = sym;
    a[1][0] = sym;
    Ok(InitialGuess { hessian: a, center: mx.mean, shift: my.mean })
}

const MOMENT_RESOLUTION: usize = 512;
