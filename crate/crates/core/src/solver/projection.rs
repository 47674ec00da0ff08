use std::f64::consts::FRAC_1_SQRT_2;
use std::time::Instant;

use crate::boundary::{gather, OtProblem, PointInfo, SystemBuilder};
use crate::error::{Error, Result};
use crate::grid::{Grid2D, Point, PointClass, Side};
use crate::scheme::filtered_with_row;
use crate::stencil::{apply_unchecked, row_unchecked, SparseRow, StencilKind};

use super::newton::newton_solve;
use super::{Method, SolveReport, SolverConfig};

/// Inward one-sided difference across `side`, and the sign of the outward
/// normal component it pairs with.
fn inward(side: Side) -> (StencilKind, usize, f64) {
    match side {
        Side::Left => (StencilKind::DxPlus, 0, -1.0),
        Side::Right => (StencilKind::DxMinus, 0, 1.0),
        Side::Bottom => (StencilKind::DyPlus, 1, -1.0),
        Side::Top => (StencilKind::DyMinus, 1, 1.0),
    }
}

fn tangential(side: Side) -> (StencilKind, usize) {
    match side {
        Side::Left | Side::Right => (StencilKind::Dx2, 1),
        Side::Bottom | Side::Top => (StencilKind::Dx1, 0),
    }
}

/// Discrete gradient at grid point `k`: centered in the interior; at the
/// boundary, inward one-sided across the boundary and centered along it
/// (one-sided in both directions at corners).
pub fn boundary_gradient(u: &[f64], grid: &Grid2D, k: usize) -> Point {
    let (i, j) = grid.ij(k);
    let d = |kind| apply_unchecked(kind, grid, u, i, j);
    match grid.class_of(i, j) {
        PointClass::Interior => [d(StencilKind::Dx1), d(StencilKind::Dx2)],
        PointClass::Edge(side) => {
            let (normal, a, _) = inward(side);
            let (tan, b) = tangential(side);
            let mut g = [0.0; 2];
            g[a] = d(normal);
            g[b] = d(tan);
            g
        }
        PointClass::Corner(c) => {
            let (s1, s2) = c.sides();
            let mut g = [0.0; 2];
            for s in [s1, s2] {
                let (kind, a, _) = inward(s);
                g[a] = d(kind);
            }
            g
        }
    }
}

/// Interior scheme of `problem` with Neumann rows `grad u . n_x = p . n_x`
/// at the boundary.
pub struct NeumannSystem<'a> {
    pub problem: &'a OtProblem,
    /// Prescribed boundary gradient, indexed by flat grid index.
    pub p: Vec<Point>,
}

impl NeumannSystem<'_> {
    fn boundary_row(&self, u: &[f64], k: usize, jac: bool) -> (f64, Option<SparseRow>) {
        let grid = &self.problem.grid;
        let (i, j) = grid.ij(k);
        let class = grid.class_of(i, j);
        let sides: Vec<(Side, f64)> = match class {
            PointClass::Edge(s) => vec![(s, 1.0)],
            PointClass::Corner(c) => {
                let (a, b) = c.sides();
                vec![(a, FRAC_1_SQRT_2), (b, FRAC_1_SQRT_2)]
            }
            PointClass::Interior => unreachable!("interior points use the Monge-Ampere scheme"),
        };
        let mut value = 0.0;
        let mut row = SparseRow::new();
        for (side, w) in sides {
            let (kind, axis, sign) = inward(side);
            let nc = sign * w;
            value += nc * (apply_unchecked(kind, grid, u, i, j) - self.p[k][axis]);
            if jac {
                row.add_scaled(&row_unchecked(kind, grid, i, j), nc);
            }
        }
        (value, jac.then(|| row.compact()))
    }
}

impl SystemBuilder for NeumannSystem<'_> {
    fn grid(&self) -> &Grid2D {
        &self.problem.grid
    }

    fn assemble(&self, u: &[f64], with_jacobian: bool) -> Result<crate::boundary::GlobalSystem> {
        let pr = self.problem;
        gather(pr.grid.len(), with_jacobian, |k| {
            let (i, j) = pr.grid.ij(k);
            if pr.grid.class_of(i, j).is_interior() {
                let (b, row) = filtered_with_row(u, &pr.grid, i, j, &pr.densities, &pr.params, with_jacobian)?;
                Ok((b.value, row, PointInfo::Interior { branch: b.branch, region: b.region }))
            } else {
                let (v, row) = self.boundary_row(u, k, with_jacobian);
                Ok((v, row, PointInfo::Neumann))
            }
        })
    }
}

/// Closest point of the target boundary to every boundary gradient.
fn project_boundary(problem: &OtProblem, u: &[f64]) -> Result<(Vec<Point>, f64)> {
    let grid = &problem.grid;
    let mut p = vec![[0.0; 2]; grid.len()];
    let mut movement: f64 = 0.0;
    for (k, slot) in p.iter_mut().enumerate() {
        if grid.class_at(k).is_interior() {
            continue;
        }
        let half = boundary_gradient(u, grid, k);
        let (_, closest) = problem.target.exact_polygon_distance(half)?;
        movement = movement.max((closest[0] - half[0]).abs()).max((closest[1] - half[1]).abs());
        *slot = closest;
    }
    Ok((p, movement))
}

/// Alternate a Neumann Monge-Ampere solve with projection of the boundary
/// gradients onto the target boundary.
pub fn projection_solve(cfg: &SolverConfig, problem: &OtProblem, u0: Vec<f64>) -> Result<(Vec<f64>, SolveReport)> {
    cfg.validate()?;
    if !problem.target.is_polygon() {
        return Err(Error::RequiresPolygon);
    }
    let start = Instant::now();
    let mut report = SolveReport::new(Method::Projection);
    let inner = SolverConfig { method: Method::Newton, ..cfg.clone() };
    let (mut p, movement) = project_boundary(problem, &u0)?;
    report.residual_history.push(movement);
    let mut u = u0;
    loop {
        let system = NeumannSystem { problem, p };
        let (next, inner_report) = newton_solve(&inner, &system, u)?;
        u = next;
        report.inner_iterations += inner_report.iterations;
        report.iterations += 1;
        let (p_next, movement) = project_boundary(problem, &u)?;
        report.residual_history.push(movement);
        log::debug!("projection step {}: boundary movement {:e}", report.iterations, movement);
        p = p_next;
        if movement <= cfg.projection_tol {
            break;
        }
        if report.iterations >= cfg.projection_max_outer {
            return Err(Error::NotConverged { iterations: report.iterations, residual: movement });
        }
    }
    report.converged = true;
    report.wall_time = start.elapsed();
    Ok((u, report))
}
