//! Upwind Hamilton-Jacobi boundary residual and global system assembly.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::DensityPair;
use crate::error::{Error, Result};
use crate::geometry::TargetShape;
use crate::grid::{Corner, Grid2D, PointClass, Side};
use crate::scheme::{filtered_with_row, Branch, FilterRegion, SchemeParams};
use crate::stencil::{apply_unchecked, row_unchecked, SparseRow, StencilKind};

/// Upwind one-sided coefficients `(Dx-, Dx+, Dy-, Dy+)` for direction `n`.
fn upwind_weights(n: [f64; 2]) -> [(StencilKind, f64); 4] {
    [
        (StencilKind::DxMinus, n[0].max(0.0)),
        (StencilKind::DxPlus, n[0].min(0.0)),
        (StencilKind::DyMinus, n[1].max(0.0)),
        (StencilKind::DyPlus, n[1].min(0.0)),
    ]
}

/// Discrete `H[u]` at boundary point `(i, j)` over the admissible directions
/// `dirs`; returns the value and the maximizing direction (lowest index on ties).
pub fn hj_residual(u: &[f64], grid: &Grid2D, i: usize, j: usize, shape: &TargetShape, dirs: &[usize]) -> Result<(f64, usize)> {
    if dirs.is_empty() {
        return Err(Error::Config(format!("no admissible directions at boundary point ({i}, {j}); use at least 8 directions")));
    }
    let mut diffs = [0.0; 4];
    let mut best = (f64::NEG_INFINITY, dirs[0]);
    for &d in dirs {
        let n = shape.direction(d);
        let mut v = -shape.support(d);
        for (slot, (kind, w)) in upwind_weights(n).into_iter().enumerate() {
            if w != 0.0 {
                if diffs[slot] == 0.0 {
                    if !kind.fits(grid, i, j) {
                        return Err(Error::OutOfStencil { kind: kind.name(), i, j });
                    }
                    diffs[slot] = apply_unchecked(kind, grid, u, i, j);
                }
                v += w * diffs[slot];
            }
        }
        if v > best.0 {
            best = (v, d);
        }
    }
    Ok(best)
}

/// Jacobian row of the upwind advection for the active direction.
pub fn hj_jacobian_row(grid: &Grid2D, i: usize, j: usize, shape: &TargetShape, active: usize) -> Result<SparseRow> {
    let mut r = SparseRow::new();
    for (kind, w) in upwind_weights(shape.direction(active)) {
        if w != 0.0 {
            if !kind.fits(grid, i, j) {
                return Err(Error::OutOfStencil { kind: kind.name(), i, j });
            }
            r.add_scaled(&row_unchecked(kind, grid, i, j), w);
        }
    }
    Ok(r.compact())
}

/// What decided the residual at one grid point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum PointInfo {
    Interior { branch: Branch, region: FilterRegion },
    Boundary { direction: usize },
    Neumann,
}

/// Residual, Jacobian rows and branch records for every grid point.
#[derive(Clone, Debug)]
pub struct GlobalSystem {
    pub residual: Vec<f64>,
    pub jacobian: Option<Vec<SparseRow>>,
    pub info: Vec<PointInfo>,
}

impl GlobalSystem {
    pub fn residual_norm(&self) -> f64 {
        max_norm(&self.residual)
    }

    /// Largest absolute diagonal entry of the Jacobian.
    pub fn max_diagonal(&self) -> Option<f64> {
        self.jacobian.as_ref().map(|rows| rows.iter().enumerate().map(|(k, r)| r.coefficient(k).abs()).fold(0.0, f64::max))
    }
}

pub fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |a, b| a.max(b.abs()))
}

/// A discrete nonlinear system `F(u) = 0` over all grid points.
pub trait SystemBuilder: Sync {
    fn grid(&self) -> &Grid2D;

    fn assemble(&self, u: &[f64], with_jacobian: bool) -> Result<GlobalSystem>;

    fn residual(&self, u: &[f64]) -> Result<Vec<f64>> {
        Ok(self.assemble(u, false)?.residual)
    }

    /// Sign applied to each residual component by explicit iteration so that
    /// `u += dt * sign * F(u)` is a stable pseudo-time step.
    fn explicit_sign(&self, k: usize) -> f64 {
        if self.grid().class_at(k).is_interior() {
            1.0
        } else {
            -1.0
        }
    }
}

/// Admissible direction lists for the eight boundary classes.
#[derive(Clone, Debug)]
pub struct AdmissibleSets {
    edges: [Vec<usize>; 4],
    corners: [Vec<usize>; 4],
}

fn side_slot(s: Side) -> usize {
    match s {
        Side::Left => 0,
        Side::Right => 1,
        Side::Bottom => 2,
        Side::Top => 3,
    }
}

fn corner_slot(c: Corner) -> usize {
    match c {
        Corner::BottomLeft => 0,
        Corner::BottomRight => 1,
        Corner::TopLeft => 2,
        Corner::TopRight => 3,
    }
}

impl AdmissibleSets {
    pub fn new(shape: &TargetShape) -> Result<Self> {
        let sides = [Side::Left, Side::Right, Side::Bottom, Side::Top];
        let corners = [Corner::BottomLeft, Corner::BottomRight, Corner::TopLeft, Corner::TopRight];
        let edges = sides.map(|s| shape.admissible_directions(PointClass::Edge(s)));
        let corners = corners.map(|c| shape.admissible_directions(PointClass::Corner(c)));
        let mut e: [Vec<usize>; 4] = Default::default();
        let mut c: [Vec<usize>; 4] = Default::default();
        for (slot, v) in edges.into_iter().enumerate() {
            e[slot] = v?;
        }
        for (slot, v) in corners.into_iter().enumerate() {
            c[slot] = v?;
            if c[slot].is_empty() {
                return Err(Error::Config(format!(
                    "{} directions leave the corner quadrants empty; use a multiple of 4 that is at least 8",
                    shape.n_dirs()
                )));
            }
        }
        Ok(AdmissibleSets { edges: e, corners: c })
    }

    pub fn get(&self, class: PointClass) -> &[usize] {
        match class {
            PointClass::Interior => &[],
            PointClass::Edge(s) => &self.edges[side_slot(s)],
            PointClass::Corner(c) => &self.corners[corner_slot(c)],
        }
    }
}

/// Full transport problem: filtered interior scheme plus HJ boundary rows.
#[derive(Clone, Debug)]
pub struct OtProblem {
    pub grid: Grid2D,
    pub densities: DensityPair,
    pub target: TargetShape,
    pub params: SchemeParams,
    admissible: AdmissibleSets,
}

impl OtProblem {
    pub fn new(grid: Grid2D, densities: DensityPair, target: TargetShape, params: SchemeParams) -> Result<Self> {
        if densities.rho_x.grid() != &grid {
            return Err(Error::InvalidGrid("source density is sampled on a different grid".into()));
        }
        params.validate(&grid)?;
        params.check_monotonicity(&grid, densities.lipschitz_k);
        let admissible = AdmissibleSets::new(&target)?;
        Ok(OtProblem { grid, densities, target, params, admissible })
    }

    pub fn admissible(&self, class: PointClass) -> &[usize] {
        self.admissible.get(class)
    }

    /// Residual (and row) at a single point.
    pub fn point(&self, u: &[f64], k: usize, jac: bool) -> Result<(f64, Option<SparseRow>, PointInfo)> {
        let (i, j) = self.grid.ij(k);
        let class = self.grid.class_of(i, j);
        if class.is_interior() {
            let (b, row) = filtered_with_row(u, &self.grid, i, j, &self.densities, &self.params, jac)?;
            Ok((b.value, row, PointInfo::Interior { branch: b.branch, region: b.region }))
        } else {
            let (v, d) = hj_residual(u, &self.grid, i, j, &self.target, self.admissible(class))?;
            let row = if jac { Some(hj_jacobian_row(&self.grid, i, j, &self.target, d)?) } else { None };
            Ok((v, row, PointInfo::Boundary { direction: d }))
        }
    }
}

/// Evaluate `point` at every grid index in parallel and gather the results.
pub(crate) fn gather<F>(len: usize, with_jacobian: bool, point: F) -> Result<GlobalSystem>
where
    F: Fn(usize) -> Result<(f64, Option<SparseRow>, PointInfo)> + Sync,
{
    let rows: Vec<(f64, Option<SparseRow>, PointInfo)> = (0..len).into_par_iter().map(&point).collect::<Result<_>>()?;
    let mut residual = Vec::with_capacity(len);
    let mut info = Vec::with_capacity(len);
    let mut jac = with_jacobian.then(|| Vec::with_capacity(len));
    for (v, r, p) in rows {
        residual.push(v);
        info.push(p);
        if let Some(j) = jac.as_mut() {
            j.push(r.unwrap_or_default());
        }
    }
    Ok(GlobalSystem { residual, jacobian: jac, info })
}

impl SystemBuilder for OtProblem {
    fn grid(&self) -> &Grid2D {
        &self.grid
    }

    fn assemble(&self, u: &[f64], with_jacobian: bool) -> Result<GlobalSystem> {
        if u.len() != self.grid.len() {
            return Err(Error::InvalidGrid(format!("iterate has {} values, grid has {}", u.len(), self.grid.len())));
        }
        gather(self.grid.len(), with_jacobian, |k| self.point(u, k, with_jacobian))
    }
}
