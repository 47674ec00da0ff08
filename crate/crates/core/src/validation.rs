//! Exact solutions, error metrics and post-processing of computed potentials.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::grid::{Grid2D, Point};
use crate::solver::boundary_gradient;

type Mat2 = [[f64; 2]; 2];

fn q(z: f64) -> f64 {
    let a = -z * z / (8.0 * PI) + 1.0 / (256.0 * PI.powi(3)) + 1.0 / (32.0 * PI);
    a * (8.0 * PI * z).cos() + z * (8.0 * PI * z).sin() / (32.0 * PI * PI)
}

fn dq(z: f64) -> f64 {
    (z * z - 0.25) * (8.0 * PI * z).sin()
}

fn d2q(z: f64) -> f64 {
    2.0 * z * (8.0 * PI * z).sin() + 8.0 * PI * (z * z - 0.25) * (8.0 * PI * z).cos()
}

/// Known optimal map of the square example.
pub fn exact_square_map(x: Point) -> Point {
    [x[0] + 4.0 * dq(x[0]) * q(x[1]), x[1] + 4.0 * q(x[0]) * dq(x[1])]
}

/// Source density pushed by [`exact_square_map`] onto the uniform density.
pub fn square_source_density(x: Point) -> f64 {
    let (a, b) = (x[0], x[1]);
    1.0 + 4.0 * (d2q(a) * q(b) + q(a) * d2q(b)) + 16.0 * (q(a) * q(b) * d2q(a) * d2q(b) - dq(a).powi(2) * dq(b).powi(2))
}

fn mul(a: Mat2, b: Mat2) -> Mat2 {
    let mut c = [[0.0; 2]; 2];
    for (i, row) in c.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    c
}

fn inv(a: Mat2) -> Mat2 {
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    [[a[1][1] / det, -a[0][1] / det], [-a[1][0] / det, a[0][0] / det]]
}

fn apply(a: Mat2, x: Point) -> Point {
    [a[0][0] * x[0] + a[0][1] * x[1], a[1][0] * x[0] + a[1][1] * x[1]]
}

/// Rotation angle of the optimal map between the ellipses `Mx B1` and `My B1`.
pub fn ellipse_angle(mx: Mat2, my: Mat2) -> f64 {
    let j = [[0.0, -1.0], [1.0, 0.0]];
    let b = mul(inv(mx), inv(my));
    let bj = mul(b, j);
    ((bj[0][0] + bj[1][1]) / (b[0][0] + b[1][1])).atan()
}

/// `My R_theta Mx^{-1} x`.
pub fn exact_ellipse_map(mx: Mat2, my: Mat2, x: Point) -> Point {
    let t = ellipse_angle(mx, my);
    let r = [[t.cos(), -t.sin()], [t.sin(), t.cos()]];
    apply(mul(my, mul(r, inv(mx))), x)
}

/// Map of the two half-discs onto the disc: each piece is translated.
pub fn exact_split_map(x: Point) -> Point {
    if x[0] < 0.0 {
        [x[0] + 0.2, x[1]]
    } else {
        [x[0] - 0.1, x[1]]
    }
}

/// Discrete gradient of a potential on the grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransportMap {
    pub grid: Grid2D,
    pub m1: Vec<f64>,
    pub m2: Vec<f64>,
}

impl TransportMap {
    /// Centered differences inside, inward one-sided differences across the boundary.
    pub fn from_potential(u: &[f64], grid: &Grid2D) -> Self {
        let (m1, m2) = (0..grid.len())
            .map(|k| {
                let g = boundary_gradient(u, grid, k);
                (g[0], g[1])
            })
            .unzip();
        TransportMap { grid: *grid, m1, m2 }
    }

    pub fn from_fn(grid: &Grid2D, f: impl Fn(Point) -> Point) -> Self {
        let (m1, m2) = (0..grid.len())
            .map(|k| {
                let g = f(grid.point_at(k));
                (g[0], g[1])
            })
            .unzip();
        TransportMap { grid: *grid, m1, m2 }
    }

    pub fn at(&self, k: usize) -> Point {
        [self.m1[k], self.m2[k]]
    }

    /// Bilinear interpolation, with `p` clamped into the grid square.
    pub fn interpolate(&self, p: Point) -> Point {
        [bilinear(&self.grid, &self.m1, p), bilinear(&self.grid, &self.m2, p)]
    }

    /// Largest violation of `(m(x) - m(x')) . (x - x') >= 0` over neighboring pairs.
    pub fn monotonicity_defect(&self) -> f64 {
        let n = self.grid.n();
        let mut worst: f64 = 0.0;
        for k in 0..self.grid.len() {
            let (i, j) = self.grid.ij(k);
            for (a, b) in [(i + 1, j), (i, j + 1), (i + 1, j + 1)] {
                if a < n && b < n {
                    let l = self.grid.flat_index(a, b);
                    let (x, y) = (self.grid.point_at(k), self.grid.point_at(l));
                    let d = (self.m1[l] - self.m1[k]) * (y[0] - x[0]) + (self.m2[l] - self.m2[k]) * (y[1] - x[1]);
                    worst = worst.max(-d);
                }
            }
        }
        worst
    }
}

/// Bilinear interpolation of grid values at `p`, clamped into the square.
pub fn bilinear(grid: &Grid2D, values: &[f64], p: Point) -> f64 {
    let (i, j, s, t) = grid.locate(p);
    let v = |a, b| values[grid.flat_index(a, b)];
    (1.0 - s) * (1.0 - t) * v(i, j) + s * (1.0 - t) * v(i + 1, j) + (1.0 - s) * t * v(i, j + 1) + s * t * v(i + 1, j + 1)
}

/// Max and root-mean-square Euclidean distance between the computed and
/// exact maps over the grid points selected by `mask`.
pub fn map_error(map: &TransportMap, exact: impl Fn(Point) -> Point, mask: impl Fn(usize) -> bool) -> (f64, f64) {
    let mut max: f64 = 0.0;
    let mut sum = 0.0;
    let mut count = 0usize;
    for k in 0..map.grid.len() {
        if !mask(k) {
            continue;
        }
        let e = exact(map.grid.point_at(k));
        let d = (map.m1[k] - e[0]).hypot(map.m2[k] - e[1]);
        max = max.max(d);
        sum += d * d;
        count += 1;
    }
    if count == 0 {
        return (0.0, 0.0);
    }
    (max, (sum / count as f64).sqrt())
}

/// `max_z |m_fwd(m_inv(z)) - z|` over the grid points `z` of the inverse map
/// selected by `mask`, with the forward map interpolated bilinearly.
pub fn inverse_consistency(forward: &TransportMap, inverse: &TransportMap, mask: impl Fn(usize) -> bool) -> f64 {
    let mut worst: f64 = 0.0;
    for k in 0..inverse.grid.len() {
        if !mask(k) {
            continue;
        }
        let z = inverse.grid.point_at(k);
        let back = forward.interpolate(inverse.at(k));
        worst = worst.max((back[0] - z[0]).hypot(back[1] - z[1]));
    }
    worst
}

/// Discrete Legendre-Fenchel transform `u*(y) = max_x { x . y - u(x) }` over grid points.
pub fn legendre_transform(u: &[f64], grid: &Grid2D, ys: &[Point]) -> Vec<f64> {
    ys.iter()
        .map(|y| {
            (0..grid.len())
                .map(|k| {
                    let x = grid.point_at(k);
                    x[0] * y[0] + x[1] * y[1] - u[k]
                })
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect()
}

/// Cells of a piecewise-affine potential and their area errors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PogorelovResult {
    pub v: Vec<f64>,
    pub cell_areas: Vec<f64>,
    /// Percentage error `100 | |V_j| - q_j | / q_j`.
    pub area_errors: Vec<f64>,
    pub nonempty_cells: usize,
    pub linf_error: f64,
    pub l2_error: f64,
    /// Solutions with Dirac masses are not viscosity solutions.
    pub outside_convergence_theory: bool,
}

/// Index of the affine piece `x . y_j - v_j` attaining the max at `x`, lowest on ties.
pub fn active_piece(x: Point, ys: &[Point], v: &[f64]) -> usize {
    let mut best = (f64::NEG_INFINITY, 0);
    for (j, (y, vj)) in ys.iter().zip(v).enumerate() {
        let s = x[0] * y[0] + x[1] * y[1] - vj;
        if s > best.0 {
            best = (s, j);
        }
    }
    best.1
}

/// Assign the cells of a `resolution x resolution` midpoint lattice over
/// `bounds^2` restricted to `mask` and measure `|V_j|` against `q_j`.
pub fn pogorelov_cells(
    v: &[f64],
    ys: &[Point],
    qs: &[f64],
    mask: impl Fn(Point) -> bool,
    bounds: (f64, f64),
    resolution: usize,
) -> PogorelovResult {
    let h = (bounds.1 - bounds.0) / resolution as f64;
    let mut counts = vec![0usize; ys.len()];
    for b in 0..resolution {
        for a in 0..resolution {
            let x = [bounds.0 + (a as f64 + 0.5) * h, bounds.0 + (b as f64 + 0.5) * h];
            if mask(x) {
                counts[active_piece(x, ys, v)] += 1;
            }
        }
    }
    let cell_areas: Vec<f64> = counts.iter().map(|&c| c as f64 * h * h).collect();
    let area_errors: Vec<f64> = cell_areas.iter().zip(qs).map(|(a, q)| 100.0 * (a - q).abs() / q).collect();
    let linf_error = area_errors.iter().fold(0.0f64, |a, &b| a.max(b));
    let l2_error = (area_errors.iter().map(|e| e * e).sum::<f64>() / area_errors.len().max(1) as f64).sqrt();
    PogorelovResult {
        v: v.to_vec(),
        cell_areas,
        area_errors,
        nonempty_cells: counts.iter().filter(|&&c| c > 0).count(),
        linf_error,
        l2_error,
        outside_convergence_theory: true,
    }
}

/// Largest deviation of centered-difference gradients of
/// `max_j { x . y_j - v_j }` from `y_j`, at lattice points whose whole
/// difference stencil lies in the same cell.
pub fn pogorelov_gradient_defect(v: &[f64], ys: &[Point], mask: impl Fn(Point) -> bool, bounds: (f64, f64), resolution: usize) -> f64 {
    let h = (bounds.1 - bounds.0) / resolution as f64;
    let u = |x: Point| ys.iter().zip(v).map(|(y, vj)| x[0] * y[0] + x[1] * y[1] - vj).fold(f64::NEG_INFINITY, f64::max);
    let mut worst: f64 = 0.0;
    for b in 1..resolution - 1 {
        for a in 1..resolution - 1 {
            let x = [bounds.0 + (a as f64 + 0.5) * h, bounds.0 + (b as f64 + 0.5) * h];
            if !mask(x) {
                continue;
            }
            let j = active_piece(x, ys, v);
            let stencil = [[x[0] + h, x[1]], [x[0] - h, x[1]], [x[0], x[1] + h], [x[0], x[1] - h]];
            if stencil.iter().any(|&p| active_piece(p, ys, v) != j) {
                continue;
            }
            let g = [(u(stencil[0]) - u(stencil[1])) / (2.0 * h), (u(stencil[2]) - u(stencil[3])) / (2.0 * h)];
            worst = worst.max((g[0] - ys[j][0]).hypot(g[1] - ys[j][1]));
        }
    }
    worst
}

/// Images of every `stride`-th grid line (always including the boundary
/// lines) under the map: first the lines of constant `i`, then of constant `j`.
pub fn mesh_polylines(map: &TransportMap, stride: usize) -> Vec<Vec<Point>> {
    let n = map.grid.n();
    let stride = stride.max(1);
    let mut lines_at: Vec<usize> = (0..n).step_by(stride).collect();
    if *lines_at.last().unwrap_or(&0) != n - 1 {
        lines_at.push(n - 1);
    }
    let mut out = Vec::with_capacity(2 * lines_at.len());
    for &i in &lines_at {
        out.push((0..n).map(|j| map.at(map.grid.flat_index(i, j))).collect());
    }
    for &j in &lines_at {
        out.push((0..n).map(|i| map.at(map.grid.flat_index(i, j))).collect());
    }
    out
}
