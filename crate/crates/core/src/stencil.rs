//! Finite-difference operators on the 9-point stencil.
//!
//! Every operator is a fixed list of `(di, dj, weight)` offsets and a scale
//! depending on `dx`. The same description produces pointwise values
//! ([`apply`]) and Jacobian rows ([`row`]), so the two never drift apart.

use std::f64::consts::SQRT_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid2D;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StencilKind {
    Dx1x1,
    Dx2x2,
    Dx1x2,
    Dx1,
    Dx2,
    /// Second derivative along `v = (1, 1) / sqrt 2`.
    Dvv,
    /// Second derivative along `v_perp = (1, -1) / sqrt 2`.
    Dvpvp,
    Dv,
    Dvp,
    DxMinus,
    DxPlus,
    DyMinus,
    DyPlus,
}

impl StencilKind {
    pub const ALL: [StencilKind; 13] = [
        StencilKind::Dx1x1,
        StencilKind::Dx2x2,
        StencilKind::Dx1x2,
        StencilKind::Dx1,
        StencilKind::Dx2,
        StencilKind::Dvv,
        StencilKind::Dvpvp,
        StencilKind::Dv,
        StencilKind::Dvp,
        StencilKind::DxMinus,
        StencilKind::DxPlus,
        StencilKind::DyMinus,
        StencilKind::DyPlus,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StencilKind::Dx1x1 => "Dx1x1",
            StencilKind::Dx2x2 => "Dx2x2",
            StencilKind::Dx1x2 => "Dx1x2",
            StencilKind::Dx1 => "Dx1",
            StencilKind::Dx2 => "Dx2",
            StencilKind::Dvv => "Dvv",
            StencilKind::Dvpvp => "Dvpvp",
            StencilKind::Dv => "Dv",
            StencilKind::Dvp => "Dvp",
            StencilKind::DxMinus => "DxMinus",
            StencilKind::DxPlus => "DxPlus",
            StencilKind::DyMinus => "DyMinus",
            StencilKind::DyPlus => "DyPlus",
        }
    }

    /// Offsets and unscaled weights.
    pub fn offsets(self) -> &'static [(i32, i32, f64)] {
        match self {
            StencilKind::Dx1x1 => &[(1, 0, 1.0), (-1, 0, 1.0), (0, 0, -2.0)],
            StencilKind::Dx2x2 => &[(0, 1, 1.0), (0, -1, 1.0), (0, 0, -2.0)],
            StencilKind::Dx1x2 => &[(1, 1, 1.0), (-1, -1, 1.0), (-1, 1, -1.0), (1, -1, -1.0)],
            StencilKind::Dx1 => &[(1, 0, 1.0), (-1, 0, -1.0)],
            StencilKind::Dx2 => &[(0, 1, 1.0), (0, -1, -1.0)],
            StencilKind::Dvv => &[(1, 1, 1.0), (-1, -1, 1.0), (0, 0, -2.0)],
            StencilKind::Dvpvp => &[(1, -1, 1.0), (-1, 1, 1.0), (0, 0, -2.0)],
            StencilKind::Dv => &[(1, 1, 1.0), (-1, -1, -1.0)],
            StencilKind::Dvp => &[(1, -1, 1.0), (-1, 1, -1.0)],
            StencilKind::DxMinus => &[(0, 0, 1.0), (-1, 0, -1.0)],
            StencilKind::DxPlus => &[(1, 0, 1.0), (0, 0, -1.0)],
            StencilKind::DyMinus => &[(0, 0, 1.0), (0, -1, -1.0)],
            StencilKind::DyPlus => &[(0, 1, 1.0), (0, 0, -1.0)],
        }
    }

    pub fn scale(self, dx: f64) -> f64 {
        match self {
            StencilKind::Dx1x1 | StencilKind::Dx2x2 => 1.0 / (dx * dx),
            StencilKind::Dx1x2 => 1.0 / (4.0 * dx * dx),
            StencilKind::Dx1 | StencilKind::Dx2 => 1.0 / (2.0 * dx),
            StencilKind::Dvv | StencilKind::Dvpvp => 1.0 / (2.0 * dx * dx),
            StencilKind::Dv | StencilKind::Dvp => 1.0 / (2.0 * SQRT_2 * dx),
            StencilKind::DxMinus | StencilKind::DxPlus | StencilKind::DyMinus | StencilKind::DyPlus => 1.0 / dx,
        }
    }

    /// Whether every offset stays inside the grid at `(i, j)`.
    pub fn fits(self, grid: &Grid2D, i: usize, j: usize) -> bool {
        let n = grid.n() as i64;
        self.offsets().iter().all(|&(di, dj, _)| {
            let a = i as i64 + di as i64;
            let b = j as i64 + dj as i64;
            (0..n).contains(&a) && (0..n).contains(&b)
        })
    }
}

/// Sparse row: `(flat index, coefficient)` pairs, possibly with repeats
/// until [`SparseRow::compact`] is called.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SparseRow {
    pub entries: Vec<(usize, f64)>,
}

impl SparseRow {
    pub fn new() -> Self {
        SparseRow { entries: Vec::with_capacity(16) }
    }

    pub fn push(&mut self, col: usize, coef: f64) {
        self.entries.push((col, coef));
    }

    /// `self += s * other`.
    pub fn add_scaled(&mut self, other: &SparseRow, s: f64) {
        if s != 0.0 {
            self.entries.extend(other.entries.iter().map(|&(c, v)| (c, s * v)));
        }
    }

    /// Merge repeated columns and drop exact zeros.
    pub fn compact(mut self) -> Self {
        self.entries.sort_by_key(|e| e.0);
        let mut out: Vec<(usize, f64)> = Vec::with_capacity(self.entries.len());
        for (c, v) in self.entries {
            match out.last_mut() {
                Some(last) if last.0 == c => last.1 += v,
                _ => out.push((c, v)),
            }
        }
        out.retain(|e| e.1 != 0.0);
        SparseRow { entries: out }
    }

    pub fn dot(&self, values: &[f64]) -> f64 {
        self.entries.iter().map(|&(c, v)| v * values[c]).sum()
    }

    pub fn sum(&self) -> f64 {
        self.entries.iter().map(|e| e.1).sum()
    }

    pub fn coefficient(&self, col: usize) -> f64 {
        self.entries.iter().filter(|e| e.0 == col).map(|e| e.1).sum()
    }
}

fn check(kind: StencilKind, grid: &Grid2D, i: usize, j: usize) -> Result<()> {
    if kind.fits(grid, i, j) {
        Ok(())
    } else {
        Err(Error::OutOfStencil { kind: kind.name(), i, j })
    }
}

/// Evaluate `kind` on `values` at `(i, j)`.
pub fn apply(kind: StencilKind, grid: &Grid2D, values: &[f64], i: usize, j: usize) -> Result<f64> {
    check(kind, grid, i, j)?;
    Ok(apply_unchecked(kind, grid, values, i, j))
}

/// As [`apply`], for callers that have already validated the position.
#[inline]
pub fn apply_unchecked(kind: StencilKind, grid: &Grid2D, values: &[f64], i: usize, j: usize) -> f64 {
    let n = grid.n() as i64;
    let base = (j as i64) * n + i as i64;
    let s: f64 = kind.offsets().iter().map(|&(di, dj, w)| w * values[(base + dj as i64 * n + di as i64) as usize]).sum();
    s * kind.scale(grid.dx())
}

/// Jacobian row of `kind` at `(i, j)`.
pub fn row(kind: StencilKind, grid: &Grid2D, i: usize, j: usize) -> Result<SparseRow> {
    check(kind, grid, i, j)?;
    Ok(row_unchecked(kind, grid, i, j))
}

#[inline]
pub fn row_unchecked(kind: StencilKind, grid: &Grid2D, i: usize, j: usize) -> SparseRow {
    let n = grid.n() as i64;
    let base = (j as i64) * n + i as i64;
    let s = kind.scale(grid.dx());
    SparseRow { entries: kind.offsets().iter().map(|&(di, dj, w)| ((base + dj as i64 * n + di as i64) as usize, w * s)).collect() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample(grid: &Grid2D, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        (0..grid.len())
            .map(|k| {
                let [a, b] = grid.point_at(k);
                f(a, b)
            })
            .collect()
    }

    #[test]
    fn quadratic_exactness() {
        let g = Grid2D::new(9, (-1.0, 1.0)).unwrap();
        let sq = sample(&g, |a, _| a * a);
        let xy = sample(&g, |a, b| a * b);
        let diag = sample(&g, |a, b| 0.5 * (a + b) * (a + b));
        for j in 1..8 {
            for i in 1..8 {
                assert!((apply(StencilKind::Dx1x1, &g, &sq, i, j).unwrap() - 2.0).abs() < 1e-12);
                assert!((apply(StencilKind::Dx1x2, &g, &xy, i, j).unwrap() - 1.0).abs() < 1e-12);
                assert!((apply(StencilKind::Dvv, &g, &diag, i, j).unwrap() - 2.0).abs() < 1e-12);
                assert!(apply(StencilKind::Dvpvp, &g, &diag, i, j).unwrap().abs() < 1e-12);
            }
        }
        let lin = sample(&g, |a, _| a);
        assert!((apply(StencilKind::DxPlus, &g, &lin, 0, 4).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn out_of_grid_stencil_is_an_error() {
        let g = Grid2D::new(5, (0.0, 1.0)).unwrap();
        let u = vec![0.0; g.len()];
        assert!(matches!(apply(StencilKind::Dx1x1, &g, &u, 0, 2), Err(Error::OutOfStencil { .. })));
        assert!(apply(StencilKind::DxPlus, &g, &u, 0, 2).is_ok());
        assert!(apply(StencilKind::DxMinus, &g, &u, 0, 2).is_err());
        assert!(row(StencilKind::DyPlus, &g, 2, 4).is_err());
    }

    #[test]
    fn row_shapes() {
        let g = Grid2D::new(5, (0.0, 1.0)).unwrap();
        let dx = g.dx();
        let r = row(StencilKind::Dx1x1, &g, 2, 2).unwrap().compact();
        assert_eq!(r.entries.len(), 3);
        assert!((r.coefficient(g.flat_index(2, 2)) + 2.0 / (dx * dx)).abs() < 1e-12);
        assert!((r.coefficient(g.flat_index(1, 2)) - 1.0 / (dx * dx)).abs() < 1e-12);
        let r = row(StencilKind::Dv, &g, 2, 2).unwrap();
        assert_eq!(r.entries.len(), 2);
        let w = 1.0 / (2.0 * SQRT_2 * dx);
        assert!((r.coefficient(g.flat_index(3, 3)) - w).abs() < 1e-12);
        assert!((r.coefficient(g.flat_index(1, 1)) + w).abs() < 1e-12);
    }

    #[test]
    fn rows_annihilate_constants() {
        let g = Grid2D::new(5, (0.0, 1.0)).unwrap();
        for kind in StencilKind::ALL {
            let r = row(kind, &g, 2, 2).unwrap();
            assert!(r.sum().abs() < 1e-9, "{kind:?}");
        }
    }

    fn max_error(n: usize, kind: StencilKind, exact: impl Fn(f64, f64) -> f64, one_sided: bool) -> f64 {
        let g = Grid2D::new(n, (0.1, 1.1)).unwrap();
        let u = sample(&g, |a, b| a.sin() * b.cos());
        let mut err: f64 = 0.0;
        let range = if one_sided { 0..n - 1 } else { 1..n - 1 };
        for j in 1..n - 1 {
            for i in range.clone() {
                if !kind.fits(&g, i, j) {
                    continue;
                }
                let [a, b] = g.point(i, j);
                err = err.max((apply(kind, &g, &u, i, j).unwrap() - exact(a, b)).abs());
            }
        }
        err
    }

    #[test]
    fn consistency_orders() {
        type Exact = fn(f64, f64) -> f64;
        let cases: Vec<(StencilKind, Exact, bool, f64)> = vec![
            (StencilKind::Dx1x1, |a: f64, b: f64| -a.sin() * b.cos(), false, 1.9),
            (StencilKind::Dx2x2, |a: f64, b: f64| -a.sin() * b.cos(), false, 1.9),
            (StencilKind::Dx1x2, |a: f64, b: f64| -a.cos() * b.sin(), false, 1.9),
            (StencilKind::Dx1, |a: f64, b: f64| a.cos() * b.cos(), false, 1.9),
            (StencilKind::Dx2, |a: f64, b: f64| -a.sin() * b.sin(), false, 1.9),
            (StencilKind::DxPlus, |a: f64, b: f64| a.cos() * b.cos(), true, 0.9),
            (StencilKind::DxMinus, |a: f64, b: f64| a.cos() * b.cos(), true, 0.9),
            (StencilKind::DyPlus, |a: f64, b: f64| -a.sin() * b.sin(), true, 0.9),
        ];
        for (kind, exact, one_sided, order) in cases {
            let e1 = max_error(17, kind, exact, one_sided);
            let e2 = max_error(33, kind, exact, one_sided);
            let e3 = max_error(65, kind, exact, one_sided);
            let p1 = (e1 / e2).log2();
            let p2 = (e2 / e3).log2();
            assert!(p1 >= order && p2 >= order, "{kind:?}: {p1} {p2}");
        }
    }

    proptest! {
        #[test]
        fn row_dot_matches_apply(values in proptest::collection::vec(-10.0f64..10.0, 49), ki in 0usize..13) {
            let g = Grid2D::new(7, (-1.0, 2.0)).unwrap();
            let kind = StencilKind::ALL[ki];
            for j in 0..7 {
                for i in 0..7 {
                    if kind.fits(&g, i, j) {
                        let a = apply(kind, &g, &values, i, j).unwrap();
                        let r = row(kind, &g, i, j).unwrap();
                        prop_assert!((r.dot(&values) - a).abs() <= 1e-12 * (1.0 + a.abs()));
                    }
                }
            }
        }

        #[test]
        fn operators_are_linear(
            u in proptest::collection::vec(-1.0f64..1.0, 25),
            v in proptest::collection::vec(-1.0f64..1.0, 25),
            a in -3.0f64..3.0, b in -3.0f64..3.0,
        ) {
            let g = Grid2D::new(5, (0.0, 1.0)).unwrap();
            let w: Vec<f64> = u.iter().zip(&v).map(|(x, y)| a * x + b * y).collect();
            for kind in StencilKind::ALL {
                let lhs = apply(kind, &g, &w, 2, 2).unwrap();
                let rhs = a * apply(kind, &g, &u, 2, 2).unwrap() + b * apply(kind, &g, &v, 2, 2).unwrap();
                prop_assert!((lhs - rhs).abs() < 1e-9);
            }
        }
    }
}
