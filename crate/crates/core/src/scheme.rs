//! Interior Monge-Ampere residuals and their Jacobian rows.
//!
//! Residuals use the sign `det(D^2 u) - rho_X / rho_Y(grad u) - u(x0)`, so
//! the monotone scheme is nondecreasing in every neighbor value.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4};

use serde::{Deserialize, Serialize};

use crate::density::DensityPair;
use crate::error::{Error, Result};
use crate::grid::{Grid2D, Point};
use crate::stencil::{apply_unchecked, row_unchecked, SparseRow, StencilKind};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchemeParams {
    /// Floor on the second differences in the monotone scheme.
    pub delta: f64,
    /// Filter scale.
    pub eps: f64,
    /// Angular resolution of the compact stencil.
    pub dtheta: f64,
    /// Flat index of the point whose value fixes the additive constant.
    pub x0: usize,
}

impl SchemeParams {
    /// `delta = dx^2`, `eps = sqrt(dx) + pi/4`.
    pub fn for_grid(grid: &Grid2D) -> Self {
        let dx = grid.dx();
        SchemeParams { delta: dx * dx, eps: dx.sqrt() + FRAC_PI_4, dtheta: FRAC_PI_4, x0: grid.x0_index() }
    }

    pub fn validate(&self, grid: &Grid2D) -> Result<()> {
        if !(self.delta > 0.0) || !(self.eps > 0.0) {
            return Err(Error::Config(format!("delta = {} and eps = {} must be positive", self.delta, self.eps)));
        }
        if self.x0 >= grid.len() || !grid.class_at(self.x0).is_interior() {
            return Err(Error::Config(format!("reference index {} is not an interior point", self.x0)));
        }
        Ok(())
    }

    /// Log a warning when `delta` is below the monotonicity threshold `K dx / sqrt 2`.
    pub fn check_monotonicity(&self, grid: &Grid2D, lipschitz_k: f64) {
        let bound = lipschitz_k * grid.dx() * FRAC_1_SQRT_2;
        if self.delta <= bound {
            log::warn!("delta = {:e} does not exceed K dx / sqrt 2 = {:e}; the monotone scheme may lose monotonicity", self.delta, bound);
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Branch {
    Ma1,
    Ma2,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FilterRegion {
    /// `|x| <= 1`: the accurate scheme is used as is.
    Inner,
    Descending,
    /// `|x| >= 2`: the monotone scheme is used as is.
    Outer,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualBundle {
    pub value: f64,
    pub monotone: f64,
    pub accurate: f64,
    pub branch: Branch,
    pub region: FilterRegion,
}

pub fn filter(x: f64) -> f64 {
    let a = x.abs();
    if a <= 1.0 {
        x
    } else if a >= 2.0 {
        0.0
    } else if x > 0.0 {
        2.0 - x
    } else {
        -x - 2.0
    }
}

pub fn filter_deriv(x: f64) -> f64 {
    let a = x.abs();
    if a <= 1.0 {
        1.0
    } else if a < 2.0 {
        -1.0
    } else {
        0.0
    }
}

pub fn filter_region(x: f64) -> FilterRegion {
    let a = x.abs();
    if a <= 1.0 {
        FilterRegion::Inner
    } else if a < 2.0 {
        FilterRegion::Descending
    } else {
        FilterRegion::Outer
    }
}

/// Local data read once per interior point.
struct Local<'a> {
    grid: &'a Grid2D,
    u: &'a [f64],
    dens: &'a DensityPair,
    p: &'a SchemeParams,
    i: usize,
    j: usize,
    k: usize,
}

impl Local<'_> {
    fn d(&self, kind: StencilKind) -> f64 {
        apply_unchecked(kind, self.grid, self.u, self.i, self.j)
    }

    fn row(&self, kind: StencilKind) -> SparseRow {
        row_unchecked(kind, self.grid, self.i, self.j)
    }

    /// Monotone two-direction term and its partial derivatives in `(a, b)`.
    fn det_plus(&self, a: f64, b: f64) -> (f64, f64, f64) {
        let d = self.p.delta;
        let value = a.max(d) * b.max(d) + a.min(d) + b.min(d);
        let da = if a >= d { b.max(d) } else { 1.0 };
        let db = if b >= d { a.max(d) } else { 1.0 };
        (value, da, db)
    }
}

fn check_interior(grid: &Grid2D, i: usize, j: usize) -> Result<()> {
    let n = grid.n();
    if i == 0 || j == 0 || i + 1 >= n || j + 1 >= n {
        return Err(Error::OutOfStencil { kind: "interior scheme", i, j });
    }
    Ok(())
}

struct Evaluated {
    value: f64,
    row: Option<SparseRow>,
}

fn eval_ma1(l: &Local, jac: bool) -> Evaluated {
    let a = l.d(StencilKind::Dx1x1);
    let b = l.d(StencilKind::Dx2x2);
    let g = [l.d(StencilKind::Dx1), l.d(StencilKind::Dx2)];
    let (det, da, db) = l.det_plus(a, b);
    let (f, fp) = l.dens.ratio(l.k, g, jac);
    let value = det - f - l.u[l.p.x0];
    let row = jac.then(|| {
        let mut r = SparseRow::new();
        r.add_scaled(&l.row(StencilKind::Dx1x1), da);
        r.add_scaled(&l.row(StencilKind::Dx2x2), db);
        r.add_scaled(&l.row(StencilKind::Dx1), -fp[0]);
        r.add_scaled(&l.row(StencilKind::Dx2), -fp[1]);
        r.push(l.p.x0, -1.0);
        r
    });
    Evaluated { value, row }
}

fn rotated_gradient(dv: f64, dvp: f64) -> Point {
    [FRAC_1_SQRT_2 * (dv + dvp), FRAC_1_SQRT_2 * (dv - dvp)]
}

fn eval_ma2(l: &Local, jac: bool) -> Evaluated {
    let a = l.d(StencilKind::Dvv);
    let b = l.d(StencilKind::Dvpvp);
    let g = rotated_gradient(l.d(StencilKind::Dv), l.d(StencilKind::Dvp));
    let (det, da, db) = l.det_plus(a, b);
    let (f, fp) = l.dens.ratio(l.k, g, jac);
    let value = det - f - l.u[l.p.x0];
    let row = jac.then(|| {
        let mut r = SparseRow::new();
        r.add_scaled(&l.row(StencilKind::Dvv), da);
        r.add_scaled(&l.row(StencilKind::Dvpvp), db);
        let (dv, dvp) = (l.row(StencilKind::Dv), l.row(StencilKind::Dvp));
        r.add_scaled(&dv, -FRAC_1_SQRT_2 * (fp[0] + fp[1]));
        r.add_scaled(&dvp, -FRAC_1_SQRT_2 * (fp[0] - fp[1]));
        r.push(l.p.x0, -1.0);
        r
    });
    Evaluated { value, row }
}

fn eval_accurate(l: &Local, jac: bool) -> Evaluated {
    let a = l.d(StencilKind::Dx1x1);
    let b = l.d(StencilKind::Dx2x2);
    let c = l.d(StencilKind::Dx1x2);
    let g = [l.d(StencilKind::Dx1), l.d(StencilKind::Dx2)];
    let (f, fp) = l.dens.ratio(l.k, g, jac);
    let value = a * b - c * c - f - l.u[l.p.x0];
    let row = jac.then(|| {
        let mut r = SparseRow::new();
        r.add_scaled(&l.row(StencilKind::Dx1x1), b);
        r.add_scaled(&l.row(StencilKind::Dx2x2), a);
        r.add_scaled(&l.row(StencilKind::Dx1x2), -2.0 * c);
        r.add_scaled(&l.row(StencilKind::Dx1), -fp[0]);
        r.add_scaled(&l.row(StencilKind::Dx2), -fp[1]);
        r.push(l.p.x0, -1.0);
        r
    });
    Evaluated { value, row }
}

fn local<'a>(u: &'a [f64], grid: &'a Grid2D, i: usize, j: usize, dens: &'a DensityPair, p: &'a SchemeParams) -> Result<Local<'a>> {
    check_interior(grid, i, j)?;
    Ok(Local { grid, u, dens, p, i, j, k: grid.flat_index(i, j) })
}

/// Axis-aligned monotone scheme.
pub fn ma1(u: &[f64], grid: &Grid2D, i: usize, j: usize, dens: &DensityPair, p: &SchemeParams) -> Result<f64> {
    Ok(eval_ma1(&local(u, grid, i, j, dens, p)?, false).value)
}

/// Diagonal monotone scheme.
pub fn ma2(u: &[f64], grid: &Grid2D, i: usize, j: usize, dens: &DensityPair, p: &SchemeParams) -> Result<f64> {
    Ok(eval_ma2(&local(u, grid, i, j, dens, p)?, false).value)
}

/// `min(MA1, MA2)`, with ties going to MA1.
pub fn monotone(u: &[f64], grid: &Grid2D, i: usize, j: usize, dens: &DensityPair, p: &SchemeParams) -> Result<(f64, Branch)> {
    let l = local(u, grid, i, j, dens, p)?;
    let (m1, m2) = (eval_ma1(&l, false).value, eval_ma2(&l, false).value);
    Ok(if m2 < m1 { (m2, Branch::Ma2) } else { (m1, Branch::Ma1) })
}

/// Centered-difference scheme.
pub fn accurate(u: &[f64], grid: &Grid2D, i: usize, j: usize, dens: &DensityPair, p: &SchemeParams) -> Result<f64> {
    Ok(eval_accurate(&local(u, grid, i, j, dens, p)?, false).value)
}

/// Filtered residual and, on request, the row of its approximate Jacobian.
pub fn filtered_with_row(
    u: &[f64],
    grid: &Grid2D,
    i: usize,
    j: usize,
    dens: &DensityPair,
    p: &SchemeParams,
    jac: bool,
) -> Result<(ResidualBundle, Option<SparseRow>)> {
    let l = local(u, grid, i, j, dens, p)?;
    let e1 = eval_ma1(&l, jac);
    let e2 = eval_ma2(&l, jac);
    let ea = eval_accurate(&l, jac);
    let (mono, branch) = if e2.value < e1.value { (e2, Branch::Ma2) } else { (e1, Branch::Ma1) };
    let x = (ea.value - mono.value) / p.eps;
    let bundle = ResidualBundle {
        value: mono.value + p.eps * filter(x),
        monotone: mono.value,
        accurate: ea.value,
        branch,
        region: filter_region(x),
    };
    let row = if jac {
        let s = filter_deriv(x);
        let mut r = SparseRow::new();
        r.add_scaled(&mono.row.unwrap_or_default(), 1.0 - s);
        r.add_scaled(&ea.row.unwrap_or_default(), s.max(0.0));
        Some(r.compact())
    } else {
        None
    };
    Ok((bundle, row))
}

/// `MA_M + eps S((MA_A - MA_M) / eps)`.
pub fn filtered(u: &[f64], grid: &Grid2D, i: usize, j: usize, dens: &DensityPair, p: &SchemeParams) -> Result<ResidualBundle> {
    Ok(filtered_with_row(u, grid, i, j, dens, p, false)?.0)
}

/// Row of the approximate Jacobian of [`filtered`].
pub fn jacobian_row(u: &[f64], grid: &Grid2D, i: usize, j: usize, dens: &DensityPair, p: &SchemeParams) -> Result<SparseRow> {
    Ok(filtered_with_row(u, grid, i, j, dens, p, true)?.1.unwrap_or_default())
}

/// Row of the exact derivative of the monotone residual for the active branch.
pub fn monotone_row(u: &[f64], grid: &Grid2D, i: usize, j: usize, dens: &DensityPair, p: &SchemeParams) -> Result<SparseRow> {
    let l = local(u, grid, i, j, dens, p)?;
    let (e1, e2) = (eval_ma1(&l, true), eval_ma2(&l, true));
    let r = if e2.value < e1.value { e2.row } else { e1.row };
    Ok(r.unwrap_or_default().compact())
}

/// Row of the exact derivative of the accurate residual.
pub fn accurate_row(u: &[f64], grid: &Grid2D, i: usize, j: usize, dens: &DensityPair, p: &SchemeParams) -> Result<SparseRow> {
    let l = local(u, grid, i, j, dens, p)?;
    Ok(eval_accurate(&l, true).row.unwrap_or_default().compact())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::{extend_target, sample_source, DensityFn, DensityPair};
    use crate::geometry::TargetShape;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn setup(n: usize) -> (Grid2D, DensityPair, SchemeParams) {
        let g = Grid2D::new(n, (-0.5, 0.5)).unwrap();
        let x = sample_source(|_| 1.0, |_| true, &g).unwrap();
        let t = extend_target(DensityFn::Constant(1.0), &TargetShape::square(-0.5, 0.5, 8).unwrap(), 0.1).unwrap();
        let p = SchemeParams::for_grid(&g);
        (g, DensityPair::new(x, t), p)
    }

    fn field(g: &Grid2D, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        (0..g.len())
            .map(|k| {
                let [a, b] = g.point_at(k);
                f(a, b)
            })
            .collect()
    }

    #[test]
    fn paraboloid_values() {
        let (g, d, p) = setup(9);
        let u = field(&g, |a, b| 0.5 * (a * a + b * b));
        let dl = p.delta;
        assert!((ma1(&u, &g, 3, 4, &d, &p).unwrap() - 2.0 * dl).abs() < 1e-12);
        assert!((ma2(&u, &g, 3, 4, &d, &p).unwrap() - 2.0 * dl).abs() < 1e-12);
        assert!(accurate(&u, &g, 3, 4, &d, &p).unwrap().abs() < 1e-12);
        let f = filtered(&u, &g, 3, 4, &d, &p).unwrap();
        assert_eq!(f.region, FilterRegion::Inner);
        assert!(f.value.abs() < 1e-12);
    }

    #[test]
    fn zero_field_values() {
        let (g, d, p) = setup(9);
        let u = vec![0.0; g.len()];
        let dl = p.delta;
        assert!((ma1(&u, &g, 2, 2, &d, &p).unwrap() - (dl * dl - 1.0)).abs() < 1e-14);
        assert!((ma2(&u, &g, 2, 2, &d, &p).unwrap() - (dl * dl - 1.0)).abs() < 1e-14);
        assert!((accurate(&u, &g, 2, 2, &d, &p).unwrap() + 1.0).abs() < 1e-14);
    }

    #[test]
    fn saddle_selects_diagonal_branch() {
        let (g, d, p) = setup(9);
        let u = field(&g, |a, b| a * b);
        let dl = p.delta;
        let m1 = ma1(&u, &g, 4, 4, &d, &p).unwrap();
        let m2 = ma2(&u, &g, 4, 4, &d, &p).unwrap();
        assert!((m1 - (dl * dl - 1.0)).abs() < 1e-12);
        // Dvv = 1, Dvpvp = -1: 1 * delta + delta - 1 - 1.
        assert!((m2 - (2.0 * dl - 2.0)).abs() < 1e-12);
        let (m, b) = monotone(&u, &g, 4, 4, &d, &p).unwrap();
        assert_eq!(b, Branch::Ma2);
        assert_eq!(m, m2.min(m1));
        assert!((accurate(&u, &g, 4, 4, &d, &p).unwrap() + 2.0).abs() < 1e-12);
    }

    #[test]
    fn concave_quadratic_is_penalized() {
        let (g, d, p) = setup(9);
        let u = field(&g, |a, b| -0.5 * (a * a + b * b));
        let (m, _) = monotone(&u, &g, 3, 3, &d, &p).unwrap();
        let dl = p.delta;
        assert!((m - (dl * dl - 3.0)).abs() < 1e-12);
        assert!(m < -1.0);
    }

    #[test]
    fn filter_values() {
        assert_eq!(filter(0.5), 0.5);
        assert_eq!(filter(-0.5), -0.5);
        assert_eq!(filter(1.5), 0.5);
        assert_eq!(filter(-1.5), -0.5);
        assert_eq!(filter(3.0), 0.0);
        assert_eq!(filter(-2.7), 0.0);
        assert_eq!(filter_deriv(1.0), 1.0);
        assert_eq!(filter_deriv(-1.0), 1.0);
        assert_eq!(filter_deriv(2.0), 0.0);
        assert_eq!(filter_deriv(1.2), -1.0);
        for x in [-2.0, -1.0, 1.0, 2.0] {
            assert!((filter(x + 1e-12) - filter(x - 1e-12)).abs() < 1e-11);
        }
    }

    #[test]
    fn filter_extremes() {
        let (g, d, _) = setup(9);
        let u = field(&g, |a, b| a * b + 0.3 * a * a);
        let wide = SchemeParams { eps: 1e6, ..SchemeParams::for_grid(&g) };
        let f = filtered(&u, &g, 4, 4, &d, &wide).unwrap();
        assert_eq!(f.value, f.monotone + (f.accurate - f.monotone));
        let narrow = SchemeParams { eps: 1e-9, ..SchemeParams::for_grid(&g) };
        let f = filtered(&u, &g, 4, 4, &d, &narrow).unwrap();
        assert_eq!(f.region, FilterRegion::Outer);
        assert_eq!(f.value, f.monotone);
        let r = jacobian_row(&u, &g, 4, 4, &d, &narrow).unwrap();
        assert_eq!(r, monotone_row(&u, &g, 4, 4, &d, &narrow).unwrap());
    }

    #[test]
    fn constant_shift_direction() {
        let (g, d, p) = setup(9);
        let u = field(&g, |a, b| a * a + 0.7 * b * b + 0.2 * a * b);
        let ones = vec![1.0; g.len()];
        for j in 1..8 {
            for i in 1..8 {
                let r = jacobian_row(&u, &g, i, j, &d, &p).unwrap();
                assert!((r.dot(&ones) + 1.0).abs() < 1e-9);
            }
        }
    }

    fn gaussian_pair(g: &Grid2D) -> DensityPair {
        let x = sample_source(|p| 1.0 + 0.5 * p[0] * p[0], |_| true, g).unwrap();
        let t = extend_target(
            DensityFn::Gaussian { center: [0.1, -0.05], sigma: 0.3, base: 1.0 },
            &TargetShape::square(-0.5, 0.5, 8).unwrap(),
            0.1,
        )
        .unwrap();
        DensityPair::new(x, t)
    }

    fn random_convex(g: &Grid2D, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let a = rng.random_range(0.5..2.0);
        let c = rng.random_range(0.5..2.0);
        let b = rng.random_range(-0.3..0.3);
        let w = rng.random_range(0.0..0.1);
        let ph = rng.random_range(0.0..6.0);
        let s = [rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1)];
        field(g, |x, y| 0.5 * (a * x * x + 2.0 * b * x * y + c * y * y) + w * (3.0 * x + ph).sin() + s[0] * x + s[1] * y)
    }

    /// Whether the monotone scheme is within reach of a branch switch or a
    /// `max`/`min` kink, where one-sided derivatives disagree.
    fn near_kink(u: &[f64], g: &Grid2D, i: usize, j: usize, d: &DensityPair, p: &SchemeParams) -> bool {
        let gap = 1e-3;
        let a = ma1(u, g, i, j, d, p).unwrap();
        let b = ma2(u, g, i, j, d, p).unwrap();
        let second = [StencilKind::Dx1x1, StencilKind::Dx2x2, StencilKind::Dvv, StencilKind::Dvpvp];
        (a - b).abs() < gap || second.iter().any(|&k| (apply_unchecked(k, g, u, i, j) - p.delta).abs() < gap)
    }

    /// Check each component scheme against central differences.
    #[test]
    fn component_rows_match_finite_differences() {
        let g = Grid2D::new(9, (-0.5, 0.5)).unwrap();
        let d = gaussian_pair(&g);
        let p = SchemeParams::for_grid(&g);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = 1e-6;
        for _ in 0..10 {
            let u = random_convex(&g, &mut rng);
            for j in 1..8 {
                for i in 1..8 {
                    type Res = fn(&[f64], &Grid2D, usize, usize, &DensityPair, &SchemeParams) -> Result<f64>;
                    type Row = fn(&[f64], &Grid2D, usize, usize, &DensityPair, &SchemeParams) -> Result<SparseRow>;
                    let mono: Res = |u, g, i, j, d, p| monotone(u, g, i, j, d, p).map(|m| m.0);
                    let cases: [(Res, Row); 2] = [(accurate, accurate_row), (mono, monotone_row)];
                    for (ci, (res, rowf)) in cases.into_iter().enumerate() {
                        if ci == 1 && near_kink(&u, &g, i, j, &d, &p) {
                            continue;
                        }
                        let r = rowf(&u, &g, i, j, &d, &p).unwrap();
                        let mut w = u.clone();
                        for &(c, coef) in &r.entries {
                            w[c] = u[c] + h;
                            let fp = res(&w, &g, i, j, &d, &p).unwrap();
                            w[c] = u[c] - h;
                            let fm = res(&w, &g, i, j, &d, &p).unwrap();
                            w[c] = u[c];
                            let fd = (fp - fm) / (2.0 * h);
                            assert!((fd - coef).abs() <= 1e-5 * (1.0 + coef.abs()), "({i},{j}) col {c}: {coef} vs {fd}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn filtered_row_matches_where_filter_is_linear() {
        let g = Grid2D::new(9, (-0.5, 0.5)).unwrap();
        let d = gaussian_pair(&g);
        let p = SchemeParams::for_grid(&g);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = 1e-6;
        for _ in 0..10 {
            let u = random_convex(&g, &mut rng);
            for j in 1..8 {
                for i in 1..8 {
                    let (b, r) = filtered_with_row(&u, &g, i, j, &d, &p, true).unwrap();
                    if b.region == FilterRegion::Descending {
                        continue;
                    }
                    let r = r.unwrap();
                    for k in 0..g.len() {
                        let mut w = u.clone();
                        w[k] += h;
                        let fp = filtered(&w, &g, i, j, &d, &p).unwrap().value;
                        w[k] -= 2.0 * h;
                        let fm = filtered(&w, &g, i, j, &d, &p).unwrap().value;
                        let fd = (fp - fm) / (2.0 * h);
                        let coef = r.coefficient(k);
                        assert!((fd - coef).abs() <= 10.0 * h * (1.0 + coef.abs()) + 1e-5, "({i},{j}) col {k}: {coef} vs {fd}");
                    }
                }
            }
        }
    }

    #[test]
    fn accurate_vanishes_on_matching_quadratics() {
        let (g, d, _) = setup(11);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let a = rng.random_range(0.3..3.0);
            let b: f64 = rng.random_range(-2.0..2.0);
            let c = (1.0 + b * b) / a;
            let lin = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            let u = field(&g, |x, y| 0.5 * (a * x * x + 2.0 * b * x * y + c * y * y) + lin[0] * x + lin[1] * y);
            let shift = -u[g.x0_index()];
            let u: Vec<f64> = u.iter().map(|v| v + shift).collect();
            let p = SchemeParams::for_grid(&g);
            for j in 1..10 {
                for i in 1..10 {
                    assert!(accurate(&u, &g, i, j, &d, &p).unwrap().abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn residual_is_continuous_across_switches() {
        let (g, d, p) = setup(9);
        let base = field(&g, |a, b| 0.5 * (a * a + b * b) + 0.1 * a * b);
        let k = g.flat_index(5, 4);
        let steps = 20000;
        let mut prev = None;
        for s in 0..=steps {
            let t = -0.2 + 0.4 * s as f64 / steps as f64;
            let mut u = base.clone();
            u[k] += t;
            let v = filtered(&u, &g, 4, 4, &d, &p).unwrap().value;
            if let Some(pv) = prev {
                let jump: f64 = v - pv;
                // Lipschitz bound: coefficients are O(1/dx^2) times the step.
                let step = 0.4 / steps as f64;
                assert!(jump.abs() <= 4.0 * step / (g.dx() * g.dx()) * 10.0 + 1e-12);
            }
            prev = Some(v);
        }
    }

    #[test]
    fn monotonicity_threshold_warning_does_not_panic() {
        let (g, _, p) = setup(9);
        p.check_monotonicity(&g, 1e6);
        assert!(p.validate(&g).is_ok());
        assert!(SchemeParams { delta: 0.0, ..p }.validate(&g).is_err());
    }

    #[test]
    fn custom_density_gradient_uses_differences() {
        let g = Grid2D::new(9, (-0.5, 0.5)).unwrap();
        let x = sample_source(|_| 1.0, |_| true, &g).unwrap();
        let t = extend_target(
            DensityFn::Custom(Arc::new(|y: Point| 1.0 + 0.5 * y[0] + 0.25 * y[1] * y[1])),
            &TargetShape::square(-0.5, 0.5, 8).unwrap(),
            0.1,
        )
        .unwrap();
        let d = DensityPair::new(x, t);
        let p = SchemeParams::for_grid(&g);
        let u = field(&g, |a, b| 0.6 * a * a + 0.4 * b * b);
        let r = accurate_row(&u, &g, 4, 4, &d, &p).unwrap();
        let h = 1e-6;
        let k = g.flat_index(5, 4);
        let mut w = u.clone();
        w[k] += h;
        let fp = accurate(&w, &g, 4, 4, &d, &p).unwrap();
        w[k] -= 2.0 * h;
        let fm = accurate(&w, &g, 4, 4, &d, &p).unwrap();
        assert!(((fp - fm) / (2.0 * h) - r.coefficient(k)).abs() < 1e-4);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn monotone_scheme_is_degenerate_elliptic(
            seed in any::<u64>(),
            i in 1usize..8, j in 1usize..8,
            di in -1i32..=1, dj in -1i32..=1,
            bump in 1e-4f64..1.0,
        ) {
            prop_assume!(di != 0 || dj != 0);
            let (g, d, p) = setup(9);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let u: Vec<f64> = (0..g.len()).map(|_| rng.random_range(-0.05..0.05)).collect();
            let nb = g.flat_index((i as i32 + di) as usize, (j as i32 + dj) as usize);
            prop_assume!(nb != p.x0);
            let before = monotone(&u, &g, i, j, &d, &p).unwrap().0;
            let mut w = u.clone();
            w[nb] += bump;
            let after = monotone(&w, &g, i, j, &d, &p).unwrap().0;
            prop_assert!(after >= before - 1e-12 * before.abs().max(1.0));
        }
    }
}
