//! Source and target densities.
//!
//! The source density is sampled on the grid and set to zero outside its
//! support. The target density must be evaluable everywhere in the plane, so
//! it is extended by its value at the closest point of the target set and
//! floored by a positive constant.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::TargetShape;
use crate::grid::{Grid2D, Point};

/// One value per grid point.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    grid: Grid2D,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Grid2D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidGrid(format!("field has {} values for a grid of {} points", values.len(), grid.len())));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidDensity(format!("non-finite value at flat index {k}")));
        }
        Ok(ScalarField { grid, values })
    }

    pub fn zeros(grid: Grid2D) -> Self {
        ScalarField { grid, values: vec![0.0; grid.len()] }
    }

    pub fn from_fn(grid: Grid2D, f: impl Fn(Point) -> f64) -> Self {
        let values = (0..grid.len()).map(|k| f(grid.point_at(k))).collect();
        ScalarField { grid, values }
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.flat_index(i, j)]
    }

    /// Trapezoidal integral over the square.
    pub fn integral(&self) -> f64 {
        let n = self.grid.n();
        (0..self.grid.len()).map(|k| self.grid.quadrature_weight(k % n, k / n) * self.values[k]).sum()
    }

    /// Mass, mean and covariance with trapezoidal weights.
    pub fn moments(&self) -> Result<Moments> {
        let mut acc = MomentSums::default();
        let n = self.grid.n();
        for (k, &v) in self.values.iter().enumerate() {
            acc.add(self.grid.point_at(k), self.grid.quadrature_weight(k % n, k / n) * v);
        }
        acc.finish()
    }

    /// Bounding box `(lo, hi)` of the points where the field is nonzero.
    pub fn support_box(&self) -> Option<(Point, Point)> {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        let mut any = false;
        for (k, &v) in self.values.iter().enumerate() {
            if v != 0.0 {
                let p = self.grid.point_at(k);
                for d in 0..2 {
                    lo[d] = lo[d].min(p[d]);
                    hi[d] = hi[d].max(p[d]);
                }
                any = true;
            }
        }
        any.then_some((lo, hi))
    }
}

/// First and second moments of a density.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Moments {
    pub mass: f64,
    pub mean: Point,
    pub cov: [[f64; 2]; 2],
}

#[derive(Default)]
struct MomentSums {
    m: f64,
    s: [f64; 2],
    ss: [[f64; 2]; 2],
}

impl MomentSums {
    fn add(&mut self, x: Point, w: f64) {
        self.m += w;
        for a in 0..2 {
            self.s[a] += w * x[a];
            for b in 0..2 {
                self.ss[a][b] += w * x[a] * x[b];
            }
        }
    }

    fn finish(self) -> Result<Moments> {
        if !(self.m > 0.0) {
            return Err(Error::InvalidDensity("density has no mass".into()));
        }
        let mean = self.s.map(|v| v / self.m);
        let cov = [0, 1].map(|a| [0, 1].map(|b| self.ss[a][b] / self.m - mean[a] * mean[b]));
        Ok(Moments { mass: self.m, mean, cov })
    }
}

/// Closed-form densities used by the examples, plus arbitrary closures.
#[derive(Clone)]
pub enum DensityFn {
    Constant(f64),
    /// `base + exp(-|y - center|^2 / (2 sigma^2)) / sigma^2`.
    Gaussian {
        center: Point,
        sigma: f64,
        base: f64,
    },
    /// A [`DensityFn::Gaussian`] centred at the corner `(±1, ±1)` of the
    /// quadrant containing the point.
    QuadrantGaussians {
        sigma: f64,
        base: f64,
    },
    /// Source density of the square-to-square example with a known map.
    SquareExample,
    Custom(Arc<dyn Fn(Point) -> f64 + Send + Sync>),
}

impl fmt::Debug for DensityFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DensityFn::Constant(c) => write!(f, "Constant({c})"),
            DensityFn::Gaussian { center, sigma, base } => {
                write!(f, "Gaussian {{ center: {center:?}, sigma: {sigma}, base: {base} }}")
            }
            DensityFn::QuadrantGaussians { sigma, base } => {
                write!(f, "QuadrantGaussians {{ sigma: {sigma}, base: {base} }}")
            }
            DensityFn::SquareExample => write!(f, "SquareExample"),
            DensityFn::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

fn gaussian(y: Point, c: Point, sigma: f64, base: f64) -> (f64, Point) {
    let s2 = sigma * sigma;
    let d = [y[0] - c[0], y[1] - c[1]];
    let e = (-0.5 * (d[0] * d[0] + d[1] * d[1]) / s2).exp() / s2;
    (base + e, [-e * d[0] / s2, -e * d[1] / s2])
}

fn quadrant_corner(y: Point) -> Point {
    [if y[0] < 0.0 { -1.0 } else { 1.0 }, if y[1] < 0.0 { -1.0 } else { 1.0 }]
}

impl DensityFn {
    pub fn eval(&self, y: Point) -> f64 {
        match self {
            DensityFn::Constant(c) => *c,
            DensityFn::Gaussian { center, sigma, base } => gaussian(y, *center, *sigma, *base).0,
            DensityFn::QuadrantGaussians { sigma, base } => gaussian(y, quadrant_corner(y), *sigma, *base).0,
            DensityFn::SquareExample => crate::validation::square_source_density(y),
            DensityFn::Custom(f) => f(y),
        }
    }

    /// Analytic gradient where one is available.
    pub fn gradient(&self, y: Point) -> Option<Point> {
        match self {
            DensityFn::Constant(_) => Some([0.0, 0.0]),
            DensityFn::Gaussian { center, sigma, base } => Some(gaussian(y, *center, *sigma, *base).1),
            DensityFn::QuadrantGaussians { sigma, base } => Some(gaussian(y, quadrant_corner(y), *sigma, *base).1),
            DensityFn::SquareExample | DensityFn::Custom(_) => None,
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, DensityFn::Constant(_))
    }
}

/// Support sets for zero-extended source densities.
#[derive(Clone, Debug, PartialEq)]
pub enum Mask {
    All,
    Square {
        lo: f64,
        hi: f64,
    },
    Disc {
        center: Point,
        radius: f64,
    },
    /// `{x1 < -gap_left, |x - (-gap_left, 0)| < r} ∪ {x1 > gap_right, |x - (gap_right, 0)| < r}`.
    HalfDiscPair {
        gap_left: f64,
        gap_right: f64,
        radius: f64,
    },
    /// `{|M^{-1} x| <= 1}` for a symmetric positive definite `M`.
    Ellipse {
        m: [[f64; 2]; 2],
    },
    /// Annulus `r_in <= |x| <= r_out` with the wedge `|angle| < opening` removed.
    CShape {
        r_in: f64,
        r_out: f64,
        opening: f64,
    },
}

impl Mask {
    pub fn contains(&self, x: Point) -> bool {
        match self {
            Mask::All => true,
            Mask::Square { lo, hi } => x.iter().all(|&c| c >= *lo && c <= *hi),
            Mask::Disc { center, radius } => (x[0] - center[0]).powi(2) + (x[1] - center[1]).powi(2) <= radius * radius,
            Mask::HalfDiscPair { gap_left, gap_right, radius } => {
                let r2 = radius * radius;
                (x[0] < -gap_left && (x[0] + gap_left).powi(2) + x[1] * x[1] < r2)
                    || (x[0] > *gap_right && (x[0] - gap_right).powi(2) + x[1] * x[1] < r2)
            }
            Mask::Ellipse { m } => {
                let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
                let a = (m[1][1] * x[0] - m[0][1] * x[1]) / det;
                let b = (-m[1][0] * x[0] + m[0][0] * x[1]) / det;
                a * a + b * b <= 1.0 + 1e-12
            }
            Mask::CShape { r_in, r_out, opening } => {
                let r = x[0].hypot(x[1]);
                r >= *r_in && r <= *r_out && x[1].atan2(x[0]).abs() >= *opening
            }
        }
    }
}

/// Sample `rho` on the grid where `mask` holds and zero elsewhere.
pub fn sample_source(rho: impl Fn(Point) -> f64, mask: impl Fn(Point) -> bool, grid: &Grid2D) -> Result<ScalarField> {
    let mut values = vec![0.0; grid.len()];
    for (k, v) in values.iter_mut().enumerate() {
        let x = grid.point_at(k);
        if mask(x) {
            let r = rho(x);
            if !r.is_finite() || r < 0.0 {
                return Err(Error::InvalidDensity(format!("source density {r} at {x:?}")));
            }
            *v = r;
        }
    }
    ScalarField::new(*grid, values)
}

/// Target density extended to the whole plane and bounded below.
#[derive(Clone, Debug)]
pub struct TargetDensity {
    rho: DensityFn,
    shape: TargetShape,
    floor: f64,
    fd_step: f64,
}

/// Extend `rho` from the target set by closest-point projection, floored at `rho0`.
pub fn extend_target(rho: DensityFn, shape: &TargetShape, rho0: f64) -> Result<TargetDensity> {
    if !(rho0 > 0.0) || !rho0.is_finite() {
        return Err(Error::InvalidFloor(rho0));
    }
    let shape = if shape.is_polygon() { shape.clone() } else { shape.clone().ordered() };
    let fd_step = 1e-6 * shape.diameter();
    Ok(TargetDensity { rho, shape, floor: rho0, fd_step })
}

impl TargetDensity {
    pub fn shape(&self) -> &TargetShape {
        &self.shape
    }

    pub fn density(&self) -> &DensityFn {
        &self.rho
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    pub fn is_constant(&self) -> bool {
        self.rho.is_constant()
    }

    fn base_point(&self, y: Point) -> Point {
        if self.rho.is_constant() {
            return y;
        }
        match self.shape.contains(y) {
            Ok(true) => y,
            _ => self.shape.project_into(y).unwrap_or(y),
        }
    }

    pub fn eval(&self, y: Point) -> f64 {
        self.rho.eval(self.base_point(y)).max(self.floor)
    }

    /// Gradient of [`TargetDensity::eval`]: analytic inside the target set
    /// when available, central differences otherwise.
    pub fn gradient(&self, y: Point) -> Point {
        if self.rho.is_constant() {
            return [0.0, 0.0];
        }
        if let (Ok(true), Some(g)) = (self.shape.contains(y), self.rho.gradient(y)) {
            return if self.rho.eval(y) > self.floor { g } else { [0.0, 0.0] };
        }
        let h = self.fd_step;
        let d = |e: Point| (self.eval([y[0] + h * e[0], y[1] + h * e[1]]) - self.eval([y[0] - h * e[0], y[1] - h * e[1]])) / (2.0 * h);
        [d([1.0, 0.0]), d([0.0, 1.0])]
    }

    /// Mass of the (unextended) density over the target set, by midpoint
    /// quadrature on a `resolution x resolution` grid over its bounding box.
    pub fn mass(&self, resolution: usize) -> Result<f64> {
        if let DensityFn::Constant(c) = self.rho {
            return Ok(c * self.shape.area()?);
        }
        Ok(self.moments(resolution)?.mass)
    }

    /// Mass, mean and covariance of the (unextended) density over the target
    /// set, with the same quadrature as [`TargetDensity::mass`].
    pub fn moments(&self, resolution: usize) -> Result<Moments> {
        if !self.shape.is_polygon() {
            return Err(Error::RequiresPolygon);
        }
        let (lo, hi) = self.shape.bounding_box();
        let hx = (hi[0] - lo[0]) / resolution as f64;
        let hy = (hi[1] - lo[1]) / resolution as f64;
        let pts = self.shape.points();
        let mut acc = MomentSums::default();
        for r in 0..resolution {
            let y = lo[1] + (r as f64 + 0.5) * hy;
            let mut xs: Vec<f64> = Vec::new();
            for k in 0..pts.len() {
                let a = pts[k];
                let b = pts[(k + 1) % pts.len()];
                if (a[1] > y) != (b[1] > y) {
                    xs.push(a[0] + (y - a[1]) / (b[1] - a[1]) * (b[0] - a[0]));
                }
            }
            xs.sort_by(f64::total_cmp);
            for c in 0..resolution {
                let x = lo[0] + (c as f64 + 0.5) * hx;
                if xs.iter().filter(|&&t| t < x).count() % 2 == 1 {
                    acc.add([x, y], self.rho.eval([x, y]) * hx * hy);
                }
            }
        }
        acc.finish()
    }
}

/// Sampled source, extended target and the Lipschitz estimate of their ratio.
#[derive(Clone, Debug)]
pub struct DensityPair {
    pub rho_x: ScalarField,
    pub rho_y: TargetDensity,
    pub lipschitz_k: f64,
}

impl DensityPair {
    pub fn new(rho_x: ScalarField, rho_y: TargetDensity) -> Self {
        DensityPair { rho_x, rho_y, lipschitz_k: 0.0 }
    }

    /// `F(x_k, p) = rho_X(x_k) / rho_Y(p)` and its gradient in `p`.
    #[inline]
    pub fn ratio(&self, k: usize, p: Point, with_gradient: bool) -> (f64, Point) {
        let rx = self.rho_x.values()[k];
        if rx == 0.0 {
            return (0.0, [0.0, 0.0]);
        }
        let ry = self.rho_y.eval(p);
        let f = rx / ry;
        if !with_gradient || self.rho_y.is_constant() {
            return (f, [0.0, 0.0]);
        }
        let g = self.rho_y.gradient(p);
        let s = -f / ry;
        (f, [s * g[0], s * g[1]])
    }
}

const TARGET_MASS_RESOLUTION: usize = 512;

/// Rescale the source so that its trapezoidal mass equals the target mass.
pub fn normalize_masses(pair: DensityPair) -> Result<DensityPair> {
    let source = pair.rho_x.integral();
    if !(source > 0.0) {
        return Err(Error::DegenerateProblem("source density has zero mass".into()));
    }
    let target = pair.rho_y.mass(TARGET_MASS_RESOLUTION)?;
    if !(target > 0.0) {
        return Err(Error::DegenerateProblem("target density has zero mass".into()));
    }
    let s = target / source;
    let mut rho_x = pair.rho_x;
    for v in rho_x.values_mut() {
        *v *= s;
    }
    Ok(DensityPair { rho_x, ..pair })
}

/// Estimate the Lipschitz constant in `y` of `rho_X(x) / rho_Y(y)` by
/// one-sided slopes of step `probe_radius` on a probe lattice covering the
/// target bounding box.
pub fn estimate_lipschitz(pair: &DensityPair, probe_radius: f64) -> f64 {
    if pair.rho_y.is_constant() {
        return 0.0;
    }
    let max_x = pair.rho_x.values().iter().fold(0.0f64, |a, &b| a.max(b));
    let (lo, hi) = pair.rho_y.shape().bounding_box();
    const PROBES: usize = 65;
    let mut slope: f64 = 0.0;
    for a in 0..PROBES {
        for b in 0..PROBES {
            let y = [lo[0] + (hi[0] - lo[0]) * a as f64 / (PROBES - 1) as f64, lo[1] + (hi[1] - lo[1]) * b as f64 / (PROBES - 1) as f64];
            let inv = 1.0 / pair.rho_y.eval(y);
            for e in [[1.0, 0.0], [0.0, 1.0]] {
                let z = [y[0] + probe_radius * e[0], y[1] + probe_radius * e[1]];
                slope = slope.max((1.0 / pair.rho_y.eval(z) - inv).abs() / probe_radius);
            }
        }
    }
    max_x * slope
}
