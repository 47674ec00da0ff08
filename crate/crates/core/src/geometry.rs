//! Convex target sets described by boundary points.
//!
//! The support function `H*(n) = max_{y0} y0 . n` is tabulated once over
//! `N_Y` uniform directions. The signed distance is then approximated by
//! `max_j { y . n_j - H*(n_j) }`, and the boundary scheme picks its upwind
//! directions from the same table.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Point, PointClass};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TargetShape {
    points: Vec<Point>,
    /// Present when `points` form an ordered simple polygon.
    polygon: bool,
    directions: Vec<Point>,
    support: Vec<f64>,
}

/// `k`-th of `n` uniform directions at angle `2 pi k / n`, with the axis
/// directions snapped to exact zeros.
fn direction(k: usize, n: usize) -> Point {
    let theta = 2.0 * PI * k as f64 / n as f64;
    let snap = |v: f64| if v.abs() < 1e-12 { 0.0 } else { v };
    [snap(theta.cos()), snap(theta.sin())]
}

fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

fn centroid(points: &[Point]) -> Point {
    let m = points.len() as f64;
    let (sx, sy) = points.iter().fold((0.0, 0.0), |(a, b), p| (a + p[0], b + p[1]));
    [sx / m, sy / m]
}

/// True when the angles around the centroid are strictly monotone along the
/// list (cyclically), i.e. the points already trace the boundary.
fn is_angularly_ordered(points: &[Point]) -> bool {
    let c = centroid(points);
    let angles: Vec<f64> = points.iter().map(|p| (p[1] - c[1]).atan2(p[0] - c[0])).collect();
    let m = angles.len();
    let wrap = |d: f64| {
        let mut d = d % (2.0 * PI);
        if d <= -PI {
            d += 2.0 * PI
        } else if d > PI {
            d -= 2.0 * PI
        }
        d
    };
    let steps: Vec<f64> = (0..m).map(|k| wrap(angles[(k + 1) % m] - angles[k])).collect();
    let total: f64 = steps.iter().sum();
    let ccw = steps.iter().all(|&s| s > 0.0) && (total - 2.0 * PI).abs() < 1e-6;
    let cw = steps.iter().all(|&s| s < 0.0) && (total + 2.0 * PI).abs() < 1e-6;
    ccw || cw
}

fn segment_closest(a: Point, b: Point, y: Point) -> (f64, Point) {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let len2 = dot(ab, ab);
    let t = if len2 > 0.0 { (((y[0] - a[0]) * ab[0] + (y[1] - a[1]) * ab[1]) / len2).clamp(0.0, 1.0) } else { 0.0 };
    let c = [a[0] + t * ab[0], a[1] + t * ab[1]];
    let d2 = (y[0] - c[0]).powi(2) + (y[1] - c[1]).powi(2);
    (d2, c)
}

/// Build a target from boundary points and a number of directions.
///
/// The points may be an ordered polygon or a scattered cloud; polygon
/// operations are only available in the former case (see [`TargetShape::ordered`]).
pub fn build_target(points: &[Point], n_dirs: usize) -> Result<TargetShape> {
    if n_dirs < 4 || !n_dirs.is_multiple_of(4) {
        return Err(Error::Config(format!("number of directions must be a positive multiple of 4, got {n_dirs}")));
    }
    if points.len() < 3 || points.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
        return Err(Error::DegenerateTarget("need at least 3 finite boundary points".into()));
    }
    let p0 = points[0];
    let far = points
        .iter()
        .copied()
        .max_by(|a, b| {
            let da = (a[0] - p0[0]).powi(2) + (a[1] - p0[1]).powi(2);
            let db = (b[0] - p0[0]).powi(2) + (b[1] - p0[1]).powi(2);
            da.total_cmp(&db)
        })
        .unwrap();
    let scale2 = (far[0] - p0[0]).powi(2) + (far[1] - p0[1]).powi(2);
    let spread = points.iter().map(|&p| cross(p0, far, p).abs()).fold(0.0, f64::max);
    if scale2 == 0.0 || spread <= 1e-12 * scale2 {
        return Err(Error::DegenerateTarget("boundary points are collinear".into()));
    }
    let directions: Vec<Point> = (0..n_dirs).map(|k| direction(k, n_dirs)).collect();
    let support = directions.iter().map(|&n| points.iter().map(|&p| dot(p, n)).fold(f64::NEG_INFINITY, f64::max)).collect();
    Ok(TargetShape { points: points.to_vec(), polygon: is_angularly_ordered(points), directions, support })
}

impl TargetShape {
    /// Axis-aligned square `[lo, hi]^2`.
    pub fn square(lo: f64, hi: f64, n_dirs: usize) -> Result<Self> {
        build_target(&[[lo, lo], [hi, lo], [hi, hi], [lo, hi]], n_dirs)
    }

    /// Regular polygon with `samples` vertices inscribed in a disc.
    pub fn disc(center: Point, radius: f64, samples: usize, n_dirs: usize) -> Result<Self> {
        let pts: Vec<Point> = (0..samples)
            .map(|k| {
                let t = 2.0 * PI * k as f64 / samples as f64;
                [center[0] + radius * t.cos(), center[1] + radius * t.sin()]
            })
            .collect();
        build_target(&pts, n_dirs)
    }

    /// Image of the sampled unit circle under the matrix `m` (row-major).
    pub fn ellipse(m: [[f64; 2]; 2], samples: usize, n_dirs: usize) -> Result<Self> {
        let pts: Vec<Point> = (0..samples)
            .map(|k| {
                let t = 2.0 * PI * k as f64 / samples as f64;
                let (c, s) = (t.cos(), t.sin());
                [m[0][0] * c + m[0][1] * s, m[1][0] * c + m[1][1] * s]
            })
            .collect();
        build_target(&pts, n_dirs)
    }

    /// Sort scattered boundary points by angle around their centroid so that
    /// polygon operations become available. Valid for convex targets.
    pub fn ordered(mut self) -> Self {
        if !self.polygon {
            let c = centroid(&self.points);
            self.points.sort_by(|a, b| (a[1] - c[1]).atan2(a[0] - c[0]).total_cmp(&(b[1] - c[1]).atan2(b[0] - c[0])));
            self.points.dedup();
            self.polygon = true;
        }
        self
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn is_polygon(&self) -> bool {
        self.polygon
    }

    pub fn n_dirs(&self) -> usize {
        self.directions.len()
    }

    pub fn directions(&self) -> &[Point] {
        &self.directions
    }

    pub fn direction(&self, k: usize) -> Point {
        self.directions[k]
    }

    /// Tabulated support function `H*(n_k)`.
    pub fn support(&self, k: usize) -> f64 {
        self.support[k]
    }

    pub fn support_table(&self) -> &[f64] {
        &self.support
    }

    /// Support function evaluated directly over the boundary points.
    pub fn support_of(&self, n: Point) -> f64 {
        self.points.iter().map(|&p| dot(p, n)).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn bounding_box(&self) -> (Point, Point) {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for p in &self.points {
            for d in 0..2 {
                lo[d] = lo[d].min(p[d]);
                hi[d] = hi[d].max(p[d]);
            }
        }
        (lo, hi)
    }

    pub fn diameter(&self) -> f64 {
        let (lo, hi) = self.bounding_box();
        ((hi[0] - lo[0]).powi(2) + (hi[1] - lo[1]).powi(2)).sqrt()
    }

    /// Signed distance approximated through the support table:
    /// `max_k { y . n_k - H*(n_k) }`.
    pub fn signed_distance_support(&self, y: Point) -> f64 {
        self.directions.iter().zip(&self.support).map(|(&n, &h)| dot(y, n) - h).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Containment test by ray casting; boundary points count as inside.
    pub fn contains(&self, y: Point) -> Result<bool> {
        if !self.polygon {
            return Err(Error::RequiresPolygon);
        }
        let m = self.points.len();
        let mut inside = false;
        for k in 0..m {
            let a = self.points[k];
            let b = self.points[(k + 1) % m];
            if (a[1] > y[1]) != (b[1] > y[1]) {
                let x = a[0] + (y[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
                if y[0] < x {
                    inside = !inside;
                }
            }
        }
        if inside {
            return Ok(true);
        }
        let (d, _) = self.closest_boundary_point(y);
        Ok(d <= 1e-14 * (1.0 + self.diameter()))
    }

    fn closest_boundary_point(&self, y: Point) -> (f64, Point) {
        let m = self.points.len();
        let mut best = (f64::INFINITY, self.points[0]);
        for k in 0..m {
            let (d2, c) = segment_closest(self.points[k], self.points[(k + 1) % m], y);
            if d2 < best.0 {
                best = (d2, c);
            }
        }
        (best.0.sqrt(), best.1)
    }

    /// Exact signed distance to the polygon boundary (negative inside) and
    /// the closest boundary point.
    pub fn exact_polygon_distance(&self, y: Point) -> Result<(f64, Point)> {
        if !self.polygon {
            return Err(Error::RequiresPolygon);
        }
        let (d, c) = self.closest_boundary_point(y);
        if d <= 1e-14 * (1.0 + self.diameter()) {
            return Ok((0.0, y));
        }
        let sign = if self.contains(y)? { -1.0 } else { 1.0 };
        Ok((sign * d, c))
    }

    /// Gradient of the exact signed distance, away from the boundary.
    pub fn distance_gradient(&self, y: Point) -> Result<Point> {
        let (h, c) = self.exact_polygon_distance(y)?;
        if h == 0.0 {
            return Ok([0.0, 0.0]);
        }
        let d = [y[0] - c[0], y[1] - c[1]];
        let norm = (d[0] * d[0] + d[1] * d[1]).sqrt();
        let s = h.signum() / norm;
        Ok([s * d[0], s * d[1]])
    }

    /// Closest point of the closed target set: identity inside.
    pub fn project_into(&self, y: Point) -> Result<Point> {
        let (h, c) = self.exact_polygon_distance(y)?;
        Ok(if h <= 0.0 { y } else { c })
    }

    /// Polygon area (shoelace).
    pub fn area(&self) -> Result<f64> {
        if !self.polygon {
            return Err(Error::RequiresPolygon);
        }
        let m = self.points.len();
        let s: f64 = (0..m)
            .map(|k| {
                let a = self.points[k];
                let b = self.points[(k + 1) % m];
                a[0] * b[1] - a[1] * b[0]
            })
            .sum();
        Ok(0.5 * s.abs())
    }

    /// Direction indices admissible at a boundary point of the given class.
    pub fn admissible_directions(&self, class: PointClass) -> Result<Vec<usize>> {
        if class.is_interior() {
            return Err(Error::NotBoundaryPoint);
        }
        Ok((0..self.directions.len()).filter(|&k| class.admits(self.directions[k])).collect())
    }
}
