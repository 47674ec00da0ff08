//! Uniform square computational grid.
//!
//! Points are stored with flat index `k = j * n + i`, where `i` runs along the
//! first coordinate and `j` along the second. Row `i = 0` is the left edge,
//! `j = 0` the bottom edge.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point = [f64; 2];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    Left,
    Right,
    Bottom,
    Top,
}

impl Side {
    /// Unit outward normal of the square along this side.
    pub fn outward_normal(self) -> Point {
        match self {
            Side::Left => [-1.0, 0.0],
            Side::Right => [1.0, 0.0],
            Side::Bottom => [0.0, -1.0],
            Side::Top => [0.0, 1.0],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Corner {
    BottomLeft,
    BottomRight,
    TopLeft,
    TopRight,
}

impl Corner {
    /// The two edges meeting at this corner, horizontal-normal side first.
    pub fn sides(self) -> (Side, Side) {
        match self {
            Corner::BottomLeft => (Side::Left, Side::Bottom),
            Corner::BottomRight => (Side::Right, Side::Bottom),
            Corner::TopLeft => (Side::Left, Side::Top),
            Corner::TopRight => (Side::Right, Side::Top),
        }
    }

    /// Required signs `(s1, s2)` of an admissible direction: `s1 * n1 > 0`
    /// and `s2 * n2 > 0`. This is the intersection of the half-spaces of the
    /// two adjacent edges.
    pub fn quadrant(self) -> (f64, f64) {
        let (a, b) = self.sides();
        (a.outward_normal()[0], b.outward_normal()[1])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PointClass {
    Interior,
    Edge(Side),
    Corner(Corner),
}

impl PointClass {
    pub fn is_interior(self) -> bool {
        matches!(self, PointClass::Interior)
    }

    pub fn is_boundary(self) -> bool {
        !self.is_interior()
    }

    /// Outward normal for edges; the normalized diagonal for corners.
    pub fn outward_normal(self) -> Option<Point> {
        match self {
            PointClass::Interior => None,
            PointClass::Edge(side) => Some(side.outward_normal()),
            PointClass::Corner(c) => {
                let (s1, s2) = c.quadrant();
                let r = std::f64::consts::FRAC_1_SQRT_2;
                Some([s1 * r, s2 * r])
            }
        }
    }

    /// Whether a unit direction satisfies the strict obliqueness constraint
    /// at a point of this class.
    pub fn admits(self, n: Point) -> bool {
        match self {
            PointClass::Interior => false,
            PointClass::Edge(side) => {
                let nx = side.outward_normal();
                n[0] * nx[0] + n[1] * nx[1] > 0.0
            }
            PointClass::Corner(c) => {
                let (s1, s2) = c.quadrant();
                s1 * n[0] > 0.0 && s2 * n[1] > 0.0
            }
        }
    }
}

/// Uniform `n x n` grid over `[x_min, x_max]^2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid2D {
    n: usize,
    x_min: f64,
    x_max: f64,
    dx: f64,
    x0_index: usize,
}

impl Grid2D {
    pub fn new(n: usize, bounds: (f64, f64)) -> Result<Self> {
        let (x_min, x_max) = bounds;
        if n < 3 {
            return Err(Error::InvalidGrid(format!("need at least 3 points per side, got {n}")));
        }
        if !(x_min.is_finite() && x_max.is_finite()) || x_max <= x_min {
            return Err(Error::InvalidGrid(format!("empty bounds [{x_min}, {x_max}]")));
        }
        let dx = (x_max - x_min) / (n - 1) as f64;
        let mut grid = Grid2D { n, x_min, x_max, dx, x0_index: 0 };
        grid.x0_index = grid.central_interior_index();
        Ok(grid)
    }

    /// Interior point closest to the center of the square, lowest index on ties.
    fn central_interior_index(&self) -> usize {
        let c = 0.5 * (self.x_min + self.x_max);
        let mut best = (f64::INFINITY, 0);
        for j in 1..self.n - 1 {
            for i in 1..self.n - 1 {
                let [x1, x2] = self.point(i, j);
                let d = (x1 - c).powi(2) + (x2 - c).powi(2);
                if d < best.0 - 1e-12 * self.dx * self.dx {
                    best = (d, self.flat_index(i, j));
                }
            }
        }
        best.1
    }

    /// Replace the reference point used to pin the additive constant.
    pub fn with_reference_point(mut self, i: usize, j: usize) -> Result<Self> {
        self.check(i, j)?;
        if !self.class_of(i, j).is_interior() {
            return Err(Error::InvalidGrid("reference point must be interior".into()));
        }
        self.x0_index = self.flat_index(i, j);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.x_min, self.x_max)
    }

    pub fn x0_index(&self) -> usize {
        self.x0_index
    }

    #[inline]
    pub fn flat_index(&self, i: usize, j: usize) -> usize {
        j * self.n + i
    }

    #[inline]
    pub fn ij(&self, k: usize) -> (usize, usize) {
        (k % self.n, k / self.n)
    }

    #[inline]
    pub fn point(&self, i: usize, j: usize) -> Point {
        [self.x_min + i as f64 * self.dx, self.x_min + j as f64 * self.dx]
    }

    #[inline]
    pub fn point_at(&self, k: usize) -> Point {
        let (i, j) = self.ij(k);
        self.point(i, j)
    }

    fn check(&self, i: usize, j: usize) -> Result<()> {
        if i >= self.n || j >= self.n {
            return Err(Error::IndexOutOfRange { i, j, n: self.n });
        }
        Ok(())
    }

    pub fn classify(&self, i: usize, j: usize) -> Result<PointClass> {
        self.check(i, j)?;
        Ok(self.class_of(i, j))
    }

    /// Unchecked classification; callers guarantee `i, j < n`.
    #[inline]
    pub fn class_of(&self, i: usize, j: usize) -> PointClass {
        let last = self.n - 1;
        let h = if i == 0 {
            Some(Side::Left)
        } else if i == last {
            Some(Side::Right)
        } else {
            None
        };
        let v = if j == 0 {
            Some(Side::Bottom)
        } else if j == last {
            Some(Side::Top)
        } else {
            None
        };
        match (h, v) {
            (None, None) => PointClass::Interior,
            (Some(s), None) | (None, Some(s)) => PointClass::Edge(s),
            (Some(Side::Left), Some(Side::Bottom)) => PointClass::Corner(Corner::BottomLeft),
            (Some(Side::Right), Some(Side::Bottom)) => PointClass::Corner(Corner::BottomRight),
            (Some(Side::Left), Some(Side::Top)) => PointClass::Corner(Corner::TopLeft),
            (Some(_), Some(_)) => PointClass::Corner(Corner::TopRight),
        }
    }

    pub fn class_at(&self, k: usize) -> PointClass {
        let (i, j) = self.ij(k);
        self.class_of(i, j)
    }

    /// Trapezoidal quadrature weight of point `(i, j)` (times `dx^2`).
    pub fn quadrature_weight(&self, i: usize, j: usize) -> f64 {
        let w = |t: usize| if t == 0 || t == self.n - 1 { 0.5 } else { 1.0 };
        w(i) * w(j) * self.dx * self.dx
    }

    /// Grid indices of the cell containing `p`, clamped into the grid, with
    /// local coordinates in `[0, 1]^2`.
    pub fn locate(&self, p: Point) -> (usize, usize, f64, f64) {
        let last = (self.n - 2) as f64;
        let s = ((p[0] - self.x_min) / self.dx).clamp(0.0, self.n as f64 - 1.0);
        let t = ((p[1] - self.x_min) / self.dx).clamp(0.0, self.n as f64 - 1.0);
        let i = s.floor().min(last);
        let j = t.floor().min(last);
        (i as usize, j as usize, s - i, t - j)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_point_grid() {
        let g = Grid2D::new(3, (-1.0, 1.0)).unwrap();
        assert_eq!(g.dx(), 1.0);
        assert_eq!(g.len(), 9);
        assert_eq!(g.point(1, 1), [0.0, 0.0]);
        assert_eq!(g.classify(1, 1).unwrap(), PointClass::Interior);
        assert_eq!(g.classify(0, 0).unwrap(), PointClass::Corner(Corner::BottomLeft));
        assert_eq!(g.x0_index(), 4);
    }

    #[test]
    fn left_edge_normal() {
        let g = Grid2D::new(5, (-0.5, 0.5)).unwrap();
        assert_eq!(g.dx(), 0.25);
        assert_eq!(g.point(0, 2), [-0.5, 0.0]);
        let c = g.classify(0, 2).unwrap();
        assert_eq!(c, PointClass::Edge(Side::Left));
        assert_eq!(c.outward_normal(), Some([-1.0, 0.0]));
        assert_eq!(g.classify(2, 2).unwrap(), PointClass::Interior);
    }

    #[test]
    fn bottom_right_quadrant() {
        let g = Grid2D::new(5, (-0.5, 0.5)).unwrap();
        let c = g.classify(4, 0).unwrap();
        assert_eq!(c, PointClass::Corner(Corner::BottomRight));
        assert!(c.admits([0.6, -0.8]));
        assert!(!c.admits([0.6, 0.8]));
        assert!(!c.admits([-0.6, -0.8]));
        assert!(!c.admits([1.0, 0.0]));
    }

    #[test]
    fn rejects_small_grid_and_bad_index() {
        assert!(matches!(Grid2D::new(2, (0.0, 1.0)), Err(Error::InvalidGrid(_))));
        assert!(matches!(Grid2D::new(4, (1.0, 1.0)), Err(Error::InvalidGrid(_))));
        let g = Grid2D::new(4, (0.0, 1.0)).unwrap();
        assert!(matches!(g.classify(4, 0), Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn class_counts() {
        for n in 3..=10 {
            let g = Grid2D::new(n, (0.0, 1.0)).unwrap();
            let (mut int, mut edge, mut corner) = (0, 0, 0);
            for k in 0..g.len() {
                match g.class_at(k) {
                    PointClass::Interior => int += 1,
                    PointClass::Edge(_) => edge += 1,
                    PointClass::Corner(_) => corner += 1,
                }
            }
            assert_eq!(int, (n - 2) * (n - 2));
            assert_eq!(edge, 4 * (n - 2));
            assert_eq!(corner, 4);
        }
    }

    #[test]
    fn flat_index_round_trip() {
        let g = Grid2D::new(7, (0.0, 1.0)).unwrap();
        for k in 0..g.len() {
            let (i, j) = g.ij(k);
            assert_eq!(g.flat_index(i, j), k);
        }
    }

    #[test]
    fn even_grid_reference_point_is_interior_and_central() {
        let g = Grid2D::new(6, (-1.0, 1.0)).unwrap();
        let (i, j) = g.ij(g.x0_index());
        assert!(g.class_of(i, j).is_interior());
        let [a, b] = g.point(i, j);
        assert!((a * a + b * b).sqrt() <= g.dx());
    }
}
