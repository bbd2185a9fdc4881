//! Containers and the uniform cell grids laid over them.
//!
//! A [`Domain`] is an open box or ball in dimension 1, 2 or 3. Fields live on
//! the cell-centered grid of its bounding box; cells whose centers fall
//! outside the container carry the exterior datum. The *extended* grid adds
//! `margin` worth of cells on every side, on which the exterior datum is
//! materialized for the near part of nonlocal sums.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_DIM: usize = 3;

pub type Point = [f64; MAX_DIM];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Shape {
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
}

impl Shape {
    pub fn dim(&self) -> usize {
        match self {
            Shape::Box { lo, .. } => lo.len(),
            Shape::Ball { center, .. } => center.len(),
        }
    }

    fn bounds(&self) -> (Point, Point) {
        let mut lo = [0.0; MAX_DIM];
        let mut hi = [0.0; MAX_DIM];
        match self {
            Shape::Box { lo: a, hi: b } => {
                for k in 0..a.len() {
                    lo[k] = a[k];
                    hi[k] = b[k];
                }
            }
            Shape::Ball { center, radius } => {
                for k in 0..center.len() {
                    lo[k] = center[k] - radius;
                    hi[k] = center[k] + radius;
                }
            }
        }
        (lo, hi)
    }
}

/// Uniform cell-centered grid. Unused axes have one cell of unit width.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    pub dim: usize,
    pub lo: Point,
    pub h: Point,
    pub n: [usize; MAX_DIM],
}

impl Grid {
    pub fn len(&self) -> usize {
        self.n.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_volume(&self) -> f64 {
        self.h[..self.dim].iter().product()
    }

    /// Row-major: the last active axis varies fastest.
    pub fn unravel(&self, mut idx: usize) -> [usize; MAX_DIM] {
        let mut out = [0; MAX_DIM];
        for k in (0..MAX_DIM).rev() {
            out[k] = idx % self.n[k];
            idx /= self.n[k];
        }
        out
    }

    pub fn ravel(&self, ijk: [usize; MAX_DIM]) -> usize {
        let mut idx = 0;
        for k in 0..MAX_DIM {
            idx = idx * self.n[k] + ijk[k];
        }
        idx
    }

    pub fn center_of(&self, ijk: [usize; MAX_DIM]) -> Point {
        let mut p = [0.0; MAX_DIM];
        for k in 0..self.dim {
            p[k] = self.lo[k] + (ijk[k] as f64 + 0.5) * self.h[k];
        }
        p
    }

    pub fn center(&self, idx: usize) -> Point {
        self.center_of(self.unravel(idx))
    }

    pub fn hi(&self) -> Point {
        let mut p = self.lo;
        for k in 0..self.dim {
            p[k] += self.n[k] as f64 * self.h[k];
        }
        p
    }

    /// Index of the cell containing `p`, if any.
    pub fn locate(&self, p: &Point) -> Option<usize> {
        let mut ijk = [0; MAX_DIM];
        for k in 0..self.dim {
            let t = ((p[k] - self.lo[k]) / self.h[k]).floor();
            if t < 0.0 || t >= self.n[k] as f64 {
                return None;
            }
            ijk[k] = t as usize;
        }
        Some(self.ravel(ijk))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub shape: Shape,
    pub cells: Vec<usize>,
    /// Length by which the exterior datum is materialized around the bounding box.
    pub margin: f64,
}

impl Domain {
    pub fn new(shape: Shape, cells: Vec<usize>, margin: f64) -> Result<Self> {
        let d = Domain {
            shape,
            cells,
            margin,
        };
        d.validate()?;
        Ok(d)
    }

    /// Box with the default margin of four diameters.
    pub fn boxed(lo: &[f64], hi: &[f64], cells: &[usize]) -> Result<Self> {
        let shape = Shape::Box {
            lo: lo.to_vec(),
            hi: hi.to_vec(),
        };
        let diam = lo
            .iter()
            .zip(hi)
            .map(|(a, b)| (b - a) * (b - a))
            .sum::<f64>()
            .sqrt();
        Domain::new(shape, cells.to_vec(), 4.0 * diam)
    }

    pub fn interval(lo: f64, hi: f64, cells: usize) -> Result<Self> {
        Domain::boxed(&[lo], &[hi], &[cells])
    }

    pub fn ball(center: &[f64], radius: f64, cells: &[usize], margin: f64) -> Result<Self> {
        Domain::new(
            Shape::Ball {
                center: center.to_vec(),
                radius,
            },
            cells.to_vec(),
            margin,
        )
    }

    pub fn with_margin(mut self, margin: f64) -> Result<Self> {
        self.margin = margin;
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        let n = self.shape.dim();
        if !(1..=MAX_DIM).contains(&n) {
            return Err(Error::InvalidDomain(format!("dimension {n} not in 1..=3")));
        }
        if self.cells.len() != n {
            return Err(Error::InvalidDomain(format!(
                "{} resolutions for dimension {n}",
                self.cells.len()
            )));
        }
        if self.cells.contains(&0) {
            return Err(Error::InvalidDomain("zero cells on an axis".into()));
        }
        match &self.shape {
            Shape::Box { lo, hi } => {
                if hi.len() != n || lo.iter().zip(hi).any(|(a, b)| !(b > a) || !a.is_finite()) {
                    return Err(Error::InvalidDomain("box extents must be positive".into()));
                }
            }
            Shape::Ball { radius, .. } => {
                if !(*radius > 0.0) || !radius.is_finite() {
                    return Err(Error::InvalidDomain("ball radius must be positive".into()));
                }
            }
        }
        if !(self.margin >= 0.0) || !self.margin.is_finite() {
            return Err(Error::InvalidDomain("margin must be nonnegative".into()));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.shape.dim()
    }

    /// Open container membership.
    pub fn contains(&self, p: &Point) -> bool {
        let n = self.dim();
        match &self.shape {
            Shape::Box { lo, hi } => (0..n).all(|k| p[k] > lo[k] && p[k] < hi[k]),
            Shape::Ball { center, radius } => {
                (0..n).map(|k| (p[k] - center[k]).powi(2)).sum::<f64>() < radius * radius
            }
        }
    }

    pub fn bounds(&self) -> (Point, Point) {
        self.shape.bounds()
    }

    pub fn diameter(&self) -> f64 {
        let (lo, hi) = self.bounds();
        (0..self.dim())
            .map(|k| (hi[k] - lo[k]).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Lebesgue measure of the container (analytic).
    pub fn measure(&self) -> f64 {
        let n = self.dim();
        match &self.shape {
            Shape::Box { lo, hi } => (0..n).map(|k| hi[k] - lo[k]).product(),
            Shape::Ball { radius, .. } => unit_ball_volume(n) * radius.powi(n as i32),
        }
    }

    /// Grid over the bounding box.
    pub fn grid(&self) -> Grid {
        let (lo, hi) = self.bounds();
        let mut g = Grid {
            dim: self.dim(),
            lo: [0.0; MAX_DIM],
            h: [1.0; MAX_DIM],
            n: [1; MAX_DIM],
        };
        for k in 0..self.dim() {
            g.lo[k] = lo[k];
            g.n[k] = self.cells[k];
            g.h[k] = (hi[k] - lo[k]) / self.cells[k] as f64;
        }
        g
    }

    /// Margin cells added on each side of every active axis.
    pub fn margin_cells(&self) -> [usize; MAX_DIM] {
        let g = self.grid();
        let mut m = [0; MAX_DIM];
        for k in 0..self.dim() {
            m[k] = (self.margin / g.h[k] - 1e-9).ceil().max(0.0) as usize;
        }
        m
    }

    /// Bounding grid padded by the margin cells.
    pub fn extended_grid(&self) -> Grid {
        let mut g = self.grid();
        let m = self.margin_cells();
        for k in 0..self.dim() {
            g.lo[k] -= m[k] as f64 * g.h[k];
            g.n[k] += 2 * m[k];
        }
        g
    }

    /// Cells of the bounding grid whose centers lie in the container.
    pub fn mask(&self) -> Vec<bool> {
        let g = self.grid();
        (0..g.len()).map(|i| self.contains(&g.center(i))).collect()
    }

    pub fn cell_volume(&self) -> f64 {
        self.grid().cell_volume()
    }
}

/// Measure of the unit ball in ℝⁿ (ω₀ = 1 for the zero-dimensional ball).
pub fn unit_ball_volume(n: usize) -> f64 {
    use std::f64::consts::PI;
    match n {
        0 => 1.0,
        1 => 2.0,
        2 => PI,
        3 => 4.0 * PI / 3.0,
        _ => {
            let nf = n as f64;
            PI.powf(nf / 2.0) / crate::quadrature::gamma(nf / 2.0 + 1.0)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_domains() {
        assert!(Domain::interval(1.0, 1.0, 4).is_err());
        assert!(Domain::interval(0.0, 1.0, 0).is_err());
        assert!(Domain::boxed(&[0.0; 4], &[1.0; 4], &[2; 4]).is_err());
        assert!(Domain::interval(0.0, 1.0, 4).unwrap().with_margin(-1.0).is_err());
        assert!(Domain::ball(&[0.0, 0.0], 0.0, &[4, 4], 0.0).is_err());
    }

    #[test]
    fn ravel_roundtrip_and_centers() {
        let d = Domain::boxed(&[-1.0, 0.0], &[1.0, 3.0], &[4, 3]).unwrap();
        let g = d.grid();
        assert_eq!(g.len(), 12);
        for i in 0..g.len() {
            assert_eq!(g.ravel(g.unravel(i)), i);
        }
        assert_eq!(g.center(0), [-0.75, 0.5, 0.0]);
        assert_eq!(g.center(1), [-0.75, 1.5, 0.0]);
        assert!((g.cell_volume() - 0.5).abs() < 1e-15);
        assert_eq!(g.locate(&[0.1, 2.9, 0.0]), Some(g.ravel([2, 2, 0])));
    }

    #[test]
    fn extended_grid_pads_margin() {
        let d = Domain::interval(0.0, 1.0, 10).unwrap().with_margin(0.25).unwrap();
        assert_eq!(d.margin_cells()[0], 3);
        let e = d.extended_grid();
        assert_eq!(e.n[0], 16);
        assert!((e.lo[0] + 0.3).abs() < 1e-12);
    }

    #[test]
    fn ball_mask_counts_area() {
        let d = Domain::ball(&[0.0, 0.0], 1.0, &[200, 200], 0.0).unwrap();
        let area = d.mask().iter().filter(|m| **m).count() as f64 * d.cell_volume();
        assert!((area - std::f64::consts::PI).abs() < 0.02);
    }
}
