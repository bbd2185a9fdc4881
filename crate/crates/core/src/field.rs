//! Cell-centered scalar fields with a fixed exterior datum.

use std::io::{BufRead, Read, Write};

use serde::{Deserialize, Serialize};

use crate::domain::{Domain, Grid, Point, Shape};
use crate::error::{Error, Result};
use crate::set::GeometricSet;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ValueRange {
    /// `[-1, 1]`
    Symmetric,
    /// `[0, 1]`
    Unit,
    /// No bounds; used for derived quantities such as gradients.
    Real,
}

impl ValueRange {
    pub fn bounds(self) -> (f64, f64) {
        match self {
            ValueRange::Symmetric => (-1.0, 1.0),
            ValueRange::Unit => (0.0, 1.0),
            ValueRange::Real => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    pub fn contains(self, v: f64) -> bool {
        let (a, b) = self.bounds();
        v >= a && v <= b && !v.is_nan()
    }

    fn tag(self) -> &'static str {
        match self {
            ValueRange::Symmetric => "[-1,1]",
            ValueRange::Unit => "[0,1]",
            ValueRange::Real => "R",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "[-1,1]" => Some(ValueRange::Symmetric),
            "[0,1]" => Some(ValueRange::Unit),
            "R" => Some(ValueRange::Real),
            _ => None,
        }
    }
}

/// Values prescribed outside the container.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ExteriorDatum {
    Constant(f64),
    /// `inside` on the set, `outside` elsewhere.
    Set {
        set: GeometricSet,
        inside: f64,
        outside: f64,
    },
}

impl ExteriorDatum {
    /// `χ_E − χ_{𝒞E}`
    pub fn indicator(set: GeometricSet) -> Self {
        ExteriorDatum::Set {
            set,
            inside: 1.0,
            outside: -1.0,
        }
    }

    pub fn value_at(&self, p: &Point) -> f64 {
        match self {
            ExteriorDatum::Constant(c) => *c,
            ExteriorDatum::Set {
                set,
                inside,
                outside,
            } => {
                if set.contains(p) {
                    *inside
                } else {
                    *outside
                }
            }
        }
    }

    /// The (at most two) values the datum takes.
    pub fn phases(&self) -> (f64, f64) {
        match self {
            ExteriorDatum::Constant(c) => (*c, *c),
            ExteriorDatum::Set {
                inside, outside, ..
            } => (*inside, *outside),
        }
    }

    pub fn set(&self) -> Option<&GeometricSet> {
        match self {
            ExteriorDatum::Constant(_) => None,
            ExteriorDatum::Set { set, .. } => Some(set),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    domain: Domain,
    grid: Grid,
    mask: Vec<bool>,
    values: Vec<f64>,
    exterior: Option<ExteriorDatum>,
    range: ValueRange,
}

impl ScalarField {
    /// Builds a field from one value per bounding-grid cell. Cells outside
    /// the container are overwritten by the exterior datum when one is given.
    pub fn new(
        domain: Domain,
        mut values: Vec<f64>,
        exterior: Option<ExteriorDatum>,
        range: ValueRange,
    ) -> Result<Self> {
        let grid = domain.grid();
        if values.len() != grid.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} values for {} cells",
                values.len(),
                grid.len()
            )));
        }
        let mask = domain.mask();
        if let Some(ext) = &exterior {
            for (i, v) in values.iter_mut().enumerate() {
                if !mask[i] {
                    *v = ext.value_at(&grid.center(i));
                }
            }
        }
        for (i, &v) in values.iter().enumerate() {
            if !range.contains(v) {
                return Err(Error::ValueOutOfRange {
                    cell: i,
                    value: v,
                    range: range.tag().into(),
                });
            }
        }
        Ok(ScalarField {
            domain,
            grid,
            mask,
            values,
            exterior,
            range,
        })
    }

    pub fn constant(domain: Domain, value: f64, exterior: Option<ExteriorDatum>, range: ValueRange) -> Result<Self> {
        let n = domain.grid().len();
        ScalarField::new(domain, vec![value; n], exterior, range)
    }

    /// Samples `f` at cell centers.
    pub fn from_fn(
        domain: Domain,
        exterior: Option<ExteriorDatum>,
        range: ValueRange,
        f: impl Fn(&Point) -> f64,
    ) -> Result<Self> {
        let g = domain.grid();
        let values = (0..g.len()).map(|i| f(&g.center(i))).collect();
        ScalarField::new(domain, values, exterior, range)
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn exterior(&self) -> Option<&ExteriorDatum> {
        self.exterior.as_ref()
    }

    pub fn range(&self) -> ValueRange {
        self.range
    }

    pub fn dim(&self) -> usize {
        self.grid.dim
    }

    /// Indices of cells inside the container.
    pub fn interior_cells(&self) -> Vec<usize> {
        (0..self.values.len()).filter(|&i| self.mask[i]).collect()
    }

    /// Replaces the values of interior cells; exterior cells are untouched.
    pub fn with_interior(&self, interior: &[f64]) -> Result<Self> {
        let idx = self.interior_cells();
        if idx.len() != interior.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} interior values for {} interior cells",
                interior.len(),
                idx.len()
            )));
        }
        let mut out = self.clone();
        for (&i, &v) in idx.iter().zip(interior) {
            if !self.range.contains(v) {
                return Err(Error::ValueOutOfRange {
                    cell: i,
                    value: v,
                    range: self.range.tag().into(),
                });
            }
            out.values[i] = v;
        }
        Ok(out)
    }

    pub fn interior_values(&self) -> Vec<f64> {
        self.interior_cells().iter().map(|&i| self.values[i]).collect()
    }

    pub fn with_exterior(mut self, exterior: Option<ExteriorDatum>) -> Result<Self> {
        self.exterior = exterior;
        ScalarField::new(self.domain, self.values, self.exterior, self.range)
    }

    /// Writes the binary field file: four text header lines, then the
    /// values as little-endian f64 in row-major order.
    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        let g = &self.grid;
        let hi = g.hi();
        let ext: Vec<String> = (0..g.dim)
            .flat_map(|k| [g.lo[k].to_string(), hi[k].to_string()])
            .collect();
        let cells: Vec<String> = (0..g.dim).map(|k| g.n[k].to_string()).collect();
        writeln!(w, "dim {}", g.dim)?;
        writeln!(w, "extents {}", ext.join(" "))?;
        writeln!(w, "cells {}", cells.join(" "))?;
        writeln!(w, "range {}", self.range.tag())?;
        let mut buf = Vec::with_capacity(8 * self.values.len());
        for v in &self.values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    /// Reads a field file. The container is the box given by `extents`; no
    /// exterior datum is attached.
    pub fn read_from(r: impl Read) -> Result<Self> {
        let mut r = std::io::BufReader::new(r);
        let mut header = |key: &str| -> Result<Vec<String>> {
            let mut line = String::new();
            r.read_line(&mut line)?;
            let mut it = line.split_whitespace();
            match it.next() {
                Some(k) if k == key => Ok(it.map(str::to_owned).collect()),
                other => Err(Error::Format(format!("expected `{key}`, found {other:?}"))),
            }
        };
        let num = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|e| Error::Format(format!("bad number `{s}`: {e}")))
        };
        let dim: usize = header("dim")?
            .first()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Format("bad dim".into()))?;
        let ext = header("extents")?;
        let cells = header("cells")?;
        let range = header("range")?;
        if ext.len() != 2 * dim || cells.len() != dim {
            return Err(Error::Format("header arity does not match dim".into()));
        }
        let mut lo = Vec::new();
        let mut hi = Vec::new();
        for k in 0..dim {
            lo.push(num(&ext[2 * k])?);
            hi.push(num(&ext[2 * k + 1])?);
        }
        let cells: Vec<usize> = cells
            .iter()
            .map(|s| s.parse().map_err(|_| Error::Format(format!("bad cell count `{s}`"))))
            .collect::<Result<_>>()?;
        let range = range
            .first()
            .and_then(|s| ValueRange::parse(s))
            .ok_or_else(|| Error::Format("bad range".into()))?;
        let domain = Domain::new(Shape::Box { lo, hi }, cells, 0.0)?;
        let n = domain.grid().len();
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        if bytes.len() != 8 * n {
            return Err(Error::Format(format!(
                "expected {} payload bytes, found {}",
                8 * n,
                bytes.len()
            )));
        }
        let values = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        ScalarField::new(domain, values, None, range)
    }
}

/// `+1` on cells whose center lies in `set`, `−1` elsewhere; the exterior
/// datum is the same indicator.
pub fn voxelize(set: &GeometricSet, domain: &Domain) -> ScalarField {
    ScalarField::from_fn(
        domain.clone(),
        Some(ExteriorDatum::indicator(set.clone())),
        ValueRange::Symmetric,
        |p| if set.contains(p) { 1.0 } else { -1.0 },
    )
    .expect("indicator values are in range")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn voxelize_empty_is_minus_one() {
        let d = Domain::boxed(&[-1.0, -1.0], &[1.0, 1.0], &[8, 8]).unwrap();
        let f = voxelize(&GeometricSet::Empty, &d);
        assert!(f.values().iter().all(|&v| v == -1.0));
    }

    #[test]
    fn voxelize_half_line_splits_evenly() {
        let d = Domain::interval(-1.0, 1.0, 64).unwrap();
        let f = voxelize(&GeometricSet::half_line(0.0), &d);
        assert_eq!(f.values().iter().filter(|&&v| v == 1.0).count(), 32);
    }

    #[test]
    fn voxelized_disk_area_converges_to_pi() {
        let set = GeometricSet::ball(&[0.0, 0.0], 1.0);
        let mut errs = Vec::new();
        for n in [32, 64, 128] {
            let d = Domain::boxed(&[-2.0, -2.0], &[2.0, 2.0], &[n, n]).unwrap();
            let f = voxelize(&set, &d);
            let area = f.values().iter().filter(|&&v| v > 0.0).count() as f64 * d.cell_volume();
            let h = 4.0 / n as f64;
            let err = (area - std::f64::consts::PI).abs();
            assert!(err < 4.0 * h, "n={n} err={err}");
            errs.push(err);
        }
        assert!(errs[2] < errs[0]);
    }

    #[test]
    fn exterior_cells_follow_datum_for_ball_domain() {
        let d = Domain::ball(&[0.0, 0.0], 1.0, &[10, 10], 0.0).unwrap();
        let f = ScalarField::constant(d, 0.0, Some(ExteriorDatum::Constant(1.0)), ValueRange::Symmetric)
            .unwrap();
        assert_eq!(f.values()[0], 1.0);
        let g = f.grid().clone();
        let center = g.ravel([5, 5, 0]);
        assert_eq!(f.values()[center], 0.0);
        let interior = vec![0.5; f.interior_cells().len()];
        let f2 = f.with_interior(&interior).unwrap();
        assert_eq!(f2.values()[0], 1.0);
        assert!(f.with_interior(&vec![2.0; interior.len()]).is_err());
    }

    #[test]
    fn out_of_range_rejected() {
        let d = Domain::interval(0.0, 1.0, 4).unwrap();
        assert!(ScalarField::constant(d, 0.5, None, ValueRange::Symmetric).is_ok());
        let d = Domain::interval(0.0, 1.0, 4).unwrap();
        assert!(ScalarField::constant(d, -0.5, None, ValueRange::Unit).is_err());
    }

    #[test]
    fn header_layout() {
        let d = Domain::boxed(&[-1.0, 0.0], &[1.0, 0.5], &[2, 3]).unwrap();
        let f = ScalarField::constant(d, 0.25, None, ValueRange::Symmetric).unwrap();
        let mut buf = Vec::new();
        f.write_to(&mut buf).unwrap();
        let text = "dim 2\nextents -1 1 0 0.5\ncells 2 3\nrange [-1,1]\n";
        assert_eq!(&buf[..text.len()], text.as_bytes());
        assert_eq!(buf.len(), text.len() + 6 * 8);
        assert_eq!(&buf[text.len()..text.len() + 8], &0.25f64.to_le_bytes());
    }

    proptest! {
        #[test]
        fn file_roundtrip_is_lossless(
            vals in proptest::collection::vec(-1.0f64..=1.0, 12),
            lo in -10.0f64..0.0,
            len in 0.001f64..10.0,
        ) {
            let d = Domain::boxed(&[lo, 0.0], &[lo + len, 1.0 / 3.0], &[3, 4]).unwrap();
            let f = ScalarField::new(d, vals, None, ValueRange::Symmetric).unwrap();
            let mut buf = Vec::new();
            f.write_to(&mut buf).unwrap();
            let g = ScalarField::read_from(&buf[..]).unwrap();
            prop_assert_eq!(g.values(), f.values());
            prop_assert_eq!(g.grid(), f.grid());
        }

        #[test]
        fn complement_flips_every_cell(cx in -1.0f64..1.0, r in 0.1f64..1.5) {
            let d = Domain::boxed(&[-1.0, -1.0], &[1.0, 1.0], &[9, 7]).unwrap();
            let s = GeometricSet::ball(&[cx, 0.2], r);
            let a = voxelize(&s, &d);
            let b = voxelize(&s.complement(), &d);
            for (x, y) in a.values().iter().zip(b.values()) {
                prop_assert_eq!(*x, -*y);
            }
        }
    }
}
