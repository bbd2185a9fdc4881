//! Coupling of interior cells to the exterior datum.
//!
//! For every interior cell `i` this accumulates `A_i^in` and `A_i^out`, the
//! kernel mass of the exterior where the datum takes its `inside` and
//! `outside` value. Exterior cells of the extended grid are summed with the
//! pair table; beyond the extended box the remainder is integrated along
//! rays: `∫_{t>a} t^{−1−2s} dt = a^{−2s}/(2s)`.

use rayon::prelude::*;

use super::table::PairWeightTable;
use crate::domain::{Domain, Grid, Point, MAX_DIM};
use crate::field::ExteriorDatum;
use crate::quadrature::GaussLegendre;
use crate::set::{intersect, GeometricSet, Intervals};

/// Quadrature used for the far tail.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TailRule {
    /// Gauss points per axis inside each cell.
    pub cell_points: usize,
    /// Uniform angular panels (per angle in 3D).
    pub angular_panels: usize,
    /// Gauss points per angular panel.
    pub angular_points: usize,
}

impl TailRule {
    pub fn for_dim(dim: usize) -> Self {
        match dim {
            1 => TailRule {
                cell_points: 4,
                angular_panels: 1,
                angular_points: 1,
            },
            2 => TailRule {
                cell_points: 3,
                angular_panels: 32,
                angular_points: 8,
            },
            _ => TailRule {
                cell_points: 1,
                angular_panels: 8,
                angular_points: 4,
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExteriorCoupling {
    pub v_in: f64,
    pub v_out: f64,
    /// Per bounding-grid cell; zero outside the container.
    pub a_in: Vec<f64>,
    pub a_out: Vec<f64>,
    /// Tail parts of `a_in` / `a_out`, kept for diagnostics.
    pub tail_in: Vec<f64>,
    pub tail_out: Vec<f64>,
}

impl ExteriorCoupling {
    pub fn build(
        domain: &Domain,
        mask: &[bool],
        datum: &ExteriorDatum,
        table: &PairWeightTable,
        tail: &TailRule,
    ) -> Self {
        let grid = domain.grid();
        let ext = domain.extended_grid();
        let m = domain.margin_cells();
        let (v_in, v_out) = datum.phases();
        let inside_set = match datum {
            ExteriorDatum::Constant(_) => GeometricSet::Full,
            ExteriorDatum::Set { set, .. } => set.clone(),
        };
        // Exterior cells of the extended grid with their phase.
        let mut ext_cells: Vec<([usize; MAX_DIM], bool)> = Vec::new();
        for j in 0..ext.len() {
            let e = ext.unravel(j);
            let mut inner = [0usize; MAX_DIM];
            let mut in_box = true;
            for k in 0..grid.dim {
                if e[k] < m[k] || e[k] >= m[k] + grid.n[k] {
                    in_box = false;
                } else {
                    inner[k] = e[k] - m[k];
                }
            }
            if in_box && mask[grid.ravel(inner)] {
                continue;
            }
            let is_in = inside_set.contains(&ext.center_of(e));
            ext_cells.push((e, is_in));
        }
        let (lo, hi) = (ext.lo, ext.hi());
        let rows: Vec<(f64, f64, f64, f64)> = (0..grid.len())
            .into_par_iter()
            .map(|i| {
                if !mask[i] {
                    return (0.0, 0.0, 0.0, 0.0);
                }
                let c = grid.unravel(i);
                let mut ce = c;
                for k in 0..grid.dim {
                    ce[k] += m[k];
                }
                let (mut a_in, mut a_out) = (0.0, 0.0);
                for (e, is_in) in &ext_cells {
                    let w = table.between(ce, *e);
                    if *is_in {
                        a_in += w;
                    } else {
                        a_out += w;
                    }
                }
                let (t_in, t_out) = if table.truncation.is_some() {
                    (0.0, 0.0)
                } else {
                    cell_tail(&grid, c, &lo, &hi, &inside_set, table.s, tail)
                };
                (a_in + t_in, a_out + t_out, t_in, t_out)
            })
            .collect();
        let mut out = ExteriorCoupling {
            v_in,
            v_out,
            a_in: Vec::with_capacity(rows.len()),
            a_out: Vec::with_capacity(rows.len()),
            tail_in: Vec::with_capacity(rows.len()),
            tail_out: Vec::with_capacity(rows.len()),
        };
        for (a, b, c, d) in rows {
            out.a_in.push(a);
            out.a_out.push(b);
            out.tail_in.push(c);
            out.tail_out.push(d);
        }
        out
    }
}

/// `∫_{cell} ∫_{𝒞Box} |x−y|^{−(n+2s)}` split by membership in `set`.
fn cell_tail(
    grid: &Grid,
    c: [usize; MAX_DIM],
    lo: &Point,
    hi: &Point,
    set: &GeometricSet,
    s: f64,
    rule: &TailRule,
) -> (f64, f64) {
    let n = grid.dim;
    let g = GaussLegendre::new(rule.cell_points.max(1));
    let center = grid.center_of(c);
    let per_axis: Vec<Vec<(f64, f64)>> = (0..n)
        .map(|k| {
            let a = center[k] - 0.5 * grid.h[k];
            g.mapped(a, a + grid.h[k]).collect()
        })
        .collect();
    let npts: usize = per_axis.iter().map(Vec::len).product();
    let (mut t_in, mut t_out) = (0.0, 0.0);
    for q in 0..npts {
        let mut rem = q;
        let mut x = [0.0; MAX_DIM];
        let mut w = 1.0;
        for k in (0..n).rev() {
            let (xk, wk) = per_axis[k][rem % per_axis[k].len()];
            rem /= per_axis[k].len();
            x[k] = xk;
            w *= wk;
        }
        let (a, b) = point_tail(&x, n, lo, hi, set, s, rule);
        t_in += w * a;
        t_out += w * b;
    }
    (t_in, t_out)
}

/// `Σ (a^{−2s} − b^{−2s}) / (2s)` over the intervals.
fn ray_mass(iv: &Intervals, s: f64) -> f64 {
    iv.iter()
        .map(|&(a, b)| {
            let fb = if b.is_finite() { b.powf(-2.0 * s) } else { 0.0 };
            (a.powf(-2.0 * s) - fb) / (2.0 * s)
        })
        .sum()
}

fn exit_time(x: &Point, d: &Point, n: usize, lo: &Point, hi: &Point) -> f64 {
    let mut t = f64::INFINITY;
    for k in 0..n {
        if d[k] > 0.0 {
            t = t.min((hi[k] - x[k]) / d[k]);
        } else if d[k] < 0.0 {
            t = t.min((lo[k] - x[k]) / d[k]);
        }
    }
    t
}

fn ray_split(x: &Point, d: &Point, n: usize, lo: &Point, hi: &Point, set: &GeometricSet, s: f64) -> (f64, f64) {
    let te = exit_time(x, d, n, lo, hi);
    let outside = vec![(te, f64::INFINITY)];
    let total = ray_mass(&outside, s);
    if matches!(set, GeometricSet::Full) {
        return (total, 0.0);
    }
    if matches!(set, GeometricSet::Empty) {
        return (0.0, total);
    }
    let inside = ray_mass(&intersect(&outside, &set.ray_intervals(x, d, n)), s);
    (inside, (total - inside).max(0.0))
}

fn point_tail(x: &Point, n: usize, lo: &Point, hi: &Point, set: &GeometricSet, s: f64, rule: &TailRule) -> (f64, f64) {
    match n {
        1 => {
            let (a, b) = ray_split(x, &[1.0, 0.0, 0.0], 1, lo, hi, set, s);
            let (c, d) = ray_split(x, &[-1.0, 0.0, 0.0], 1, lo, hi, set, s);
            (a + c, b + d)
        }
        2 => {
            use std::f64::consts::PI;
            let mut cuts: Vec<f64> = (0..=rule.angular_panels)
                .map(|p| 2.0 * PI * p as f64 / rule.angular_panels as f64)
                .collect();
            for (cx, cy) in [(lo[0], lo[1]), (lo[0], hi[1]), (hi[0], lo[1]), (hi[0], hi[1])] {
                cuts.push((cy - x[1]).atan2(cx - x[0]).rem_euclid(2.0 * PI));
            }
            cuts.sort_by(f64::total_cmp);
            let g = GaussLegendre::new(rule.angular_points);
            let (mut a, mut b) = (0.0, 0.0);
            for w in cuts.windows(2) {
                if w[1] - w[0] < 1e-14 {
                    continue;
                }
                for (th, wt) in g.mapped(w[0], w[1]) {
                    let d = [th.cos(), th.sin(), 0.0];
                    let (p, q) = ray_split(x, &d, 2, lo, hi, set, s);
                    a += wt * p;
                    b += wt * q;
                }
            }
            (a, b)
        }
        _ => {
            use std::f64::consts::PI;
            let g = GaussLegendre::new(rule.angular_points);
            let np = rule.angular_panels;
            let (mut a, mut b) = (0.0, 0.0);
            for pz in 0..np {
                let z0 = -1.0 + 2.0 * pz as f64 / np as f64;
                for (z, wz) in g.mapped(z0, z0 + 2.0 / np as f64) {
                    let rho = (1.0 - z * z).max(0.0).sqrt();
                    for pp in 0..2 * np {
                        let p0 = PI * pp as f64 / np as f64;
                        for (ph, wp) in g.mapped(p0, p0 + PI / np as f64) {
                            let d = [rho * ph.cos(), rho * ph.sin(), z];
                            let (p, q) = ray_split(x, &d, 3, lo, hi, set, s);
                            a += wz * wp * p;
                            b += wz * wp * q;
                        }
                    }
                }
            }
            (a, b)
        }
    }
}
