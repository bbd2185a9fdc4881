//! Classical perimeters, interface meshes, level sets and the density and
//! containment measurements used by the limit experiments.

use std::io::Write;

use crate::domain::{unit_ball_volume, Domain, Grid, Point, Shape, MAX_DIM};
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::quadrature::GaussLegendre;
use crate::set::GeometricSet;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FacetTag {
    Interior,
    Boundary,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Facet {
    pub center: Point,
    pub measure: f64,
    /// Outward from the set.
    pub normal: Point,
    pub tag: FacetTag,
    /// Point (1D), segment end points (2D) or triangle corners (3D).
    pub vertices: Vec<Point>,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct InterfaceMesh {
    pub dim: usize,
    pub facets: Vec<Facet>,
}

impl InterfaceMesh {
    pub fn measure(&self, tag: FacetTag) -> f64 {
        self.facets.iter().filter(|f| f.tag == tag).map(|f| f.measure).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.facets.is_empty()
    }

    /// CSV with columns `cx,cy,cz,measure,nx,ny,nz,tag`.
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "cx,cy,cz,measure,nx,ny,nz,tag")?;
        for f in &self.facets {
            let tag = match f.tag {
                FacetTag::Interior => "interior",
                FacetTag::Boundary => "boundary",
            };
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                f.center[0], f.center[1], f.center[2], f.measure, f.normal[0], f.normal[1], f.normal[2], tag
            )?;
        }
        Ok(())
    }

    /// Distance from `p` to the nearest facet.
    pub fn distance(&self, p: &Point) -> f64 {
        self.facets
            .iter()
            .map(|f| facet_distance(f, p, self.dim))
            .fold(f64::INFINITY, f64::min)
    }
}

fn dist(a: &Point, b: &Point) -> f64 {
    (0..MAX_DIM).map(|k| (a[k] - b[k]).powi(2)).sum::<f64>().sqrt()
}

fn facet_distance(f: &Facet, p: &Point, dim: usize) -> f64 {
    match (dim, f.vertices.len()) {
        (2, 2) => {
            let (a, b) = (f.vertices[0], f.vertices[1]);
            let ab = [b[0] - a[0], b[1] - a[1]];
            let len2 = ab[0] * ab[0] + ab[1] * ab[1];
            let t = if len2 > 0.0 {
                (((p[0] - a[0]) * ab[0] + (p[1] - a[1]) * ab[1]) / len2).clamp(0.0, 1.0)
            } else {
                0.0
            };
            dist(p, &[a[0] + t * ab[0], a[1] + t * ab[1], 0.0])
        }
        _ => f
            .vertices
            .iter()
            .chain(std::iter::once(&f.center))
            .map(|v| dist(v, p))
            .fold(f64::INFINITY, f64::min),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Where {
    Interior,
    Boundary,
}

/// A perimeter value with diagnostics.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Perimeter {
    pub value: f64,
    /// `∂E` touches `∂Ω` without crossing it somewhere.
    pub tangential_contact: bool,
    /// Obtained from clipped facets rather than exact geometry.
    pub approximate: bool,
}

/// Node lattice: the bounding grid's vertices padded by one cell.
fn node_lattice(grid: &Grid) -> (Point, [usize; MAX_DIM]) {
    let mut lo = grid.lo;
    let mut n = [1; MAX_DIM];
    for k in 0..grid.dim {
        lo[k] -= grid.h[k];
        n[k] = grid.n[k] + 3;
    }
    (lo, n)
}

fn lerp(a: &Point, b: &Point, fa: f64, fb: f64) -> Point {
    let t = fa / (fa - fb);
    let mut p = [0.0; MAX_DIM];
    for k in 0..MAX_DIM {
        p[k] = a[k] + t * (b[k] - a[k]);
    }
    p
}

/// Clips the segment `[a, b]` to the closed container; `None` if nothing
/// remains.
fn clip_segment(omega: &Domain, a: &Point, b: &Point) -> Option<(Point, Point)> {
    let n = omega.dim();
    let d: Vec<f64> = (0..MAX_DIM).map(|k| b[k] - a[k]).collect();
    let (mut t0, mut t1) = (0.0f64, 1.0f64);
    match &omega.shape {
        Shape::Box { lo, hi } => {
            for k in 0..n {
                if d[k] == 0.0 {
                    if a[k] < lo[k] || a[k] > hi[k] {
                        return None;
                    }
                } else {
                    let (mut u, mut v) = ((lo[k] - a[k]) / d[k], (hi[k] - a[k]) / d[k]);
                    if u > v {
                        std::mem::swap(&mut u, &mut v);
                    }
                    t0 = t0.max(u);
                    t1 = t1.min(v);
                }
            }
        }
        Shape::Ball { center, radius } => {
            let (mut dd, mut od, mut oo) = (0.0, 0.0, 0.0);
            for k in 0..n {
                let o = a[k] - center[k];
                dd += d[k] * d[k];
                od += o * d[k];
                oo += o * o;
            }
            if dd == 0.0 {
                return None;
            }
            let disc = od * od - dd * (oo - radius * radius);
            if disc <= 0.0 {
                return None;
            }
            let sq = disc.sqrt();
            t0 = t0.max((-od - sq) / dd);
            t1 = t1.min((-od + sq) / dd);
        }
    }
    if t1 <= t0 {
        return None;
    }
    let at = |t: f64| {
        let mut p = [0.0; MAX_DIM];
        for k in 0..MAX_DIM {
            p[k] = a[k] + t * d[k];
        }
        p
    };
    Some((at(t0), at(t1)))
}

/// Distance from `p` to `∂Ω`.
fn boundary_distance(omega: &Domain, p: &Point) -> f64 {
    let n = omega.dim();
    match &omega.shape {
        Shape::Box { lo, hi } => (0..n)
            .map(|k| (p[k] - lo[k]).abs().min((hi[k] - p[k]).abs()))
            .fold(f64::INFINITY, f64::min),
        Shape::Ball { center, radius } => {
            let r = (0..n).map(|k| (p[k] - center[k]).powi(2)).sum::<f64>().sqrt();
            (r - radius).abs()
        }
    }
}

fn interior_facets(e: &GeometricSet, omega: &Domain) -> Vec<Facet> {
    let grid = omega.grid();
    let dim = grid.dim;
    let (lo, nn) = node_lattice(&grid);
    let node = |ijk: [usize; MAX_DIM]| {
        let mut p = [0.0; MAX_DIM];
        for k in 0..dim {
            p[k] = lo[k] + ijk[k] as f64 * grid.h[k];
        }
        p
    };
    let idx = |ijk: [usize; MAX_DIM]| (ijk[0] * nn[1] + ijk[1]) * nn[2] + ijk[2];
    let mut phi = vec![0.0; nn.iter().product()];
    for i in 0..nn[0] {
        for j in 0..nn[1] {
            for k in 0..nn[2] {
                phi[idx([i, j, k])] = e.signed_distance(&node([i, j, k]), dim);
            }
        }
    }
    // Nodes exactly on ∂E count as inside so grid-aligned faces are exact.
    let inside = |v: f64| v <= 0.0;
    let tol = 1e-12 * omega.diameter();
    let mut out = Vec::new();
    match dim {
        1 => {
            for i in 0..nn[0] - 1 {
                let (fa, fb) = (phi[idx([i, 0, 0])], phi[idx([i + 1, 0, 0])]);
                if inside(fa) != inside(fb) {
                    let p = lerp(&node([i, 0, 0]), &node([i + 1, 0, 0]), fa, fb);
                    if omega.contains(&p) && boundary_distance(omega, &p) > tol {
                        let sgn = if inside(fa) { 1.0 } else { -1.0 };
                        out.push(Facet {
                            center: p,
                            measure: 1.0,
                            normal: [sgn, 0.0, 0.0],
                            tag: FacetTag::Interior,
                            vertices: vec![p],
                        });
                    }
                }
            }
        }
        2 => {
            for i in 0..nn[0] - 1 {
                for j in 0..nn[1] - 1 {
                    let c = [[i, j, 0], [i + 1, j, 0], [i + 1, j + 1, 0], [i, j + 1, 0]];
                    let f: Vec<f64> = c.iter().map(|&q| phi[idx(q)]).collect();
                    let p: Vec<Point> = c.iter().map(|&q| node(q)).collect();
                    let ins: Vec<bool> = f.iter().map(|&v| inside(v)).collect();
                    let cross = |e: usize| {
                        let (a, b) = (e, (e + 1) % 4);
                        (ins[a] != ins[b]).then(|| lerp(&p[a], &p[b], f[a], f[b]))
                    };
                    let pts: Vec<Option<Point>> = (0..4).map(cross).collect();
                    let count = pts.iter().flatten().count();
                    let mut segs: Vec<(Point, Point)> = Vec::new();
                    if count == 2 {
                        let v: Vec<Point> = pts.iter().flatten().copied().collect();
                        segs.push((v[0], v[1]));
                    } else if count == 4 {
                        let center_in = inside(0.25 * f.iter().sum::<f64>());
                        let pairs = if ins[0] == center_in {
                            [(0, 1), (2, 3)]
                        } else {
                            [(3, 0), (1, 2)]
                        };
                        for (a, b) in pairs {
                            segs.push((pts[a].unwrap(), pts[b].unwrap()));
                        }
                    }
                    // Outward normal: along the bilinear gradient of φ.
                    let gx = 0.5 * ((f[1] - f[0]) + (f[2] - f[3])) / grid.h[0];
                    let gy = 0.5 * ((f[3] - f[0]) + (f[2] - f[1])) / grid.h[1];
                    for (a, b) in segs {
                        let Some((a, b)) = clip_segment(omega, &a, &b) else { continue };
                        let len = dist(&a, &b);
                        let mid = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1]), 0.0];
                        if len <= tol || boundary_distance(omega, &mid) <= tol {
                            continue;
                        }
                        let mut nrm = [(b[1] - a[1]) / len, -(b[0] - a[0]) / len, 0.0];
                        if nrm[0] * gx + nrm[1] * gy < 0.0 {
                            nrm = [-nrm[0], -nrm[1], 0.0];
                        }
                        out.push(Facet {
                            center: mid,
                            measure: len,
                            normal: nrm,
                            tag: FacetTag::Interior,
                            vertices: vec![a, b],
                        });
                    }
                }
            }
        }
        _ => {
            const CUBE: [[usize; 3]; 8] = [
                [0, 0, 0],
                [1, 0, 0],
                [1, 1, 0],
                [0, 1, 0],
                [0, 0, 1],
                [1, 0, 1],
                [1, 1, 1],
                [0, 1, 1],
            ];
            const TETS: [[usize; 4]; 6] = [
                [0, 5, 1, 6],
                [0, 1, 2, 6],
                [0, 2, 3, 6],
                [0, 3, 7, 6],
                [0, 7, 4, 6],
                [0, 4, 5, 6],
            ];
            for i in 0..nn[0] - 1 {
                for j in 0..nn[1] - 1 {
                    for k in 0..nn[2] - 1 {
                        let q: Vec<[usize; 3]> = CUBE.iter().map(|o| [i + o[0], j + o[1], k + o[2]]).collect();
                        let f: Vec<f64> = q.iter().map(|&v| phi[idx(v)]).collect();
                        let ins: Vec<bool> = f.iter().map(|&v| inside(v)).collect();
                        if ins.iter().all(|&b| b) || ins.iter().all(|&b| !b) {
                            continue;
                        }
                        for t in TETS {
                            let (a_in, a_out): (Vec<usize>, Vec<usize>) = t.iter().partition(|&&c| ins[c]);
                            if a_in.is_empty() || a_out.is_empty() {
                                continue;
                            }
                            let cr = |a: usize, b: usize| lerp(&node(q[a]), &node(q[b]), f[a], f[b]);
                            let tris: Vec<[Point; 3]> = match (a_in.len(), a_out.len()) {
                                (1, 3) => vec![[cr(a_in[0], a_out[0]), cr(a_in[0], a_out[1]), cr(a_in[0], a_out[2])]],
                                (3, 1) => vec![[cr(a_in[0], a_out[0]), cr(a_in[1], a_out[0]), cr(a_in[2], a_out[0])]],
                                _ => {
                                    let (a, b, c, d) = (a_in[0], a_in[1], a_out[0], a_out[1]);
                                    let quad = [cr(a, c), cr(a, d), cr(b, d), cr(b, c)];
                                    vec![[quad[0], quad[1], quad[2]], [quad[0], quad[2], quad[3]]]
                                }
                            };
                            let outside_pt = node(q[a_out[0]]);
                            for tri in tris {
                                let u: Vec<f64> = (0..3).map(|k| tri[1][k] - tri[0][k]).collect();
                                let v: Vec<f64> = (0..3).map(|k| tri[2][k] - tri[0][k]).collect();
                                let cx = [u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]];
                                let norm = (cx[0] * cx[0] + cx[1] * cx[1] + cx[2] * cx[2]).sqrt();
                                if norm <= tol * tol {
                                    continue;
                                }
                                let mut c = [0.0; 3];
                                for k in 0..3 {
                                    c[k] = (tri[0][k] + tri[1][k] + tri[2][k]) / 3.0;
                                }
                                if !omega.contains(&c) || boundary_distance(omega, &c) <= tol {
                                    continue;
                                }
                                let mut nrm = [cx[0] / norm, cx[1] / norm, cx[2] / norm];
                                let toward: f64 = (0..3).map(|k| nrm[k] * (outside_pt[k] - c[k])).sum();
                                if toward < 0.0 {
                                    nrm = [-nrm[0], -nrm[1], -nrm[2]];
                                }
                                out.push(Facet {
                                    center: c,
                                    measure: 0.5 * norm,
                                    normal: nrm,
                                    tag: FacetTag::Interior,
                                    vertices: tri.to_vec(),
                                });
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

/// Staircase facets on the grid faces of `∂Ω` where membership in `E`
/// differs between the inner cell center and its mirror image outside.
fn boundary_facets(e: &GeometricSet, omega: &Domain) -> Vec<Facet> {
    let grid = omega.grid();
    let mask = omega.mask();
    let dim = grid.dim;
    let mut out = Vec::new();
    for i in 0..grid.len() {
        if !mask[i] {
            continue;
        }
        let c = grid.unravel(i);
        let x = grid.center_of(c);
        for k in 0..dim {
            for sg in [-1i64, 1] {
                let nb = c[k] as i64 + sg;
                let outside = nb < 0 || nb >= grid.n[k] as i64 || {
                    let mut q = c;
                    q[k] = nb as usize;
                    !mask[grid.ravel(q)]
                };
                if !outside {
                    continue;
                }
                let mut mirror = x;
                mirror[k] += sg as f64 * grid.h[k];
                if e.contains(&x) == e.contains(&mirror) {
                    continue;
                }
                let mut fc = x;
                fc[k] += 0.5 * sg as f64 * grid.h[k];
                let area: f64 = (0..dim).filter(|&l| l != k).map(|l| grid.h[l]).product();
                let mut nrm = [0.0; MAX_DIM];
                nrm[k] = sg as f64;
                out.push(Facet {
                    center: fc,
                    measure: area,
                    normal: nrm,
                    tag: FacetTag::Boundary,
                    vertices: vec![fc],
                });
            }
        }
    }
    out
}

/// Facets of `∂E` inside `Ω`, plus the staircase trace of `E` on `∂Ω`.
pub fn interface_mesh(e: &GeometricSet, omega: &Domain) -> InterfaceMesh {
    let mut facets = interior_facets(e, omega);
    facets.extend(boundary_facets(e, omega));
    InterfaceMesh {
        dim: omega.dim(),
        facets,
    }
}

pub fn classical_perimeter(e: &GeometricSet, omega: &Domain, place: Where) -> Perimeter {
    match place {
        Where::Interior => Perimeter {
            value: interior_facets(e, omega).iter().map(|f| f.measure).sum(),
            tangential_contact: false,
            approximate: omega.dim() == 3,
        },
        Where::Boundary => boundary_trace(e, omega),
    }
}

/// Whether membership in `E` differs across `∂Ω` at the boundary point `p`
/// with outward normal `nrm`.
fn differs(e: &GeometricSet, p: &Point, nrm: &Point, delta: f64) -> bool {
    let mut a = *p;
    let mut b = *p;
    for k in 0..MAX_DIM {
        a[k] -= delta * nrm[k];
        b[k] += delta * nrm[k];
    }
    e.contains(&a) != e.contains(&b)
}

fn interval_len(iv: &[(f64, f64)], len: f64) -> f64 {
    iv.iter().map(|&(a, b)| (b.min(len) - a.min(len)).max(0.0)).sum()
}

/// Length of `{t ∈ [0, len] : χ_E(o_in + t d) ≠ χ_E(o_out + t d)}`.
fn line_mismatch(e: &GeometricSet, o_in: &Point, o_out: &Point, d: &Point, len: f64, dim: usize) -> f64 {
    let a = e.ray_intervals(o_in, d, dim);
    let b = e.ray_intervals(o_out, d, dim);
    let both = crate::set::intersect(&a, &b);
    interval_len(&a, len) + interval_len(&b, len) - 2.0 * interval_len(&both, len)
}

/// Parameter intervals of the closed curve `t ∈ [0,1)` on which `f` holds;
/// transitions are located by bisection.
fn curve_intervals(samples: usize, f: impl Fn(f64) -> bool) -> Vec<(f64, f64)> {
    let ts: Vec<f64> = (0..=samples).map(|i| i as f64 / samples as f64).collect();
    let vals: Vec<bool> = ts.iter().map(|&t| f(t)).collect();
    let mut out = Vec::new();
    let mut start: Option<f64> = if vals[0] { Some(0.0) } else { None };
    for i in 0..samples {
        if vals[i] == vals[i + 1] {
            continue;
        }
        let (mut a, mut b) = (ts[i], ts[i + 1]);
        for _ in 0..60 {
            let m = 0.5 * (a + b);
            if f(m) == vals[i] {
                a = m;
            } else {
                b = m;
            }
        }
        let t = 0.5 * (a + b);
        if vals[i + 1] {
            start = Some(t);
        } else if let Some(s0) = start.take() {
            out.push((s0, t));
        }
    }
    if let Some(s0) = start {
        out.push((s0, 1.0));
    }
    out
}

/// Scans a closed boundary curve of length `len` for points where `∂E`
/// touches `∂Ω` without crossing it: either a vanishing mismatch interval or
/// a local minimum of `|φ_E|` reaching zero between samples.
fn tangency_on_curve(
    e: &GeometricSet,
    dim: usize,
    delta: f64,
    len: f64,
    curve: impl Fn(f64) -> (Point, Point),
    samples: usize,
) -> bool {
    let differ = |t: f64| {
        let (p, nrm) = curve(t.rem_euclid(1.0));
        differs(e, &p, &nrm, delta)
    };
    let short = 1e3 * (delta * len).sqrt();
    let contact = curve_intervals(samples, differ);
    if contact.iter().any(|&(a, b)| (b - a) * len < short) {
        return true;
    }
    let near_endpoint = |t: f64| {
        contact.iter().any(|&(a, b)| {
            let gap = |x: f64| {
                let d = (t - x).rem_euclid(1.0);
                d.min(1.0 - d)
            };
            gap(a).min(gap(b)) * len < short
        })
    };
    let val = |t: f64| {
        let (p, _) = curve(t.rem_euclid(1.0));
        e.signed_distance(&p, dim).abs()
    };
    let step = 1.0 / samples as f64;
    let vals: Vec<f64> = (0..samples).map(|i| val(i as f64 * step)).collect();
    for i in 0..samples {
        let v = vals[i];
        if v > vals[(i + samples - 1) % samples] || v > vals[(i + 1) % samples] || differ(i as f64 * step) {
            continue;
        }
        if v > 2.0 * step * len {
            continue;
        }
        let (mut a, mut b) = ((i as f64 - 1.0) * step, (i as f64 + 1.0) * step);
        let gr = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..80 {
            let c = b - gr * (b - a);
            let d = a + gr * (b - a);
            if val(c) < val(d) {
                b = d;
            } else {
                a = c;
            }
        }
        let t = 0.5 * (a + b);
        if val(t) < 1e3 * delta && !near_endpoint(t) {
            return true;
        }
    }
    false
}

/// `ℋ^{n−1}(∂*E ∩ ∂Ω)`: the measure of the part of `∂Ω` across which
/// membership in `E` changes.
pub fn boundary_trace(e: &GeometricSet, omega: &Domain) -> Perimeter {
    let dim = omega.dim();
    let diam = omega.diameter();
    let delta = 1e-10 * diam;
    let mut tangential = false;
    let value = match &omega.shape {
        Shape::Box { lo, hi } => {
            let mut total = 0.0;
            if dim == 1 {
                for (x, s) in [(lo[0], -1.0), (hi[0], 1.0)] {
                    let p = [x, 0.0, 0.0];
                    if differs(e, &p, &[s, 0.0, 0.0], delta) {
                        total += 1.0;
                    } else if e.signed_distance(&p, 1).abs() < 1e3 * delta {
                        tangential = true;
                    }
                }
            } else {
                for k in 0..dim {
                    for (c, s) in [(lo[k], -1.0), (hi[k], 1.0)] {
                        let free: Vec<usize> = (0..dim).filter(|&l| l != k).collect();
                        let line = |along: usize, fixed: &[(usize, f64)]| {
                            let mut o_in = [0.0; MAX_DIM];
                            let mut o_out = [0.0; MAX_DIM];
                            o_in[k] = c - s * delta;
                            o_out[k] = c + s * delta;
                            for &(l, v) in fixed {
                                o_in[l] = v;
                                o_out[l] = v;
                            }
                            o_in[along] = lo[along];
                            o_out[along] = lo[along];
                            let mut d = [0.0; MAX_DIM];
                            d[along] = 1.0;
                            line_mismatch(e, &o_in, &o_out, &d, hi[along] - lo[along], dim)
                        };
                        if dim == 2 {
                            total += line(free[0], &[]);
                        } else {
                            let (a, b) = (free[0], free[1]);
                            let g = GaussLegendre::new(8);
                            let panels = 64;
                            let w = (hi[b] - lo[b]) / panels as f64;
                            for p in 0..panels {
                                let y0 = lo[b] + p as f64 * w;
                                for (y, wy) in g.mapped(y0, y0 + w) {
                                    total += wy * line(a, &[(b, y)]);
                                }
                            }
                        }
                    }
                }
                if dim == 2 {
                    let (curve, per) = planar_boundary(omega);
                    tangential = tangency_on_curve(e, 2, delta, per, curve, 4096);
                }
            }
            total
        }
        Shape::Ball { center, radius } => {
            let r = *radius;
            let c = crate::set::point(center);
            match dim {
                1 => {
                    let mut total = 0.0;
                    for s in [-1.0, 1.0] {
                        let p = [c[0] + s * r, 0.0, 0.0];
                        if differs(e, &p, &[s, 0.0, 0.0], delta) {
                            total += 1.0;
                        }
                    }
                    total
                }
                2 => {
                    use std::f64::consts::TAU;
                    let curve = |t: f64| {
                        let th = TAU * t;
                        let nrm = [th.cos(), th.sin(), 0.0];
                        ([c[0] + r * nrm[0], c[1] + r * nrm[1], 0.0], nrm)
                    };
                    tangential = tangency_on_curve(e, 2, delta, TAU * r, curve, 4096);
                    r * TAU * circle_mismatch(e, delta, 4096, curve)
                }
                _ => {
                    use std::f64::consts::TAU;
                    let g = GaussLegendre::new(8);
                    let panels = 64;
                    let mut total = 0.0;
                    for p in 0..panels {
                        let z0 = -1.0 + 2.0 * p as f64 / panels as f64;
                        for (z, wz) in g.mapped(z0, z0 + 2.0 / panels as f64) {
                            let rho = (1.0 - z * z).max(0.0).sqrt();
                            let curve = |t: f64| {
                                let ph = TAU * t;
                                let nrm = [rho * ph.cos(), rho * ph.sin(), z];
                                ([c[0] + r * nrm[0], c[1] + r * nrm[1], c[2] + r * nrm[2]], nrm)
                            };
                            total += wz * r * r * TAU * circle_mismatch(e, delta, 512, curve);
                        }
                    }
                    total
                }
            }
        }
    };
    Perimeter {
        value,
        tangential_contact: tangential,
        approximate: false,
    }
}

/// Fraction of the closed curve `t ∈ [0,1)` on which membership differs.
fn circle_mismatch(e: &GeometricSet, delta: f64, samples: usize, curve: impl Fn(f64) -> (Point, Point)) -> f64 {
    let f = |t: f64| {
        let (p, nrm) = curve(t.rem_euclid(1.0));
        differs(e, &p, &nrm, delta)
    };
    curve_intervals(samples, f).iter().map(|&(a, b)| b - a).sum()
}

/// Closed boundary curve of a planar container, parametrized by `t ∈ [0,1)`,
/// returning point and outward normal; second value is its length.
fn planar_boundary(omega: &Domain) -> (Box<dyn Fn(f64) -> (Point, Point) + '_>, f64) {
    match &omega.shape {
        Shape::Box { lo, hi } => {
            let (w, h) = (hi[0] - lo[0], hi[1] - lo[1]);
            let per = 2.0 * (w + h);
            // Directions away from the center stay transverse at corners.
            let away = move |p: Point| {
                let d = [p[0] - 0.5 * (lo[0] + hi[0]), p[1] - 0.5 * (lo[1] + hi[1])];
                let r = d[0].hypot(d[1]);
                (p, [d[0] / r, d[1] / r, 0.0])
            };
            let curve = move |t: f64| {
                let mut l = t * per;
                if l < w {
                    return away([lo[0] + l, lo[1], 0.0]);
                }
                l -= w;
                if l < h {
                    return away([hi[0], lo[1] + l, 0.0]);
                }
                l -= h;
                if l < w {
                    return away([hi[0] - l, hi[1], 0.0]);
                }
                l -= w;
                away([lo[0], hi[1] - l, 0.0])
            };
            (Box::new(curve), per)
        }
        Shape::Ball { center, radius } => {
            let (c, r) = (crate::set::point(center), *radius);
            let curve = move |t: f64| {
                let th = std::f64::consts::TAU * t;
                let nrm = [th.cos(), th.sin(), 0.0];
                ([c[0] + r * nrm[0], c[1] + r * nrm[1], 0.0], nrm)
            };
            (Box::new(curve), std::f64::consts::TAU * r)
        }
    }
}

/// A chart `[0,1]² → ∂Ω` returning point and outward normal.
type Chart<'a> = Box<dyn Fn(f64, f64) -> (Point, Point) + 'a>;

fn surface_charts(omega: &Domain) -> Vec<Chart<'_>> {
    match &omega.shape {
        Shape::Box { lo, hi } => {
            let mut out: Vec<Chart<'_>> = Vec::new();
            for k in 0..3 {
                let (a, b) = ((k + 1) % 3, (k + 2) % 3);
                for c in [lo[k], hi[k]] {
                    out.push(Box::new(move |x: f64, y: f64| {
                        let mut p = [0.0; MAX_DIM];
                        p[k] = c;
                        p[a] = lo[a] + x * (hi[a] - lo[a]);
                        p[b] = lo[b] + y * (hi[b] - lo[b]);
                        let mut n = [0.0; MAX_DIM];
                        for l in 0..3 {
                            n[l] = p[l] - 0.5 * (lo[l] + hi[l]);
                        }
                        let r = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
                        n.iter_mut().for_each(|v| *v /= r);
                        (p, n)
                    }));
                }
            }
            out
        }
        Shape::Ball { center, radius } => {
            let (c, r) = (crate::set::point(center), *radius);
            vec![Box::new(move |x: f64, y: f64| {
                let z = 2.0 * x - 1.0;
                let rho = (1.0 - z * z).max(0.0).sqrt();
                let ph = std::f64::consts::TAU * y;
                let n = [rho * ph.cos(), rho * ph.sin(), z];
                ([c[0] + r * n[0], c[1] + r * n[1], c[2] + r * n[2]], n)
            })]
        }
    }
}

/// Length of the curves in a chart separating `f` from `¬f`, by marching
/// squares with crossings located by bisection along cell edges.
fn chart_curve_length(chart: &Chart<'_>, cells: usize, f: &dyn Fn(&Point, &Point) -> bool) -> f64 {
    let g = |x: f64, y: f64| {
        let (p, n) = chart(x, y);
        f(&p, &n)
    };
    let step = 1.0 / cells as f64;
    let vals: Vec<Vec<bool>> = (0..=cells)
        .map(|i| (0..=cells).map(|j| g(i as f64 * step, j as f64 * step)).collect())
        .collect();
    let crossing = |a: (f64, f64), b: (f64, f64), va: bool| {
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..40 {
            let m = 0.5 * (lo + hi);
            if g(a.0 + m * (b.0 - a.0), a.1 + m * (b.1 - a.1)) == va {
                lo = m;
            } else {
                hi = m;
            }
        }
        let t = 0.5 * (lo + hi);
        chart(a.0 + t * (b.0 - a.0), a.1 + t * (b.1 - a.1)).0
    };
    let mut total = 0.0;
    for i in 0..cells {
        for j in 0..cells {
            let c = [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)];
            let v: Vec<bool> = c.iter().map(|&(a, b)| vals[a][b]).collect();
            if v.iter().all(|&x| x == v[0]) {
                continue;
            }
            let pos = |q: (usize, usize)| (q.0 as f64 * step, q.1 as f64 * step);
            let pts: Vec<Point> = (0..4)
                .filter(|&e| v[e] != v[(e + 1) % 4])
                .map(|e| crossing(pos(c[e]), pos(c[(e + 1) % 4]), v[e]))
                .collect();
            for pair in pts.chunks_exact(2) {
                total += dist(&pair[0], &pair[1]);
            }
        }
    }
    total
}

/// `ℋ^{n−2}` of the relative boundary, inside `∂Ω`, of the part of `∂Ω`
/// across which membership in `E` changes: the contact line of `∂E` with
/// the container wall (a point count for `n = 2`).
pub fn contact_line_measure(e: &GeometricSet, omega: &Domain) -> Result<f64> {
    let delta = 1e-10 * omega.diameter();
    match omega.dim() {
        2 => {
            let (curve, _) = planar_boundary(omega);
            let iv = curve_intervals(8192, |t| {
                let (p, n) = curve(t.rem_euclid(1.0));
                differs(e, &p, &n, delta)
            });
            let mut ends = 2 * iv.len();
            if iv.len() > 1 && iv[0].0 == 0.0 && iv[iv.len() - 1].1 == 1.0 {
                ends -= 2;
            }
            if iv.len() == 1 && iv[0] == (0.0, 1.0) {
                ends = 0;
            }
            Ok(ends as f64)
        }
        3 => {
            let f = |p: &Point, n: &Point| differs(e, p, n, delta);
            Ok(surface_charts(omega).iter().map(|c| chart_curve_length(c, 256, &f)).sum())
        }
        n => Err(Error::Unsupported(format!("contact line in dimension {n}"))),
    }
}

/// Cells whose value lies in `(−θ, θ)`.
#[derive(Clone, Debug, PartialEq)]
pub struct VoxelSet {
    pub grid: Grid,
    pub cells: Vec<usize>,
}

impl VoxelSet {
    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn centers(&self) -> impl Iterator<Item = Point> + '_ {
        self.cells.iter().map(|&i| self.grid.center(i))
    }

    pub fn measure(&self) -> f64 {
        self.cells.len() as f64 * self.grid.cell_volume()
    }
}

pub fn level_set_region(u: &ScalarField, theta: f64) -> Result<VoxelSet> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::OutOfRange {
            name: "theta",
            value: theta,
            expected: "(0, 1)",
        });
    }
    let cells = (0..u.values().len())
        .filter(|&i| u.mask()[i] && u.values()[i].abs() < theta)
        .collect();
    Ok(VoxelSet {
        grid: u.grid().clone(),
        cells,
    })
}

/// One-sided distance `sup_{a∈A} dist(a, B)`.
pub fn hausdorff_distance(a: &VoxelSet, b: &InterfaceMesh) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    if b.is_empty() {
        return f64::INFINITY;
    }
    a.centers().map(|p| b.distance(&p)).fold(0.0, f64::max)
}

/// Cell-count estimate of `|{u > θ₂} ∩ B_R(center)| / |B_R|`.
pub fn density_fraction(u: &ScalarField, theta2: f64, center: &Point, radius: f64) -> Result<f64> {
    let g = u.grid();
    let hi = g.hi();
    for k in 0..g.dim {
        if center[k] - radius < g.lo[k] - 1e-12 || center[k] + radius > hi[k] + 1e-12 {
            return Err(Error::BallOutsideRegion { radius });
        }
    }
    let (mut inside, mut hits) = (0usize, 0usize);
    for i in 0..g.len() {
        let p = g.center(i);
        if (0..g.dim).map(|k| (p[k] - center[k]).powi(2)).sum::<f64>() < radius * radius {
            inside += 1;
            if u.values()[i] > theta2 {
                hits += 1;
            }
        }
    }
    if inside == 0 {
        return Err(Error::BallOutsideRegion { radius });
    }
    Ok(hits as f64 / inside as f64)
}

/// `ω_n R^n`, convenience for density normalizations.
pub fn ball_measure(dim: usize, radius: f64) -> f64 {
    unit_ball_volume(dim) * radius.powi(dim as i32)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{voxelize, ValueRange};
    use proptest::prelude::*;

    #[test]
    fn square_inside_box() {
        let d = Domain::boxed(&[-1.0, -1.0], &[2.0, 2.0], &[30, 30]).unwrap();
        let e = GeometricSet::boxed(&[0.0, 0.0], &[1.0, 1.0]);
        let int = classical_perimeter(&e, &d, Where::Interior);
        let bnd = classical_perimeter(&e, &d, Where::Boundary);
        assert!((int.value - 4.0).abs() < 1e-9, "{int:?}");
        assert_eq!(bnd.value, 0.0);
    }

    #[test]
    fn half_line_touching_endpoint() {
        let d = Domain::interval(0.0, 1.0, 10).unwrap();
        let e = GeometricSet::half_space(&[-1.0], 0.0);
        assert_eq!(classical_perimeter(&e, &d, Where::Interior).value, 0.0);
        assert_eq!(classical_perimeter(&e, &d, Where::Boundary).value, 1.0);
        let d = Domain::interval(-1.0, 1.0, 10).unwrap();
        assert_eq!(classical_perimeter(&e, &d, Where::Interior).value, 1.0);
        assert_eq!(classical_perimeter(&e, &d, Where::Boundary).value, 0.0);
    }

    #[test]
    fn diameter_chord_of_disk() {
        let d = Domain::ball(&[0.0, 0.0], 1.0, &[40, 40], 0.0).unwrap();
        let e = GeometricSet::half_space(&[1.0, 0.0], 0.0);
        let p = classical_perimeter(&e, &d, Where::Interior);
        assert!((p.value - 2.0).abs() < 0.02, "{p:?}");
        let b = classical_perimeter(&e, &d, Where::Boundary);
        assert_eq!(b.value, 0.0);
        // Half-plane inside the disk: its trace is the left half circle.
        let lens = e.clone().intersect(GeometricSet::ball(&[0.0, 0.0], 1.0));
        let b = classical_perimeter(&lens, &d, Where::Boundary);
        assert!((b.value - std::f64::consts::PI).abs() < 1e-9, "{b:?}");
    }

    #[test]
    fn corner_square_trace() {
        let d = Domain::boxed(&[0.0, 0.0], &[1.0, 1.0], &[16, 16]).unwrap();
        let e = GeometricSet::boxed(&[-1.0, -1.0], &[0.5, 0.5]).intersect(GeometricSet::boxed(&[0.0, 0.0], &[1.0, 1.0]));
        let int = classical_perimeter(&e, &d, Where::Interior);
        let bnd = classical_perimeter(&e, &d, Where::Boundary);
        assert!((int.value - 1.0).abs() < 1e-9, "{int:?}");
        assert!((bnd.value - 1.0).abs() < 1e-9, "{bnd:?}");
        assert!(!bnd.tangential_contact);
    }

    #[test]
    fn tangential_contact_is_flagged() {
        let d = Domain::boxed(&[0.0, 0.0], &[2.0, 2.0], &[16, 16]).unwrap();
        let touching = GeometricSet::ball(&[1.0, 0.5], 0.5);
        assert!(classical_perimeter(&touching, &d, Where::Boundary).tangential_contact);
        let clear = GeometricSet::ball(&[1.0, 1.0], 0.5);
        assert!(!classical_perimeter(&clear, &d, Where::Boundary).tangential_contact);
    }

    #[test]
    fn sphere_perimeter_in_3d() {
        let d = Domain::boxed(&[-1.0; 3], &[1.0; 3], &[24, 24, 24]).unwrap();
        let e = GeometricSet::ball(&[0.0; 3], 0.6);
        let p = classical_perimeter(&e, &d, Where::Interior);
        let exact = 4.0 * std::f64::consts::PI * 0.36;
        assert!((p.value - exact).abs() < 0.02 * exact, "{p:?}");
        let half = GeometricSet::half_space(&[1.0, 0.0, 0.0], 0.0);
        let b = classical_perimeter(&half, &d, Where::Boundary);
        assert!(b.value.abs() < 1e-12);
        let d = Domain::ball(&[0.0; 3], 1.0, &[8, 8, 8], 0.0).unwrap();
        let cap = half.intersect(GeometricSet::ball(&[0.0; 3], 1.0));
        let b = classical_perimeter(&cap, &d, Where::Boundary);
        assert!((b.value - 2.0 * std::f64::consts::PI).abs() < 1e-3, "{b:?}");
    }

    #[test]
    fn level_sets_and_hausdorff() {
        let d = Domain::interval(-1.0, 1.0, 64).unwrap();
        let one = ScalarField::constant(d.clone(), 1.0, None, ValueRange::Symmetric).unwrap();
        assert!(level_set_region(&one, 0.5).unwrap().is_empty());
        let ind = voxelize(&GeometricSet::half_line(0.0), &d);
        assert!(level_set_region(&ind, 0.999_999).unwrap().is_empty());
        let e = GeometricSet::half_line(0.0);
        let mesh = interface_mesh(&e, &d);
        let u = ScalarField::from_fn(d.clone(), None, ValueRange::Symmetric, |p| (p[0] * 4.0).tanh()).unwrap();
        let a = level_set_region(&u, 0.5).unwrap();
        let hd = hausdorff_distance(&a, &mesh);
        assert!(hd <= 0.5f64.atanh() / 4.0 + 1.0 / 64.0, "{hd}");
        let far = VoxelSet {
            grid: d.grid(),
            cells: vec![63],
        };
        assert!((hausdorff_distance(&far, &mesh) - (1.0 - 1.0 / 64.0)).abs() < 1.0 / 32.0);
        assert_eq!(hausdorff_distance(&far, &InterfaceMesh::default()), f64::INFINITY);
    }

    #[test]
    fn density_of_pure_phases_and_profile() {
        let d = Domain::interval(-4.0, 4.0, 400).unwrap();
        let one = ScalarField::constant(d.clone(), 1.0, None, ValueRange::Symmetric).unwrap();
        assert_eq!(density_fraction(&one, 0.0, &[0.0; 3], 2.0).unwrap(), 1.0);
        let m = ScalarField::constant(d.clone(), -1.0, None, ValueRange::Symmetric).unwrap();
        assert_eq!(density_fraction(&m, 0.0, &[0.0; 3], 2.0).unwrap(), 0.0);
        let u = ScalarField::from_fn(d, None, ValueRange::Symmetric, |p| (p[0] * 0.5).tanh()).unwrap();
        let f = density_fraction(&u, 0.0, &[0.0; 3], 3.5).unwrap();
        assert!((f - 0.5).abs() <= 1.0 / 350.0);
        assert!(density_fraction(&u, 0.0, &[0.0; 3], 5.0).is_err());
    }

    #[test]
    fn csv_export() {
        let d = Domain::boxed(&[0.0, 0.0], &[1.0, 1.0], &[8, 8]).unwrap();
        let e = GeometricSet::ball(&[0.0, 0.0], 0.5).intersect(GeometricSet::boxed(&[0.0, 0.0], &[1.0, 1.0]));
        let mesh = interface_mesh(&e, &d);
        let mut buf = Vec::new();
        mesh.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("cx,cy,cz,measure,nx,ny,nz,tag\n"));
        assert!(text.contains(",interior\n") && text.contains(",boundary\n"));
    }

    #[test]
    fn contact_lines() {
        let d = Domain::boxed(&[0.0, 0.0], &[1.0, 1.0], &[8, 8]).unwrap();
        let left = GeometricSet::boxed(&[0.0, 0.0], &[0.5, 1.0]);
        assert_eq!(contact_line_measure(&left, &d).unwrap(), 2.0);
        let blob = GeometricSet::ball(&[0.5, 0.5], 0.2);
        assert_eq!(contact_line_measure(&blob, &d).unwrap(), 0.0);
        let corner = GeometricSet::ball(&[0.0, 0.0], 0.5).intersect(GeometricSet::boxed(&[0.0, 0.0], &[1.0, 1.0]));
        assert_eq!(contact_line_measure(&corner, &d).unwrap(), 2.0);
        let cube = Domain::boxed(&[0.0; 3], &[1.0; 3], &[4, 4, 4]).unwrap();
        let half = GeometricSet::boxed(&[0.0; 3], &[0.5, 1.0, 1.0]);
        let len = contact_line_measure(&half, &cube).unwrap();
        assert!((len - 4.0).abs() < 1e-6, "{len}");
        let ball = Domain::ball(&[0.0; 3], 1.0, &[4, 4, 4], 0.0).unwrap();
        let cap = GeometricSet::half_space(&[0.0, 0.0, 1.0], 0.0).intersect(GeometricSet::ball(&[0.0; 3], 1.0));
        let len = contact_line_measure(&cap, &ball).unwrap();
        assert!((len - std::f64::consts::TAU).abs() < 1e-3, "{len}");
    }

    proptest! {
        #[test]
        fn level_sets_are_nested(a in 0.05f64..0.95, b in 0.05f64..0.95, k in 0.5f64..20.0) {
            let d = Domain::interval(-1.0, 1.0, 50).unwrap();
            let u = ScalarField::from_fn(d, None, ValueRange::Symmetric, |p| (k * p[0]).tanh()).unwrap();
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let small = level_set_region(&u, lo).unwrap();
            let big = level_set_region(&u, hi).unwrap();
            prop_assert!(small.cells.iter().all(|c| big.cells.contains(c)));
        }

        #[test]
        fn density_in_unit_interval(c in -1.0f64..1.0, r in 0.3f64..0.9, th in -0.9f64..0.9) {
            let d = Domain::boxed(&[-2.0, -2.0], &[2.0, 2.0], &[20, 20]).unwrap();
            let u = ScalarField::from_fn(d, None, ValueRange::Symmetric, |p| (3.0 * p[0] - p[1]).sin()).unwrap();
            let f = density_fraction(&u, th, &[c, 0.3, 0.0], r).unwrap();
            prop_assert!((0.0..=1.0).contains(&f));
        }

        #[test]
        fn total_perimeter_stable_under_refinement(r in 0.2f64..0.7, cx in -0.3f64..0.3) {
            let e = GeometricSet::ball(&[cx, 0.1], r);
            let total = |n: usize| {
                let d = Domain::boxed(&[-0.5, -0.5], &[0.5, 0.5], &[n, n]).unwrap();
                classical_perimeter(&e, &d, Where::Interior).value
                    + classical_perimeter(&e, &d, Where::Boundary).value
            };
            let (a, b) = (total(24), total(48));
            prop_assert!((a - b).abs() < 0.05 * b.max(1e-3) + 1.0 / 24.0, "{} {}", a, b);
        }
    }
}
