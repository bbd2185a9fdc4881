//! Analytic sets: half-spaces, boxes and balls combined by union,
//! intersection and complement.

use serde::{Deserialize, Serialize};

use crate::domain::{Point, MAX_DIM};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum GeometricSet {
    Empty,
    Full,
    /// `{x : x·normal < offset}`
    HalfSpace { normal: Vec<f64>, offset: f64 },
    /// Open box; bounds may be infinite.
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
    Union { parts: Vec<GeometricSet> },
    Intersection { parts: Vec<GeometricSet> },
    Complement { inner: std::boxed::Box<GeometricSet> },
}

/// Sorted, disjoint parameter intervals `[a, b]` with `0 <= a < b <= inf`.
pub type Intervals = Vec<(f64, f64)>;

fn get(v: &[f64], k: usize) -> f64 {
    v.get(k).copied().unwrap_or(0.0)
}

impl GeometricSet {
    /// `{x₁ < c}`
    pub fn half_line(c: f64) -> Self {
        GeometricSet::half_space(&[1.0], c)
    }

    pub fn half_space(normal: &[f64], offset: f64) -> Self {
        GeometricSet::HalfSpace {
            normal: normal.to_vec(),
            offset,
        }
    }

    pub fn interval(lo: f64, hi: f64) -> Self {
        GeometricSet::Box {
            lo: vec![lo],
            hi: vec![hi],
        }
    }

    pub fn boxed(lo: &[f64], hi: &[f64]) -> Self {
        GeometricSet::Box {
            lo: lo.to_vec(),
            hi: hi.to_vec(),
        }
    }

    pub fn ball(center: &[f64], radius: f64) -> Self {
        GeometricSet::Ball {
            center: center.to_vec(),
            radius,
        }
    }

    pub fn complement(self) -> Self {
        match self {
            GeometricSet::Complement { inner } => *inner,
            GeometricSet::Empty => GeometricSet::Full,
            GeometricSet::Full => GeometricSet::Empty,
            other => GeometricSet::Complement {
                inner: std::boxed::Box::new(other),
            },
        }
    }

    pub fn union(self, other: GeometricSet) -> Self {
        GeometricSet::Union {
            parts: vec![self, other],
        }
    }

    pub fn intersect(self, other: GeometricSet) -> Self {
        GeometricSet::Intersection {
            parts: vec![self, other],
        }
    }

    pub fn contains(&self, p: &Point) -> bool {
        match self {
            GeometricSet::Empty => false,
            GeometricSet::Full => true,
            GeometricSet::HalfSpace { normal, offset } => {
                let dot: f64 = (0..normal.len()).map(|k| normal[k] * p[k]).sum();
                dot < *offset
            }
            GeometricSet::Box { lo, hi } => (0..lo.len()).all(|k| p[k] > lo[k] && p[k] < hi[k]),
            GeometricSet::Ball { center, radius } => {
                let r2: f64 = (0..center.len()).map(|k| (p[k] - center[k]).powi(2)).sum();
                r2 < radius * radius
            }
            GeometricSet::Union { parts } => parts.iter().any(|s| s.contains(p)),
            GeometricSet::Intersection { parts } => parts.iter().all(|s| s.contains(p)),
            GeometricSet::Complement { inner } => !inner.contains(p),
        }
    }

    /// Signed distance to the boundary, negative inside. Exact for the
    /// primitives; unions, intersections and complements combine by min/max,
    /// which is exact outside unions and inside intersections and a bound
    /// elsewhere.
    pub fn signed_distance(&self, p: &Point, dim: usize) -> f64 {
        match self {
            GeometricSet::Empty => f64::INFINITY,
            GeometricSet::Full => f64::NEG_INFINITY,
            GeometricSet::HalfSpace { normal, offset } => {
                let norm = normal.iter().map(|v| v * v).sum::<f64>().sqrt();
                let dot: f64 = (0..normal.len()).map(|k| normal[k] * p[k]).sum();
                (dot - offset) / norm
            }
            GeometricSet::Box { lo, hi } => {
                let mut outside = 0.0;
                let mut inside = f64::NEG_INFINITY;
                for k in 0..dim.min(lo.len()) {
                    let q = (lo[k] - p[k]).max(p[k] - hi[k]);
                    if q > 0.0 {
                        outside += q * q;
                    }
                    inside = inside.max(q);
                }
                if outside > 0.0 {
                    outside.sqrt()
                } else {
                    inside
                }
            }
            GeometricSet::Ball { center, radius } => {
                let r2: f64 = (0..dim).map(|k| (p[k] - get(center, k)).powi(2)).sum();
                r2.sqrt() - radius
            }
            GeometricSet::Union { parts } => parts
                .iter()
                .map(|s| s.signed_distance(p, dim))
                .fold(f64::INFINITY, f64::min),
            GeometricSet::Intersection { parts } => parts
                .iter()
                .map(|s| s.signed_distance(p, dim))
                .fold(f64::NEG_INFINITY, f64::max),
            GeometricSet::Complement { inner } => -inner.signed_distance(p, dim),
        }
    }

    /// Parameter intervals `t >= 0` for which `origin + t·dir` lies in the set.
    pub fn ray_intervals(&self, origin: &Point, dir: &Point, dim: usize) -> Intervals {
        match self {
            GeometricSet::Empty => Vec::new(),
            GeometricSet::Full => vec![(0.0, f64::INFINITY)],
            GeometricSet::HalfSpace { normal, offset } => {
                let a: f64 = (0..normal.len()).map(|k| normal[k] * dir[k]).sum();
                let b: f64 = offset - (0..normal.len()).map(|k| normal[k] * origin[k]).sum::<f64>();
                if a == 0.0 {
                    if b > 0.0 {
                        vec![(0.0, f64::INFINITY)]
                    } else {
                        Vec::new()
                    }
                } else if a > 0.0 {
                    let t = b / a;
                    if t > 0.0 {
                        vec![(0.0, t)]
                    } else {
                        Vec::new()
                    }
                } else {
                    vec![((b / a).max(0.0), f64::INFINITY)]
                }
            }
            GeometricSet::Box { lo, hi } => {
                let mut t0 = 0.0f64;
                let mut t1 = f64::INFINITY;
                for k in 0..dim.min(lo.len()) {
                    if dir[k] == 0.0 {
                        if !(origin[k] > lo[k] && origin[k] < hi[k]) {
                            return Vec::new();
                        }
                    } else {
                        let a = (lo[k] - origin[k]) / dir[k];
                        let b = (hi[k] - origin[k]) / dir[k];
                        let (a, b) = if a < b { (a, b) } else { (b, a) };
                        t0 = t0.max(a);
                        t1 = t1.min(b);
                    }
                }
                if t1 > t0 {
                    vec![(t0, t1)]
                } else {
                    Vec::new()
                }
            }
            GeometricSet::Ball { center, radius } => {
                let mut dd = 0.0;
                let mut od = 0.0;
                let mut oo = 0.0;
                for k in 0..dim {
                    let o = origin[k] - get(center, k);
                    dd += dir[k] * dir[k];
                    od += o * dir[k];
                    oo += o * o;
                }
                let disc = od * od - dd * (oo - radius * radius);
                if disc <= 0.0 {
                    return Vec::new();
                }
                let sq = disc.sqrt();
                let a = (-od - sq) / dd;
                let b = (-od + sq) / dd;
                if b <= 0.0 {
                    Vec::new()
                } else {
                    vec![(a.max(0.0), b)]
                }
            }
            GeometricSet::Union { parts } => {
                let mut all: Intervals = parts
                    .iter()
                    .flat_map(|s| s.ray_intervals(origin, dir, dim))
                    .collect();
                merge(&mut all);
                all
            }
            GeometricSet::Intersection { parts } => {
                let mut acc = vec![(0.0, f64::INFINITY)];
                for s in parts {
                    acc = intersect(&acc, &s.ray_intervals(origin, dir, dim));
                    if acc.is_empty() {
                        break;
                    }
                }
                acc
            }
            GeometricSet::Complement { inner } => complement(&inner.ray_intervals(origin, dir, dim)),
        }
    }
}

fn merge(v: &mut Intervals) {
    v.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Intervals = Vec::with_capacity(v.len());
    for &(a, b) in v.iter() {
        match out.last_mut() {
            Some(last) if a <= last.1 => last.1 = last.1.max(b),
            _ => out.push((a, b)),
        }
    }
    *v = out;
}

pub(crate) fn intersect(x: &[(f64, f64)], y: &[(f64, f64)]) -> Intervals {
    let mut out = Vec::new();
    let (mut i, mut j) = (0, 0);
    while i < x.len() && j < y.len() {
        let a = x[i].0.max(y[j].0);
        let b = x[i].1.min(y[j].1);
        if b > a {
            out.push((a, b));
        }
        if x[i].1 < y[j].1 {
            i += 1;
        } else {
            j += 1;
        }
    }
    out
}

fn complement(x: &[(f64, f64)]) -> Intervals {
    let mut out = Vec::new();
    let mut t = 0.0;
    for &(a, b) in x {
        if a > t {
            out.push((t, a));
        }
        t = b;
    }
    if t < f64::INFINITY {
        out.push((t, f64::INFINITY));
    }
    out
}

pub(crate) fn point(coords: &[f64]) -> Point {
    let mut p = [0.0; MAX_DIM];
    p[..coords.len()].copy_from_slice(coords);
    p
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn membership_of_combinations() {
        let a = GeometricSet::ball(&[0.0, 0.0], 1.0);
        let b = GeometricSet::half_space(&[1.0, 0.0], 0.0);
        let lens = a.clone().intersect(b.clone());
        assert!(lens.contains(&point(&[-0.5, 0.0])));
        assert!(!lens.contains(&point(&[0.5, 0.0])));
        let u = a.union(b).complement();
        assert!(u.contains(&point(&[2.0, 0.0])));
        assert!(!u.contains(&point(&[-3.0, 0.0])));
    }

    #[test]
    fn signed_distance_primitives() {
        let b = GeometricSet::boxed(&[0.0, 0.0], &[1.0, 1.0]);
        assert!((b.signed_distance(&point(&[0.5, 0.5]), 2) + 0.5).abs() < 1e-15);
        assert!((b.signed_distance(&point(&[2.0, 2.0]), 2) - 2f64.sqrt()).abs() < 1e-15);
        let h = GeometricSet::half_space(&[0.0, 2.0], 2.0);
        assert!((h.signed_distance(&point(&[0.0, 3.0]), 2) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn ray_intervals_match_membership() {
        let s = GeometricSet::ball(&[2.0, 0.0], 1.0)
            .union(GeometricSet::boxed(&[4.0, -1.0], &[5.0, 1.0]))
            .intersect(GeometricSet::half_space(&[1.0, 0.0], 4.5));
        let o = point(&[0.0, 0.0]);
        let d = point(&[1.0, 0.0]);
        let iv = s.ray_intervals(&o, &d, 2);
        assert_eq!(iv.len(), 2);
        assert!((iv[0].0 - 1.0).abs() < 1e-12 && (iv[0].1 - 3.0).abs() < 1e-12);
        assert!((iv[1].0 - 4.0).abs() < 1e-12 && (iv[1].1 - 4.5).abs() < 1e-12);
        for k in 0..200 {
            let t = k as f64 * 0.0311 + 0.001;
            let inside = iv.iter().any(|(a, b)| t > *a && t < *b);
            assert_eq!(inside, s.contains(&point(&[t, 0.0])), "t = {t}");
        }
        let c = s.complement().ray_intervals(&o, &d, 2);
        assert_eq!(c.last().unwrap().1, f64::INFINITY);
    }
}
