//! Translation-invariant weights `w(Δ)` for all cell offsets of a grid.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::pair::{cell_pair, cell_pair_moment};
use crate::domain::{Point, MAX_DIM};
use crate::error::{Error, Result};

/// How weights of touching cell pairs are obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum WeightRule {
    /// Exact pair integrals of the piecewise-constant field; requires `s < 1/2`.
    CellAverage,
    /// Weights that reproduce the energy of affine fields: offsets with
    /// `max|Δ| ≤ 1` are collapsed onto the face neighbours carrying the
    /// near-field second moments, other offsets get
    /// `∫∫ |x−y|^{2−n−2s} / |Δh|²`. Valid for `s ∈ (0, 1)`.
    LinearConsistent,
}

impl WeightRule {
    pub fn auto(s: f64) -> Self {
        if s < 0.5 {
            WeightRule::CellAverage
        } else {
            WeightRule::LinearConsistent
        }
    }

    fn code(self) -> u8 {
        match self {
            WeightRule::CellAverage => 0,
            WeightRule::LinearConsistent => 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PairWeightTable {
    pub dim: usize,
    pub h: Point,
    pub s: f64,
    pub rule: WeightRule,
    pub truncation: Option<f64>,
    /// Entries per axis: offsets `0..extent[k]` in absolute value.
    pub extent: [usize; MAX_DIM],
    values: Vec<f64>,
}

const CACHE_VERSION: u32 = 1;
const MAGIC: &[u8; 6] = b"NLPWT\0";

impl PairWeightTable {
    pub fn build(
        dim: usize,
        h: Point,
        extent: [usize; MAX_DIM],
        s: f64,
        rule: WeightRule,
        truncation: Option<f64>,
    ) -> Result<Self> {
        if !(s > 0.0 && s < 1.0) {
            return Err(Error::OutOfRange {
                name: "s",
                value: s,
                expected: "(0, 1)",
            });
        }
        if rule == WeightRule::CellAverage && s >= 0.5 {
            return Err(Error::OutOfRange {
                name: "s",
                value: s,
                expected: "(0, 1/2) for cell-average weights",
            });
        }
        let mut ext = [1; MAX_DIM];
        ext[..dim].copy_from_slice(&extent[..dim]);
        let len: usize = ext.iter().product();
        let hv = &h[..dim];
        let face: Vec<f64> = if rule == WeightRule::LinearConsistent {
            (0..dim).map(|k| face_weight(dim, hv, s, k)).collect()
        } else {
            Vec::new()
        };
        let unravel = |mut i: usize| {
            let mut d = [0usize; MAX_DIM];
            for k in (0..MAX_DIM).rev() {
                d[k] = i % ext[k];
                i /= ext[k];
            }
            d
        };
        let values: Vec<f64> = (0..len)
            .into_par_iter()
            .map(|i| {
                let d = unravel(i);
                let delta: Vec<f64> = d[..dim].iter().map(|&v| v as f64).collect();
                if let Some(r) = truncation {
                    let dist = (0..dim).map(|k| (delta[k] * h[k]).powi(2)).sum::<f64>().sqrt();
                    if dist > r {
                        return 0.0;
                    }
                }
                let maxd = d[..dim].iter().copied().max().unwrap_or(0);
                if maxd == 0 {
                    return 0.0;
                }
                match rule {
                    WeightRule::CellAverage => cell_pair(&delta, hv, s),
                    WeightRule::LinearConsistent if maxd == 1 => {
                        let ones: Vec<usize> = (0..dim).filter(|&k| d[k] == 1).collect();
                        if ones.len() == 1 {
                            face[ones[0]]
                        } else {
                            0.0
                        }
                    }
                    WeightRule::LinearConsistent => {
                        let r2: f64 = (0..dim).map(|k| (delta[k] * h[k]).powi(2)).sum();
                        cell_pair_moment(&delta, hv, s, None) / r2
                    }
                }
            })
            .collect();
        Ok(PairWeightTable {
            dim,
            h,
            s,
            rule,
            truncation,
            extent: ext,
            values,
        })
    }

    /// Weight for the absolute offset `d`.
    #[inline]
    pub fn get(&self, d: [usize; MAX_DIM]) -> f64 {
        let mut idx = 0;
        for k in 0..MAX_DIM {
            idx = idx * self.extent[k] + d[k];
        }
        self.values[idx]
    }

    #[inline]
    pub fn between(&self, a: [usize; MAX_DIM], b: [usize; MAX_DIM]) -> f64 {
        let mut d = [0; MAX_DIM];
        for k in 0..MAX_DIM {
            d[k] = a[k].abs_diff(b[k]);
        }
        self.get(d)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn key_bytes(&self) -> Vec<u8> {
        let mut k = Vec::new();
        k.extend_from_slice(&CACHE_VERSION.to_le_bytes());
        k.extend_from_slice(&(self.dim as u64).to_le_bytes());
        for v in self.h {
            k.extend_from_slice(&v.to_bits().to_le_bytes());
        }
        for e in self.extent {
            k.extend_from_slice(&(e as u64).to_le_bytes());
        }
        k.extend_from_slice(&self.s.to_bits().to_le_bytes());
        k.push(self.rule.code());
        let t = self.truncation.map_or(u64::MAX, f64::to_bits);
        k.extend_from_slice(&t.to_le_bytes());
        k
    }

    fn cache_path(dir: &Path, key: &[u8]) -> PathBuf {
        // FNV-1a over the key; the full key is stored and checked on load.
        let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
        for b in key {
            hash ^= *b as u64;
            hash = hash.wrapping_mul(0x0100_0000_01b3);
        }
        dir.join(format!("pwt-v{CACHE_VERSION}-{hash:016x}.bin"))
    }

    /// Loads a cached table with identical key, or builds and stores one.
    pub fn cached(
        dir: Option<&Path>,
        dim: usize,
        h: Point,
        extent: [usize; MAX_DIM],
        s: f64,
        rule: WeightRule,
        truncation: Option<f64>,
    ) -> Result<Self> {
        let Some(dir) = dir else {
            return PairWeightTable::build(dim, h, extent, s, rule, truncation);
        };
        let mut ext = [1; MAX_DIM];
        ext[..dim].copy_from_slice(&extent[..dim]);
        let probe = PairWeightTable {
            dim,
            h,
            s,
            rule,
            truncation,
            extent: ext,
            values: Vec::new(),
        };
        let key = probe.key_bytes();
        let path = Self::cache_path(dir, &key);
        if let Ok(mut f) = std::fs::File::open(&path) {
            let mut bytes = Vec::new();
            if f.read_to_end(&mut bytes).is_ok() {
                if let Some(values) = decode(&bytes, &key, ext.iter().product()) {
                    return Ok(PairWeightTable { values, ..probe });
                }
            }
        }
        let table = PairWeightTable::build(dim, h, extent, s, rule, truncation)?;
        std::fs::create_dir_all(dir)?;
        let tmp = path.with_extension("tmp");
        {
            let mut f = std::fs::File::create(&tmp)?;
            f.write_all(MAGIC)?;
            f.write_all(&(key.len() as u32).to_le_bytes())?;
            f.write_all(&key)?;
            let mut buf = Vec::with_capacity(8 * table.values.len());
            for v in &table.values {
                buf.extend_from_slice(&v.to_le_bytes());
            }
            f.write_all(&buf)?;
        }
        std::fs::rename(&tmp, &path)?;
        Ok(table)
    }
}

fn decode(bytes: &[u8], key: &[u8], len: usize) -> Option<Vec<f64>> {
    let rest = bytes.strip_prefix(MAGIC.as_slice())?;
    let (klen, rest) = rest.split_at_checked(4)?;
    let klen = u32::from_le_bytes(klen.try_into().ok()?) as usize;
    let (k, rest) = rest.split_at_checked(klen)?;
    if k != key || rest.len() != 8 * len {
        return None;
    }
    Some(
        rest.chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect(),
    )
}

/// Face-neighbour weight along axis `k` reproducing the near-field second
/// moment `Σ_{max|Δ|≤1} ∫∫ (x_k−y_k)² |x−y|^{−(n+2s)}` (self pair included).
pub(crate) fn face_weight(dim: usize, h: &[f64], s: f64, k: usize) -> f64 {
    let mut total = 0.0;
    let count = 3usize.pow(dim as u32);
    for c in 0..count {
        let mut rem = c;
        let mut delta = vec![0.0; dim];
        for d in delta.iter_mut() {
            *d = (rem % 3) as f64 - 1.0;
            rem /= 3;
        }
        total += cell_pair_moment(&delta, h, s, Some(k));
    }
    total / (2.0 * h[k] * h[k])
}
