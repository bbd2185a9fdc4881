//! Singular double integrals with kernel `|x−y|^{−(n+2s)}`: set
//! interactions, fractional perimeters, the field kernels `K^int`/`K^ext`
//! and the `W^{2s,1}` seminorm.

pub mod exterior;
pub mod pair;
pub mod table;

use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use exterior::{ExteriorCoupling, TailRule};
pub use table::{PairWeightTable, WeightRule};

use crate::domain::{Domain, Shape, MAX_DIM};
use crate::error::{Error, Result};
use crate::field::{ExteriorDatum, ScalarField};
use crate::set::GeometricSet;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Part {
    Interior,
    Exterior,
    Full,
}

impl std::str::FromStr for Part {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "interior" => Ok(Part::Interior),
            "exterior" => Ok(Part::Exterior),
            "full" => Ok(Part::Full),
            _ => Err(Error::Unsupported(format!("part `{s}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelMode {
    /// `|u(x)−u(y)|²`
    Squared,
    /// `|u(x)−u(y)|`
    Absolute,
    /// `χ_E(x) χ_F(y)`
    Indicator,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    pub s: f64,
    pub mode: KernelMode,
    /// Pairs farther apart than this are dropped, and so is the far tail.
    #[serde(default)]
    pub truncation: Option<f64>,
    /// Defaults to [`WeightRule::auto`].
    #[serde(default)]
    pub rule: Option<WeightRule>,
    /// Defaults to [`TailRule::for_dim`].
    #[serde(default)]
    pub tail: Option<TailRule>,
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
}

impl KernelSpec {
    pub fn new(s: f64, mode: KernelMode) -> Self {
        KernelSpec {
            s,
            mode,
            truncation: None,
            rule: None,
            tail: None,
            cache_dir: None,
        }
    }

    pub fn squared(s: f64) -> Self {
        KernelSpec::new(s, KernelMode::Squared)
    }

    pub fn indicator(s: f64) -> Self {
        KernelSpec::new(s, KernelMode::Indicator)
    }

    pub fn with_rule(mut self, rule: WeightRule) -> Self {
        self.rule = Some(rule);
        self
    }

    pub fn with_cache(mut self, dir: Option<PathBuf>) -> Self {
        self.cache_dir = dir;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self.mode {
            KernelMode::Indicator => self.s > 0.0 && self.s < 0.5,
            _ => self.s > 0.0 && self.s < 1.0,
        };
        if !ok {
            return Err(Error::OutOfRange {
                name: "s",
                value: self.s,
                expected: if self.mode == KernelMode::Indicator {
                    "(0, 1/2) for set interactions"
                } else {
                    "(0, 1)"
                },
            });
        }
        if let Some(r) = self.truncation {
            if !(r > 0.0) {
                return Err(Error::OutOfRange {
                    name: "truncation",
                    value: r,
                    expected: "> 0",
                });
            }
        }
        Ok(())
    }

    pub fn effective_rule(&self) -> WeightRule {
        self.rule.unwrap_or_else(|| WeightRule::auto(self.s))
    }
}

/// A pair table together with the interior cell list and, when an exterior
/// datum is given, its coupling; evaluates all pair sums of one grid.
#[derive(Clone, Debug)]
pub struct NonlocalOperator {
    domain: Domain,
    mask: Vec<bool>,
    table: PairWeightTable,
    interior: Vec<usize>,
    coords: Vec<[usize; MAX_DIM]>,
    exterior: Option<ExteriorCoupling>,
}

impl NonlocalOperator {
    pub fn new(domain: &Domain, spec: &KernelSpec, datum: Option<&ExteriorDatum>) -> Result<Self> {
        spec.validate()?;
        let grid = domain.grid();
        let mask = domain.mask();
        let mut extent = grid.n;
        if datum.is_some() {
            let m = domain.margin_cells();
            for k in 0..grid.dim {
                extent[k] += m[k];
            }
        }
        let table = PairWeightTable::cached(
            spec.cache_dir.as_deref(),
            grid.dim,
            grid.h,
            extent,
            spec.s,
            spec.effective_rule(),
            spec.truncation,
        )?;
        let interior: Vec<usize> = (0..grid.len()).filter(|&i| mask[i]).collect();
        let coords = interior.iter().map(|&i| grid.unravel(i)).collect();
        let tail = spec.tail.unwrap_or_else(|| TailRule::for_dim(grid.dim));
        let exterior = datum.map(|d| ExteriorCoupling::build(domain, &mask, d, &table, &tail));
        Ok(NonlocalOperator {
            domain: domain.clone(),
            mask,
            table,
            interior,
            coords,
            exterior,
        })
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn table(&self) -> &PairWeightTable {
        &self.table
    }

    pub fn coupling(&self) -> Option<&ExteriorCoupling> {
        self.exterior.as_ref()
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    /// `Σ_{i<j} f(i, j) w_ij` over interior pairs, reduced row by row in
    /// index order.
    fn upper_sum(&self, f: impl Fn(usize, usize) -> f64 + Sync) -> f64 {
        let rows: Vec<f64> = (0..self.interior.len())
            .into_par_iter()
            .map(|a| {
                let ca = self.coords[a];
                let ia = self.interior[a];
                let mut acc = 0.0;
                for b in a + 1..self.interior.len() {
                    let v = f(ia, self.interior[b]);
                    if v != 0.0 {
                        acc += v * self.table.between(ca, self.coords[b]);
                    }
                }
                acc
            })
            .collect();
        rows.iter().sum()
    }

    /// `K^int = ∬_{Ω×Ω} |u(x)−u(y)|² K` over ordered pairs.
    pub fn kinetic_interior(&self, u: &[f64]) -> f64 {
        2.0 * self.upper_sum(|i, j| {
            let d = u[i] - u[j];
            d * d
        })
    }

    /// `∬_{Ω×Ω} |u(x)−u(y)| K` over ordered pairs.
    pub fn absolute_interior(&self, u: &[f64]) -> f64 {
        2.0 * self.upper_sum(|i, j| (u[i] - u[j]).abs())
    }

    /// `I_s(E∩Ω, Ω∖E)` for the cell indicator `in_e`.
    pub fn perimeter_interior(&self, in_e: &[bool]) -> f64 {
        self.upper_sum(|i, j| if in_e[i] != in_e[j] { 1.0 } else { 0.0 })
    }

    /// `I_s(E, F)` over interior cells; the sets must not share a cell.
    pub fn interaction(&self, in_e: &[bool], in_f: &[bool]) -> f64 {
        self.upper_sum(|i, j| {
            if (in_e[i] && in_f[j]) || (in_f[i] && in_e[j]) {
                1.0
            } else {
                0.0
            }
        })
    }

    fn coupling_or_err(&self) -> Result<&ExteriorCoupling> {
        self.exterior.as_ref().ok_or(Error::MissingExterior)
    }

    /// `K^ext = 2∬_{Ω×𝒞Ω} |u(x)−u(y)|² K`.
    pub fn kinetic_exterior(&self, u: &[f64]) -> Result<f64> {
        let c = self.coupling_or_err()?;
        let mut acc = 0.0;
        for &i in &self.interior {
            let (di, do_) = (u[i] - c.v_in, u[i] - c.v_out);
            acc += di * di * c.a_in[i] + do_ * do_ * c.a_out[i];
        }
        Ok(2.0 * acc)
    }

    /// `I_s(E∩𝒞Ω, Ω∖E) + I_s(E∩Ω, 𝒞Ω∖E)`; requires the coupling to have
    /// been built with the indicator datum of `E`.
    pub fn perimeter_exterior(&self, in_e: &[bool]) -> Result<f64> {
        let c = self.coupling_or_err()?;
        let mut acc = 0.0;
        for &i in &self.interior {
            acc += if in_e[i] { c.a_out[i] } else { c.a_in[i] };
        }
        Ok(acc)
    }

    /// Gradient of [`Self::kinetic_interior`] per bounding-grid cell.
    pub fn gradient_interior(&self, u: &[f64]) -> Vec<f64> {
        let rows: Vec<f64> = (0..self.interior.len())
            .into_par_iter()
            .map(|a| {
                let ca = self.coords[a];
                let ua = u[self.interior[a]];
                let mut acc = 0.0;
                for b in 0..self.interior.len() {
                    if b != a {
                        acc += self.table.between(ca, self.coords[b]) * (ua - u[self.interior[b]]);
                    }
                }
                4.0 * acc
            })
            .collect();
        let mut g = vec![0.0; u.len()];
        for (a, &i) in self.interior.iter().enumerate() {
            g[i] = rows[a];
        }
        g
    }

    pub fn gradient_exterior(&self, u: &[f64]) -> Result<Vec<f64>> {
        let c = self.coupling_or_err()?;
        let mut g = vec![0.0; u.len()];
        for &i in &self.interior {
            g[i] = 4.0 * ((u[i] - c.v_in) * c.a_in[i] + (u[i] - c.v_out) * c.a_out[i]);
        }
        Ok(g)
    }

    /// Diagonal of the Hessian of `K^int + K^ext` (without the exterior
    /// part if there is no coupling).
    pub fn hessian_diagonal(&self, with_exterior: bool) -> Vec<f64> {
        let n = self.mask.len();
        let rows: Vec<f64> = (0..self.interior.len())
            .into_par_iter()
            .map(|a| {
                let ca = self.coords[a];
                let mut acc = 0.0;
                for b in 0..self.interior.len() {
                    if b != a {
                        acc += self.table.between(ca, self.coords[b]);
                    }
                }
                4.0 * acc
            })
            .collect();
        let mut d = vec![0.0; n];
        for (a, &i) in self.interior.iter().enumerate() {
            d[i] = rows[a];
            if with_exterior {
                if let Some(c) = &self.exterior {
                    d[i] += 4.0 * (c.a_in[i] + c.a_out[i]);
                }
            }
        }
        d
    }
}

fn cells_of(set: &GeometricSet, domain: &Domain) -> Vec<bool> {
    let g = domain.grid();
    (0..g.len()).map(|i| set.contains(&g.center(i))).collect()
}

/// `I_s(E, F) = ∬_{E×F} |x−y|^{−(n+2s)}`, sampled on the cells of `domain`.
pub fn interaction(e: &GeometricSet, f: &GeometricSet, spec: &KernelSpec, domain: &Domain) -> Result<f64> {
    if spec.mode != KernelMode::Indicator {
        return Err(Error::Unsupported("interaction needs an indicator kernel".into()));
    }
    spec.validate()?;
    let mask = domain.mask();
    let in_e = cells_of(e, domain);
    let in_f = cells_of(f, domain);
    let overlap = (0..mask.len()).filter(|&i| mask[i] && in_e[i] && in_f[i]).count();
    if overlap > 0 {
        return Err(Error::Overlapping { cells: overlap });
    }
    let op = NonlocalOperator::new(domain, spec, None)?;
    Ok(op.interaction(&in_e, &in_f))
}

/// Interior, exterior or full fractional perimeter of `E` relative to `omega`.
pub fn frac_perimeter(e: &GeometricSet, omega: &Domain, s: f64, part: Part) -> Result<f64> {
    frac_perimeter_with(e, omega, &KernelSpec::indicator(s), part)
}

pub fn frac_perimeter_with(e: &GeometricSet, omega: &Domain, spec: &KernelSpec, part: Part) -> Result<f64> {
    let mut spec = spec.clone();
    spec.mode = KernelMode::Indicator;
    spec.rule = Some(WeightRule::CellAverage);
    spec.validate()?;
    let datum = ExteriorDatum::indicator(e.clone());
    let op = NonlocalOperator::new(omega, &spec, (part != Part::Interior).then_some(&datum))?;
    let in_e = cells_of(e, omega);
    op.perimeter(&in_e, part)
}

impl NonlocalOperator {
    pub fn perimeter(&self, in_e: &[bool], part: Part) -> Result<f64> {
        Ok(match part {
            Part::Interior => self.perimeter_interior(in_e),
            Part::Exterior => self.perimeter_exterior(in_e)?,
            Part::Full => self.perimeter_interior(in_e) + self.perimeter_exterior(in_e)?,
        })
    }

    pub fn kinetic(&self, u: &[f64], part: Part) -> Result<f64> {
        Ok(match part {
            Part::Interior => self.kinetic_interior(u),
            Part::Exterior => self.kinetic_exterior(u)?,
            Part::Full => self.kinetic_interior(u) + self.kinetic_exterior(u)?,
        })
    }
}

/// `K^int`, `K^ext` or `K = K^int + K^ext` of a field.
pub fn field_kernel(u: &ScalarField, omega: &Domain, s: f64, part: Part) -> Result<f64> {
    field_kernel_with(u, omega, &KernelSpec::squared(s), part)
}

pub fn field_kernel_with(u: &ScalarField, omega: &Domain, spec: &KernelSpec, part: Part) -> Result<f64> {
    check_field_domain(u, omega)?;
    let datum = match part {
        Part::Interior => None,
        _ => Some(u.exterior().ok_or(Error::MissingExterior)?),
    };
    let mut spec = spec.clone();
    spec.mode = KernelMode::Squared;
    let op = NonlocalOperator::new(omega, &spec, datum)?;
    op.kinetic(u.values(), part)
}

/// `|u|_{W^{2s,1}(Ω)} = ∬_{Ω×Ω} |u(x)−u(y)| / |x−y|^{n+2s}`.
///
/// On 1D boxes the weights are first moments, `w(Δ) = ∬ |x−y|^{−2s} / (|Δ| h)`
/// over the cell pair, and each cell's self-moment is split over its faces;
/// the rule is exact for affine fields. Elsewhere cell averages are used,
/// which miss the diagonal part (`O(h^{1−2s})` relative).
pub fn bbm_seminorm(u: &ScalarField, omega: &Domain, s: f64) -> Result<f64> {
    check_field_domain(u, omega)?;
    if !(s > 0.0 && s < 0.5) {
        return Err(Error::OutOfRange {
            name: "s",
            value: s,
            expected: "(0, 1/2)",
        });
    }
    if let (1, Shape::Box { .. }) = (omega.dim(), &omega.shape) {
        return Ok(bbm_first_moment(u.values(), omega.grid().h[0], s));
    }
    let mut spec = KernelSpec::new(s, KernelMode::Absolute);
    spec.rule = Some(WeightRule::CellAverage);
    let op = NonlocalOperator::new(omega, &spec, None)?;
    Ok(op.absolute_interior(u.values()))
}

fn bbm_first_moment(v: &[f64], h: f64, s: f64) -> f64 {
    let n = v.len();
    // Second antiderivative of |t|^{−2s}; M(Δ) = F(Δh+h) − 2F(Δh) + F(Δh−h).
    let f = |t: f64| t.abs().powf(2.0 - 2.0 * s) / ((1.0 - 2.0 * s) * (2.0 - 2.0 * s));
    let moment = |d: usize| {
        let t = d as f64 * h;
        f(t + h) - 2.0 * f(t) + f(t - h)
    };
    let w: Vec<f64> = (0..n).map(|d| if d == 0 { 0.0 } else { moment(d) / (d as f64 * h) }).collect();
    let self_moment = moment(0) / h;
    let rows: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut acc = 0.0;
            for j in i + 1..n {
                acc += w[j - i] * (v[i] - v[j]).abs();
            }
            if i + 1 < n {
                let share = |c: usize| if c == 0 || c == n - 1 { 1.0 } else { 0.5 };
                acc += 0.5 * self_moment * (share(i) + share(i + 1)) * (v[i] - v[i + 1]).abs();
            }
            acc
        })
        .collect();
    2.0 * rows.iter().sum::<f64>()
}

pub(crate) fn check_field_domain(u: &ScalarField, omega: &Domain) -> Result<()> {
    if u.grid() != &omega.grid() || u.domain().shape != omega.shape {
        return Err(Error::ShapeMismatch("field does not live on this domain".into()));
    }
    Ok(())
}
