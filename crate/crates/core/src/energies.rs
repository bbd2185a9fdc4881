//! Energy functionals evaluated on grid fields and sets, with the
//! `ε`-scalings of the interior, exterior and full nonlocal energies.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::domain::{Domain, Point, Shape, MAX_DIM};
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::kernels::{check_field_domain, frac_perimeter_with, KernelSpec, NonlocalOperator, Part, WeightRule};
use crate::local_geometry::{boundary_trace, classical_perimeter, contact_line_measure, Where};
use crate::set::GeometricSet;
use crate::well::DoubleWell;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Functional {
    #[serde(rename = "MM")]
    ModicaMortola,
    #[serde(rename = "F_int")]
    FInt,
    #[serde(rename = "F_ext")]
    FExt,
    #[serde(rename = "F_full")]
    FFull,
    #[serde(rename = "J_raw")]
    JRaw,
    #[serde(rename = "CAPILLARY_LOCAL")]
    CapillaryLocal,
    #[serde(rename = "CAPILLARY_FRAC")]
    CapillaryFrac,
    #[serde(rename = "J_eps_s")]
    JEpsS,
    #[serde(rename = "BOUNDARY_MODICA")]
    BoundaryModica,
    #[serde(rename = "ABS_1D")]
    Abs1d,
    #[serde(rename = "PHI_LINE")]
    PhiLine,
    #[serde(rename = "G_SHARP")]
    GSharp,
}

impl Functional {
    pub const ALL: [Functional; 12] = [
        Functional::ModicaMortola,
        Functional::FInt,
        Functional::FExt,
        Functional::FFull,
        Functional::JRaw,
        Functional::CapillaryLocal,
        Functional::CapillaryFrac,
        Functional::JEpsS,
        Functional::BoundaryModica,
        Functional::Abs1d,
        Functional::PhiLine,
        Functional::GSharp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Functional::ModicaMortola => "MM",
            Functional::FInt => "F_int",
            Functional::FExt => "F_ext",
            Functional::FFull => "F_full",
            Functional::JRaw => "J_raw",
            Functional::CapillaryLocal => "CAPILLARY_LOCAL",
            Functional::CapillaryFrac => "CAPILLARY_FRAC",
            Functional::JEpsS => "J_eps_s",
            Functional::BoundaryModica => "BOUNDARY_MODICA",
            Functional::Abs1d => "ABS_1D",
            Functional::PhiLine => "PHI_LINE",
            Functional::GSharp => "G_SHARP",
        }
    }

    /// Functionals whose argument is a set (or a pair of phase fields) and
    /// which have no gradient with respect to a continuous field.
    pub fn acts_on_sets(self) -> bool {
        matches!(
            self,
            Functional::CapillaryLocal | Functional::CapillaryFrac | Functional::PhiLine | Functional::GSharp
        )
    }
}

impl fmt::Display for Functional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Functional {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Functional::ALL
            .into_iter()
            .find(|t| t.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Unsupported(format!("functional `{s}`")))
    }
}

/// Boundary weight `λ_ε`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
#[derive(Default)]
pub enum LambdaSchedule {
    One,
    Fixed { value: f64 },
    /// `e^{k/ε}`, so that `ε log λ_ε = k` for every `ε`.
    #[default]
    Exponential,
    /// `ε^{−1} |log ε|^{−1}`.
    LogInverse,
}

impl LambdaSchedule {
    pub fn value(self, eps: f64, k: f64) -> f64 {
        match self {
            LambdaSchedule::One => 1.0,
            LambdaSchedule::Fixed { value } => value,
            LambdaSchedule::Exponential => (k / eps).exp(),
            LambdaSchedule::LogInverse => 1.0 / (eps * eps.ln().abs()),
        }
    }
}


/// Weights of `K^int` or `K^ext` and of `∫W` in one of `F_ε^int`,
/// `F_ε^ext` (the potential weight is the one each part carries).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegimeWeights {
    pub kinetic: f64,
    pub potential: f64,
}

pub fn regime_weights(s: f64, eps: f64) -> Result<RegimeWeights> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::OutOfRange {
            name: "s",
            value: s,
            expected: "(0, 1)",
        });
    }
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::OutOfRange {
            name: "eps",
            value: eps,
            expected: "> 0",
        });
    }
    Ok(if s < 0.5 {
        RegimeWeights {
            kinetic: 1.0,
            potential: 0.5 * eps.powf(-2.0 * s),
        }
    } else if s == 0.5 {
        if eps >= 1.0 {
            return Err(Error::OutOfRange {
                name: "eps",
                value: eps,
                expected: "(0, 1) when s = 1/2",
            });
        }
        let l = eps.ln().abs();
        RegimeWeights {
            kinetic: 1.0 / l,
            potential: 0.5 / (eps * l),
        }
    } else {
        RegimeWeights {
            kinetic: eps.powf(2.0 * s - 1.0),
            potential: 0.5 / eps,
        }
    })
}

fn default_sigma() -> f64 {
    1.0
}

fn default_k() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergySpec {
    pub functional: Functional,
    pub eps: f64,
    pub s: f64,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default = "default_k")]
    pub k: f64,
    /// Line tension coefficient `c`.
    #[serde(default)]
    pub c: f64,
    #[serde(default)]
    pub well: DoubleWell,
    /// Boundary potential `V`; absent means `V ≡ 0`.
    #[serde(default)]
    pub boundary_well: Option<DoubleWell>,
    #[serde(default)]
    pub lambda: LambdaSchedule,
    #[serde(default)]
    pub truncation: Option<f64>,
}

impl EnergySpec {
    pub fn new(functional: Functional, eps: f64, s: f64) -> Self {
        EnergySpec {
            functional,
            eps,
            s,
            sigma: 1.0,
            k: 1.0,
            c: 0.0,
            well: DoubleWell::quartic(),
            boundary_well: None,
            lambda: LambdaSchedule::Exponential,
            truncation: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |name, value, expected| Err(Error::OutOfRange { name, value, expected });
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return bad("eps", self.eps, "> 0");
        }
        if !(self.s > 0.0 && self.s < 1.0) {
            return bad("s", self.s, "(0, 1)");
        }
        if !(-1.0..=1.0).contains(&self.sigma) {
            return bad("sigma", self.sigma, "[-1, 1]");
        }
        if !(self.k > 0.0 && self.k.is_finite()) {
            return bad("k", self.k, "(0, inf)");
        }
        Ok(())
    }

    /// Regime weights, for the scaled nonlocal functionals only.
    pub fn regime(&self) -> Option<Result<RegimeWeights>> {
        matches!(self.functional, Functional::FInt | Functional::FExt | Functional::FFull)
            .then(|| regime_weights(self.s, self.eps))
    }

    pub fn lambda_value(&self) -> f64 {
        self.lambda.value(self.eps, self.k)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub total: f64,
    pub kinetic: f64,
    pub potential: f64,
    pub boundary: f64,
    /// For the full scaled energy: the potential term as carried by each of
    /// the interior and exterior parts, whose sum is `potential`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub potential_per_part: Option<f64>,
}

impl EnergyBreakdown {
    pub fn new(kinetic: f64, potential: f64, boundary: f64) -> Self {
        EnergyBreakdown {
            total: kinetic + potential + boundary,
            kinetic,
            potential,
            boundary,
            potential_per_part: None,
        }
    }

    pub const CSV_HEADER: &'static str = "tag,eps,s,sigma,k,kinetic,potential,boundary,total";

    pub fn csv_row(&self, spec: &EnergySpec) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            spec.functional, spec.eps, spec.s, spec.sigma, spec.k, self.kinetic, self.potential, self.boundary, self.total
        )
    }
}

/// `∫_Ω W(u)` by cell sum.
pub fn potential_integral(u: &ScalarField, well: &DoubleWell) -> f64 {
    potential_sum(u.values(), u.mask(), well) * u.grid().cell_volume()
}

fn potential_sum(values: &[f64], mask: &[bool], well: &DoubleWell) -> f64 {
    values
        .iter()
        .zip(mask)
        .filter(|(_, &m)| m)
        .map(|(&v, _)| well.value(v))
        .sum()
}

/// `∫_Ω |∇u|²` from differences across the faces shared by two cells of
/// `Ω` (no flux through `∂Ω`).
pub fn dirichlet_integral(u: &ScalarField) -> f64 {
    dirichlet_values(u.grid(), u.mask(), u.values())
}

pub(crate) fn dirichlet_values(grid: &crate::domain::Grid, mask: &[bool], v: &[f64]) -> f64 {
    let vol = grid.cell_volume();
    let mut total = 0.0;
    for i in 0..grid.len() {
        if !mask[i] {
            continue;
        }
        let c = grid.unravel(i);
        for k in 0..grid.dim {
            if c[k] + 1 >= grid.n[k] {
                continue;
            }
            let mut q = c;
            q[k] += 1;
            let j = grid.ravel(q);
            if mask[j] {
                let d = (v[j] - v[i]) / grid.h[k];
                total += d * d * vol;
            }
        }
    }
    total
}

/// Gradient of [`dirichlet_values`] with respect to every cell value.
pub(crate) fn dirichlet_gradient(grid: &crate::domain::Grid, mask: &[bool], v: &[f64]) -> Vec<f64> {
    let vol = grid.cell_volume();
    let mut g = vec![0.0; v.len()];
    for i in 0..grid.len() {
        if !mask[i] {
            continue;
        }
        let c = grid.unravel(i);
        for k in 0..grid.dim {
            if c[k] + 1 >= grid.n[k] {
                continue;
            }
            let mut q = c;
            q[k] += 1;
            let j = grid.ravel(q);
            if mask[j] {
                let d = 2.0 * (v[i] - v[j]) * vol / (grid.h[k] * grid.h[k]);
                g[i] += d;
                g[j] -= d;
            }
        }
    }
    g
}

/// Diagonal of the Hessian of [`dirichlet_values`].
pub(crate) fn dirichlet_diagonal(grid: &crate::domain::Grid, mask: &[bool]) -> Vec<f64> {
    let vol = grid.cell_volume();
    let mut g = vec![0.0; grid.len()];
    for i in 0..grid.len() {
        if !mask[i] {
            continue;
        }
        let c = grid.unravel(i);
        for k in 0..grid.dim {
            if c[k] + 1 >= grid.n[k] {
                continue;
            }
            let mut q = c;
            q[k] += 1;
            let j = grid.ravel(q);
            if mask[j] {
                let d = 2.0 * vol / (grid.h[k] * grid.h[k]);
                g[i] += d;
                g[j] += d;
            }
        }
    }
    g
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps.is_finite() {
        Ok(())
    } else {
        Err(Error::OutOfRange {
            name: "eps",
            value: eps,
            expected: "> 0",
        })
    }
}

/// `F_ε(u) = ε ∫|∇u|² + ε^{−1} ∫W(u)`.
pub fn modica_mortola(u: &ScalarField, omega: &Domain, eps: f64, well: &DoubleWell) -> Result<EnergyBreakdown> {
    check_field_domain(u, omega)?;
    check_eps(eps)?;
    Ok(EnergyBreakdown::new(
        eps * dirichlet_integral(u),
        potential_integral(u, well) / eps,
        0.0,
    ))
}

/// `a_int K^int + a_ext K^ext + b ∫_Ω W(u)` on a fixed grid, reusable across
/// evaluations; covers the scaled `F_ε` parts, `J_ε`, `𝓙_{ε,s}` and `𝓖¹_ε`.
#[derive(Clone, Debug)]
pub struct NonlocalEnergy {
    op: NonlocalOperator,
    pub a_int: f64,
    pub a_ext: f64,
    pub b: f64,
    pub well: DoubleWell,
    per_part: Option<f64>,
}

impl NonlocalEnergy {
    pub fn new(
        omega: &Domain,
        kernel: &KernelSpec,
        datum: Option<&crate::field::ExteriorDatum>,
        a_int: f64,
        a_ext: f64,
        b: f64,
        well: DoubleWell,
    ) -> Result<Self> {
        let datum = if a_ext != 0.0 {
            Some(datum.ok_or(Error::MissingExterior)?)
        } else {
            None
        };
        Ok(NonlocalEnergy {
            op: NonlocalOperator::new(omega, kernel, datum)?,
            a_int,
            a_ext,
            b,
            well,
            per_part: None,
        })
    }

    /// `F_ε^int`, `F_ε^ext` or `F_ε = F_ε^int + F_ε^ext`.
    pub fn scaled(
        omega: &Domain,
        kernel: &KernelSpec,
        datum: Option<&crate::field::ExteriorDatum>,
        eps: f64,
        part: Part,
        well: DoubleWell,
    ) -> Result<Self> {
        let w = regime_weights(kernel.s, eps)?;
        let (a_int, a_ext, b) = match part {
            Part::Interior => (w.kinetic, 0.0, w.potential),
            Part::Exterior => (0.0, w.kinetic, w.potential),
            Part::Full => (w.kinetic, w.kinetic, 2.0 * w.potential),
        };
        let mut e = NonlocalEnergy::new(omega, kernel, datum, a_int, a_ext, b, well)?;
        if part == Part::Full {
            e.per_part = Some(w.potential);
        }
        // The pure exterior part still carries its own potential term.
        Ok(e)
    }

    /// `𝓙_{ε,s} = K^int + σ K^ext + ε^{−2s} ∫W`, for `s < 1/2`.
    pub fn j_eps_s(
        omega: &Domain,
        kernel: &KernelSpec,
        datum: Option<&crate::field::ExteriorDatum>,
        eps: f64,
        sigma: f64,
        well: DoubleWell,
    ) -> Result<Self> {
        check_eps(eps)?;
        if !(kernel.s > 0.0 && kernel.s < 0.5) {
            return Err(Error::OutOfRange {
                name: "s",
                value: kernel.s,
                expected: "(0, 1/2)",
            });
        }
        NonlocalEnergy::new(omega, kernel, datum, 1.0, sigma, eps.powf(-2.0 * kernel.s), well)
    }

    /// `J_ε = ε^{2s} K + ∫W`.
    pub fn j_raw(
        omega: &Domain,
        kernel: &KernelSpec,
        datum: Option<&crate::field::ExteriorDatum>,
        eps: f64,
        well: DoubleWell,
    ) -> Result<Self> {
        check_eps(eps)?;
        let w = eps.powf(2.0 * kernel.s);
        NonlocalEnergy::new(omega, kernel, datum, w, w, 1.0, well)
    }

    /// `𝓖¹_ε = ε^{2s} ∬_{Ω×Ω} |v(x)−v(y)|² / |x−y|^{1+2s} + λ_ε ∫W(v)`
    /// with `λ_ε = e^{k/ε}`; `s = 1/2` is the `|x−y|^{−2}` kernel.
    pub fn abs_1d(omega: &Domain, eps: f64, k: f64, s: f64, well: DoubleWell) -> Result<Self> {
        check_eps(eps)?;
        if omega.dim() != 1 {
            return Err(Error::Unsupported("the one-dimensional boundary energy needs n = 1".into()));
        }
        if !(0.5..1.0).contains(&s) {
            return Err(Error::OutOfRange {
                name: "s",
                value: s,
                expected: "[1/2, 1)",
            });
        }
        let kernel = KernelSpec::squared(s).with_rule(WeightRule::LinearConsistent);
        let lambda = LambdaSchedule::Exponential.value(eps, k);
        NonlocalEnergy::new(omega, &kernel, None, eps.powf(2.0 * s), 0.0, lambda, well)
    }

    pub fn operator(&self) -> &NonlocalOperator {
        &self.op
    }

    pub fn evaluate(&self, u: &ScalarField) -> Result<EnergyBreakdown> {
        check_field_domain(u, self.op.domain())?;
        self.evaluate_values(u.values())
    }

    /// Evaluates on the bounding-grid values (cells outside `Ω` ignored).
    pub fn evaluate_values(&self, v: &[f64]) -> Result<EnergyBreakdown> {
        let mut kinetic = 0.0;
        if self.a_int != 0.0 {
            kinetic += self.a_int * self.op.kinetic_interior(v);
        }
        if self.a_ext != 0.0 {
            kinetic += self.a_ext * self.op.kinetic_exterior(v)?;
        }
        let pot = potential_sum(v, self.op.mask(), &self.well) * self.op.domain().cell_volume();
        let mut out = EnergyBreakdown::new(kinetic, self.b * pot, 0.0);
        out.potential_per_part = self.per_part.map(|w| w * pot);
        Ok(out)
    }

    pub fn gradient_values(&self, v: &[f64]) -> Result<Vec<f64>> {
        let mask = self.op.mask();
        let mut g = vec![0.0; v.len()];
        if self.a_int != 0.0 {
            for (gi, x) in g.iter_mut().zip(self.op.gradient_interior(v)) {
                *gi += self.a_int * x;
            }
        }
        if self.a_ext != 0.0 {
            for (gi, x) in g.iter_mut().zip(self.op.gradient_exterior(v)?) {
                *gi += self.a_ext * x;
            }
        }
        let vol = self.op.domain().cell_volume();
        for i in 0..v.len() {
            if mask[i] {
                g[i] += self.b * self.well.derivative(v[i]) * vol;
            }
        }
        Ok(g)
    }

    /// Diagonal of the quadratic (kinetic) part of the Hessian.
    pub fn kinetic_diagonal(&self) -> Vec<f64> {
        let di = self.op.hessian_diagonal(false);
        if self.a_ext == 0.0 {
            return di.into_iter().map(|x| self.a_int * x).collect();
        }
        let full = self.op.hessian_diagonal(true);
        di.iter()
            .zip(full)
            .map(|(&a, f)| self.a_int * a + self.a_ext * (f - a))
            .collect()
    }
}

fn datum_for(u: &ScalarField, part: Part) -> Result<Option<&crate::field::ExteriorDatum>> {
    match part {
        Part::Interior => Ok(None),
        _ => u.exterior().map(Some).ok_or(Error::MissingExterior),
    }
}

/// `F_ε^int`, `F_ε^ext` or `F_ε`; the full energy carries one potential
/// term whose weight is the sum of the two part weights.
pub fn scaled_nonlocal(
    u: &ScalarField,
    omega: &Domain,
    eps: f64,
    s: f64,
    part: Part,
    well: &DoubleWell,
) -> Result<EnergyBreakdown> {
    scaled_nonlocal_with(u, omega, eps, &KernelSpec::squared(s), part, well)
}

pub fn scaled_nonlocal_with(
    u: &ScalarField,
    omega: &Domain,
    eps: f64,
    kernel: &KernelSpec,
    part: Part,
    well: &DoubleWell,
) -> Result<EnergyBreakdown> {
    check_field_domain(u, omega)?;
    regime_weights(kernel.s, eps)?;
    let datum = datum_for(u, part)?;
    NonlocalEnergy::scaled(omega, kernel, datum, eps, part, *well)?.evaluate(u)
}

pub fn j_eps_s(
    u: &ScalarField,
    omega: &Domain,
    eps: f64,
    s: f64,
    sigma: f64,
    well: &DoubleWell,
) -> Result<EnergyBreakdown> {
    check_field_domain(u, omega)?;
    let datum = if sigma != 0.0 { Some(u.exterior().ok_or(Error::MissingExterior)?) } else { None };
    NonlocalEnergy::j_eps_s(omega, &KernelSpec::squared(s), datum, eps, sigma, *well)?.evaluate(u)
}

pub fn j_raw(u: &ScalarField, omega: &Domain, eps: f64, s: f64, well: &DoubleWell) -> Result<EnergyBreakdown> {
    check_field_domain(u, omega)?;
    let datum = u.exterior().ok_or(Error::MissingExterior)?;
    NonlocalEnergy::j_raw(omega, &KernelSpec::squared(s), Some(datum), eps, *well)?.evaluate(u)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CapillarityKind {
    Local,
    Fractional,
}

fn check_sigma(sigma: f64) -> Result<()> {
    if (-1.0..=1.0).contains(&sigma) {
        Ok(())
    } else {
        Err(Error::OutOfRange {
            name: "sigma",
            value: sigma,
            expected: "[-1, 1]",
        })
    }
}

/// Whether `E` has no sampled point outside `Ω` on the extended grid.
fn contained_in(e: &GeometricSet, omega: &Domain) -> bool {
    let g = omega.extended_grid();
    (0..g.len()).all(|i| {
        let p = g.center(i);
        omega.contains(&p) || !e.contains(&p)
    })
}

/// Local `Per(E,Ω) + σ Per(E,∂Ω)` or fractional
/// `I_s(E, Ω∖E) + σ I_s(E, 𝒞Ω)` (for `E ⊆ Ω`).
pub fn capillarity(e: &GeometricSet, omega: &Domain, sigma: f64, kind: CapillarityKind, s: f64) -> Result<f64> {
    check_sigma(sigma)?;
    match kind {
        CapillarityKind::Local => Ok(classical_perimeter(e, omega, Where::Interior).value
            + sigma * classical_perimeter(e, omega, Where::Boundary).value),
        CapillarityKind::Fractional => {
            if !contained_in(e, omega) {
                return Err(Error::NotContained);
            }
            let spec = KernelSpec::indicator(s);
            let int = frac_perimeter_with(e, omega, &spec, Part::Interior)?;
            if sigma == 0.0 {
                return Ok(int);
            }
            Ok(int + sigma * frac_perimeter_with(e, omega, &spec, Part::Exterior)?)
        }
    }
}

/// A grid face of a cell of `Ω` whose neighbour across it lies outside `Ω`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryFace {
    pub cell: usize,
    pub axis: usize,
    /// `−1` or `+1`.
    pub side: i32,
    pub center: Point,
    /// Area carried by the face: the face area for boxes, its projection on
    /// the true normal for balls.
    pub measure: f64,
}

pub fn boundary_faces(omega: &Domain) -> Vec<BoundaryFace> {
    let grid = omega.grid();
    let mask = omega.mask();
    let mut out = Vec::new();
    for i in 0..grid.len() {
        if !mask[i] {
            continue;
        }
        let c = grid.unravel(i);
        let x = grid.center_of(c);
        for k in 0..grid.dim {
            for side in [-1i32, 1] {
                let nb = c[k] as i64 + side as i64;
                let outside = nb < 0 || nb >= grid.n[k] as i64 || {
                    let mut q = c;
                    q[k] = nb as usize;
                    !mask[grid.ravel(q)]
                };
                if !outside {
                    continue;
                }
                let mut fc = x;
                fc[k] += 0.5 * side as f64 * grid.h[k];
                let area: f64 = (0..grid.dim).filter(|&l| l != k).map(|l| grid.h[l]).product();
                let measure = match &omega.shape {
                    Shape::Box { .. } => area,
                    Shape::Ball { center, .. } => {
                        let r: f64 = (0..grid.dim).map(|l| (fc[l] - center[l]).powi(2)).sum::<f64>().sqrt();
                        area * ((fc[k] - center[k]) / r).abs()
                    }
                };
                out.push(BoundaryFace {
                    cell: i,
                    axis: k,
                    side,
                    center: fc,
                    measure,
                });
            }
        }
    }
    out
}

/// `G_ε = F_ε + λ ∫_{∂Ω} V(u)`, the trace being the value of the adjacent
/// cell; `V = None` means `V ≡ 0`.
pub fn boundary_modica(
    u: &ScalarField,
    omega: &Domain,
    eps: f64,
    well: &DoubleWell,
    boundary_well: Option<&DoubleWell>,
    lambda: f64,
) -> Result<EnergyBreakdown> {
    if omega.dim() == 3 {
        return Err(Error::Unsupported("boundary energies are evaluated for n = 1, 2".into()));
    }
    let mm = modica_mortola(u, omega, eps, well)?;
    let boundary = match boundary_well {
        Some(v) => lambda * boundary_faces(omega).iter().map(|f| v.value(u.values()[f.cell]) * f.measure).sum::<f64>(),
        None => 0.0,
    };
    Ok(EnergyBreakdown::new(mm.kinetic, mm.potential, boundary))
}

pub fn abs_1d(v: &ScalarField, omega: &Domain, eps: f64, k: f64, well: &DoubleWell) -> Result<EnergyBreakdown> {
    check_field_domain(v, omega)?;
    NonlocalEnergy::abs_1d(omega, eps, k, 0.5, *well)?.evaluate(v)
}

fn is_pm_one(x: f64) -> bool {
    (x - 1.0).abs() <= 1e-12 || (x + 1.0).abs() <= 1e-12
}

/// `8k ℋ⁰(S_v)` for a `±1`-valued field on an interval.
pub fn abs_1d_limit(v: &ScalarField, k: f64) -> Result<f64> {
    if v.dim() != 1 {
        return Err(Error::Unsupported("jump counting needs n = 1".into()));
    }
    let vals = v.interior_values();
    if let Some(x) = vals.iter().find(|&&x| !is_pm_one(x)) {
        return Err(Error::Alphabet(format!("value {x} is not ±1")));
    }
    let jumps = vals.windows(2).filter(|w| (w[0] > 0.0) != (w[1] > 0.0)).count();
    Ok(8.0 * k * jumps as f64)
}

/// Lattice key of a grid vertex, in doubled cell coordinates.
type VertexKey = [i64; MAX_DIM];

fn face_vertices(f: &BoundaryFace, grid: &crate::domain::Grid) -> Vec<VertexKey> {
    let c = grid.unravel(f.cell);
    let mut base = [0i64; MAX_DIM];
    for k in 0..grid.dim {
        base[k] = 2 * c[k] as i64 + 1;
    }
    base[f.axis] += f.side as i64;
    let free: Vec<usize> = (0..grid.dim).filter(|&l| l != f.axis).collect();
    let mut out = Vec::new();
    for m in 0..(1usize << free.len()) {
        let mut v = base;
        for (b, &l) in free.iter().enumerate() {
            v[l] += if m >> b & 1 == 1 { 1 } else { -1 };
        }
        out.push(v);
    }
    out
}

/// `ℋ^{n−2}` of the jump set of a boundary field given per boundary face:
/// in 2D the number of shared face vertices across which `v` jumps, in 3D
/// the total length of such shared edges.
fn boundary_jump_measure(omega: &Domain, faces: &[BoundaryFace], v: &[f64]) -> f64 {
    use std::collections::HashMap;
    let grid = omega.grid();
    match grid.dim {
        2 => {
            let mut at: HashMap<VertexKey, Vec<usize>> = HashMap::new();
            for (i, f) in faces.iter().enumerate() {
                for key in face_vertices(f, &grid) {
                    at.entry(key).or_default().push(i);
                }
            }
            at.values()
                .filter(|ids| ids.iter().any(|&i| v[i] != v[ids[0]]))
                .count() as f64
        }
        3 => {
            let mut at: HashMap<(VertexKey, VertexKey), Vec<usize>> = HashMap::new();
            for (i, f) in faces.iter().enumerate() {
                let vs = face_vertices(f, &grid);
                // Corners in binary order: edges join corners differing in one bit.
                for (a, b) in [(0, 1), (0, 2), (1, 3), (2, 3)] {
                    let key = if vs[a] < vs[b] { (vs[a], vs[b]) } else { (vs[b], vs[a]) };
                    at.entry(key).or_default().push(i);
                }
            }
            at.iter()
                .filter(|(_, ids)| ids.iter().any(|&i| v[i] != v[ids[0]]))
                .map(|((a, b), _)| {
                    (0..3)
                        .map(|k| (0.5 * (a[k] - b[k]) as f64 * grid.h[k]).powi(2))
                        .sum::<f64>()
                        .sqrt()
                })
                .sum()
        }
        _ => 0.0,
    }
}

/// `φ(u,v) = ℋ^{n−1}(S_u) + σ ∫_{∂Ω} |H(Tu) − H(v)| + c ℋ^{n−2}(S_v)` with
/// `H` the primitive of `2√W`; `v` holds one value per entry of
/// [`boundary_faces`] and must take the values `phases = (α, β)`.
pub fn phi_line_tension(
    u: &ScalarField,
    v: &[f64],
    omega: &Domain,
    sigma: f64,
    c: f64,
    well: &DoubleWell,
    phases: (f64, f64),
) -> Result<f64> {
    check_field_domain(u, omega)?;
    if !(2..=3).contains(&omega.dim()) {
        return Err(Error::Unsupported("the line term needs n = 2 or 3".into()));
    }
    let faces = boundary_faces(omega);
    if v.len() != faces.len() {
        return Err(Error::ShapeMismatch(format!("{} boundary values for {} faces", v.len(), faces.len())));
    }
    let vals = u.values();
    let mask = u.mask();
    if let Some(x) = vals.iter().zip(mask).filter(|(_, &m)| m).map(|(x, _)| *x).find(|&x| !is_pm_one(x)) {
        return Err(Error::Alphabet(format!("bulk value {x} is not ±1")));
    }
    let tol = 1e-12 * (phases.0.abs() + phases.1.abs()).max(1.0);
    if let Some(x) = v.iter().find(|&&x| (x - phases.0).abs() > tol && (x - phases.1).abs() > tol) {
        return Err(Error::Alphabet(format!("boundary value {x} is not in {{{}, {}}}", phases.0, phases.1)));
    }
    let grid = u.grid();
    let mut jump = 0.0;
    for i in 0..grid.len() {
        if !mask[i] {
            continue;
        }
        let cc = grid.unravel(i);
        for k in 0..grid.dim {
            if cc[k] + 1 >= grid.n[k] {
                continue;
            }
            let mut q = cc;
            q[k] += 1;
            let j = grid.ravel(q);
            if mask[j] && vals[i] != vals[j] {
                jump += (0..grid.dim).filter(|&l| l != k).map(|l| grid.h[l]).product::<f64>();
            }
        }
    }
    let trace: f64 = faces
        .iter()
        .zip(v)
        .map(|(f, &vb)| (well.primitive(vals[f.cell]) - well.primitive(vb)).abs() * f.measure)
        .sum();
    Ok(jump + sigma * trace + c * boundary_jump_measure(omega, &faces, v))
}

/// `𝓖_♯(E) = ℋ^{n−1}(Ω∩∂E) + σ ℋ^{n−1}(∂Ω∩∂E) + c ℋ^{n−2}(cl(∂E∩Ω)∩∂Ω)`.
pub fn g_sharp(e: &GeometricSet, omega: &Domain, sigma: f64, c: f64) -> Result<f64> {
    check_sigma(sigma)?;
    if !(2..=3).contains(&omega.dim()) {
        return Err(Error::Unsupported("the line term needs n = 2 or 3".into()));
    }
    let line = if c != 0.0 { contact_line_measure(e, omega)? } else { 0.0 };
    Ok(classical_perimeter(e, omega, Where::Interior).value + sigma * boundary_trace(e, omega).value + c * line)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{voxelize, ExteriorDatum, ValueRange};
    use crate::kernels::{field_kernel, frac_perimeter};
    use crate::quadrature::adaptive;
    use crate::well::optimal_profile;
    use proptest::prelude::*;

    fn q() -> DoubleWell {
        DoubleWell::quartic()
    }

    #[test]
    fn modica_mortola_trivial_values() {
        let d = Domain::boxed(&[0.0, 0.0], &[2.0, 1.0], &[10, 5]).unwrap();
        for c in [-1.0, 1.0] {
            let u = ScalarField::constant(d.clone(), c, None, ValueRange::Symmetric).unwrap();
            assert_eq!(modica_mortola(&u, &d, 0.1, &q()).unwrap().total, 0.0);
        }
        let u = ScalarField::constant(d.clone(), 0.0, None, ValueRange::Symmetric).unwrap();
        let e = modica_mortola(&u, &d, 0.1, &q()).unwrap();
        assert!((e.total - 0.25 * 2.0 / 0.1).abs() < 1e-12);
    }

    #[test]
    fn modica_mortola_profile_energy() {
        let p = optimal_profile(&q()).unwrap();
        let d = Domain::interval(-1.0, 1.0, 4000).unwrap();
        let eps = 0.02;
        let u = ScalarField::from_fn(d.clone(), None, ValueRange::Symmetric, |x| p.eval(x[0] / eps)).unwrap();
        let e = modica_mortola(&u, &d, eps, &q()).unwrap();
        assert!((e.total - 4.0 / 3.0).abs() < 1e-3, "{e:?}");
    }

    #[test]
    fn indicator_kinetic_equals_kernel() {
        let d = Domain::interval(-1.0, 1.0, 128).unwrap().with_margin(1.0).unwrap();
        let u = voxelize(&GeometricSet::half_line(0.0), &d);
        for eps in [0.3, 0.01] {
            let e = scaled_nonlocal(&u, &d, eps, 0.3, Part::Full, &q()).unwrap();
            let k = field_kernel(&u, &d, 0.3, Part::Full).unwrap();
            assert_eq!(e.kinetic, k);
            assert_eq!(e.potential, 0.0);
            let per = frac_perimeter(&GeometricSet::half_line(0.0), &d, 0.3, Part::Full).unwrap();
            assert!((e.total - 8.0 * per).abs() < 1e-12 * e.total);
        }
    }

    #[test]
    fn log_regime_checks() {
        assert!(regime_weights(0.5, 1.0).is_err());
        assert!(regime_weights(0.5, 2.0).is_err());
        assert!(regime_weights(0.6, 2.0).is_ok());
        let ratio = |eps: f64| LambdaSchedule::LogInverse.value(eps, 1.0).ln() / eps.ln().abs();
        let r: Vec<f64> = [1e-2, 1e-10, 1e-50, 1e-300].iter().map(|&e| ratio(e)).collect();
        assert!(r.windows(2).all(|w| w[1] > w[0]), "{r:?}");
        assert!(r[3] > 0.99 && r[3] < 1.0);
        for eps in [0.3, 0.1, 0.01] {
            let lam = LambdaSchedule::Exponential.value(eps, 2.5);
            assert!((eps * lam.ln() - 2.5).abs() < 1e-12);
        }
    }

    #[test]
    fn full_uses_one_potential_term() {
        let d = Domain::interval(-1.0, 1.0, 64).unwrap().with_margin(0.5).unwrap();
        let u = ScalarField::from_fn(d.clone(), Some(ExteriorDatum::indicator(GeometricSet::half_line(0.0))), ValueRange::Symmetric, |x| -(3.0 * x[0]).tanh()).unwrap();
        for s in [0.25, 0.5, 0.75] {
            let eps = 0.1;
            let f = scaled_nonlocal(&u, &d, eps, s, Part::Full, &q()).unwrap();
            let i = scaled_nonlocal(&u, &d, eps, s, Part::Interior, &q()).unwrap();
            let x = scaled_nonlocal(&u, &d, eps, s, Part::Exterior, &q()).unwrap();
            assert!((f.kinetic - i.kinetic - x.kinetic).abs() < 1e-12 * f.kinetic);
            assert!((f.potential - i.potential - x.potential).abs() < 1e-12 * f.potential);
            assert_eq!(f.potential_per_part, Some(i.potential));
            assert!(x.kinetic >= 0.0);
        }
    }

    #[test]
    fn j_eps_s_identities() {
        let d = Domain::interval(-1.0, 1.0, 64).unwrap().with_margin(0.5).unwrap();
        let datum = ExteriorDatum::indicator(GeometricSet::half_line(0.0));
        let u = ScalarField::from_fn(d.clone(), Some(datum), ValueRange::Symmetric, |x| -(5.0 * x[0]).tanh()).unwrap();
        let j = j_eps_s(&u, &d, 0.2, 0.3, 1.0, &q()).unwrap();
        let f = scaled_nonlocal(&u, &d, 0.2, 0.3, Part::Full, &q()).unwrap();
        assert!((j.total - f.total).abs() < 1e-12 * f.total);
        let ind = voxelize(&GeometricSet::half_line(0.0), &d);
        let sigma = -0.4;
        let j = j_eps_s(&ind, &d, 0.2, 0.3, sigma, &q()).unwrap();
        let e = GeometricSet::half_line(0.0);
        let want = 8.0
            * (frac_perimeter(&e, &d, 0.3, Part::Interior).unwrap()
                + sigma * frac_perimeter(&e, &d, 0.3, Part::Exterior).unwrap());
        assert_eq!(j.potential, 0.0);
        assert!((j.kinetic - want).abs() < 1e-12 * want.abs());
        let zero = ScalarField::constant(d.clone(), 0.0, Some(ExteriorDatum::Constant(0.0)), ValueRange::Symmetric).unwrap();
        let j = j_eps_s(&zero, &d, 0.2, 0.3, 0.5, &q()).unwrap();
        assert!((j.total - 0.2f64.powf(-0.6) * 0.25 * 2.0).abs() < 1e-12);
        assert!(j_eps_s(&zero, &d, 0.2, 0.5, 0.5, &q()).is_err());
    }

    #[test]
    fn capillarity_values() {
        let d = Domain::interval(0.0, 1.0, 256).unwrap().with_margin(1.0).unwrap();
        let e = GeometricSet::interval(0.0, 0.5);
        let s = 0.25;
        let frac0 = capillarity(&e, &d, 0.0, CapillarityKind::Fractional, s).unwrap();
        assert_eq!(frac0, frac_perimeter(&e, &d, s, Part::Interior).unwrap());
        for kind in [CapillarityKind::Local, CapillarityKind::Fractional] {
            assert_eq!(capillarity(&GeometricSet::Empty, &d, 0.5, kind, s).unwrap(), 0.0);
        }
        // Nested adaptive quadrature of both interaction integrals.
        let p = 1.0 + 2.0 * s;
        let inner = adaptive(0.0, 0.5, 1e-12, |x| {
            ((1.0 - x).powf(1.0 - p) - (0.5 - x).powf(1.0 - p)) / (1.0 - p)
        });
        let outer = adaptive(0.0, 0.5, 1e-12, |x| (x.powf(-2.0 * s) + (1.0 - x).powf(-2.0 * s)) / (2.0 * s));
        let want = inner + 0.5 * outer;
        let got = capillarity(&e, &d, 0.5, CapillarityKind::Fractional, s).unwrap();
        assert!((got - want).abs() < 5e-3 * want, "{got} {want}");
        let local = capillarity(&e, &d, 0.5, CapillarityKind::Local, s).unwrap();
        assert!((local - 1.5).abs() < 1e-12);
        let big = GeometricSet::interval(-0.5, 0.5);
        assert!(matches!(
            capillarity(&big, &d, 0.5, CapillarityKind::Fractional, s),
            Err(Error::NotContained)
        ));
    }

    #[test]
    fn boundary_modica_values() {
        let d = Domain::boxed(&[0.0, 0.0], &[1.0, 1.0], &[12, 12]).unwrap();
        let u = ScalarField::from_fn(d.clone(), None, ValueRange::Symmetric, |x| (4.0 * x[0] - 2.0).tanh()).unwrap();
        let mm = modica_mortola(&u, &d, 0.1, &q()).unwrap();
        let g = boundary_modica(&u, &d, 0.1, &q(), None, 7.0).unwrap();
        assert_eq!(g.total, mm.total);
        let v = DoubleWell::new(-0.5, 0.5, 1.0, 2.0).unwrap();
        let a = ScalarField::constant(d.clone(), 0.5, None, ValueRange::Symmetric).unwrap();
        assert_eq!(boundary_modica(&a, &d, 0.1, &q(), Some(&v), 1e6).unwrap().boundary, 0.0);
        let one = ScalarField::constant(d.clone(), 1.0, None, ValueRange::Symmetric).unwrap();
        let b = boundary_modica(&one, &d, 0.1, &q(), Some(&v), 2.0).unwrap();
        assert!((b.boundary - 2.0 * v.value(1.0) * 4.0).abs() < 1e-12);
        let cube = Domain::boxed(&[0.0; 3], &[1.0; 3], &[2, 2, 2]).unwrap();
        let c = ScalarField::constant(cube.clone(), 1.0, None, ValueRange::Symmetric).unwrap();
        assert!(boundary_modica(&c, &cube, 0.1, &q(), None, 1.0).is_err());
    }

    #[test]
    fn abs_1d_limits() {
        let d = Domain::interval(-1.0, 1.0, 40).unwrap();
        let sign = ScalarField::from_fn(d.clone(), None, ValueRange::Symmetric, |x| x[0].signum()).unwrap();
        assert_eq!(abs_1d_limit(&sign, 1.5).unwrap(), 12.0);
        let two = ScalarField::from_fn(d.clone(), None, ValueRange::Symmetric, |x| if x[0].abs() < 0.5 { 1.0 } else { -1.0 }).unwrap();
        assert_eq!(abs_1d_limit(&two, 1.0).unwrap(), 16.0);
        let c = ScalarField::constant(d.clone(), -1.0, None, ValueRange::Symmetric).unwrap();
        let e = abs_1d(&c, &d, 0.1, 1.0, &q()).unwrap();
        assert_eq!((e.kinetic, e.potential), (0.0, 0.0));
        let bad = ScalarField::constant(d.clone(), 0.3, None, ValueRange::Symmetric).unwrap();
        assert!(matches!(abs_1d_limit(&bad, 1.0), Err(Error::Alphabet(_))));
        let e = abs_1d(&sign, &d, 0.1, 1.0, &q()).unwrap();
        assert!(e.kinetic > 0.0 && e.potential == 0.0);
    }

    #[test]
    fn phi_and_g_sharp() {
        let d = Domain::boxed(&[0.0, 0.0], &[1.0, 1.0], &[8, 8]).unwrap();
        let faces = boundary_faces(&d);
        assert_eq!(faces.len(), 32);
        let one = ScalarField::constant(d.clone(), 1.0, None, ValueRange::Symmetric).unwrap();
        let v = vec![1.0; faces.len()];
        assert_eq!(phi_line_tension(&one, &v, &d, 0.7, 0.3, &q(), (-1.0, 1.0)).unwrap(), 0.0);
        // Left half: u = +1 for x < 1/2, boundary phase matched to the trace.
        let half = GeometricSet::boxed(&[0.0, 0.0], &[0.5, 1.0]);
        let u = voxelize(&half, &d);
        let v: Vec<f64> = faces.iter().map(|f| u.values()[f.cell]).collect();
        let (sigma, c) = (0.4, 0.25);
        let phi = phi_line_tension(&u, &v, &d, sigma, c, &q(), (-1.0, 1.0)).unwrap();
        assert!((phi - (1.0 + 2.0 * c)).abs() < 1e-12, "{phi}");
        // Constant boundary phase: the trace mismatch on the right part.
        let vm = vec![-1.0; faces.len()];
        let phi = phi_line_tension(&u, &vm, &d, sigma, c, &q(), (-1.0, 1.0)).unwrap();
        assert!((phi - (1.0 + sigma * 2.0 * (4.0 / 3.0))).abs() < 1e-12, "{phi}");
        assert!(phi_line_tension(&u, &vec![0.5; faces.len()], &d, sigma, c, &q(), (-1.0, 1.0)).is_err());
        let g = g_sharp(&half, &d, sigma, c).unwrap();
        assert!((g - (1.0 + sigma * 2.0 + 2.0 * c)).abs() < 1e-9, "{g}");
    }

    #[test]
    fn boundary_jumps_in_3d() {
        let d = Domain::boxed(&[0.0; 3], &[1.0; 3], &[4, 4, 4]).unwrap();
        let faces = boundary_faces(&d);
        let v: Vec<f64> = faces.iter().map(|f| if f.center[0] < 0.5 { 1.0 } else { -1.0 }).collect();
        let len = boundary_jump_measure(&d, &faces, &v);
        assert!((len - 4.0).abs() < 1e-12, "{len}");
    }

    #[test]
    fn tags_roundtrip() {
        for t in Functional::ALL {
            assert_eq!(t.name().parse::<Functional>().unwrap(), t);
        }
        assert!("nope".parse::<Functional>().is_err());
        let spec: EnergySpec = toml::from_str("functional = \"F_full\"\neps = 0.1\ns = 0.3\n").unwrap();
        assert_eq!(spec.functional, Functional::FFull);
        assert!(toml::from_str::<EnergySpec>("functional = \"MM\"\neps = 0.1\ns = 0.3\nbogus = 1\n").is_err());
        let mut bad = spec.clone();
        bad.sigma = 1.5;
        assert!(bad.validate().is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn breakdown_additive_and_exterior_nonnegative(
            a in -3.0f64..3.0, b in 0.5f64..8.0, eps in 0.02f64..0.9, s in 0.05f64..0.95
        ) {
            let d = Domain::interval(-1.0, 1.0, 24).unwrap().with_margin(0.25).unwrap();
            let u = ScalarField::from_fn(d.clone(), Some(ExteriorDatum::Constant(0.2)), ValueRange::Symmetric,
                |x| (b * x[0] + a).sin()).unwrap();
            let full = scaled_nonlocal(&u, &d, eps, s, Part::Full, &q()).unwrap();
            let int = scaled_nonlocal(&u, &d, eps, s, Part::Interior, &q()).unwrap();
            let sum = full.kinetic + full.potential + full.boundary;
            prop_assert!((full.total - sum).abs() <= 1e-12 * full.total.abs().max(1e-300));
            prop_assert!(full.kinetic - int.kinetic >= -1e-12 * full.kinetic);
            let mm = modica_mortola(&u, &d, eps, &q()).unwrap();
            prop_assert!((mm.total - mm.kinetic - mm.potential).abs() <= 1e-12 * mm.total);
        }

        #[test]
        fn continuous_in_s_within_regime(s in 0.1f64..0.4) {
            let d = Domain::interval(-1.0, 1.0, 24).unwrap();
            let u = ScalarField::from_fn(d.clone(), None, ValueRange::Symmetric, |x| (2.0 * x[0]).tanh()).unwrap();
            let e0 = scaled_nonlocal(&u, &d, 0.1, s, Part::Interior, &q()).unwrap().total;
            let e1 = scaled_nonlocal(&u, &d, 0.1, s + 1e-6, Part::Interior, &q()).unwrap().total;
            prop_assert!((e1 - e0).abs() < 1e-3 * e0);
        }
    }
}
