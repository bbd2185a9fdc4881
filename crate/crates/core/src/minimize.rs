//! Projected first-order descent for the field functionals, and recovery
//! sequences built from the optimal profile.

use std::io::Write;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::domain::Domain;
use crate::energies::{
    boundary_faces, dirichlet_diagonal, dirichlet_gradient, dirichlet_values, BoundaryFace, EnergyBreakdown,
    EnergySpec, Functional, NonlocalEnergy,
};
use crate::error::{Error, Result};
use crate::field::{ExteriorDatum, ScalarField, ValueRange};
use crate::kernels::{check_field_domain, KernelSpec, Part};
use crate::set::GeometricSet;
use crate::well::{optimal_profile, DoubleWell};

/// A differentiable discrete energy over the bounding-grid values of one
/// domain; cells outside `Ω` are constants.
#[derive(Clone, Debug)]
pub struct Objective {
    domain: Domain,
    mask: Vec<bool>,
    kind: Kind,
}

#[derive(Clone, Debug)]
enum Kind {
    Local {
        eps: f64,
        well: DoubleWell,
        boundary: Option<(DoubleWell, f64, Vec<BoundaryFace>)>,
    },
    Nonlocal(NonlocalEnergy),
}

impl Objective {
    /// `datum` is required by the functionals with an exterior part.
    pub fn new(spec: &EnergySpec, domain: &Domain, datum: Option<&ExteriorDatum>, cache_dir: Option<PathBuf>) -> Result<Self> {
        spec.validate()?;
        let mut kernel = KernelSpec::squared(spec.s).with_cache(cache_dir);
        kernel.truncation = spec.truncation;
        let w = spec.well;
        let kind = match spec.functional {
            f if f.acts_on_sets() => return Err(Error::NotDifferentiable(f.name())),
            Functional::ModicaMortola => Kind::Local {
                eps: spec.eps,
                well: w,
                boundary: None,
            },
            Functional::BoundaryModica => {
                if domain.dim() == 3 {
                    return Err(Error::Unsupported("boundary energies are evaluated for n = 1, 2".into()));
                }
                Kind::Local {
                    eps: spec.eps,
                    well: w,
                    boundary: spec.boundary_well.map(|v| (v, spec.lambda_value(), boundary_faces(domain))),
                }
            }
            Functional::FInt => Kind::Nonlocal(NonlocalEnergy::scaled(domain, &kernel, None, spec.eps, Part::Interior, w)?),
            Functional::FExt => Kind::Nonlocal(NonlocalEnergy::scaled(domain, &kernel, datum, spec.eps, Part::Exterior, w)?),
            Functional::FFull => Kind::Nonlocal(NonlocalEnergy::scaled(domain, &kernel, datum, spec.eps, Part::Full, w)?),
            Functional::JRaw => Kind::Nonlocal(NonlocalEnergy::j_raw(domain, &kernel, datum, spec.eps, w)?),
            Functional::JEpsS => {
                let d = if spec.sigma != 0.0 { datum } else { None };
                Kind::Nonlocal(NonlocalEnergy::j_eps_s(domain, &kernel, d, spec.eps, spec.sigma, w)?)
            }
            Functional::Abs1d => Kind::Nonlocal(NonlocalEnergy::abs_1d(domain, spec.eps, spec.k, 0.5, w)?),
            _ => unreachable!("set functionals handled above"),
        };
        Ok(Objective {
            domain: domain.clone(),
            mask: domain.mask(),
            kind,
        })
    }

    pub fn for_field(spec: &EnergySpec, u: &ScalarField, cache_dir: Option<PathBuf>) -> Result<Self> {
        Objective::new(spec, u.domain(), u.exterior(), cache_dir)
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn evaluate(&self, v: &[f64]) -> Result<EnergyBreakdown> {
        match &self.kind {
            Kind::Nonlocal(e) => e.evaluate_values(v),
            Kind::Local { eps, well, boundary } => {
                let grid = self.domain.grid();
                let vol = grid.cell_volume();
                let kinetic = eps * dirichlet_values(&grid, &self.mask, v);
                let pot: f64 = (0..v.len()).filter(|&i| self.mask[i]).map(|i| well.value(v[i])).sum::<f64>() * vol / eps;
                let bnd = boundary
                    .as_ref()
                    .map(|(bw, lambda, faces)| lambda * faces.iter().map(|f| bw.value(v[f.cell]) * f.measure).sum::<f64>())
                    .unwrap_or(0.0);
                Ok(EnergyBreakdown::new(kinetic, pot, bnd))
            }
        }
    }

    /// Gradient with respect to every bounding-grid value; zero outside `Ω`.
    pub fn gradient(&self, v: &[f64]) -> Result<Vec<f64>> {
        let mut g = match &self.kind {
            Kind::Nonlocal(e) => e.gradient_values(v)?,
            Kind::Local { eps, well, boundary } => {
                let grid = self.domain.grid();
                let vol = grid.cell_volume();
                let mut g: Vec<f64> = dirichlet_gradient(&grid, &self.mask, v).into_iter().map(|x| eps * x).collect();
                for i in 0..v.len() {
                    if self.mask[i] {
                        g[i] += well.derivative(v[i]) * vol / eps;
                    }
                }
                if let Some((bw, lambda, faces)) = boundary {
                    for f in faces {
                        g[f.cell] += lambda * bw.derivative(v[f.cell]) * f.measure;
                    }
                }
                g
            }
        };
        for (gi, &m) in g.iter_mut().zip(&self.mask) {
            if !m {
                *gi = 0.0;
            }
        }
        Ok(g)
    }

    /// Positive diagonal scaling: kinetic Hessian diagonal plus the
    /// convex part of the potential curvature at `v`.
    pub fn diagonal(&self, v: &[f64]) -> Vec<f64> {
        let grid = self.domain.grid();
        let vol = grid.cell_volume();
        let (mut d, b, well) = match &self.kind {
            Kind::Nonlocal(e) => (e.kinetic_diagonal(), e.b, e.well),
            Kind::Local { eps, well, .. } => (
                dirichlet_diagonal(&grid, &self.mask).into_iter().map(|x| eps * x).collect(),
                1.0 / eps,
                *well,
            ),
        };
        for i in 0..d.len() {
            d[i] += b * vol * well.second_derivative(v[i]).max(0.0);
            if !(d[i] > 0.0) {
                d[i] = vol;
            }
        }
        d
    }
}

/// Gradient of the discrete energy, as a field on the same grid (zero on
/// cells outside `Ω`).
pub fn gradient(spec: &EnergySpec, u: &ScalarField) -> Result<ScalarField> {
    let obj = Objective::for_field(spec, u, None)?;
    let g = obj.gradient(u.values())?;
    ScalarField::new(u.domain().clone(), g, None, ValueRange::Real)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Seed {
    /// `hi` on the set and `lo` off it (the well zeros).
    Voxelized { set: GeometricSet },
    /// Affine in `x₁` from `from` at the lower end to `to` at the upper end.
    Linear { from: f64, to: f64 },
    Constant { value: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MinimizeConfig {
    pub max_iterations: usize,
    /// On the RMS of the projected gradient per unit volume.
    pub tolerance: f64,
    pub initial_step: f64,
    pub min_step: f64,
    /// Sufficient-decrease constant of the backtracking search.
    pub armijo: f64,
    /// Barzilai–Borwein step as first trial.
    pub barzilai_borwein: bool,
    pub precondition: bool,
    pub bounds: ValueRange,
    /// Adds `10⁻³ · (x₁ − c)/(L/2)` to the seed before projecting.
    pub odd_perturbation: bool,
}

impl Default for MinimizeConfig {
    fn default() -> Self {
        MinimizeConfig {
            max_iterations: 2000,
            tolerance: 1e-6,
            initial_step: 1.0,
            min_step: 1e-14,
            armijo: 1e-4,
            barzilai_borwein: true,
            precondition: true,
            bounds: ValueRange::Symmetric,
            odd_perturbation: false,
        }
    }
}

impl MinimizeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(Error::OutOfRange {
                name: "tolerance",
                value: self.tolerance,
                expected: "> 0",
            });
        }
        if self.max_iterations < 1 {
            return Err(Error::OutOfRange {
                name: "max_iterations",
                value: self.max_iterations as f64,
                expected: ">= 1",
            });
        }
        if !(self.min_step > 0.0 && self.initial_step >= self.min_step) {
            return Err(Error::OutOfRange {
                name: "initial_step",
                value: self.initial_step,
                expected: ">= min_step > 0",
            });
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Iterate {
    pub iter: usize,
    pub energy: f64,
    pub gradient_norm: f64,
    pub step: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Converged,
    IterationLimit,
    /// No decrease even at the minimal step.
    LineSearchFailed,
}

#[derive(Clone, Debug)]
pub struct Minimized {
    pub field: ScalarField,
    pub energy: EnergyBreakdown,
    pub status: Status,
    pub trace: Vec<Iterate>,
}

impl Minimized {
    /// CSV `iter,energy,gradient_norm,step`.
    pub fn write_trace(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "iter,energy,gradient_norm,step")?;
        for it in &self.trace {
            writeln!(w, "{},{},{},{}", it.iter, it.energy, it.gradient_norm, it.step)?;
        }
        Ok(())
    }
}

fn project(v: f64, (a, b): (f64, f64)) -> f64 {
    v.clamp(a, b)
}

/// RMS over interior cells of the projected gradient density.
fn projected_norm(v: &[f64], g: &[f64], idx: &[usize], bounds: (f64, f64), vol: f64) -> f64 {
    let mut sum = 0.0;
    for &i in idx {
        let gi = g[i] / vol;
        let blocked = (v[i] <= bounds.0 && gi > 0.0) || (v[i] >= bounds.1 && gi < 0.0);
        if !blocked {
            sum += gi * gi;
        }
    }
    (sum / idx.len().max(1) as f64).sqrt()
}

pub fn minimize(spec: &EnergySpec, u0: &ScalarField, cfg: &MinimizeConfig) -> Result<Minimized> {
    let obj = Objective::for_field(spec, u0, None)?;
    minimize_with(&obj, u0, cfg)
}

/// Projected (optionally Jacobi-scaled) gradient descent with backtracking;
/// the energy trace is nonincreasing and cells outside `Ω` are never written.
pub fn minimize_with(obj: &Objective, u0: &ScalarField, cfg: &MinimizeConfig) -> Result<Minimized> {
    cfg.validate()?;
    check_field_domain(u0, obj.domain())?;
    let bounds = cfg.bounds.bounds();
    let idx = u0.interior_cells();
    let grid = u0.grid().clone();
    let vol = grid.cell_volume();
    let mut v = u0.values().to_vec();
    if let Some(i) = idx.iter().find(|&&i| !cfg.bounds.contains(v[i])) {
        return Err(Error::ValueOutOfRange {
            cell: *i,
            value: v[*i],
            range: format!("{:?}", cfg.bounds),
        });
    }
    if cfg.odd_perturbation {
        let (lo, hi) = obj.domain().bounds();
        let (c, half) = (0.5 * (lo[0] + hi[0]), 0.5 * (hi[0] - lo[0]));
        for &i in &idx {
            let x = grid.center(i)[0];
            v[i] = project(v[i] + 1e-3 * (x - c) / half, bounds);
        }
    }
    let mut energy = obj.evaluate(&v)?;
    let mut g = obj.gradient(&v)?;
    let mut trace = vec![Iterate {
        iter: 0,
        energy: energy.total,
        gradient_norm: projected_norm(&v, &g, &idx, bounds, vol),
        step: 0.0,
    }];
    let mut step = cfg.initial_step;
    let mut status = Status::IterationLimit;
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
    for iter in 1..=cfg.max_iterations {
        if trace.last().unwrap().gradient_norm < cfg.tolerance {
            status = Status::Converged;
            break;
        }
        let diag = if cfg.precondition { obj.diagonal(&v) } else { vec![vol; v.len()] };
        if cfg.barzilai_borwein {
            if let Some((pv, pg)) = &prev {
                // BB1 in the scaled metric: sᵀDs / sᵀy.
                let (mut sds, mut sy) = (0.0, 0.0);
                for &i in &idx {
                    let s = v[i] - pv[i];
                    sds += s * s * diag[i];
                    sy += s * (g[i] - pg[i]);
                }
                if sy > 0.0 && sds > 0.0 {
                    step = (sds / sy).clamp(cfg.min_step, 1e6);
                }
            }
        }
        let mut accepted = None;
        let mut t = step;
        while t >= cfg.min_step {
            let mut trial = v.clone();
            let mut decrease = 0.0;
            for &i in &idx {
                trial[i] = project(v[i] - t * g[i] / diag[i], bounds);
                decrease += g[i] * (v[i] - trial[i]);
            }
            if decrease <= 0.0 {
                break;
            }
            let e = obj.evaluate(&trial)?;
            if e.total <= energy.total - cfg.armijo * decrease {
                accepted = Some((trial, e, t));
                break;
            }
            t *= 0.5;
        }
        let Some((trial, e, t)) = accepted else {
            status = Status::LineSearchFailed;
            break;
        };
        let gn = obj.gradient(&trial)?;
        prev = Some((std::mem::replace(&mut v, trial), std::mem::replace(&mut g, gn)));
        energy = e;
        step = if cfg.barzilai_borwein { t } else { (2.0 * t).min(cfg.initial_step.max(t)) };
        trace.push(Iterate {
            iter,
            energy: energy.total,
            gradient_norm: projected_norm(&v, &g, &idx, bounds, vol),
            step: t,
        });
    }
    if status == Status::IterationLimit && trace.last().unwrap().gradient_norm < cfg.tolerance {
        status = Status::Converged;
    }
    let interior: Vec<f64> = idx.iter().map(|&i| v[i]).collect();
    let field = u0.with_interior(&interior)?;
    Ok(Minimized {
        field,
        energy,
        status,
        trace,
    })
}

/// Seed field for a minimization; cells outside `Ω` follow `datum`.
pub fn seed_field(seed: &Seed, domain: &Domain, datum: Option<ExteriorDatum>, well: &DoubleWell, range: ValueRange) -> Result<ScalarField> {
    let (lo, hi) = domain.bounds();
    let (a, b) = well.zeros();
    match seed {
        Seed::Voxelized { set } => {
            ScalarField::from_fn(domain.clone(), datum, range, |p| if set.contains(p) { b } else { a })
        }
        Seed::Linear { from, to } => ScalarField::from_fn(domain.clone(), datum, range, |p| {
            let t = (p[0] - lo[0]) / (hi[0] - lo[0]);
            from + t * (to - from)
        }),
        Seed::Constant { value } => ScalarField::constant(domain.clone(), *value, datum, range),
    }
}

/// Smallest of the field ranges containing both wells.
pub fn range_for_well(w: &DoubleWell) -> ValueRange {
    let (a, b) = w.zeros();
    if a >= 0.0 && b <= 1.0 {
        ValueRange::Unit
    } else if a >= -1.0 && b <= 1.0 {
        ValueRange::Symmetric
    } else {
        ValueRange::Real
    }
}

/// `u_ε(x) = u₀(d(x)/ε)` with `d` the signed distance to `∂E` (positive in
/// `E`) and `u₀` the optimal profile of `w`; the exterior datum is the
/// indicator of `E` with the well zeros as phases.
pub fn recovery_sequence(e: &GeometricSet, eps: f64, w: &DoubleWell, domain: &Domain) -> Result<ScalarField> {
    if !(eps > 0.0) {
        return Err(Error::OutOfRange {
            name: "eps",
            value: eps,
            expected: "> 0",
        });
    }
    let profile = optimal_profile(w)?;
    let (a, b) = w.zeros();
    let range = range_for_well(w);
    let dim = domain.dim();
    let datum = ExteriorDatum::Set {
        set: e.clone(),
        inside: b,
        outside: a,
    };
    ScalarField::from_fn(domain.clone(), Some(datum), range, |p| {
        profile.eval(-e.signed_distance(p, dim) / eps).clamp(a, b)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energies::modica_mortola;
    use crate::field::voxelize;
    use proptest::prelude::*;

    fn spec(f: Functional, eps: f64, s: f64) -> EnergySpec {
        let mut sp = EnergySpec::new(f, eps, s);
        sp.sigma = 0.6;
        sp.boundary_well = Some(DoubleWell::new(-0.3, 0.8, 1.0, 2.0).unwrap());
        sp.lambda = crate::energies::LambdaSchedule::Fixed { value: 3.0 };
        sp
    }

    fn random_field(d: &Domain, seed: u64) -> ScalarField {
        let datum = ExteriorDatum::indicator(GeometricSet::half_line(0.1));
        let mut x = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let n = d.grid().len();
        let v: Vec<f64> = (0..n)
            .map(|_| {
                x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ((x >> 11) as f64 / (1u64 << 53) as f64) * 1.8 - 0.9
            })
            .collect();
        ScalarField::new(d.clone(), v, Some(datum), ValueRange::Symmetric).unwrap()
    }

    #[test]
    fn finite_difference_gradients() {
        let d = Domain::interval(-1.0, 1.0, 16).unwrap().with_margin(0.5).unwrap();
        let cases = [
            (Functional::ModicaMortola, 0.3, 0.3),
            (Functional::FInt, 0.3, 0.3),
            (Functional::FExt, 0.3, 0.7),
            (Functional::FFull, 0.3, 0.5),
            (Functional::JRaw, 0.3, 0.25),
            (Functional::JEpsS, 0.3, 0.2),
            (Functional::BoundaryModica, 0.3, 0.3),
            (Functional::Abs1d, 0.3, 0.5),
        ];
        for (k, (f, eps, s)) in cases.into_iter().enumerate() {
            let sp = spec(f, eps, s);
            let u = random_field(&d, k as u64 + 3);
            let obj = Objective::for_field(&sp, &u, None).unwrap();
            let g = obj.gradient(u.values()).unwrap();
            let h = 1e-6;
            for i in u.interior_cells() {
                let mut p = u.values().to_vec();
                let mut m = p.clone();
                p[i] += h;
                m[i] -= h;
                let fd = (obj.evaluate(&p).unwrap().total - obj.evaluate(&m).unwrap().total) / (2.0 * h);
                let scale = g.iter().map(|x| x.abs()).fold(0.0, f64::max);
                assert!((fd - g[i]).abs() <= 1e-5 * scale, "{f}: cell {i}: fd {fd} vs {}", g[i]);
            }
        }
    }

    #[test]
    fn set_functionals_rejected() {
        let d = Domain::interval(-1.0, 1.0, 8).unwrap();
        let u = ScalarField::constant(d, 1.0, None, ValueRange::Symmetric).unwrap();
        for f in [Functional::CapillaryLocal, Functional::CapillaryFrac, Functional::PhiLine, Functional::GSharp] {
            assert!(matches!(gradient(&EnergySpec::new(f, 0.1, 0.3), &u), Err(Error::NotDifferentiable(_))));
        }
    }

    #[test]
    fn pure_phase_is_stationary() {
        let d = Domain::interval(-1.0, 1.0, 32).unwrap().with_margin(0.5).unwrap();
        let u = ScalarField::constant(d, 1.0, Some(ExteriorDatum::Constant(1.0)), ValueRange::Symmetric).unwrap();
        for f in [Functional::ModicaMortola, Functional::FFull, Functional::JEpsS] {
            let g = gradient(&EnergySpec::new(f, 0.1, 0.3), &u).unwrap();
            assert!(g.values().iter().all(|&x| x.abs() < 1e-12), "{f}");
            let out = minimize(&EnergySpec::new(f, 0.1, 0.3), &u, &MinimizeConfig::default()).unwrap();
            assert_eq!(out.field.values(), u.values());
        }
    }

    #[test]
    fn gradient_is_linear_in_energy() {
        let d = Domain::interval(-1.0, 1.0, 12).unwrap().with_margin(0.5).unwrap();
        let u = random_field(&d, 9);
        let a = Objective::for_field(&spec(Functional::FInt, 0.2, 0.3), &u, None).unwrap();
        let b = Objective::for_field(&spec(Functional::FExt, 0.2, 0.3), &u, None).unwrap();
        let c = Objective::for_field(&spec(Functional::FFull, 0.2, 0.3), &u, None).unwrap();
        let (ga, gb, gc) = (a.gradient(u.values()).unwrap(), b.gradient(u.values()).unwrap(), c.gradient(u.values()).unwrap());
        for i in 0..ga.len() {
            assert!((ga[i] + gb[i] - gc[i]).abs() <= 1e-12 * gc[i].abs().max(1.0));
        }
    }

    #[test]
    fn modica_mortola_minimizer_energy() {
        let d = Domain::interval(-1.0, 1.0, 1024).unwrap();
        let datum = ExteriorDatum::indicator(GeometricSet::half_line(0.0));
        let u0 = voxelize(&GeometricSet::half_line(0.0), &d).with_exterior(Some(datum)).unwrap();
        let sp = EnergySpec::new(Functional::ModicaMortola, 0.02, 0.3);
        let cfg = MinimizeConfig {
            max_iterations: 3000,
            ..Default::default()
        };
        let out = minimize(&sp, &u0, &cfg).unwrap();
        assert!(out.trace.windows(2).all(|w| w[1].energy <= w[0].energy));
        assert!((out.energy.total - 4.0 / 3.0).abs() < 0.02 * 4.0 / 3.0, "{:?} {:?}", out.energy, out.status);
        let v = out.field.interior_values();
        assert!(v.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }

    #[test]
    fn nonlocal_minimizer_is_monotone_and_exterior_fixed() {
        let d = Domain::interval(-1.0, 1.0, 96).unwrap().with_margin(0.5).unwrap();
        let u0 = voxelize(&GeometricSet::half_line(0.0), &d);
        let sp = EnergySpec::new(Functional::FFull, 0.1, 0.25);
        let cfg = MinimizeConfig {
            max_iterations: 400,
            odd_perturbation: true,
            ..Default::default()
        };
        let out = minimize(&sp, &u0, &cfg).unwrap();
        assert!(out.trace.windows(2).all(|w| w[1].energy <= w[0].energy));
        let v = out.field.interior_values();
        assert!(v.windows(2).all(|w| w[1] <= w[0] + 1e-9), "{v:?}");
        for i in 0..v.len() {
            assert!(v[i] >= -1.0 && v[i] <= 1.0);
        }
        let mask = u0.mask();
        for i in 0..mask.len() {
            if !mask[i] {
                assert_eq!(out.field.values()[i].to_bits(), u0.values()[i].to_bits());
            }
        }
        let mut buf = Vec::new();
        out.write_trace(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("iter,energy,gradient_norm,step\n0,"));
    }

    #[test]
    fn recovery_profile_energy_and_saturation() {
        let d = Domain::interval(-1.0, 1.0, 4000).unwrap();
        let e = GeometricSet::half_line(0.0);
        let u = recovery_sequence(&e, 0.01, &DoubleWell::quartic(), &d).unwrap();
        let mm = modica_mortola(&u, &d, 0.01, &DoubleWell::quartic()).unwrap();
        assert!((mm.total - 4.0 / 3.0).abs() < 2e-3, "{mm:?}");
        let ind = voxelize(&e, &d);
        let eps: f64 = 1e-3;
        let u = recovery_sequence(&e, eps, &DoubleWell::quartic(), &d).unwrap();
        let band = 40.0 * eps * eps.ln().abs();
        for i in 0..u.values().len() {
            let x = d.grid().center(i)[0];
            if x.abs() > band {
                assert!((u.values()[i] - ind.values()[i]).abs() < 1e-12, "{x}");
            }
        }
    }

    #[test]
    fn recovery_l1_rate() {
        let d = Domain::boxed(&[-1.0, -1.0], &[1.0, 1.0], &[200, 200]).unwrap();
        let e = GeometricSet::ball(&[0.0, 0.0], 0.5);
        let ind = voxelize(&e, &d);
        let per = std::f64::consts::PI;
        let c: Vec<f64> = [0.08, 0.04, 0.02]
            .iter()
            .map(|&eps| {
                let u = recovery_sequence(&e, eps, &DoubleWell::quartic(), &d).unwrap();
                let l1: f64 = u.values().iter().zip(ind.values()).map(|(a, b)| (a - b).abs()).sum::<f64>() * d.cell_volume();
                l1 / (eps * per)
            })
            .collect();
        // ∫|tanh(t/2) − sign t| dt = 4 log 2.
        for ci in &c {
            assert!((ci - 4.0 * 2f64.ln()).abs() < 0.1, "{c:?}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn projection_idempotent(v in -5.0f64..5.0) {
            for r in [ValueRange::Symmetric, ValueRange::Unit] {
                let once = project(v, r.bounds());
                prop_assert_eq!(project(once, r.bounds()), once);
            }
        }
    }
}
