//! ε-sweeps of descent minimizers and recovery sequences, and energy growth
//! of optimal profiles.

use super::{fit_rate, relative_error, Check, Experiment, FitModel, Row, SweepReport};
use crate::domain::{Domain, Point, Shape};
use crate::energies::{EnergySpec, Functional, NonlocalEnergy};
use crate::error::{Error, Result};
use crate::field::{ExteriorDatum, ScalarField};
use crate::kernels::{frac_perimeter, KernelSpec, Part};
use crate::local_geometry::{
    classical_perimeter, density_fraction, hausdorff_distance, interface_mesh, level_set_region, FacetTag,
    InterfaceMesh, Where,
};
use crate::minimize::{minimize_with, range_for_well, recovery_sequence, seed_field, Minimized, Objective, Seed, Status};
use crate::set::GeometricSet;

struct Run {
    min: Minimized,
    recovery: f64,
}

fn datum(exp: &Experiment, e: &GeometricSet) -> ExteriorDatum {
    let (a, b) = exp.well.zeros();
    ExteriorDatum::Set {
        set: e.clone(),
        inside: b,
        outside: a,
    }
}

/// Values reordered so that the sweep runs toward its limit.
fn toward_limit<T: Clone>(exp: &Experiment, v: &[T]) -> Vec<T> {
    let p = &exp.parameters;
    let t0 = exp.name.small_parameter(p[0]).abs();
    let t1 = exp.name.small_parameter(p[p.len() - 1]).abs();
    if t0 >= t1 {
        v.to_vec()
    } else {
        v.iter().rev().cloned().collect()
    }
}

fn min_width(omega: &Domain) -> f64 {
    omega.grid().h[..omega.dim()].iter().copied().fold(f64::INFINITY, f64::min)
}

/// 1D optimal profile as samples `(t, u(t))` along the distance into `E`.
struct Profile {
    t: Vec<f64>,
    u: Vec<f64>,
}

impl Profile {
    fn eval(&self, x: f64) -> f64 {
        let (t, u) = (&self.t, &self.u);
        if x <= t[0] {
            return u[0];
        }
        if x >= t[t.len() - 1] {
            return u[u.len() - 1];
        }
        let k = t.partition_point(|&v| v <= x);
        let w = (x - t[k - 1]) / (t[k] - t[k - 1]);
        (1.0 - w) * u[k - 1] + w * u[k]
    }
}

/// Descent from the voxelized set for the full scaled energy, plus the
/// energy of a recovery field at the same `ε`: the local optimal profile
/// for `s < 1/2`, the sampled nonlocal one (if given) otherwise.
fn descend(exp: &Experiment, omega: &Domain, e: &GeometricSet, eps: f64, profile: Option<&Profile>) -> Result<Run> {
    let mut spec = EnergySpec::new(Functional::FFull, eps, exp.options.s);
    spec.well = exp.well;
    let d = datum(exp, e);
    let obj = Objective::new(&spec, omega, Some(&d), None)?;
    let range = range_for_well(&exp.well);
    let u0 = seed_field(&Seed::Voxelized { set: e.clone() }, omega, Some(d.clone()), &exp.well, range)?;
    let mut cfg = exp.options.minimize.clone();
    cfg.bounds = range;
    let min = minimize_with(&obj, &u0, &cfg)?;
    let rec = match profile {
        Some(p) => {
            let dim = omega.dim();
            ScalarField::from_fn(omega.clone(), Some(d), range, |x| p.eval(-e.signed_distance(x, dim) / eps))?
        }
        None => recovery_sequence(e, eps, &exp.well, omega)?,
    };
    let recovery = obj.evaluate(rec.values())?.total;
    Ok(Run { min, recovery })
}

/// Reason to distrust a descent result, if any.
fn descent_flag(m: &Minimized, tol: f64) -> Option<String> {
    let g = m.trace.last().map(|t| t.gradient_norm).unwrap_or(f64::NAN);
    (m.status != Status::Converged && !(g <= 1e3 * tol)).then(|| format!("descent stopped ({:?}) at gradient {g:.3e}", m.status))
}

fn flagged(mut row: Row, flag: Option<String>) -> Row {
    row.flag = flag;
    row
}

/// Optimal nonlocal profile: descent with `ε = 1` on a long interval at
/// cell width `profile_h`; returns its energy and samples.
fn optimal_profile(exp: &Experiment) -> Result<(f64, Profile)> {
    let l = exp.options.profile_extent;
    let cells = (2.0 * l / exp.options.profile_h).round() as usize;
    let line = Domain::interval(-l, l, cells)?.with_margin(l)?;
    let run = descend(exp, &line, &GeometricSet::half_space(&[-1.0], 0.0), 1.0, None)?;
    let g = line.grid();
    let t = (0..g.len()).map(|i| g.center(i)[0]).collect();
    Ok((run.min.energy.total, Profile { t, u: run.min.field.values().to_vec() }))
}

/// Γ-limit reference and, for `s ≥ 1/2`, the profile of the recovery fields.
fn gamma_reference(exp: &Experiment) -> Result<(f64, Option<Profile>)> {
    let (a, b) = exp.well.zeros();
    if exp.options.s < 0.5 {
        let t = match exp.target {
            Some(t) => t,
            None => 2.0 * (b - a).powi(2) * frac_perimeter(&exp.set, &exp.omega, exp.options.s, Part::Full)?,
        };
        return Ok((t, None));
    }
    let (c, p) = optimal_profile(exp)?;
    let t = exp.target.unwrap_or(c * classical_perimeter(&exp.set, &exp.omega, Where::Interior).value);
    Ok((t, Some(p)))
}

pub(super) fn gamma(exp: &Experiment) -> Result<SweepReport> {
    let (target, profile) = gamma_reference(exp)?;
    let tol = exp.tolerance;
    let rows: Vec<Row> = exp
        .parameters
        .iter()
        .map(|&eps| match descend(exp, &exp.omega, &exp.set, eps, profile.as_ref()) {
            Ok(r) => {
                let g = r.min.trace.last().map(|t| t.gradient_norm).unwrap_or(f64::NAN);
                let row = Row::new("eps", eps, vec![r.min.energy.total, r.recovery, r.min.trace.len() as f64 - 1.0, g], target);
                flagged(row, descent_flag(&r.min, exp.options.minimize.tolerance))
            }
            Err(err) => Row::failed("eps", eps, 4, &err),
        })
        .collect();
    let ordered = toward_limit(exp, &rows);
    let gaps: Vec<f64> = ordered.iter().map(|r| (r.measured[0] - target).abs()).collect();
    let finest = &ordered[ordered.len() - 1];
    let (m, rec) = (finest.measured[0], finest.measured[1]);
    let checks = vec![
        Check::new(
            "approach",
            gaps.windows(2).all(|w| w[1] <= w[0]),
            format!("|min − target| along the sweep: {gaps:.4?}"),
        ),
        Check::new("liminf", m >= target * (1.0 - tol), format!("min energy {m:.6} against {:.6}", target * (1.0 - tol))),
        Check::new("limsup", rec <= target * (1.0 + tol), format!("recovery energy {rec:.6} against {:.6}", target * (1.0 + tol))),
        Check::new("minimizer_close", relative_error(m, target) <= tol, format!("relative error {:.4}", relative_error(m, target))),
        Check::new("recovery_close", relative_error(rec, target) <= tol, format!("relative error {:.4}", relative_error(rec, target))),
        Check::consistency(
            "sandwich",
            rows.iter().all(|r| r.measured[0] <= r.measured[1] * (1.0 + 1e-9)),
            "descent minimum is below the recovery energy at every ε".into(),
        ),
    ];
    Ok(SweepReport::assemble(exp, target, &["min_energy", "recovery_energy", "iterations", "gradient_norm"], rows, None, None, checks))
}

fn interior_interface(e: &GeometricSet, omega: &Domain) -> InterfaceMesh {
    let mut mesh = interface_mesh(e, omega);
    mesh.facets.retain(|f| f.tag == FacetTag::Interior);
    mesh
}

pub(super) fn levelset(exp: &Experiment) -> Result<SweepReport> {
    let mesh = interior_interface(&exp.set, &exp.omega);
    let h = min_width(&exp.omega);
    let rows: Vec<Row> = exp
        .parameters
        .iter()
        .map(|&eps| {
            let res = descend(exp, &exp.omega, &exp.set, eps, None).and_then(|r| {
                let region = level_set_region(&r.min.field, exp.options.level)?;
                let d = hausdorff_distance(&region, &mesh);
                Ok(flagged(Row::new("eps", eps, vec![d / h, d], 0.0), descent_flag(&r.min, exp.options.minimize.tolerance)))
            });
            res.unwrap_or_else(|err| Row::failed("eps", eps, 2, &err))
        })
        .collect();
    let cells: Vec<f64> = toward_limit(exp, &rows).iter().map(|r| r.measured[0]).collect();
    let last = cells[cells.len() - 1];
    let checks = vec![
        Check::new(
            "decreasing",
            cells.windows(2).all(|w| w[1] <= w[0]) && last < cells[0],
            format!("distance in cells along the sweep: {cells:?}"),
        ),
        Check::new("finest", last <= exp.tolerance, format!("{last} cells against {}", exp.tolerance)),
    ];
    Ok(SweepReport::assemble(exp, 0.0, &["distance_cells", "distance"], rows, None, None, checks))
}

fn refined(omega: &Domain) -> Result<Domain> {
    Domain::new(omega.shape.clone(), omega.cells.iter().map(|c| 2 * c).collect(), omega.margin)
}

/// Smallest density of `{u > θ₂}` over balls `B_R(x₀)`, `r0 ≤ R ≤ 0.9·room`,
/// at the interior cell `x₀` with `u > θ₁` nearest to the interface.
fn density_floor(u: &ScalarField, mesh: &InterfaceMesh, theta: (f64, f64), r0: f64) -> Result<f64> {
    let g = u.grid();
    let hi = g.hi();
    let room = |p: &Point| (0..g.dim).map(|k| (p[k] - g.lo[k]).min(hi[k] - p[k])).fold(f64::INFINITY, f64::min);
    let x0 = u
        .interior_cells()
        .into_iter()
        .filter(|&i| u.values()[i] > theta.0)
        .map(|i| g.center(i))
        .min_by(|p, q| mesh.distance(p).total_cmp(&mesh.distance(q)).then(room(q).total_cmp(&room(p))))
        .ok_or_else(|| Error::Unsupported(format!("no cell with u > {}: density hypothesis not met", theta.0)))?;
    let rmax = 0.9 * room(&x0);
    if !(rmax > r0) {
        return Err(Error::Unsupported(format!(
            "nearest cell with u > {} lies {:.4} from the edge of the grid, too close for R ≥ {r0}: density hypothesis not met",
            theta.0,
            room(&x0)
        )));
    }
    let n = 12;
    (0..n)
        .map(|k| r0 * (rmax / r0).powf(k as f64 / (n - 1) as f64))
        .map(|r| density_fraction(u, theta.1, &x0, r))
        .try_fold(f64::INFINITY, |acc, v| v.map(|v| acc.min(v)))
}

pub(super) fn density(exp: &Experiment) -> Result<SweepReport> {
    let floor = exp.target.unwrap_or(0.25);
    let fine = refined(&exp.omega)?;
    let mesh = interior_interface(&exp.set, &exp.omega);
    let h = min_width(&exp.omega);
    let theta = exp.options.theta;
    let rows: Vec<Row> = exp
        .parameters
        .iter()
        .map(|&eps| {
            let r0 = eps.max(2.0 * h);
            let res = (|| -> Result<Row> {
                let a = descend(exp, &exp.omega, &exp.set, eps, None)?;
                let b = descend(exp, &fine, &exp.set, eps, None)?;
                let c0 = density_floor(&a.min.field, &mesh, theta, r0)?;
                let c1 = density_floor(&b.min.field, &mesh, theta, r0)?;
                let tol = exp.options.minimize.tolerance;
                let flag = descent_flag(&a.min, tol).or_else(|| descent_flag(&b.min, tol));
                Ok(flagged(Row::new("eps", eps, vec![c0, c1, (c1 - c0).abs() / c0], floor), flag))
            })();
            res.unwrap_or_else(|err| Row::failed("eps", eps, 3, &err))
        })
        .collect();
    let lowest = rows.iter().flat_map(|r| [r.measured[0], r.measured[1]]).fold(f64::INFINITY, f64::min);
    let drift = rows.iter().map(|r| r.measured[2]).fold(0.0, f64::max);
    let checks = vec![
        Check::new("floor", lowest >= floor, format!("smallest density {lowest:.4} against {floor}")),
        Check::new("refinement", drift <= exp.tolerance, format!("largest relative change under doubling {drift:.4}")),
    ];
    Ok(SweepReport::assemble(exp, floor, &["density", "density_refined", "drift"], rows, None, None, checks))
}

fn scaled_domain(omega: &Domain, r: f64, h: f64) -> Result<Domain> {
    let shape = match &omega.shape {
        Shape::Box { lo, hi } => Shape::Box {
            lo: lo.iter().map(|x| x * r).collect(),
            hi: hi.iter().map(|x| x * r).collect(),
        },
        Shape::Ball { center, radius } => Shape::Ball {
            center: center.iter().map(|x| x * r).collect(),
            radius: radius * r,
        },
    };
    let (lo, hi) = omega.bounds();
    let cells = (0..omega.dim()).map(|k| ((hi[k] - lo[k]) * r / h).round().max(1.0) as usize).collect();
    Domain::new(shape, cells, omega.margin * r)
}

/// Unrescaled energy (`ε = 1`) of the recovery profile in `R·Ω` along `R`.
pub(super) fn growth(exp: &Experiment) -> Result<SweepReport> {
    let s = exp.options.s;
    let n = exp.omega.dim() as f64;
    let rows: Vec<Row> = exp
        .parameters
        .iter()
        .map(|&r| {
            let res = (|| -> Result<Row> {
                let omega = scaled_domain(&exp.omega, r, exp.options.profile_h)?;
                let u = recovery_sequence(&exp.set, 1.0, &exp.well, &omega)?;
                let kernel = KernelSpec::squared(s);
                let e = NonlocalEnergy::j_raw(&omega, &kernel, u.exterior(), 1.0, exp.well)?.evaluate(&u)?.total;
                let area = r.powf(n - 1.0);
                Ok(Row::new("R", r, vec![e, e / area, e / (area * r.ln())], f64::NAN))
            })();
            res.unwrap_or_else(|err| Row::failed("R", r, 3, &err))
        })
        .collect();
    let spread = |k: usize| {
        let v: Vec<f64> = rows.iter().map(|r| r.measured[k]).collect();
        v.iter().copied().fold(0.0, f64::max) / v.iter().copied().fold(f64::INFINITY, f64::min)
    };
    let mut fit = None;
    let (target, checks) = if s < 0.5 {
        let target = exp.target.unwrap_or(n - 2.0 * s);
        let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.parameter, r.measured[0])).collect();
        let f = fit_rate(&pts, FitModel::Loglog)?;
        fit = Some(f);
        let check = Check::new(
            "slope",
            (f.slope - target).abs() <= exp.tolerance,
            format!("log-log slope {:.4} against {target} ± {}", f.slope, exp.tolerance),
        );
        (target, vec![check])
    } else if s == 0.5 {
        let v: Vec<f64> = rows.iter().map(|r| r.measured[1]).collect();
        let checks = vec![
            Check::new("unbounded", v.windows(2).all(|w| w[1] > w[0]), format!("E/R^(n−1): {v:.4?}")),
            Check::new(
                "log_bounded",
                spread(2) <= exp.tolerance,
                format!("max/min of E/(R^(n−1) log R) = {:.4} against {}", spread(2), exp.tolerance),
            ),
        ];
        (exp.target.unwrap_or(n - 1.0), checks)
    } else {
        let check = Check::new(
            "bounded",
            spread(1) <= exp.tolerance,
            format!("max/min of E/R^(n−1) = {:.4} against {}", spread(1), exp.tolerance),
        );
        (exp.target.unwrap_or(n - 1.0), vec![check])
    };
    Ok(SweepReport::assemble(exp, target, &["energy", "per_area", "per_area_log"], rows, fit, None, checks))
}

/// Descent energies of the one-jump boundary functional along `ε`.
pub(super) fn abs1d(exp: &Experiment) -> Result<SweepReport> {
    let target = exp.target.unwrap_or(8.0 * exp.options.k);
    let range = range_for_well(&exp.well);
    let rows: Vec<Row> = exp
        .parameters
        .iter()
        .map(|&eps| {
            let res = (|| -> Result<Row> {
                let mut spec = EnergySpec::new(Functional::Abs1d, eps, 0.5);
                spec.k = exp.options.k;
                spec.well = exp.well;
                let obj = Objective::new(&spec, &exp.omega, None, None)?;
                let u0 = seed_field(&Seed::Voxelized { set: exp.set.clone() }, &exp.omega, None, &exp.well, range)?;
                let mut cfg = exp.options.minimize.clone();
                cfg.bounds = range;
                let m = minimize_with(&obj, &u0, &cfg)?;
                let e = m.energy;
                let flag = descent_flag(&m, cfg.tolerance);
                Ok(flagged(Row::new("eps", eps, vec![e.total, e.kinetic, e.potential], target), flag))
            })();
            res.unwrap_or_else(|err| Row::failed("eps", eps, 3, &err))
        })
        .collect();
    let gaps: Vec<f64> = toward_limit(exp, &rows).iter().map(|r| (r.measured[0] - target).abs()).collect();
    let checks = vec![Check::new(
        "monotone_toward",
        gaps.windows(2).all(|w| w[1] < w[0]),
        format!("|energy − {target}| along the sweep: {gaps:.4?}"),
    )];
    Ok(SweepReport::assemble(exp, target, &["energy", "kinetic", "potential"], rows, None, None, checks))
}
