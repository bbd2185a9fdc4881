//! Sweeps in `s → 1/2` of fractional perimeters and of the BBM seminorm.

use super::{extrapolate, relative_error, Check, Experiment, Row, SweepReport};
use crate::domain::{unit_ball_volume, Domain, Shape};
use crate::error::{Error, Result};
use crate::field::{ScalarField, ValueRange};
use crate::kernels::{bbm_seminorm, frac_perimeter, Part};
use crate::local_geometry::{boundary_trace, classical_perimeter, Where};
use crate::set::GeometricSet;

/// `ω_{n−1}` times the local limit of the requested part.
fn local_target(e: &GeometricSet, omega: &Domain, part: Part) -> f64 {
    let w = unit_ball_volume(omega.dim() - 1);
    let int = || classical_perimeter(e, omega, Where::Interior).value;
    let ext = || boundary_trace(e, omega).value;
    w * match part {
        Part::Interior => int(),
        Part::Exterior => ext(),
        Part::Full => int() + ext(),
    }
}

/// `(1/2−s) Per_s^{part}(e, Ω)` along the sweep.
fn s_series(series: &str, e: &GeometricSet, exp: &Experiment, target: f64) -> Vec<Row> {
    exp.parameters
        .iter()
        .map(|&s| match frac_perimeter(e, &exp.omega, s, exp.options.part) {
            Ok(p) => Row::new(series, s, vec![(0.5 - s) * p, p], target),
            Err(err) => Row::failed(series, s, 2, &err),
        })
        .collect()
}

fn limit_of(rows: &[Row]) -> Result<super::Extrapolation> {
    let pts: Vec<(f64, f64)> = rows.iter().map(|r| (0.5 - r.parameter, r.measured[0])).collect();
    extrapolate(&pts)
}

fn consistency(e: &super::Extrapolation, scale: f64, tol: f64) -> Check {
    let d = e.disagreement();
    Check::consistency(
        "extrapolation_consistency",
        d <= tol * scale,
        format!("affine {:.6} vs three-point {:.6}", e.affine, e.richardson.unwrap_or(e.affine)),
    )
}

pub(super) fn pointwise(exp: &Experiment) -> Result<SweepReport> {
    let target = exp.target.unwrap_or_else(|| local_target(&exp.set, &exp.omega, exp.options.part));
    let rows = s_series("s", &exp.set, exp, target);
    let lim = limit_of(&rows)?;
    let scale = if target == 0.0 { 1.0 } else { target.abs() };
    let err = relative_error(lim.affine, target);
    let checks = vec![
        Check::new(
            "limit",
            err <= exp.tolerance,
            format!("extrapolated {:.6}, target {:.6}, relative error {:.4}", lim.affine, target, err),
        ),
        consistency(&lim, scale, exp.tolerance),
    ];
    Ok(SweepReport::assemble(exp, target, &["scaled_perimeter", "perimeter"], rows, None, Some(lim), checks))
}

/// `Ω` shrunk by `delta`.
fn inner_region(omega: &Domain, delta: f64) -> Result<GeometricSet> {
    match &omega.shape {
        Shape::Box { lo, hi } => {
            let a: Vec<f64> = lo.iter().map(|x| x + delta).collect();
            let b: Vec<f64> = hi.iter().map(|x| x - delta).collect();
            if a.iter().zip(&b).any(|(x, y)| x >= y) {
                return Err(Error::Unsupported(format!("retraction {delta} empties the container")));
            }
            Ok(GeometricSet::boxed(&a, &b))
        }
        Shape::Ball { center, radius } => {
            if delta >= *radius {
                return Err(Error::Unsupported(format!("retraction {delta} empties the container")));
            }
            Ok(GeometricSet::ball(center, radius - delta))
        }
    }
}

/// Exterior limits of `E` (touching `∂Ω`) against the retracted `E ∩ Ω_δ`.
pub(super) fn ext_vanishing(exp: &Experiment) -> Result<SweepReport> {
    let mut exp = exp.clone();
    exp.options.part = Part::Exterior;
    let target = exp.target.unwrap_or_else(|| local_target(&exp.set, &exp.omega, Part::Exterior));
    let mut rows = s_series("crossing", &exp.set, &exp, target);
    let lim = limit_of(&rows)?;
    let mut checks = vec![
        Check::new(
            "crossing_limit",
            lim.affine > (1.0 - exp.tolerance) * target,
            format!("extrapolated {:.6} against {:.6}·target", lim.affine, 1.0 - exp.tolerance),
        ),
        consistency(&lim, target.abs().max(1.0), exp.tolerance),
    ];
    let h = exp.omega.grid().h[..exp.omega.dim()].iter().copied().fold(f64::INFINITY, f64::min);
    let s_gap = 0.5 - exp.options.retraction_gap;
    let mut at_gap = Vec::new();
    for &cells in &exp.options.retractions {
        let e_delta = exp.set.clone().intersect(inner_region(&exp.omega, cells * h)?);
        let series = format!("retracted_{cells}");
        let sweep = s_series(&series, &e_delta, &exp, 0.0);
        let vals: Vec<f64> = sweep.iter().map(|r| r.measured[0]).collect();
        // Toward s = 1/2 the retracted values decay (for fixed δ).
        let toward: Vec<f64> = if exp.parameters[0] < exp.parameters[exp.parameters.len() - 1] { vals.clone() } else { vals.iter().rev().copied().collect() };
        checks.push(Check::new(
            &format!("{series}_decays_in_s"),
            toward.windows(2).all(|w| w[1] < w[0]),
            format!("(1/2−s)Per_s^ext from {:.4} to {:.4}", toward[0], toward[toward.len() - 1]),
        ));
        rows.extend(sweep);
        match frac_perimeter(&e_delta, &exp.omega, s_gap, Part::Exterior) {
            Ok(p) => {
                at_gap.push((0.5 - s_gap) * p);
                rows.push(Row::new("retracted_at_gap", cells, vec![(0.5 - s_gap) * p, p], target));
            }
            Err(err) => rows.push(Row::failed("retracted_at_gap", cells, 2, &err)),
        }
    }
    if !at_gap.is_empty() {
        checks.push(Check::new(
            "retracted_monotone",
            at_gap.windows(2).all(|w| w[1] < w[0]),
            format!("values at (1/2−s) = {} along δ = {:?} cells: {:?}", exp.options.retraction_gap, exp.options.retractions, at_gap),
        ));
        let last = at_gap[at_gap.len() - 1];
        checks.push(Check::new(
            "retracted_small",
            last < exp.options.row_tolerance * target,
            format!("{:.4} against {:.4}", last, exp.options.row_tolerance * target),
        ));
    }
    Ok(SweepReport::assemble(&exp, target, &["scaled_perimeter", "perimeter"], rows, None, Some(lim), checks))
}

/// `(1/2−s)|u|_{W^{2s,1}}` for the affine field `u(x) = x₁` on a 1D box.
pub(super) fn bbm(exp: &Experiment) -> Result<SweepReport> {
    let (lo, hi) = match &exp.omega.shape {
        Shape::Box { lo, hi } if lo.len() == 1 => (lo[0], hi[0]),
        _ => return Err(Error::Unsupported("BBM_LIMIT runs on an interval".into())),
    };
    let len = hi - lo;
    let u = ScalarField::from_fn(exp.omega.clone(), None, ValueRange::Real, |p| p[0])?;
    let target = exp.target.unwrap_or(len);
    let rows: Vec<Row> = exp
        .parameters
        .iter()
        .map(|&s| {
            let reference = len.powf(2.0 - 2.0 * s) / (2.0 - 2.0 * s);
            match bbm_seminorm(&u, &exp.omega, s) {
                Ok(b) => Row::new("s", s, vec![(0.5 - s) * b, b], reference),
                Err(err) => Row::failed("s", s, 2, &err),
            }
        })
        .collect();
    let worst = rows.iter().map(|r| r.relative_error).fold(0.0, f64::max);
    let lim = limit_of(&rows)?;
    let err = relative_error(lim.affine, target);
    let checks = vec![
        Check::new(
            "rows",
            worst <= exp.options.row_tolerance,
            format!("largest row error {worst:.2e} against closed form"),
        ),
        Check::new("limit", err <= exp.tolerance, format!("extrapolated {:.6}, target {:.6}", lim.affine, target)),
        consistency(&lim, target.abs(), exp.tolerance),
    ];
    Ok(SweepReport::assemble(exp, target, &["scaled_seminorm", "seminorm"], rows, None, Some(lim), checks))
}
