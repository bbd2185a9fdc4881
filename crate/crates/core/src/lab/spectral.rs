//! Symbol asymptotics of the water-wave multiplier.

use super::{Check, Experiment, Row, SweepReport};
use crate::bessel::multiplier_s;
use crate::error::{Error, Result};
use crate::waterwave::SpectralGrid;

fn log_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a * (b / a).powf(i as f64 / (n - 1) as f64)).collect()
}

/// Relative gap of Parseval's identity for a deterministic pseudo-random field.
fn parseval_gap(exp: &Experiment, s: f64) -> Result<f64> {
    let grid = exp.omega.grid();
    let sg = SpectralGrid::new(&grid, s)?;
    let mut x: u64 = 0x9E37_79B9_7F4A_7C15;
    let v: Vec<f64> = (0..grid.len())
        .map(|_| {
            x ^= x << 13;
            x ^= x >> 7;
            x ^= x << 17;
            (x >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        })
        .collect();
    let hat = sg.transform(&v);
    let a: f64 = v.iter().map(|t| t * t).sum();
    let b: f64 = hat.iter().map(|z| z.norm_sqr()).sum();
    Ok((a - b).abs() / a)
}

pub(super) fn multiplier(exp: &Experiment) -> Result<SweepReport> {
    let (lo, hi) = exp.options.xi_range;
    if !(lo > 0.0 && hi > 2.0 * lo) {
        return Err(Error::Unsupported("xi_range needs 0 < lo < hi/2".into()));
    }
    let target = exp.target.unwrap_or(1.0);
    let mut rows = Vec::new();
    let mut checks = Vec::new();
    for &s in &exp.parameters {
        let row = (|| -> Result<Row> {
            let large: Vec<f64> = log_grid(hi / 2.0, hi, 50)
                .into_iter()
                .map(|x| multiplier_s(s, x).map(|v| v / x.powf(2.0 * s)))
                .collect::<Result<_>>()?;
            let small: Vec<f64> = log_grid(lo, 1.0, 50)
                .into_iter()
                .map(|x| multiplier_s(s, x).map(|v| v / (x * x)))
                .collect::<Result<_>>()?;
            let closed = if s == 0.5 {
                log_grid(lo, hi, 400)
                    .into_iter()
                    .map(|x| multiplier_s(s, x).map(|v| (v - x * x.tanh()).abs() / (x * x.tanh())))
                    .collect::<Result<Vec<f64>>>()?
                    .into_iter()
                    .fold(0.0, f64::max)
            } else {
                f64::NAN
            };
            let (lmin, lmax) = large.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
            let smax = small.iter().copied().fold(0.0, f64::max);
            // Drift of S_s/|ξ|² between the two smallest sampled frequencies.
            let drift = (small[1] - small[0]).abs() / small[0];
            Ok(Row::new("s", s, vec![lmax, lmin, smax, drift, closed, parseval_gap(exp, s)?], target))
        })();
        match row {
            Ok(r) => {
                let m = &r.measured;
                checks.push(Check::new(
                    &format!("large_xi_s{s}"),
                    (m[1] - target).abs() <= exp.tolerance && (m[0] - target).abs() <= exp.tolerance,
                    format!("S_s/|ξ|^{{2s}} in [{:.6}, {:.6}] on [{}, {}]", m[1], m[0], hi / 2.0, hi),
                ));
                checks.push(Check::new(
                    &format!("small_xi_s{s}"),
                    m[2].is_finite() && m[3] <= 1e-2,
                    format!("max S_s/|ξ|² = {:.6} on [{lo}, 1], drift {:.2e} at the low end", m[2], m[3]),
                ));
                if s == 0.5 {
                    checks.push(Check::new("closed_form", m[4] <= 1e-8, format!("max relative gap {:.2e}", m[4])));
                }
                checks.push(Check::new(&format!("parseval_s{s}"), m[5] <= 1e-10, format!("relative gap {:.2e}", m[5])));
                rows.push(r);
            }
            Err(err) => rows.push(Row::failed("s", s, 6, &err)),
        }
    }
    Ok(SweepReport::assemble(
        exp,
        target,
        &["large_ratio_max", "large_ratio_min", "small_ratio_max", "small_ratio_drift", "closed_form_gap", "parseval_gap"],
        rows,
        None,
        None,
        checks,
    ))
}
