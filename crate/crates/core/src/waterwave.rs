//! Fourier-multiplier energies on periodic boxes.
//!
//! Transform convention: for a field sampled on `N` cells of a periodic box
//! of volume `|B|`, `û_m = N^{−1/2} Σ_j u_j e^{−iξ_m·x_j}` (unitary DFT) and
//! `∫ S_s |û|² := (|B|/N) Σ_m S_s(|ξ_m|) |û_m|²`, which is `|B| Σ_m S_s |c_m|²`
//! for the Fourier coefficients `c_m` of `u`.

use std::io::Write;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::bessel::{multiplier_s, multiplier_unchecked};
use crate::domain::{Grid, Shape};
use crate::energies::EnergyBreakdown;
use crate::error::{Error, Result};
use crate::field::{ScalarField, ValueRange};
use crate::well::DoubleWell;

#[derive(Clone, Debug, PartialEq)]
pub struct SpectralGrid {
    pub grid: Grid,
    pub s: f64,
    /// `|ξ_m|` per mode, in transform (row-major) order.
    pub xi: Vec<f64>,
    /// `S_s(|ξ_m|)` per mode.
    pub symbol: Vec<f64>,
}

impl SpectralGrid {
    pub fn new(grid: &Grid, s: f64) -> Result<Self> {
        multiplier_s(s, 0.0)?;
        let len = grid.len();
        let mut xi = Vec::with_capacity(len);
        for i in 0..len {
            let c = grid.unravel(i);
            let mut r2 = 0.0;
            for k in 0..grid.dim {
                let n = grid.n[k] as i64;
                let m = if c[k] as i64 <= n / 2 { c[k] as i64 } else { c[k] as i64 - n };
                let period = grid.h[k] * grid.n[k] as f64;
                let w = std::f64::consts::TAU * m as f64 / period;
                r2 += w * w;
            }
            xi.push(r2.sqrt());
        }
        let symbol = xi.iter().map(|&x| multiplier_unchecked(s, x)).collect();
        Ok(SpectralGrid {
            grid: grid.clone(),
            s,
            xi,
            symbol,
        })
    }

    /// Unitary DFT of `values` (row-major, last axis fastest).
    pub fn transform(&self, values: &[f64]) -> Vec<Complex<f64>> {
        let g = &self.grid;
        let mut data: Vec<Complex<f64>> = values.iter().map(|&v| Complex::new(v, 0.0)).collect();
        let mut planner = FftPlanner::new();
        let mut stride = 1;
        for k in (0..g.dim).rev() {
            let n = g.n[k];
            let fft = planner.plan_fft_forward(n);
            let mut line = vec![Complex::new(0.0, 0.0); n];
            let block = n * stride;
            for base in (0..data.len()).step_by(block) {
                for off in 0..stride {
                    for (t, slot) in line.iter_mut().enumerate() {
                        *slot = data[base + off + t * stride];
                    }
                    fft.process(&mut line);
                    for (t, v) in line.iter().enumerate() {
                        data[base + off + t * stride] = *v;
                    }
                }
            }
            stride = block;
        }
        let norm = 1.0 / (data.len() as f64).sqrt();
        data.iter_mut().for_each(|z| *z *= norm);
        data
    }

    /// `∫ S_s |û|²` under the module's convention.
    pub fn quadratic_form(&self, values: &[f64]) -> f64 {
        let hat = self.transform(values);
        let vol = self.grid.cell_volume();
        hat.iter().zip(&self.symbol).map(|(z, &w)| w * z.norm_sqr()).sum::<f64>() * vol
    }
}

fn periodic_grid(u: &ScalarField) -> Result<&Grid> {
    if !matches!(u.domain().shape, Shape::Box { .. }) || u.exterior().is_some() {
        return Err(Error::Unsupported(
            "spectral energies need a periodic box field without exterior datum".into(),
        ));
    }
    Ok(u.grid())
}

/// Weight of `𝓠_ε = weight · 𝓟_ε`.
pub fn rescaling(s: f64, eps: f64) -> Result<f64> {
    if s < 0.5 {
        Ok(eps.powf(-2.0 * s))
    } else if s == 0.5 {
        if !(eps < 1.0) {
            return Err(Error::OutOfRange {
                name: "eps",
                value: eps,
                expected: "(0, 1) when s = 1/2",
            });
        }
        Ok(1.0 / (eps * eps.ln()).abs())
    } else {
        Ok(1.0 / eps)
    }
}

/// `𝓟_ε(u) = ε^{2s} ∫ S_s |û|² + ∫ W(u)` with `W` vanishing at 0 and 1, or
/// `𝓠_ε` when `rescaled`.
pub fn spectral_energy(u: &ScalarField, eps: f64, s: f64, rescaled: bool, well: &DoubleWell) -> Result<EnergyBreakdown> {
    let grid = periodic_grid(u)?;
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::OutOfRange {
            name: "eps",
            value: eps,
            expected: "> 0",
        });
    }
    if let Some((i, &v)) = u.values().iter().enumerate().find(|(_, v)| !ValueRange::Unit.contains(**v)) {
        return Err(Error::ValueOutOfRange {
            cell: i,
            value: v,
            range: "[0,1]".into(),
        });
    }
    let sg = SpectralGrid::new(grid, s)?;
    let w = if rescaled { rescaling(s, eps)? } else { 1.0 };
    let kinetic = w * eps.powf(2.0 * s) * sg.quadratic_form(u.values());
    let vol = grid.cell_volume();
    let potential = w * u.values().iter().map(|&v| well.value(v)).sum::<f64>() * vol;
    Ok(EnergyBreakdown::new(kinetic, potential, 0.0))
}

/// CSV `s,xi,S` over the given grids of orders and frequencies.
pub fn write_multiplier_csv(mut w: impl Write, s_values: &[f64], xi_values: &[f64]) -> Result<()> {
    writeln!(w, "s,xi,S")?;
    for &s in s_values {
        for &x in xi_values {
            writeln!(w, "{},{},{}", s, x, multiplier_s(s, x)?)?;
        }
    }
    Ok(())
}
