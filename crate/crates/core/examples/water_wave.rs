//! The multiplier `S_s(ξ)` against its two regimes, `|ξ|²` at low and
//! `|ξ|^{2s}` at high frequency, and the spectral energy of a periodic
//! two-phase field in `[0,1]`.

use std::f64::consts::TAU;

use nonlocal_gamma::bessel::multiplier_s;
use nonlocal_gamma::waterwave::spectral_energy;
use nonlocal_gamma::{Domain, DoubleWell, ScalarField, ValueRange};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    println!("{:>6} {:>10} {:>14} {:>14}", "s", "xi", "S/xi^2", "S/xi^(2s)");
    for s in [0.25, 0.5, 0.75] {
        for xi in [0.01, 0.1, 1.0, 10.0, 100.0] {
            let v = multiplier_s(s, xi)?;
            println!("{s:>6} {xi:>10} {:>14.6} {:>14.6}", v / (xi * xi), v / xi.powf(2.0 * s));
        }
    }
    println!("S_1/2(3) = {:.12}, 3 tanh 3 = {:.12}", multiplier_s(0.5, 3.0)?, 3.0 * 3f64.tanh());

    let omega = Domain::boxed(&[0.0], &[1.0], &[256])?;
    let well = DoubleWell::unit();
    for eps in [0.1, 0.05, 0.025] {
        let u = ScalarField::from_fn(omega.clone(), None, ValueRange::Unit, |p| 0.5 + 0.5 * ((TAU * p[0]).sin() / eps).tanh())?;
        for s in [0.25, 0.75] {
            let e = spectral_energy(&u, eps, s, true, &well)?;
            println!("eps {eps:<6} s {s:<5} rescaled energy {:.6} (kinetic {:.6}, potential {:.6})", e.total, e.kinetic, e.potential);
        }
    }
    Ok(())
}
