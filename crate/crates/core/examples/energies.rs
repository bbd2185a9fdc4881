//! Every functional tag on one geometry: the recovery field of a half-line
//! for the field functionals, the set itself for the set functionals.

use nonlocal_gamma::energies::{capillarity, g_sharp, CapillarityKind, EnergySpec, Functional};
use nonlocal_gamma::minimize::{recovery_sequence, Objective};
use nonlocal_gamma::{Domain, DoubleWell, GeometricSet};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let e = GeometricSet::half_space(&[-1.0], 0.0);
    let omega = Domain::interval(-1.0, 1.0, 256)?.with_margin(0.5)?;
    let well = DoubleWell::quartic();
    for eps in [0.2, 0.1, 0.05] {
        let u = recovery_sequence(&e, eps, &well, &omega)?;
        println!("eps = {eps}");
        // ABS_1D weighs the potential by e^{k/ε}; its own descent is the ABS1D_LIMIT experiment.
        for tag in Functional::ALL.into_iter().filter(|t| !t.acts_on_sets() && *t != Functional::Abs1d) {
            let s = if tag == Functional::JEpsS { 0.25 } else { 0.75 };
            let mut spec = EnergySpec::new(tag, eps, s);
            spec.boundary_well = Some(well);
            let b = Objective::for_field(&spec, &u, None)?.evaluate(u.values())?;
            println!("  {:<16} s={s:<5} total {:>12.6}  kinetic {:>12.6}  potential {:>12.6}", tag.name(), b.total, b.kinetic, b.potential);
        }
    }

    let square = Domain::boxed(&[0.0, 0.0], &[1.0, 1.0], &[48, 48])?.with_margin(0.25)?;
    let drop = GeometricSet::ball(&[0.5, 0.0], 0.3).intersect(GeometricSet::boxed(&[0.0, 0.0], &[1.0, 1.0]));
    let inner = GeometricSet::ball(&[0.5, 0.5], 0.3);
    for sigma in [-0.5, 0.0, 0.5] {
        println!(
            "sigma {sigma:>4}: local capillarity of a wall drop {:.5}, G_sharp with c = 1 {:.5}, fractional capillarity of a free disc {:.5}",
            capillarity(&drop, &square, sigma, CapillarityKind::Local, 0.25)?,
            g_sharp(&drop, &square, sigma, 1.0)?,
            capillarity(&inner, &square, sigma, CapillarityKind::Fractional, 0.25)?
        );
    }
    Ok(())
}
