//! Interior, exterior and full fractional perimeters of a half-line and of a
//! square corner, with the scaled values `(1/2−s)·Per_s` that approach the
//! classical perimeter as `s → 1/2`.

use nonlocal_gamma::kernels::{field_kernel, frac_perimeter, Part};
use nonlocal_gamma::{voxelize, Domain, GeometricSet};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cases = [
        ("half-line in (-1,1)", GeometricSet::half_space(&[-1.0], 0.0), Domain::interval(-1.0, 1.0, 256)?.with_margin(0.5)?),
        (
            "quarter of the unit square",
            GeometricSet::boxed(&[0.0, 0.0], &[0.5, 0.5]),
            Domain::boxed(&[0.0, 0.0], &[1.0, 1.0], &[32, 32])?.with_margin(0.25)?,
        ),
    ];
    for (label, e, omega) in &cases {
        println!("{label}");
        println!("{:>6} {:>12} {:>12} {:>12} {:>14}", "s", "interior", "exterior", "full", "(1/2-s)full");
        for s in [0.1, 0.25, 0.4, 0.48] {
            let int = frac_perimeter(e, omega, s, Part::Interior)?;
            let ext = frac_perimeter(e, omega, s, Part::Exterior)?;
            let full = frac_perimeter(e, omega, s, Part::Full)?;
            println!("{s:>6} {int:>12.6} {ext:>12.6} {full:>12.6} {:>14.6}", (0.5 - s) * full);
        }
        // The squared-difference kernel of the ±1 indicator is 8 Per_s.
        let k = field_kernel(&voxelize(e, omega), omega, 0.25, Part::Full)?;
        println!("K(χ−χᶜ) / Per_s at s = 0.25: {:.15}\n", k / frac_perimeter(e, omega, 0.25, Part::Full)?);
    }
    Ok(())
}
