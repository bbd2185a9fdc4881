//! Classical perimeter, boundary trace and interface mesh of a disc in the
//! unit square, compared with their exact values; then the level-set
//! distance and density fraction of a smooth field.

use std::f64::consts::PI;

use nonlocal_gamma::local_geometry::{
    boundary_trace, classical_perimeter, density_fraction, hausdorff_distance, interface_mesh, level_set_region, Where,
};
use nonlocal_gamma::{Domain, GeometricSet, ScalarField, ValueRange};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let disc = GeometricSet::ball(&[0.5, 0.5], 0.3);
    // Cut off at x₁ = 0, so membership changes across that side of ∂Ω.
    let cut = GeometricSet::ball(&[0.0, 0.5], 0.3).intersect(GeometricSet::boxed(&[0.0, 0.0], &[1.0, 1.0]));
    for n in [16, 32, 64, 128] {
        let omega = Domain::boxed(&[0.0, 0.0], &[1.0, 1.0], &[n, n])?;
        let p = classical_perimeter(&disc, &omega, Where::Interior).value;
        let q = classical_perimeter(&cut, &omega, Where::Interior).value;
        let t = boundary_trace(&cut, &omega).value;
        println!(
            "N = {n:>3}: Per(disc) {p:.5} (exact {:.5}), Per(half disc, Ω) {q:.5} (exact {:.5}), trace {t:.5} (exact 0.6)",
            2.0 * PI * 0.3,
            PI * 0.3
        );
    }

    let omega = Domain::boxed(&[0.0, 0.0], &[1.0, 1.0], &[64, 64])?;
    let mesh = interface_mesh(&disc, &omega);
    let width = 0.02;
    let u = ScalarField::from_fn(omega.clone(), None, ValueRange::Symmetric, |p| (-disc.signed_distance(p, 2) / width).tanh())?;
    let band = level_set_region(&u, 0.5)?;
    println!("cells with |u| < 1/2: {}, one-sided distance to the circle {:.4}", band.len(), hausdorff_distance(&band, &mesh));
    for r in [0.05, 0.1, 0.2] {
        println!("density of {{u > 0}} in B_{r}(0.5, 0.2): {:.4}", density_fraction(&u, 0.0, &[0.5, 0.2, 0.0], r)?);
    }
    Ok(())
}
