//! Cell-pair integrals of `|x−y|^{−(n+2s)}` on a uniform grid.
//!
//! For cells offset by the integer vector `Δ`, the pair integral equals
//! `∫ φ(z) |z|^{−(n+2s)} dz` with `φ(z) = Π_k (h_k − |z_k − Δ_k h_k|)_+`, the
//! autocorrelation of one cell. Near offsets are integrated in polar
//! coordinates about the origin: along a ray `φ` is a piecewise polynomial
//! of degree `n` in `r`, so the radial integral is exact, and the angular
//! rule is split wherever the ray crosses a corner of the support lattice.
//! Far offsets use tensor Gauss on the `2^n` boxes where `φ` is multilinear.

use crate::quadrature::GaussLegendre;

/// Offsets with every `|Δ_k| < NEAR` use the polar rule.
pub const NEAR: usize = 6;

/// `∫_0^∞ φ(rω) r^p dr`. Returns `+∞` for divergent pieces at the origin.
pub fn radial(omega: &[f64], delta: &[f64], h: &[f64], p: f64) -> f64 {
    let n = omega.len();
    let mut bps = [0.0f64; 3 * 3 + 1];
    let mut nb = 1;
    for k in 0..n {
        if omega[k] != 0.0 {
            for m in [-1.0, 0.0, 1.0] {
                let r = (delta[k] + m) * h[k] / omega[k];
                if r > 0.0 {
                    bps[nb] = r;
                    nb += 1;
                }
            }
        }
    }
    let bps = &mut bps[..nb];
    bps.sort_by(f64::total_cmp);
    let mut total = 0.0;
    for w in bps.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= a {
            continue;
        }
        let mid = 0.5 * (a + b);
        // φ on (a, b) as a polynomial Σ c_j r^j.
        let mut c = [0.0f64; 4];
        c[0] = 1.0;
        let mut deg = 0;
        let mut zero = false;
        for k in 0..n {
            let dh = delta[k] * h[k];
            let (alpha, beta) = if omega[k] == 0.0 {
                (h[k] - dh.abs(), 0.0)
            } else {
                let sg = if mid * omega[k] - dh >= 0.0 { 1.0 } else { -1.0 };
                (h[k] + sg * dh, -sg * omega[k])
            };
            if alpha + beta * mid <= 0.0 {
                zero = true;
                break;
            }
            for j in (0..=deg + 1).rev() {
                let lower = if j > 0 { c[j - 1] * beta } else { 0.0 };
                c[j] = c[j] * alpha + lower;
            }
            deg += 1;
        }
        if zero {
            continue;
        }
        for (j, &cj) in c.iter().enumerate().take(deg + 1) {
            if cj == 0.0 {
                continue;
            }
            total += cj * power_integral(a, b, j as f64 + p);
        }
    }
    total
}

/// `∫_a^b r^e dr`.
fn power_integral(a: f64, b: f64, e: f64) -> f64 {
    let q = e + 1.0;
    if q.abs() < 1e-13 {
        if a == 0.0 {
            f64::INFINITY
        } else {
            (b / a).ln()
        }
    } else if a == 0.0 {
        if q > 0.0 {
            b.powf(q) / q
        } else {
            f64::INFINITY
        }
    } else {
        (b.powf(q) - a.powf(q)) / q
    }
}

/// Lattice coordinates `(Δ_k + m) h_k` where the radial breakpoints collide.
fn lattice(delta: &[f64], h: &[f64], k: usize) -> [f64; 3] {
    [
        (delta[k] - 1.0) * h[k],
        delta[k] * h[k],
        (delta[k] + 1.0) * h[k],
    ]
}

/// Integral over the unit sphere of `f(ω)` for `n ∈ {2, 3}`, by Gauss on the
/// faces of the cube `[−1,1]^n` split at the given lattice directions.
fn sphere_integral(
    n: usize,
    delta: &[f64],
    h: &[f64],
    points: usize,
    f: impl Fn(&[f64]) -> f64,
) -> f64 {
    let g = GaussLegendre::new(points);
    let mut total = 0.0;
    for k in 0..n {
        let free: Vec<usize> = (0..n).filter(|&l| l != k).collect();
        for sg in [-1.0, 1.0] {
            // Split values of each free coordinate a_l = p_l / p_k · sg.
            let splits: Vec<Vec<f64>> = free
                .iter()
                .map(|&l| {
                    let mut v = vec![-1.0, 0.0, 1.0];
                    for cl in lattice(delta, h, l) {
                        for ck in lattice(delta, h, k) {
                            if ck != 0.0 {
                                let a = sg * cl / ck;
                                if a > -1.0 && a < 1.0 {
                                    v.push(a);
                                }
                            }
                        }
                    }
                    v.sort_by(f64::total_cmp);
                    v.dedup_by(|x, y| (*x - *y).abs() < 1e-15);
                    v
                })
                .collect();
            let mut p = [0.0; 3];
            p[k] = sg;
            if n == 2 {
                for w in splits[0].windows(2) {
                    for (a, wa) in g.mapped(w[0], w[1]) {
                        p[free[0]] = a;
                        let norm = (1.0 + a * a).sqrt();
                        let om = [p[0] / norm, p[1] / norm];
                        total += wa / (norm * norm) * f(&om);
                    }
                }
            } else {
                for wa_ in splits[0].windows(2) {
                    for (a, wa) in g.mapped(wa_[0], wa_[1]) {
                        for wb_ in splits[1].windows(2) {
                            for (b, wb) in g.mapped(wb_[0], wb_[1]) {
                                p[free[0]] = a;
                                p[free[1]] = b;
                                let norm = (1.0 + a * a + b * b).sqrt();
                                let om = [p[0] / norm, p[1] / norm, p[2] / norm];
                                total += wa * wb / (norm * norm * norm) * f(&om);
                            }
                        }
                    }
                }
            }
        }
    }
    total
}

/// `∫ φ(z) g(z) dz` over the support by Gauss on the multilinear sub-boxes.
fn far_gauss(delta: &[f64], h: &[f64], points: usize, g: impl Fn(&[f64]) -> f64) -> f64 {
    let n = delta.len();
    let rule = GaussLegendre::new(points);
    // Per axis: the two half-supports and the linear factor on each.
    let mut nodes: Vec<Vec<(f64, f64)>> = Vec::with_capacity(n);
    for k in 0..n {
        let (d, hk) = (delta[k], h[k]);
        let mut v = Vec::with_capacity(2 * points);
        for (z, w) in rule.mapped((d - 1.0) * hk, d * hk) {
            v.push((z, w * (z - (d - 1.0) * hk)));
        }
        for (z, w) in rule.mapped(d * hk, (d + 1.0) * hk) {
            v.push((z, w * ((d + 1.0) * hk - z)));
        }
        nodes.push(v);
    }
    let mut total = 0.0;
    let mut z = [0.0; 3];
    match n {
        1 => {
            for &(a, wa) in &nodes[0] {
                z[0] = a;
                total += wa * g(&z[..1]);
            }
        }
        2 => {
            for &(a, wa) in &nodes[0] {
                for &(b, wb) in &nodes[1] {
                    z[0] = a;
                    z[1] = b;
                    total += wa * wb * g(&z[..2]);
                }
            }
        }
        _ => {
            for &(a, wa) in &nodes[0] {
                for &(b, wb) in &nodes[1] {
                    for &(c, wc) in &nodes[2] {
                        z[0] = a;
                        z[1] = b;
                        z[2] = c;
                        total += wa * wb * wc * g(&z);
                    }
                }
            }
        }
    }
    total
}

fn far_points(n: usize) -> usize {
    match n {
        1 => 8,
        2 => 5,
        _ => 4,
    }
}

fn angular_points(n: usize) -> usize {
    if n == 2 {
        20
    } else {
        8
    }
}

fn is_near(delta: &[f64]) -> bool {
    delta.iter().all(|d| d.abs() < NEAR as f64)
}

/// `∫_{cell_0}∫_{cell_Δ} |x−y|^{−(n+2s)} dy dx`; infinite when divergent.
pub fn cell_pair(delta: &[f64], h: &[f64], s: f64) -> f64 {
    let n = delta.len();
    let p = -1.0 - 2.0 * s;
    if delta.iter().all(|&d| d == 0.0) {
        return f64::INFINITY;
    }
    if !is_near(delta) {
        let e = -0.5 * (n as f64 + 2.0 * s);
        return far_gauss(delta, h, far_points(n), |z| {
            z.iter().map(|v| v * v).sum::<f64>().powf(e)
        });
    }
    if n == 1 {
        return radial(&[1.0], delta, h, p) + radial(&[-1.0], delta, h, p);
    }
    sphere_integral(n, delta, h, angular_points(n), |om| radial(om, delta, h, p))
}

/// `∫_{cell_0}∫_{cell_Δ} (x_k−y_k)² |x−y|^{−(n+2s)} dy dx`, or with `|x−y|²`
/// when `axis` is `None`; finite for `s < 1`.
pub fn cell_pair_moment(delta: &[f64], h: &[f64], s: f64, axis: Option<usize>) -> f64 {
    let n = delta.len();
    let p = 1.0 - 2.0 * s;
    if !is_near(delta) {
        let e = -0.5 * (n as f64 + 2.0 * s);
        return far_gauss(delta, h, far_points(n), |z| {
            let r2 = z.iter().map(|v| v * v).sum::<f64>();
            axis.map_or(r2, |k| z[k] * z[k]) * r2.powf(e)
        });
    }
    if n == 1 {
        return radial(&[1.0], delta, h, p) + radial(&[-1.0], delta, h, p);
    }
    sphere_integral(n, delta, h, angular_points(n), |om| {
        axis.map_or(1.0, |k| om[k] * om[k]) * radial(om, delta, h, p)
    })
}
