//! Double-well potentials `W(t) = scale·|(t−lo)(t−hi)|^power` and the
//! heteroclinic profile connecting their wells.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{adaptive, GaussLegendre};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DoubleWell {
    pub lo: f64,
    pub hi: f64,
    pub scale: f64,
    pub power: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PotentialKind {
    Value,
    Derivative,
    /// Primitive of `2√W`, vanishing at the lower zero.
    Primitive,
}

impl Default for DoubleWell {
    fn default() -> Self {
        DoubleWell::quartic()
    }
}

impl DoubleWell {
    pub fn new(lo: f64, hi: f64, scale: f64, power: f64) -> Result<Self> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::OutOfRange {
                name: "zeros",
                value: hi - lo,
                expected: "lo < hi, both finite",
            });
        }
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::OutOfRange {
                name: "scale",
                value: scale,
                expected: "> 0",
            });
        }
        if !(power >= 2.0) || !power.is_finite() {
            return Err(Error::OutOfRange {
                name: "power",
                value: power,
                expected: ">= 2 (C² at the zeros)",
            });
        }
        Ok(DoubleWell {
            lo,
            hi,
            scale,
            power,
        })
    }

    /// `(1−t²)²/4`
    pub fn quartic() -> Self {
        DoubleWell {
            lo: -1.0,
            hi: 1.0,
            scale: 0.25,
            power: 2.0,
        }
    }

    /// `t²(1−t)²`, wells at 0 and 1.
    pub fn unit() -> Self {
        DoubleWell {
            lo: 0.0,
            hi: 1.0,
            scale: 1.0,
            power: 2.0,
        }
    }

    pub fn zeros(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    fn q(&self, t: f64) -> f64 {
        (t - self.lo) * (t - self.hi)
    }

    pub fn value(&self, t: f64) -> f64 {
        let q = self.q(t).abs();
        if self.power == 2.0 {
            self.scale * q * q
        } else {
            self.scale * q.powf(self.power)
        }
    }

    pub fn derivative(&self, t: f64) -> f64 {
        let q = self.q(t);
        let dq = 2.0 * t - self.lo - self.hi;
        if self.power == 2.0 {
            2.0 * self.scale * q * dq
        } else {
            self.scale * self.power * q.abs().powf(self.power - 1.0) * q.signum() * dq
        }
    }

    pub fn second_derivative(&self, t: f64) -> f64 {
        let q = self.q(t);
        let dq = 2.0 * t - self.lo - self.hi;
        let p = self.power;
        if p == 2.0 {
            2.0 * self.scale * (dq * dq + 2.0 * q)
        } else {
            let a = q.abs();
            self.scale * p * ((p - 1.0) * a.powf(p - 2.0) * dq * dq + 2.0 * a.powf(p - 1.0) * q.signum())
        }
    }

    /// `√W`
    pub fn sqrt_value(&self, t: f64) -> f64 {
        let q = self.q(t).abs();
        if self.power == 2.0 {
            self.scale.sqrt() * q
        } else {
            self.scale.sqrt() * q.powf(0.5 * self.power)
        }
    }

    /// `H(t) = ∫_lo^t 2√W`.
    pub fn primitive(&self, t: f64) -> f64 {
        let c = 2.0 * self.scale.sqrt();
        if self.power == 2.0 {
            let (a, b) = (self.lo, self.hi);
            let big_q = |x: f64| x * x * x / 3.0 - 0.5 * (a + b) * x * x + a * b * x;
            if t <= a {
                c * (big_q(t) - big_q(a))
            } else if t <= b {
                -c * (big_q(t) - big_q(a))
            } else {
                c * (big_q(t) - 2.0 * big_q(b) + big_q(a))
            }
        } else {
            let f = |x: f64| 2.0 * self.sqrt_value(x);
            let split = |x0: f64, x1: f64| {
                if x1 == x0 {
                    0.0
                } else {
                    adaptive(x0, x1, 1e-13, f)
                }
            };
            if t <= self.lo {
                -split(t, self.lo)
            } else if t <= self.hi {
                split(self.lo, t)
            } else {
                split(self.lo, self.hi) + split(self.hi, t)
            }
        }
    }

    /// `H(hi) − H(lo)`, the energy of one transition.
    pub fn transition_energy(&self) -> f64 {
        self.primitive(self.hi) - self.primitive(self.lo)
    }

    pub fn eval(&self, t: f64, kind: PotentialKind) -> f64 {
        match kind {
            PotentialKind::Value => self.value(t),
            PotentialKind::Derivative => self.derivative(t),
            PotentialKind::Primitive => self.primitive(t),
        }
    }

    pub fn is_nondegenerate(&self) -> bool {
        self.second_derivative(self.lo) > 0.0 && self.second_derivative(self.hi) > 0.0
    }
}

pub fn potential_eval(w: &DoubleWell, t: f64, kind: PotentialKind) -> f64 {
    w.eval(t, kind)
}

/// Tabulated solution of `u′ = √W(u)`, `u(0) = (lo+hi)/2`.
#[derive(Clone, Debug)]
pub struct Profile {
    well: DoubleWell,
    dt: f64,
    /// Values at `t_i = −T + i·dt`.
    values: Vec<f64>,
    half_width: f64,
}

const PROFILE_STEPS: usize = 8000;

pub fn optimal_profile(w: &DoubleWell) -> Result<Profile> {
    if !w.is_nondegenerate() {
        return Err(Error::Unsupported(format!(
            "degenerate well (power {}): W'' vanishes at a zero",
            w.power
        )));
    }
    // Linearized decay rate at the wells is √(W''/2).
    let rate = (0.5 * w.second_derivative(w.hi)).sqrt();
    let half_width = 40.0 / rate;
    let dt = half_width / PROFILE_STEPS as f64;
    let f = |u: f64| w.sqrt_value(u);
    let rk4 = |u: f64, h: f64| {
        let k1 = f(u);
        let k2 = f(u + 0.5 * h * k1);
        let k3 = f(u + 0.5 * h * k2);
        let k4 = f(u + h * k3);
        (u + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)).clamp(w.lo, w.hi)
    };
    let mid = 0.5 * (w.lo + w.hi);
    let mut values = vec![mid; 2 * PROFILE_STEPS + 1];
    let mut up = mid;
    let mut down = mid;
    for i in 1..=PROFILE_STEPS {
        up = rk4(up, dt);
        down = rk4(down, -dt);
        values[PROFILE_STEPS + i] = up;
        values[PROFILE_STEPS - i] = down;
    }
    Ok(Profile {
        well: *w,
        dt,
        values,
        half_width,
    })
}

impl Profile {
    pub fn well(&self) -> &DoubleWell {
        &self.well
    }

    /// Half-length of the tabulated interval; beyond it the profile is
    /// within rounding of the wells.
    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    /// Cubic Hermite interpolation using the exact slopes `√W(u)`.
    pub fn eval(&self, t: f64) -> f64 {
        if t <= -self.half_width {
            return self.values[0];
        }
        if t >= self.half_width {
            return *self.values.last().unwrap();
        }
        let x = (t + self.half_width) / self.dt;
        let i = (x.floor() as usize).min(self.values.len() - 2);
        let r = x - i as f64;
        let (u0, u1) = (self.values[i], self.values[i + 1]);
        let (m0, m1) = (
            self.dt * self.well.sqrt_value(u0),
            self.dt * self.well.sqrt_value(u1),
        );
        let r2 = r * r;
        let r3 = r2 * r;
        (2.0 * r3 - 3.0 * r2 + 1.0) * u0
            + (r3 - 2.0 * r2 + r) * m0
            + (-2.0 * r3 + 3.0 * r2) * u1
            + (r3 - r2) * m1
    }

    pub fn derivative(&self, t: f64) -> f64 {
        self.well.sqrt_value(self.eval(t))
    }

    /// The `t` with `u₀(t) = v`, for `v` strictly between the wells.
    pub fn inverse(&self, v: f64) -> f64 {
        let (lo, hi) = self.well.zeros();
        if v <= lo {
            return f64::NEG_INFINITY;
        }
        if v >= hi {
            return f64::INFINITY;
        }
        let (mut a, mut b) = (-self.half_width, self.half_width);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if self.eval(m) < v {
                a = m;
            } else {
                b = m;
            }
            if b - a < 1e-15 * self.half_width {
                break;
            }
        }
        0.5 * (a + b)
    }

    /// `∫ (u₀′)² + W(u₀)` over the tabulated interval.
    pub fn energy(&self) -> f64 {
        let g = GaussLegendre::new(8);
        let panels = 2000;
        let len = 2.0 * self.half_width / panels as f64;
        (0..panels)
            .map(|p| {
                let a = -self.half_width + p as f64 * len;
                g.integrate(a, a + len, |t| {
                    let u = self.eval(t);
                    let du = self.well.sqrt_value(u);
                    du * du + self.well.value(u)
                })
            })
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn quartic_values() {
        let w = DoubleWell::quartic();
        assert_eq!(w.value(1.0), 0.0);
        assert_eq!(w.value(-1.0), 0.0);
        assert_eq!(w.value(0.0), 0.25);
        assert_eq!(w.derivative(0.0), 0.0);
        assert_eq!(w.derivative(1.0), 0.0);
        assert_eq!(w.primitive(-1.0), 0.0);
        assert!((w.transition_energy() - 4.0 / 3.0).abs() < 1e-15);
        // H(t) = t − t³/3 + 2/3 on [−1, 1].
        let t: f64 = 0.3;
        assert!((w.primitive(t) - (t - t.powi(3) / 3.0 + 2.0 / 3.0)).abs() < 1e-15);
    }

    #[test]
    fn profile_matches_tanh() {
        let p = optimal_profile(&DoubleWell::quartic()).unwrap();
        let mut worst: f64 = 0.0;
        for i in -400..=400 {
            let t = i as f64 * 0.0537;
            worst = worst.max((p.eval(t) - (0.5 * t).tanh()).abs());
        }
        assert!(worst < 1e-6, "worst {worst}");
        assert!((p.eval(0.0)).abs() < 1e-15);
        assert!((p.energy() - 4.0 / 3.0).abs() < 1e-4);
        assert!((p.inverse(0.5) - 2.0 * 0.5f64.atanh()).abs() < 1e-9);
    }

    #[test]
    fn profile_is_odd() {
        let p = optimal_profile(&DoubleWell::quartic()).unwrap();
        for t in [0.1, 0.77, 3.3, 12.0] {
            assert!((p.eval(t) + p.eval(-t)).abs() < 1e-13);
        }
    }

    #[test]
    fn degenerate_well_is_unsupported() {
        let w = DoubleWell::new(-1.0, 1.0, 1.0, 4.0).unwrap();
        assert!(matches!(optimal_profile(&w), Err(Error::Unsupported(_))));
        assert!(DoubleWell::new(-1.0, 1.0, 1.0, 1.5).is_err());
        assert!(DoubleWell::new(1.0, -1.0, 1.0, 2.0).is_err());
    }

    #[test]
    fn nonquadratic_primitive_agrees_with_quadrature() {
        let w = DoubleWell::new(0.0, 1.0, 2.0, 3.0).unwrap();
        let oracle = adaptive(0.0, 1.0, 1e-14, |x| 2.0 * (2.0 * (x * (1.0 - x)).powi(3)).sqrt());
        assert!((w.transition_energy() - oracle).abs() < 1e-10 * oracle);
    }

    proptest! {
        #[test]
        fn transition_energy_equals_quadrature(
            lo in -3.0f64..1.0, len in 0.1f64..4.0, scale in 0.05f64..5.0,
        ) {
            let w = DoubleWell::new(lo, lo + len, scale, 2.0).unwrap();
            let oracle = adaptive(w.lo, w.hi, 1e-13, |x| 2.0 * w.value(x).sqrt());
            prop_assert!((w.transition_energy() - oracle).abs() <= 1e-8 * oracle);
        }

        #[test]
        fn well_shape(lo in -2.0f64..0.0, len in 0.5f64..3.0, t in -5.0f64..5.0) {
            let w = DoubleWell::new(lo, lo + len, 1.0, 2.0).unwrap();
            prop_assert_eq!(w.value(w.lo), 0.0);
            prop_assert_eq!(w.value(w.hi), 0.0);
            prop_assert_eq!(w.derivative(w.lo), 0.0);
            if t != w.lo && t != w.hi {
                prop_assert!(w.value(t) > 0.0);
            }
            let a = w.lo + (t + 5.0) / 10.0 * len;
            let b = a + 0.01 * len;
            if b <= w.hi {
                prop_assert!(w.primitive(b) >= w.primitive(a));
            }
        }

        #[test]
        fn profile_strictly_monotone(a in -20.0f64..19.0, d in 0.01f64..1.0) {
            let p = optimal_profile(&DoubleWell::quartic()).unwrap();
            prop_assert!(p.eval(a + d) > p.eval(a));
        }
    }
}
