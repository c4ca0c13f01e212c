//! Arrhenius surface kinetics.
//!
//! The rate f(s) = (A·u_a/s²)·exp(−u_a/s) is extended by zero to s ≤ 0, which
//! keeps it continuous on all of ℝ. The interface reaction enters the cell
//! problem through the affine form H(s, r, φ, ψ) = r·φ + (s²/u_a)·ψ.

use crate::error::{Error, Result};

/// Kinetic parameters: pre-exponential factor `a`, activation temperature
/// `u_a` and heat release `q` (all dimensionless).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kinetics {
    pub a: f64,
    pub u_a: f64,
    pub q: f64,
}

impl Kinetics {
    pub fn new(a: f64, u_a: f64, q: f64) -> Result<Kinetics> {
        if !(a >= 0.0) {
            return Err(Error::invalid(format!("pre-exponential factor must be ≥ 0, got {a}")));
        }
        if !(u_a > 0.0) {
            return Err(Error::invalid(format!("activation temperature must be > 0, got {u_a}")));
        }
        if !(q >= 0.0) {
            return Err(Error::invalid(format!("heat release must be ≥ 0, got {q}")));
        }
        Ok(Kinetics { a, u_a, q })
    }
}

/// Reaction rate f(s); total on ℝ, zero for s ≤ 0.
pub fn arrhenius_f(s: f64, kin: &Kinetics) -> f64 {
    if s <= 0.0 {
        0.0
    } else {
        kin.a * kin.u_a / (s * s) * (-kin.u_a / s).exp()
    }
}

/// f′(s) = (A·u_a/s³)·exp(−u_a/s)·(u_a/s − 2) for s > 0, zero otherwise.
pub fn arrhenius_f_prime(s: f64, kin: &Kinetics) -> f64 {
    if s <= 0.0 {
        0.0
    } else {
        kin.a * kin.u_a / (s * s * s) * (-kin.u_a / s).exp() * (kin.u_a / s - 2.0)
    }
}

/// H(s, r, φ, ψ) = r·φ + (s²/u_a)·ψ.
pub fn reaction_h(s: f64, r: f64, phi: f64, psi: f64, kin: &Kinetics) -> f64 {
    r * phi + s * s / kin.u_a * psi
}

/// Check the linear-growth bound f(s) ≤ A·s over the sampled range; returns
/// the worst violating s, if any. The bound holds only for sufficiently large
/// u_a (the maximum of f(s)/s sits at s = u_a/3 with value 27A·e⁻³/u_a²).
pub fn linear_growth_violation(kin: &Kinetics, samples: &[f64]) -> Option<f64> {
    let mut worst: Option<(f64, f64)> = None;
    for &s in samples {
        if s <= 0.0 {
            continue;
        }
        let excess = arrhenius_f(s, kin) - kin.a * s;
        if excess > 0.0 && worst.map_or(true, |(_, w)| excess > w) {
            worst = Some((s, excess));
        }
    }
    worst.map(|(s, _)| s)
}
