//! Growth rate of the simple random walk from its Fourier representation.
//!
//! With per-neighbour jump rate `κ` the return probability of the lattice
//! walk is `(2π)^{-d} ∫ e^{-κΦ(s)t} ds`, `Φ(s) = 2Σ(1 − cos sᵢ)`, so the
//! rate solves `1/γ = (2π)^{-d} ∫ ds / (r + κΦ(s))`. The last axis is done
//! in closed form, `(2π)^{-1}∫ ds/(A + 2κ(1−cos s)) = 1/√(A(A+4κ))`, and the
//! remaining ones by nested adaptive quadrature over `[0, π]`.

use std::f64::consts::PI;

use crate::error::{precondition, Error, Result};
use crate::quadrature::{integrate, Tolerance};

const TOL: Tolerance = Tolerance {
    abs: 1e-14,
    rel: 1e-11,
    max_intervals: 4000,
};

/// Smallest rate accepted as a root, in units of `κ`.
const RATE_FLOOR: f64 = 1e-6;

fn axis(s: f64, kappa: f64) -> f64 {
    let h = (0.5 * s).sin();
    4.0 * kappa * h * h
}

fn last_axis(a: f64, kappa: f64) -> f64 {
    1.0 / (a * (a + 4.0 * kappa)).sqrt()
}

fn checked(r: crate::quadrature::QuadResult) -> Result<f64> {
    if !r.converged && r.error > 1e-9 * r.value.abs() {
        return Err(Error::Quadrature {
            a: 0.0,
            b: PI,
            error: r.error,
        });
    }
    Ok(r.value)
}

/// `(2π)^{-d} ∫_{[0,2π]^d} ds / (r + κΦ(s))` for `r > 0`.
pub fn torus_resolvent(d: usize, r: f64, kappa: f64) -> Result<f64> {
    match d {
        1 => Ok(last_axis(r, kappa)),
        2 => {
            let v = integrate(|s| Ok(last_axis(r + axis(s, kappa), kappa)), 0.0, PI, TOL)?;
            Ok(checked(v)? / PI)
        }
        3 => {
            let v = integrate(
                |s1| {
                    let a = r + axis(s1, kappa);
                    let inner = integrate(|s2| Ok(last_axis(a + axis(s2, kappa), kappa)), 0.0, PI, TOL)?;
                    checked(inner)
                },
                0.0,
                PI,
                TOL,
            )?;
            Ok(checked(v)? / (PI * PI))
        }
        _ => Err(Error::UnsupportedDimension(d)),
    }
}

/// Default jump-rate scaling: `1/d` per neighbour, matching the difference
/// walk built by `build_difference_walk`.
pub fn default_jump_rate(d: usize) -> f64 {
    1.0 / d as f64
}

/// Solves `1/γ = (2π)^{-d} ∫ ds / (r + κΦ(s))` for `r > 0` by bisection.
/// `jump_rate` is `κ`; `None` uses [`default_jump_rate`].
pub fn srw_torus_rate(d: usize, gamma: f64, jump_rate: Option<f64>) -> Result<f64> {
    if !(1..=3).contains(&d) {
        return Err(Error::UnsupportedDimension(d));
    }
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(precondition(format!("gamma must be positive, got {gamma}")));
    }
    let kappa = jump_rate.unwrap_or_else(|| default_jump_rate(d));
    if !(kappa > 0.0) || !kappa.is_finite() {
        return Err(precondition(format!("jump rate must be positive, got {kappa}")));
    }
    let target = 1.0 / gamma;
    let mut lo = RATE_FLOOR * kappa;
    if torus_resolvent(d, lo, kappa)? <= target {
        return Err(Error::NoSupercriticalRoot { gamma });
    }
    // The resolvent is below 1/r, so r = γ is always above the root.
    let mut hi = gamma;
    while hi - lo > 1e-13 * hi {
        let mid = 0.5 * (lo + hi);
        if torus_resolvent(d, mid, kappa)? > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
