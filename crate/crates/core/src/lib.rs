//! Exponential moments `E^i[exp(γ L_t^i)]` of the local time of a
//! continuous-time Markov chain, computed from the renewal equation
//! `Z(t) = 1 + γ ∫₀ᵗ Z(t−s) p_s(i,i) ds`, together with the growth-regime
//! classification driven by the Green function and Monte Carlo cross-checks.

pub mod asymptotics;
pub mod error;
pub mod kernel;
pub mod montecarlo;
pub mod quadrature;
pub mod renewal;

pub use error::{Error, ErrorClass, Result};

/// JSON number for finite values; non-finite values become the strings
/// `"inf"`, `"-inf"` and `"nan"`.
pub fn json_number(x: f64) -> serde_json::Value {
    if x.is_finite() {
        serde_json::Value::from(x)
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}
