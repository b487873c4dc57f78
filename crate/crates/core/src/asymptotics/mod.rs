//! Large-time behaviour of `Z(t)`: Green function, Laplace transform,
//! growth rate and the regime-dependent asymptotic law.

mod laplace;
mod rate;
mod torus;

use std::fmt::{self, Write as _};

use serde_json::{json, Value};

use crate::error::{precondition, Result};
use crate::json_number;
use crate::kernel::ReturnKernel;

pub use laplace::{green_function, hitting_moment, laplace, LaplaceEvaluator};
pub use rate::{growth_rate, growth_rate_with, rate_curve, RateCurve};
pub use torus::{default_jump_rate, srw_torus_rate, torus_resolvent};

/// Half-width of the band around `γ·G∞ = 1` classified as critical.
pub const CRITICAL_BAND: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Subcritical,
    Critical,
    Supercritical,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::Subcritical => "subcritical",
            Regime::Critical => "critical",
            Regime::Supercritical => "supercritical",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The populated payload for the detected regime.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RegimeLaw {
    /// `Z(t) → 1/(1 − γG∞)`.
    Subcritical { limit: f64 },
    /// `Z(t) ~ t/(γH∞)` when `H∞ < ∞`; otherwise see [`truncated_mean`].
    Critical { hitting_moment: f64 },
    /// `Z(t) ~ C e^{λ* t}`.
    Supercritical { rate: f64, prefactor: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticsReport {
    pub gamma: f64,
    pub green: f64,
    pub law: RegimeLaw,
}

impl AsymptoticsReport {
    pub fn regime(&self) -> Regime {
        match self.law {
            RegimeLaw::Subcritical { .. } => Regime::Subcritical,
            RegimeLaw::Critical { .. } => Regime::Critical,
            RegimeLaw::Supercritical { .. } => Regime::Supercritical,
        }
    }

    /// Leading-order prediction for `Z(t)`, when the law gives one in closed
    /// form (not for critical kernels with `H∞ = ∞`).
    pub fn predicted(&self, t: f64) -> Option<f64> {
        match self.law {
            RegimeLaw::Subcritical { limit } => Some(limit),
            RegimeLaw::Critical { hitting_moment } if hitting_moment.is_finite() => {
                Some(t / (self.gamma * hitting_moment))
            }
            RegimeLaw::Critical { .. } => None,
            RegimeLaw::Supercritical { rate, prefactor } => Some(prefactor * (rate * t).exp()),
        }
    }

    /// CSV header row and one data row, `gamma,regime,rate,prefactor,limit`.
    /// Fields outside the regime's payload are left empty.
    pub fn to_csv(&self, extra_header: &[String]) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# green={}", self.green);
        if let RegimeLaw::Critical { hitting_moment } = self.law {
            let _ = writeln!(out, "# hitting_moment={hitting_moment}");
        }
        for line in extra_header {
            let _ = writeln!(out, "# {line}");
        }
        out.push_str("gamma,regime,rate,prefactor,limit\n");
        let (rate, prefactor, limit) = match self.law {
            RegimeLaw::Subcritical { limit } => ("0".into(), String::new(), limit.to_string()),
            RegimeLaw::Critical { .. } => ("0".into(), String::new(), String::new()),
            RegimeLaw::Supercritical { rate, prefactor } => {
                (rate.to_string(), prefactor.to_string(), String::new())
            }
        };
        let _ = writeln!(out, "{},{},{rate},{prefactor},{limit}", self.gamma, self.regime());
        out
    }

    pub fn to_json(&self) -> Value {
        let payload = match self.law {
            RegimeLaw::Subcritical { limit } => json!({ "limit": json_number(limit) }),
            RegimeLaw::Critical { hitting_moment } => {
                json!({ "hitting_moment": json_number(hitting_moment) })
            }
            RegimeLaw::Supercritical { rate, prefactor } => json!({
                "rate": json_number(rate),
                "prefactor": json_number(prefactor),
            }),
        };
        let mut out = json!({
            "gamma": json_number(self.gamma),
            "green": json_number(self.green),
            "regime": self.regime().as_str(),
        });
        out[self.regime().as_str()] = payload;
        out
    }
}

/// Regime of `γ` for `kernel` and the matching asymptotic law.
pub fn classify(kernel: &ReturnKernel, gamma: f64) -> Result<AsymptoticsReport> {
    classify_with(&mut LaplaceEvaluator::new(kernel), gamma)
}

pub fn classify_with(ev: &mut LaplaceEvaluator<'_>, gamma: f64) -> Result<AsymptoticsReport> {
    if !(gamma >= 0.0) || !gamma.is_finite() {
        return Err(precondition(format!("gamma must be finite and >= 0, got {gamma}")));
    }
    let green = ev.transform(0.0, 0, 0.0)?;
    let law = if gamma == 0.0 {
        RegimeLaw::Subcritical { limit: 1.0 }
    } else if green.is_finite() && (gamma * green - 1.0).abs() <= CRITICAL_BAND {
        RegimeLaw::Critical {
            hitting_moment: ev.transform(0.0, 1, 0.0)?,
        }
    } else if green.is_finite() && gamma * green < 1.0 {
        RegimeLaw::Subcritical {
            limit: 1.0 / (1.0 - gamma * green),
        }
    } else {
        let rate = growth_rate_with(ev, green, gamma)?;
        let weighted = ev.transform(rate, 1, 0.0)?;
        RegimeLaw::Supercritical {
            rate,
            prefactor: 1.0 / (rate * gamma * weighted),
        }
    };
    Ok(AsymptoticsReport { gamma, green, law })
}

fn check_time(t: f64) -> Result<()> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(precondition(format!("time must be finite and >= 0, got {t}")));
    }
    Ok(())
}

/// `m(t) = ∫₀ᵗ (1 − γ∫₀ˢ p_r dr) ds`, computed as
/// `t − γ(t∫₀ᵗ p_r dr − ∫₀ᵗ r p_r dr)`. Defined only at criticality.
pub fn truncated_mean(kernel: &ReturnKernel, gamma: f64, t: f64) -> Result<f64> {
    check_time(t)?;
    let mut ev = LaplaceEvaluator::new(kernel);
    let green = ev.transform(0.0, 0, 0.0)?;
    if !(green.is_finite() && (gamma * green - 1.0).abs() <= CRITICAL_BAND) {
        return Err(precondition(format!(
            "truncated mean is defined at criticality only (gamma*G = {})",
            gamma * green
        )));
    }
    let mass = ev.body(0.0, 0, 0.0, t)?;
    let first = ev.body(0.0, 1, 0.0, t)?;
    Ok(t - gamma * (t * mass - first))
}

/// `M(t) = ∫₀ᵗ ∫ₛ^∞ p_r dr ds = ∫₀ᵗ r p_r dr + t ∫ₜ^∞ p_r dr`.
///
/// At criticality `γ·M(t)` equals [`truncated_mean`], which turns the
/// growth scale `t/(γM(t))` into `t/m(t)`.
pub fn tail_mean(kernel: &ReturnKernel, t: f64) -> Result<f64> {
    check_time(t)?;
    let mut ev = LaplaceEvaluator::new(kernel);
    let first = ev.body(0.0, 1, 0.0, t)?;
    let rest = ev.transform(0.0, 0, t)?;
    if rest.is_infinite() {
        return Ok(f64::INFINITY);
    }
    Ok(first + t * rest)
}
