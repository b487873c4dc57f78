use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::kernel::{KernelEvaluator, ReturnKernel, TailModel};
use crate::quadrature::{integrate_pieces, upper_incomplete_gamma, Tolerance};

/// Beyond `DECAY_CUTOFF / λ` the weight `e^{-λt}` is below `e^{-60}` and the
/// rest of the integral is dropped.
const DECAY_CUTOFF: f64 = 60.0;
/// Accuracy demanded of every transform value.
const ABS_TOLERANCE: f64 = 1e-10;

/// Evaluates `∫_a^∞ t^m e^{-λt} p_t dt` for `m ∈ {0, 1}`: adaptive
/// Gauss–Kronrod up to `T_cut = tail_start · cut_scale`, then the analytic
/// integral of the kernel's tail model.
pub struct LaplaceEvaluator<'a> {
    kernel: &'a ReturnKernel,
    eval: KernelEvaluator<'a>,
    cut: f64,
    tol: Tolerance,
}

impl<'a> LaplaceEvaluator<'a> {
    pub fn new(kernel: &'a ReturnKernel) -> Self {
        Self::with_cut_scale(kernel, 1.0)
    }

    /// Moves the switch to the analytic tail to `tail_start · scale`
    /// (`scale ≥ 1`). Kernels without a tail model keep `tail_start`.
    pub fn with_cut_scale(kernel: &'a ReturnKernel, scale: f64) -> Self {
        let start = kernel.tail_start();
        let cut = match kernel.tail() {
            TailModel::None => start,
            _ => start * scale.max(1.0),
        };
        LaplaceEvaluator {
            kernel,
            eval: kernel.evaluator(),
            cut,
            tol: Tolerance::default(),
        }
    }

    pub fn kernel(&self) -> &'a ReturnKernel {
        self.kernel
    }

    /// `p̂(λ)`, `λ > 0`.
    pub fn laplace(&mut self, lambda: f64) -> Result<f64> {
        if !(lambda > 0.0) {
            return Err(Error::Precondition(format!("laplace needs lambda > 0, got {lambda}")));
        }
        self.transform(lambda, 0, 0.0)
    }

    /// `∫_from^∞ t^moment e^{-λt} p_t dt` with `λ ≥ 0`; may be `+∞` when
    /// `λ = 0` and the tail is not integrable.
    pub fn transform(&mut self, lambda: f64, moment: u32, from: f64) -> Result<f64> {
        debug_assert!(moment <= 1);
        let mut upper = self.cut.max(from);
        let mut with_tail = true;
        if lambda > 0.0 && DECAY_CUTOFF / lambda < upper {
            upper = (DECAY_CUTOFF / lambda).max(from);
            with_tail = false;
        }
        let tail = if with_tail {
            tail_integral(self.kernel.tail(), lambda, moment, upper)?
        } else {
            0.0
        };
        if tail.is_infinite() {
            return Ok(f64::INFINITY);
        }
        Ok(self.body(lambda, moment, from, upper)? + tail)
    }

    /// `∫_a^b t^moment e^{-λt} p_t dt` on a finite range.
    pub fn body(&mut self, lambda: f64, moment: u32, a: f64, b: f64) -> Result<f64> {
        if b <= a {
            return Ok(0.0);
        }
        let mut points = vec![a];
        points.extend(self.kernel.breakpoints(b).into_iter().filter(|&x| x > a));
        points.push(b);
        let eval = &mut self.eval;
        let r = integrate_pieces(
            |t| {
                let w = (-lambda * t).exp() * if moment == 1 { t } else { 1.0 };
                Ok(w * eval.value(t)?)
            },
            &points,
            self.tol,
        )?;
        if !r.converged && r.error > ABS_TOLERANCE.max(1e-10 * r.value.abs()) {
            return Err(Error::Quadrature {
                a,
                b,
                error: r.error,
            });
        }
        Ok(r.value)
    }
}

/// `∫_T^∞ t^m e^{-λt} q(t) dt` for the tail model `q`.
fn tail_integral(tail: TailModel, lambda: f64, moment: u32, start: f64) -> Result<f64> {
    let m = moment as f64;
    // ∫_T^∞ t^m e^{-μt} dt for μ > 0.
    let exp_moment = |mu: f64| {
        let e = (-mu * start).exp();
        if moment == 0 {
            e / mu
        } else {
            e * (start / mu + 1.0 / (mu * mu))
        }
    };
    match tail {
        TailModel::Constant { level } => {
            if level == 0.0 {
                Ok(0.0)
            } else if lambda == 0.0 {
                Ok(f64::INFINITY)
            } else {
                Ok(level * exp_moment(lambda))
            }
        }
        TailModel::ExponentialDecay { rate, amplitude } => Ok(amplitude * exp_moment(lambda + rate)),
        TailModel::PolynomialDecay {
            exponent,
            amplitude,
        } => {
            let s = m + 1.0 - exponent;
            if amplitude == 0.0 {
                Ok(0.0)
            } else if lambda == 0.0 {
                if s < 0.0 {
                    Ok(amplitude * start.powf(s) / -s)
                } else {
                    Ok(f64::INFINITY)
                }
            } else if start == 0.0 {
                if s > 0.0 {
                    Ok(amplitude * lambda.powf(-s) * gamma(s))
                } else {
                    Ok(f64::INFINITY)
                }
            } else {
                Ok(amplitude * lambda.powf(-s) * upper_incomplete_gamma(s, lambda * start))
            }
        }
        TailModel::None => {
            // Bound using p ≤ 1; accept only if that bound is negligible.
            let bound = if lambda > 0.0 {
                exp_moment(lambda)
            } else {
                f64::INFINITY
            };
            if bound <= 1e-12 {
                Ok(0.0)
            } else {
                Err(Error::TailUnresolved(format!(
                    "kernel has no tail model and up to {bound:e} of mass lies beyond t = {start}"
                )))
            }
        }
    }
}

/// `p̂(λ) = ∫₀^∞ e^{-λt} p_t dt`.
pub fn laplace(kernel: &ReturnKernel, lambda: f64) -> Result<f64> {
    LaplaceEvaluator::new(kernel).laplace(lambda)
}

/// `G∞ = ∫₀^∞ p_t dt`, possibly `+∞`.
pub fn green_function(kernel: &ReturnKernel) -> Result<f64> {
    LaplaceEvaluator::new(kernel).transform(0.0, 0, 0.0)
}

/// `H∞ = ∫₀^∞ t p_t dt`, possibly `+∞`.
pub fn hitting_moment(kernel: &ReturnKernel) -> Result<f64> {
    LaplaceEvaluator::new(kernel).transform(0.0, 1, 0.0)
}
