use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use super::laplace::LaplaceEvaluator;
use super::CRITICAL_BAND;
use crate::error::{precondition, Error, Result};
use crate::kernel::ReturnKernel;

const MAX_EXPANSIONS: usize = 200;
/// Relative bracket width at which bisection stops.
const BISECTION_WIDTH: f64 = 1e-13;

/// `λ* = p̂⁻¹(1/γ)`, or 0 when `γ·G∞ ≤ 1`.
pub fn growth_rate(kernel: &ReturnKernel, gamma: f64) -> Result<f64> {
    let mut ev = LaplaceEvaluator::new(kernel);
    let green = ev.transform(0.0, 0, 0.0)?;
    growth_rate_with(&mut ev, green, gamma)
}

/// As [`growth_rate`] with a caller-held evaluator and a precomputed `G∞`.
pub fn growth_rate_with(ev: &mut LaplaceEvaluator<'_>, green: f64, gamma: f64) -> Result<f64> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(precondition(format!("growth rate needs gamma > 0, got {gamma}")));
    }
    if green.is_finite() && gamma * green <= 1.0 + CRITICAL_BAND {
        return Ok(0.0);
    }
    let target = 1.0 / gamma;
    let mut lo = gamma * 1e-8;
    let mut expansions = 0;
    while ev.laplace(lo)? <= target {
        lo *= 0.5;
        expansions += 1;
        if expansions > MAX_EXPANSIONS {
            return Err(Error::BracketExpansion { gamma });
        }
    }
    let mut hi = gamma;
    expansions = 0;
    while ev.laplace(hi)? > target {
        lo = hi;
        hi *= 2.0;
        expansions += 1;
        if expansions > MAX_EXPANSIONS {
            return Err(Error::BracketExpansion { gamma });
        }
    }
    while hi - lo > BISECTION_WIDTH * hi {
        let mid = 0.5 * (lo + hi);
        if ev.laplace(mid)? > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Growth rates along a γ grid with the convexity, threshold and slope checks.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateCurve {
    pub gammas: Vec<f64>,
    pub rates: Vec<f64>,
    pub green: f64,
    /// `1/G∞`, zero when `G∞ = ∞`.
    pub threshold: f64,
    /// Second divided differences at interior points; `None` at the ends.
    pub second_differences: Vec<Option<f64>>,
    /// All second differences with three supercritical points are ≥ −1e-8.
    pub convex: bool,
    /// `r = 0` exactly at the grid points with `γ·G∞ ≤ 1`.
    pub threshold_consistent: bool,
    /// `r(γ_max)/γ_max`.
    pub slope_limit: f64,
}

pub fn rate_curve(kernel: &ReturnKernel, gammas: &[f64]) -> Result<RateCurve> {
    if gammas.is_empty() {
        return Err(precondition("gamma grid is empty"));
    }
    if gammas.iter().any(|&g| !(g > 0.0) || !g.is_finite()) {
        return Err(precondition("gamma grid must be positive and finite"));
    }
    if gammas.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(precondition("gamma grid must be strictly increasing"));
    }
    let green = LaplaceEvaluator::new(kernel).transform(0.0, 0, 0.0)?;
    let rates = gammas
        .par_iter()
        .map(|&g| growth_rate_with(&mut LaplaceEvaluator::new(kernel), green, g))
        .collect::<Result<Vec<f64>>>()?;
    let n = gammas.len();
    let mut second_differences = vec![None; n];
    let mut convex = true;
    for i in 1..n.saturating_sub(1) {
        let left = (rates[i] - rates[i - 1]) / (gammas[i] - gammas[i - 1]);
        let right = (rates[i + 1] - rates[i]) / (gammas[i + 1] - gammas[i]);
        let d = right - left;
        second_differences[i] = Some(d);
        if rates[i - 1] > 0.0 && d < -1e-8 {
            convex = false;
        }
    }
    let threshold_consistent = gammas.iter().zip(&rates).all(|(&g, &r)| {
        let sub = green.is_finite() && g * green <= 1.0 + CRITICAL_BAND;
        (r == 0.0) == sub
    });
    Ok(RateCurve {
        gammas: gammas.to_vec(),
        rates: rates.clone(),
        green,
        threshold: if green.is_finite() { 1.0 / green } else { 0.0 },
        second_differences,
        convex,
        threshold_consistent,
        slope_limit: rates[n - 1] / gammas[n - 1],
    })
}

impl RateCurve {
    /// CSV `gamma,r,second_diff,identity`; the last column repeats γ so the
    /// curve can be plotted against the diagonal.
    pub fn to_csv(&self, extra_header: &[String]) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "# green={},threshold={},convex={},threshold_consistent={},slope_limit={}",
            self.green, self.threshold, self.convex, self.threshold_consistent, self.slope_limit
        );
        for line in extra_header {
            let _ = writeln!(out, "# {line}");
        }
        out.push_str("gamma,r,second_diff,identity\n");
        for ((g, r), d) in self.gammas.iter().zip(&self.rates).zip(&self.second_differences) {
            let d = d.map(|x| x.to_string()).unwrap_or_default();
            let _ = writeln!(out, "{g},{r},{d},{g}");
        }
        out
    }
}
