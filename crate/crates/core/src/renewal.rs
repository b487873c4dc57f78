//! Numerical solution of the renewal equation
//! `Z(t) = 1 + γ ∫₀ᵗ Z(t−s) p_s ds` on a uniform grid.
//!
//! Two discretizations are provided. [`solve`] marches the Volterra equation
//! with trapezoidal product weights. [`solve_by_series`] sums the series
//! `Z(t) = 1 + ∫₀ᵗ Σ_{n≥1} (γp)^{∗n}(s) ds` term by term. Both run at the
//! requested step and at half of it; the returned values are the
//! Richardson-extrapolated combination and the reported error estimate is
//! the largest relative gap between the two runs on the shared grid.

use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{precondition, Error, Result};
use crate::kernel::{evaluate_kernel, ReturnKernel};

/// Relative size below which the next series term ends the summation.
const SERIES_CUTOFF: f64 = 1e-12;
/// Upper bound on the number of coarse steps `refine` will try.
const MAX_REFINE_STEPS: usize = 1 << 16;

#[derive(Debug, Clone, PartialEq)]
pub struct RenewalProblem {
    kernel: ReturnKernel,
    gamma: f64,
    horizon: f64,
    steps: usize,
}

impl RenewalProblem {
    /// `step` must divide `horizon` into an integer number of steps to within
    /// one part in 1e9.
    pub fn new(kernel: ReturnKernel, gamma: f64, horizon: f64, step: f64) -> Result<Self> {
        if !(gamma >= 0.0) || !gamma.is_finite() {
            return Err(precondition(format!("gamma must be finite and >= 0, got {gamma}")));
        }
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(precondition(format!("horizon must be positive, got {horizon}")));
        }
        if !(step > 0.0) || step > horizon {
            return Err(precondition(format!(
                "step must lie in (0, horizon], got {step}"
            )));
        }
        let ratio = horizon / step;
        let steps = ratio.round();
        if (steps - ratio).abs() > 1e-9 * ratio {
            return Err(precondition(format!(
                "step {step} does not divide horizon {horizon}"
            )));
        }
        Ok(RenewalProblem {
            kernel,
            gamma,
            horizon,
            steps: steps as usize,
        })
    }

    pub fn kernel(&self) -> &ReturnKernel {
        &self.kernel
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn step(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        Self::new(self.kernel.clone(), gamma, self.horizon, self.step())
    }

    fn with_steps(&self, steps: usize) -> Self {
        RenewalProblem {
            steps,
            ..self.clone()
        }
    }

    fn grid(&self, steps: usize) -> Vec<f64> {
        let h = self.horizon / steps as f64;
        (0..=steps)
            .map(|k| if k == steps { self.horizon } else { k as f64 * h })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Trapezoid,
    Series,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Trapezoid => "trapezoid",
            Method::Series => "series",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Converged,
    SeriesNotConverged,
    TargetNotMet,
}

impl SolveStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolveStatus::Converged => "converged",
            SolveStatus::SeriesNotConverged => "series-not-converged",
            SolveStatus::TargetNotMet => "target-not-met",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenewalSolution {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    /// Pointwise relative gap between the step and half-step runs.
    pub pointwise_error: Vec<f64>,
    /// Largest entry of `pointwise_error`.
    pub error_estimate: f64,
    pub method: Method,
    pub status: SolveStatus,
    pub gamma: f64,
    pub step: f64,
    /// Number of series terms used (series method only), counting `n = 0`.
    pub series_terms: Option<usize>,
}

/// Result of [`RenewalSolution::check_invariants`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InvariantReport {
    pub starts_at_one: bool,
    pub nondecreasing: bool,
    pub at_least_one: bool,
    pub below_exponential: bool,
}

impl InvariantReport {
    pub fn all(&self) -> bool {
        self.starts_at_one && self.nondecreasing && self.at_least_one && self.below_exponential
    }
}

/// Rounding slack for the invariant checks, relative to `Z`.
const ROUNDING: f64 = 1e-12;

impl RenewalSolution {
    /// Checks `Z(0) = 1`, monotonicity in `t` and `1 ≤ Z(t) ≤ e^{γt}`.
    ///
    /// The upper bound is attained exactly by the constant kernel, so it is
    /// checked up to the solution's own error estimate; the other checks
    /// allow only rounding slack.
    pub fn check_invariants(&self) -> InvariantReport {
        let starts_at_one = self.values.first() == Some(&1.0);
        let nondecreasing = self
            .values
            .windows(2)
            .all(|w| w[1] >= w[0] * (1.0 - ROUNDING));
        let at_least_one = self.values.iter().all(|&z| z >= 1.0 - ROUNDING);
        let slack = 1.0 + self.error_estimate + ROUNDING;
        let below_exponential = self
            .grid
            .iter()
            .zip(&self.values)
            .all(|(&t, &z)| z <= (self.gamma * t).exp() * slack);
        InvariantReport {
            starts_at_one,
            nondecreasing,
            at_least_one,
            below_exponential,
        }
    }

    /// Value at a grid time, if `t` is a grid point.
    pub fn value_at(&self, t: f64) -> Option<f64> {
        self.grid_index(t).map(|k| self.values[k])
    }

    pub fn grid_index(&self, t: f64) -> Option<usize> {
        let x = t / self.step;
        let k = x.round();
        if k < 0.0 || (k - x).abs() > 1e-9 * x.max(1.0) || k as usize >= self.grid.len() {
            return None;
        }
        Some(k as usize)
    }

    /// CSV with columns `t,Z,err_est`, preceded by `#` comment lines: first
    /// one carrying gamma, step and method, then any caller-supplied lines.
    pub fn to_csv(&self, extra_header: &[String]) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "# gamma={},step={},method={},status={},error_estimate={}",
            self.gamma,
            self.step,
            self.method.as_str(),
            self.status.as_str(),
            self.error_estimate
        );
        for line in extra_header {
            let _ = writeln!(out, "# {line}");
        }
        out.push_str("t,Z,err_est\n");
        for ((t, z), e) in self.grid.iter().zip(&self.values).zip(&self.pointwise_error) {
            let _ = writeln!(out, "{t},{z},{e}");
        }
        out
    }
}

/// Trapezoidal march of `Z_n (1 − γh p_0/2) = 1 + γh [Σ_{j=1}^{n−1} p_j Z_{n−j} + p_n/2]`.
fn march(p: &[f64], gamma: f64, h: f64) -> Result<Vec<f64>> {
    let n_pts = p.len();
    let factor = 1.0 - gamma * h * 0.5 * p[0];
    if !(factor > 0.0) {
        return Err(Error::StepTooCoarse { factor });
    }
    let mut z = vec![1.0; n_pts];
    if gamma == 0.0 {
        return Ok(z);
    }
    // reversed[i] = p[last - i], so the convolution becomes a forward dot.
    let last = n_pts - 1;
    let reversed: Vec<f64> = p.iter().rev().copied().collect();
    let gh = gamma * h;
    for n in 1..n_pts {
        let conv: f64 = z[1..n]
            .iter()
            .zip(&reversed[last - n + 1..last])
            .map(|(a, b)| a * b)
            .sum();
        z[n] = (1.0 + gh * (conv + 0.5 * p[n])) / factor;
    }
    Ok(z)
}

/// Series route: densities `g_1 = γp`, `g_{n+1} = g_n ∗ γp` by trapezoidal
/// convolution, each integrated cumulatively and summed into `Z`.
fn series(p: &[f64], gamma: f64, h: f64, max_terms: usize) -> (Vec<f64>, usize, bool) {
    let n_pts = p.len();
    let mut z = vec![1.0; n_pts];
    let mut terms = 1;
    let u: Vec<f64> = p.iter().map(|&x| gamma * x).collect();
    let reversed: Vec<f64> = u.iter().rev().copied().collect();
    let last = n_pts - 1;
    let mut g = u.clone();
    loop {
        let mut contribution = vec![0.0; n_pts];
        for k in 1..n_pts {
            contribution[k] = contribution[k - 1] + 0.5 * h * (g[k - 1] + g[k]);
        }
        let biggest = contribution.iter().cloned().fold(0.0, f64::max);
        let scale = z.iter().cloned().fold(0.0, f64::max);
        if biggest < SERIES_CUTOFF * scale {
            return (z, terms, true);
        }
        if terms >= max_terms {
            return (z, terms, false);
        }
        for (zk, c) in z.iter_mut().zip(&contribution) {
            *zk += c;
        }
        terms += 1;
        let mut next = vec![0.0; n_pts];
        for k in 1..n_pts {
            let inner: f64 = g[1..k]
                .iter()
                .zip(&reversed[last - k + 1..last])
                .map(|(a, b)| a * b)
                .sum();
            next[k] = h * (inner + 0.5 * (g[0] * u[k] + g[k] * u[0]));
        }
        g = next;
    }
}

struct Paired {
    coarse: Vec<f64>,
    fine: Vec<f64>,
}

fn combine(problem: &RenewalProblem, runs: Paired, method: Method, status: SolveStatus, terms: Option<usize>) -> RenewalSolution {
    let Paired { coarse, fine } = runs;
    let mut values = Vec::with_capacity(coarse.len());
    let mut pointwise_error = Vec::with_capacity(coarse.len());
    for (k, &c) in coarse.iter().enumerate() {
        let f = fine[2 * k];
        values.push((4.0 * f - c) / 3.0);
        pointwise_error.push(((f - c) / f).abs());
    }
    let error_estimate = pointwise_error.iter().cloned().fold(0.0, f64::max);
    RenewalSolution {
        grid: problem.grid(problem.steps),
        values,
        pointwise_error,
        error_estimate,
        method,
        status,
        gamma: problem.gamma,
        step: problem.step(),
        series_terms: terms,
    }
}

/// Kernel values on the half-step grid; the step grid is every other point.
fn sample_kernel(problem: &RenewalProblem) -> Result<(Vec<f64>, Vec<f64>)> {
    let fine_grid = problem.grid(2 * problem.steps);
    let fine = evaluate_kernel(&problem.kernel, &fine_grid)?;
    let coarse = fine.iter().step_by(2).copied().collect();
    Ok((coarse, fine))
}

/// Marching solve with a one-halving Richardson error estimate.
pub fn solve(problem: &RenewalProblem) -> Result<RenewalSolution> {
    let h = problem.step();
    let (p_coarse, p_fine) = sample_kernel(problem)?;
    let coarse = march(&p_coarse, problem.gamma, h)?;
    let fine = march(&p_fine, problem.gamma, 0.5 * h)?;
    Ok(combine(
        problem,
        Paired { coarse, fine },
        Method::Trapezoid,
        SolveStatus::Converged,
        None,
    ))
}

/// Convolution-series solve on the same grid as [`solve`].
pub fn solve_by_series(problem: &RenewalProblem, max_terms: usize) -> Result<RenewalSolution> {
    if max_terms == 0 {
        return Err(precondition("series needs at least one term"));
    }
    let h = problem.step();
    let (p_coarse, p_fine) = sample_kernel(problem)?;
    let (coarse, _, ok_coarse) = series(&p_coarse, problem.gamma, h, max_terms);
    let (fine, terms, ok_fine) = series(&p_fine, problem.gamma, 0.5 * h, max_terms);
    let status = if ok_coarse && ok_fine {
        SolveStatus::Converged
    } else {
        SolveStatus::SeriesNotConverged
    };
    Ok(combine(
        problem,
        Paired { coarse, fine },
        Method::Series,
        status,
        Some(terms),
    ))
}

/// Halves the step until the error estimate reaches `target` or the step
/// floor `1e-6 · horizon` (or the step-count cap) is hit.
pub fn refine(problem: &RenewalProblem, target: f64) -> Result<RenewalSolution> {
    if !(target > 0.0 && target < 1.0) {
        return Err(precondition(format!("target must lie in (0, 1), got {target}")));
    }
    let floor = 1e-6 * problem.horizon;
    let mut current = problem.clone();
    loop {
        let mut sol = solve(&current)?;
        if sol.error_estimate <= target {
            return Ok(sol);
        }
        let next_steps = current.steps * 2;
        if problem.horizon / (next_steps as f64) < floor || next_steps > MAX_REFINE_STEPS {
            sol.status = SolveStatus::TargetNotMet;
            return Ok(sol);
        }
        current = current.with_steps(next_steps);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::ClosedFormFamily;

    fn kernel(f: ClosedFormFamily) -> ReturnKernel {
        ReturnKernel::closed_form(f).unwrap()
    }

    // L_t = min(t, Exp(q)) integrates to a closed form for Z.
    fn pure_escape_exact(q: f64, gamma: f64, t: f64) -> f64 {
        if (gamma - q).abs() < 1e-15 {
            q * t + 1.0
        } else {
            gamma / (gamma - q) * ((gamma - q) * t).exp() - q / (gamma - q)
        }
    }

    #[test]
    fn grid_must_divide_horizon() {
        let k = kernel(ClosedFormFamily::ConstantOne);
        assert!(RenewalProblem::new(k.clone(), 1.0, 1.0, 0.3).is_err());
        assert!(RenewalProblem::new(k.clone(), -1.0, 1.0, 0.1).is_err());
        assert_eq!(RenewalProblem::new(k, 1.0, 1.0, 0.1).unwrap().steps(), 10);
    }

    #[test]
    fn constant_kernel_gives_exponential() {
        let p = RenewalProblem::new(kernel(ClosedFormFamily::ConstantOne), 1.0, 5.0, 1e-3).unwrap();
        let sol = solve(&p).unwrap();
        assert_eq!(sol.values[0], 1.0);
        for (&t, &z) in sol.grid.iter().zip(&sol.values) {
            assert!((z / t.exp() - 1.0).abs() < 1e-6, "t={t}");
        }
    }

    #[test]
    fn zero_gamma_is_identically_one() {
        let p = RenewalProblem::new(kernel(ClosedFormFamily::TwoState { a: 1.0, b: 2.0 }), 0.0, 3.0, 0.1).unwrap();
        let a = solve(&p).unwrap();
        let b = solve_by_series(&p, 10).unwrap();
        assert!(a.values.iter().chain(&b.values).all(|&z| z == 1.0));
        assert_eq!(b.series_terms, Some(1));
        assert_eq!(a.error_estimate, 0.0);
        let r = refine(&p, 1e-6).unwrap();
        assert_eq!(r.step, p.step());
        assert_eq!(r.error_estimate, 0.0);
    }

    #[test]
    fn pure_escape_closed_forms() {
        for &(gamma, horizon) in &[(1.0, 8.0), (2.0, 5.0), (5.0, 2.0)] {
            let p = RenewalProblem::new(kernel(ClosedFormFamily::PureEscape { q: 2.0 }), gamma, horizon, 0.01).unwrap();
            let sol = solve(&p).unwrap();
            for (&t, &z) in sol.grid.iter().zip(&sol.values) {
                let want = pure_escape_exact(2.0, gamma, t);
                assert!((z / want - 1.0).abs() < 1e-6, "gamma={gamma} t={t}: {z} vs {want}");
            }
        }
    }

    #[test]
    fn step_too_coarse() {
        let p = RenewalProblem::new(kernel(ClosedFormFamily::ConstantOne), 10.0, 1.0, 0.5).unwrap();
        assert!(matches!(solve(&p).unwrap_err(), Error::StepTooCoarse { .. }));
    }

    #[test]
    fn series_reproduces_exponential() {
        let p = RenewalProblem::new(kernel(ClosedFormFamily::ConstantOne), 1.0, 3.0, 0.01).unwrap();
        let sol = solve_by_series(&p, 200).unwrap();
        assert_eq!(sol.status, SolveStatus::Converged);
        for (&t, &z) in sol.grid.iter().zip(&sol.values) {
            assert!((z / t.exp() - 1.0).abs() < 1e-6);
        }
        let short = solve_by_series(&p, 3).unwrap();
        assert_eq!(short.status, SolveStatus::SeriesNotConverged);
        assert_eq!(short.series_terms, Some(3));
    }

    #[test]
    fn refine_hits_target() {
        let p = RenewalProblem::new(kernel(ClosedFormFamily::ConstantOne), 1.0, 1.0, 0.1).unwrap();
        let sol = refine(&p, 1e-8).unwrap();
        assert_eq!(sol.status, SolveStatus::Converged);
        assert!(sol.error_estimate <= 1e-8);
        assert!((sol.values.last().unwrap() - std::f64::consts::E).abs() < 1e-7);
    }

    #[test]
    fn refine_two_state_invariants() {
        let p = RenewalProblem::new(kernel(ClosedFormFamily::TwoState { a: 1.0, b: 1.0 }), 3.0, 2.0, 0.05).unwrap();
        let sol = refine(&p, 1e-5).unwrap();
        assert_eq!(sol.status, SolveStatus::Converged);
        assert!(sol.error_estimate <= 1e-5);
        assert!(sol.check_invariants().all());
    }

    #[test]
    fn richardson_estimate_shrinks_fourfold() {
        for f in [
            ClosedFormFamily::TwoState { a: 1.0, b: 0.5 },
            ClosedFormFamily::PureEscape { q: 1.0 },
        ] {
            let p = RenewalProblem::new(kernel(f), 1.0, 4.0, 0.1).unwrap();
            let e1 = solve(&p).unwrap().error_estimate;
            let e2 = solve(&p.with_steps(p.steps() * 2)).unwrap().error_estimate;
            let ratio = e1 / e2;
            assert!((3.0..=5.0).contains(&ratio), "{f}: ratio {ratio}");
        }
    }

    #[test]
    fn csv_layout() {
        let p = RenewalProblem::new(kernel(ClosedFormFamily::ConstantOne), 1.0, 1.0, 0.5).unwrap();
        let csv = solve(&p).unwrap().to_csv(&["kernel=constant-one".into()]);
        let lines: Vec<&str> = csv.lines().collect();
        assert!(lines[0].starts_with("# gamma=1,step=0.5,method=trapezoid"));
        assert_eq!(lines[1], "# kernel=constant-one");
        assert_eq!(lines[2], "t,Z,err_est");
        assert_eq!(lines.len(), 6);
        assert!(lines[3].starts_with("0,1,0"));
    }
}
