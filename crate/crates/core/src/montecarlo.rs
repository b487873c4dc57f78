//! Plain Monte Carlo estimates of `E^i[exp(γ L_t^i)]` from simulated paths,
//! used as an independent check on the renewal solver.

use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{precondition, Error, Result};
use crate::kernel::{GeneratorMatrix, LocalTimePath};
use crate::renewal::RenewalSolution;

/// Fewest replicas for which a standard error is reported.
pub const MIN_REPLICAS: usize = 100;
/// Share of total weight carried by the top 1% of replicas above which the
/// estimate is flagged.
pub const HEAVY_TAIL_FRACTION: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct McConfig {
    pub generator: GeneratorMatrix,
    pub start: usize,
    pub gamma: f64,
    pub horizons: Vec<f64>,
    pub replicas: usize,
    pub seed: u64,
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        if self.start >= self.generator.len() {
            return Err(precondition(format!("start state {} out of range", self.start)));
        }
        if !(self.gamma >= 0.0) || !self.gamma.is_finite() {
            return Err(precondition(format!("gamma must be finite and >= 0, got {}", self.gamma)));
        }
        if self.horizons.is_empty() {
            return Err(precondition("at least one horizon is required"));
        }
        if self.horizons.iter().any(|&t| !(t > 0.0) || !t.is_finite())
            || self.horizons.windows(2).any(|w| !(w[1] > w[0]))
        {
            return Err(precondition("horizons must be positive and strictly increasing"));
        }
        if self.replicas < MIN_REPLICAS {
            return Err(precondition(format!(
                "need at least {MIN_REPLICAS} replicas, got {}",
                self.replicas
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct McHorizon {
    pub t: f64,
    pub mean: f64,
    pub standard_error: f64,
    pub replicas: usize,
    /// Fraction of `Σ exp(γL)` carried by the largest 1% of replicas.
    pub top_weight_fraction: f64,
    pub heavy_tail: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct McEstimate {
    pub gamma: f64,
    pub horizons: Vec<McHorizon>,
}

/// Local times of replica `k` at every horizon, from the path seeded with
/// `seed + k`.
pub fn replica_local_times(config: &McConfig, k: usize) -> Result<Vec<f64>> {
    let path = LocalTimePath::new(&config.generator, config.start)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(k as u64));
    Ok(path.run(&config.horizons, &mut rng))
}

/// Runs all replicas in parallel. Aggregation happens in replica order, so
/// the result does not depend on the thread count.
pub fn estimate(config: &McConfig) -> Result<McEstimate> {
    config.validate()?;
    let path = LocalTimePath::new(&config.generator, config.start)?;
    let locals: Vec<Vec<f64>> = (0..config.replicas)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(k as u64));
            path.run(&config.horizons, &mut rng)
        })
        .collect();
    let n = config.replicas;
    let horizons = config
        .horizons
        .iter()
        .enumerate()
        .map(|(h, &t)| {
            let weights: Vec<f64> = locals.iter().map(|l| (config.gamma * l[h]).exp()).collect();
            summarize(t, &weights, n)
        })
        .collect();
    Ok(McEstimate {
        gamma: config.gamma,
        horizons,
    })
}

fn summarize(t: f64, weights: &[f64], n: usize) -> McHorizon {
    let total: f64 = weights.iter().sum();
    let constant = weights.iter().all(|&w| w == weights[0]);
    let mean = if constant { weights[0] } else { total / n as f64 };
    let var = if constant {
        0.0
    } else {
        weights.iter().map(|w| (w - mean).powi(2)).sum::<f64>() / (n - 1) as f64
    };
    let mut sorted = weights.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let top = n.div_ceil(100);
    let top_weight_fraction = sorted[..top].iter().sum::<f64>() / total;
    McHorizon {
        t,
        mean,
        standard_error: (var / n as f64).sqrt(),
        replicas: n,
        top_weight_fraction,
        heavy_tail: top_weight_fraction > HEAVY_TAIL_FRACTION,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub t: f64,
    pub mc_mean: f64,
    pub standard_error: f64,
    pub solver: f64,
    pub z: f64,
    pub heavy_tail: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub rows: Vec<ComparisonRow>,
}

/// `|z|` above which a horizon counts as a mismatch.
pub const Z_LIMIT: f64 = 3.0;

impl Comparison {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.z.abs() <= Z_LIMIT)
    }

    /// CSV `t,mc_mean,se,z_vs_solver,warning`.
    pub fn to_csv(&self, extra_header: &[String]) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# passed={},z_limit={}", self.passed(), Z_LIMIT);
        for line in extra_header {
            let _ = writeln!(out, "# {line}");
        }
        out.push_str("t,mc_mean,se,z_vs_solver,warning\n");
        for r in &self.rows {
            let warning = if r.heavy_tail { "heavy-tail" } else { "" };
            let _ = writeln!(out, "{},{},{},{},{warning}", r.t, r.mc_mean, r.standard_error, r.z);
        }
        out
    }
}

/// z-scores of an existing estimate against solver values at the same
/// horizons. With zero standard error the score is 0 when the two agree to
/// within the solver's own error estimate, and infinite otherwise.
pub fn compare_estimate(est: &McEstimate, solution: &RenewalSolution) -> Result<Comparison> {
    let rows = est
        .horizons
        .iter()
        .map(|h| {
            let k = solution.grid_index(h.t).ok_or(Error::OffGrid(h.t))?;
            let z_ref = solution.values[k];
            let diff = h.mean - z_ref;
            let z = if h.standard_error > 0.0 {
                diff / h.standard_error
            } else if diff.abs() <= solution.pointwise_error[k] * z_ref + 1e-12 * z_ref {
                0.0
            } else {
                diff.signum() * f64::INFINITY
            };
            Ok(ComparisonRow {
                t: h.t,
                mc_mean: h.mean,
                standard_error: h.standard_error,
                solver: z_ref,
                z,
                heavy_tail: h.heavy_tail,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Comparison { rows })
}

/// Simulates `config` and scores it against `solution`.
pub fn compare(config: &McConfig, solution: &RenewalSolution) -> Result<Comparison> {
    for &t in &config.horizons {
        solution.grid_index(t).ok_or(Error::OffGrid(t))?;
    }
    compare_estimate(&estimate(config)?, solution)
}
