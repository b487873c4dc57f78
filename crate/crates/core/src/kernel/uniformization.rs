//! Transient probabilities of finite chains by uniformization:
//! `e^{Qt} = Σ_k Pois(Λt; k) P^k` with `P = I + Q/Λ`.

use super::generator::GeneratorMatrix;
use super::TailModel;

/// Per-chunk Poisson tail mass left out of the series.
const POISSON_TAIL: f64 = 1e-15;
/// Largest Poisson mean handled in one chunk; longer spans are split.
const MAX_CHUNK_MEAN: f64 = 32.0;
/// Checkpoint memory cap, in stored f64 values.
const CHECKPOINT_BUDGET: usize = 4_000_000;

#[derive(Debug, Clone)]
pub(crate) struct JumpChain {
    rate: f64,
    stay: Vec<f64>,
    moves: Vec<Vec<(usize, f64)>>,
}

impl JumpChain {
    pub(crate) fn new(gen: &GeneratorMatrix) -> Self {
        let rate = gen.max_exit_rate();
        let n = gen.len();
        let (stay, moves) = if rate > 0.0 {
            (
                (0..n).map(|i| 1.0 - gen.exit_rate(i) / rate).collect(),
                (0..n)
                    .map(|i| {
                        gen.transitions(i)
                            .iter()
                            .map(|&(j, r)| (j, r / rate))
                            .collect()
                    })
                    .collect(),
            )
        } else {
            (vec![1.0; n], vec![Vec::new(); n])
        };
        JumpChain { rate, stay, moves }
    }

    fn len(&self) -> usize {
        self.stay.len()
    }

    // out = v P (row vector times jump matrix).
    fn step(&self, v: &[f64], out: &mut [f64]) {
        for (o, (&x, &s)) in out.iter_mut().zip(v.iter().zip(&self.stay)) {
            *o = x * s;
        }
        for (i, row) in self.moves.iter().enumerate() {
            let x = v[i];
            if x == 0.0 {
                continue;
            }
            for &(j, p) in row {
                out[j] += x * p;
            }
        }
    }

    /// Advances the row distribution `v` by `dt` time units.
    pub(crate) fn propagate(&self, v: &mut [f64], dt: f64) {
        if self.rate == 0.0 || dt <= 0.0 {
            return;
        }
        let total = self.rate * dt;
        let chunks = (total / MAX_CHUNK_MEAN).ceil().max(1.0) as usize;
        let mean = total / chunks as f64;
        let n = self.len();
        let mut term = vec![0.0; n];
        let mut next = vec![0.0; n];
        let mut acc = vec![0.0; n];
        for _ in 0..chunks {
            let mut weight = (-mean).exp();
            let mut mass = weight;
            term.copy_from_slice(v);
            for (a, &t) in acc.iter_mut().zip(term.iter()) {
                *a = weight * t;
            }
            let max_terms = (mean + 10.0 * mean.sqrt() + 60.0) as usize;
            let mut k = 0;
            while 1.0 - mass > POISSON_TAIL && k < max_terms {
                k += 1;
                self.step(&term, &mut next);
                std::mem::swap(&mut term, &mut next);
                weight *= mean / k as f64;
                mass += weight;
                for (a, &t) in acc.iter_mut().zip(term.iter()) {
                    *a += weight * t;
                }
            }
            v.copy_from_slice(&acc);
        }
    }
}

/// Row `from` of `e^{Qt}`.
pub fn transition_row(gen: &GeneratorMatrix, from: usize, t: f64) -> Vec<f64> {
    let chain = JumpChain::new(gen);
    let mut v = vec![0.0; gen.len()];
    v[from] = 1.0;
    chain.propagate(&mut v, t);
    v
}

/// Evaluates `p_t(origin, origin)` at arbitrary times, keeping cached
/// distributions at evenly spaced checkpoints so unordered queries (as made by
/// adaptive quadrature) cost a bounded number of matrix-vector products.
#[derive(Debug, Clone)]
pub(crate) struct ReturnProbability {
    chain: JumpChain,
    origin: usize,
    spacing: f64,
    checkpoints: Vec<Vec<f64>>,
}

impl ReturnProbability {
    pub(crate) fn new(gen: &GeneratorMatrix) -> Self {
        let chain = JumpChain::new(gen);
        let spacing = if chain.rate > 0.0 {
            8.0 / chain.rate
        } else {
            f64::INFINITY
        };
        let mut start = vec![0.0; gen.len()];
        start[gen.origin()] = 1.0;
        ReturnProbability {
            chain,
            origin: gen.origin(),
            spacing,
            checkpoints: vec![start],
        }
    }

    pub(crate) fn value(&mut self, t: f64) -> f64 {
        if self.chain.rate == 0.0 {
            return 1.0;
        }
        let mut k = (t / self.spacing).floor() as usize;
        while k + 1 > self.checkpoints.len() && self.chain.len() * (k + 1) > CHECKPOINT_BUDGET {
            // Thin out: keep every other checkpoint and double the spacing.
            self.checkpoints = self.checkpoints.iter().step_by(2).cloned().collect();
            self.spacing *= 2.0;
            k = (t / self.spacing).floor() as usize;
        }
        while self.checkpoints.len() <= k {
            let mut v = self.checkpoints.last().expect("nonempty").clone();
            self.chain.propagate(&mut v, self.spacing);
            self.checkpoints.push(v);
        }
        let offset = t - k as f64 * self.spacing;
        if offset <= 0.0 {
            return self.checkpoints[k][self.origin].clamp(0.0, 1.0);
        }
        let mut v = self.checkpoints[k].clone();
        self.chain.propagate(&mut v, offset);
        v[self.origin].clamp(0.0, 1.0)
    }
}

/// Streams `p_t(origin, origin)` over increasing times in a single pass.
pub(crate) fn return_probabilities_sorted(gen: &GeneratorMatrix, times: &[f64]) -> Vec<f64> {
    let chain = JumpChain::new(gen);
    let mut v = vec![0.0; gen.len()];
    v[gen.origin()] = 1.0;
    let mut now = 0.0;
    times
        .iter()
        .map(|&t| {
            chain.propagate(&mut v, t - now);
            now = t;
            v[gen.origin()].clamp(0.0, 1.0)
        })
        .collect()
}

/// Identifies the large-time behaviour of `p_t(origin, origin)` on a finite
/// chain. Returns the model and the time from which it is applied.
///
/// Probes at `T, 1.5T, 2T` for doubling `T`: a clean exponential decay is
/// recognised by two matching log-slopes; a settled level by the probes
/// agreeing within `1e-11`.
pub(crate) fn detect_tail(gen: &GeneratorMatrix) -> (TailModel, f64) {
    let chain = JumpChain::new(gen);
    if chain.rate == 0.0 {
        return (TailModel::Constant { level: 1.0 }, 0.0);
    }
    let origin = gen.origin();
    let mut v = vec![0.0; gen.len()];
    v[origin] = 1.0;
    let mut now = 0.0;
    let mut advance = |v: &mut Vec<f64>, t: f64| {
        chain.propagate(v, t - now);
        now = t;
        v[origin].max(0.0)
    };
    let mut horizon = 2.0 / chain.rate;
    let mut at_horizon = advance(&mut v, horizon);
    while chain.rate * horizon < 1e8 {
        let p1 = at_horizon;
        let pm = advance(&mut v, 1.5 * horizon);
        let p2 = advance(&mut v, 2.0 * horizon);
        let end = 2.0 * horizon;
        if p2 < 1e-14 && pm < 1e-14 {
            return (TailModel::Constant { level: 0.0 }, end);
        }
        if p1 > pm && pm > p2 && p2 > 1e-10 && p1 / p2 > 1.001 {
            let r1 = (p1 / pm).ln() / (0.5 * horizon);
            let r2 = (pm / p2).ln() / (0.5 * horizon);
            if (r1 - r2).abs() <= 1e-6 * r2 {
                let amplitude = p2 * (r2 * end).exp();
                return (
                    TailModel::ExponentialDecay {
                        rate: r2,
                        amplitude,
                    },
                    end,
                );
            }
        }
        if (p2 - p1).abs() <= 1e-11 && (p2 - pm).abs() <= 1e-11 {
            return (TailModel::Constant { level: p2 }, end);
        }
        horizon = end;
        at_horizon = p2;
    }
    (TailModel::None, now)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_state_matches_closed_form() {
        let g = GeneratorMatrix::two_state(1.0, 1.0).unwrap();
        let times = [0.0, 0.1, 1.0, 2.5, 10.0, 100.0];
        let got = return_probabilities_sorted(&g, &times);
        for (&t, &p) in times.iter().zip(&got) {
            let want = 0.5 + 0.5 * (-2.0 * t).exp();
            assert!((p - want).abs() < 1e-12, "t={t}: {p} vs {want}");
        }
    }

    #[test]
    fn checkpointed_and_streamed_agree() {
        let g = GeneratorMatrix::two_state(0.7, 2.0).unwrap();
        let mut rp = ReturnProbability::new(&g);
        let times = [0.0, 0.3, 7.0, 31.3, 55.0];
        let streamed = return_probabilities_sorted(&g, &times);
        // Query out of order on purpose.
        for &i in &[3usize, 0, 4, 1, 2] {
            assert!((rp.value(times[i]) - streamed[i]).abs() < 1e-13);
        }
    }

    #[test]
    fn rows_are_distributions() {
        let g = GeneratorMatrix::two_state(3.0, 0.2).unwrap();
        for &t in &[0.0, 0.5, 4.0, 40.0] {
            let row = transition_row(&g, 1, t);
            let total: f64 = row.iter().sum();
            assert!((total - 1.0).abs() < 1e-12);
            assert!(row.iter().all(|&x| (0.0..=1.0).contains(&x)));
        }
    }

    #[test]
    fn detects_constant_and_exponential_tails() {
        let g = GeneratorMatrix::two_state(1.0, 3.0).unwrap();
        match detect_tail(&g).0 {
            TailModel::Constant { level } => assert!((level - 0.75).abs() < 1e-11),
            other => panic!("unexpected {other:?}"),
        }
        let escape = GeneratorMatrix::from_transitions(
            vec!["i".into(), "dead".into()],
            vec![vec![(1, 2.0)], vec![]],
            0,
        )
        .unwrap();
        match detect_tail(&escape).0 {
            TailModel::ExponentialDecay { rate, amplitude } => {
                assert!((rate - 2.0).abs() < 1e-9);
                assert!((amplitude - 1.0).abs() < 1e-6);
            }
            other => panic!("unexpected {other:?}"),
        }
        let frozen = GeneratorMatrix::single_state();
        assert_eq!(detect_tail(&frozen).0, TailModel::Constant { level: 1.0 });
    }
}
