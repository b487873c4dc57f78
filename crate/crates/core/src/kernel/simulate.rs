use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;

use crate::error::{Error, Result};

use super::generator::GeneratorMatrix;

/// Exact-event path of a chain, reporting the occupation time of the
/// distinguished state at a sequence of horizons.
pub struct LocalTimePath<'a> {
    gen: &'a GeneratorMatrix,
    start: usize,
}

impl<'a> LocalTimePath<'a> {
    pub fn new(gen: &'a GeneratorMatrix, start: usize) -> Result<Self> {
        if start >= gen.len() {
            return Err(Error::Precondition(format!(
                "start state {start} out of bounds for {} states",
                gen.len()
            )));
        }
        Ok(LocalTimePath { gen, start })
    }

    /// Local time at each of the increasing `horizons`, all read off one path.
    pub fn run<R: Rng + ?Sized>(&self, horizons: &[f64], rng: &mut R) -> Vec<f64> {
        let target = self.gen.origin();
        let mut out = Vec::with_capacity(horizons.len());
        let mut state = self.start;
        let mut now = 0.0;
        let mut local = 0.0;
        let mut next = 0;
        while next < horizons.len() {
            let exit = self.gen.exit_rate(state);
            let hold = if exit > 0.0 {
                rng.sample::<f64, _>(Exp1) / exit
            } else {
                f64::INFINITY
            };
            let leave = now + hold;
            // Close every horizon that falls inside this sojourn.
            while next < horizons.len() && horizons[next] <= leave {
                let h = horizons[next];
                out.push(if state == target { local + (h - now) } else { local });
                next += 1;
            }
            if next == horizons.len() {
                break;
            }
            if state == target {
                local += hold;
            }
            now = leave;
            state = self.jump(state, exit, rng);
        }
        out
    }

    fn jump<R: Rng + ?Sized>(&self, state: usize, exit: f64, rng: &mut R) -> usize {
        let row = self.gen.transitions(state);
        let mut u = rng.random::<f64>() * exit;
        for &(j, r) in row {
            if u < r {
                return j;
            }
            u -= r;
        }
        row.last().map(|&(j, _)| j).unwrap_or(state)
    }
}

/// Time spent in the generator's distinguished state up to `horizon`, along
/// one exact-event path started at `start`. Deterministic in `seed`.
pub fn simulate_local_time(gen: &GeneratorMatrix, start: usize, horizon: f64, seed: u64) -> Result<f64> {
    if !(horizon >= 0.0) || !horizon.is_finite() {
        return Err(Error::Precondition(format!(
            "horizon must be finite and nonnegative, got {horizon}"
        )));
    }
    let path = LocalTimePath::new(gen, start)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(path.run(&[horizon], &mut rng)[0])
}
