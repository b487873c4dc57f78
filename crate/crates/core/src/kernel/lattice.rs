use crate::error::{Error, Result};

use super::generator::GeneratorMatrix;

/// Treatment of jumps that would leave the truncation box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Boundary {
    /// Jumps out of the box are suppressed; the generator stays conservative.
    #[default]
    Reflecting,
    /// Jumps out of the box go to an extra absorbing `cemetery` state.
    Absorbing,
}

/// Generator of the difference `X¹ − X²` of two independent simple random
/// walks on `Z^d`, i.e. a simple random walk with doubled jump rate (total
/// rate 2, `1/d` per neighbour), truncated to the box `{-R..R}^d`. The
/// distinguished state is the origin.
pub fn build_difference_walk(d: usize, radius: usize, boundary: Boundary) -> Result<GeneratorMatrix> {
    if !(1..=3).contains(&d) {
        return Err(Error::UnsupportedDimension(d));
    }
    if radius == 0 {
        return Err(Error::Precondition("box radius must be at least 1".into()));
    }
    let side = 2 * radius + 1;
    let inner = side.pow(d as u32);
    let per_neighbour = 1.0 / d as f64;
    let coords = |mut idx: usize| -> Vec<i64> {
        let mut c = vec![0i64; d];
        for axis in (0..d).rev() {
            c[axis] = (idx % side) as i64 - radius as i64;
            idx /= side;
        }
        c
    };
    let index = |c: &[i64]| -> usize {
        c.iter()
            .fold(0usize, |acc, &x| acc * side + (x + radius as i64) as usize)
    };
    let cemetery = inner;
    let mut states: Vec<String> = (0..inner)
        .map(|i| {
            let c = coords(i);
            let parts: Vec<String> = c.iter().map(|x| x.to_string()).collect();
            format!("({})", parts.join(","))
        })
        .collect();
    let mut transitions = Vec::with_capacity(inner + 1);
    for i in 0..inner {
        let c = coords(i);
        let mut row = Vec::with_capacity(2 * d);
        let mut escapes = 0.0;
        for axis in 0..d {
            for step in [-1i64, 1] {
                let mut n = c.clone();
                n[axis] += step;
                if n[axis].unsigned_abs() as usize <= radius {
                    row.push((index(&n), per_neighbour));
                } else {
                    escapes += per_neighbour;
                }
            }
        }
        if boundary == Boundary::Absorbing && escapes > 0.0 {
            row.push((cemetery, escapes));
        }
        transitions.push(row);
    }
    if boundary == Boundary::Absorbing {
        states.push("cemetery".into());
        transitions.push(Vec::new());
    }
    let origin = index(&vec![0; d]);
    GeneratorMatrix::from_transitions(states, transitions, origin)
}
