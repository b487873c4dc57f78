use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

/// Generator of a finite continuous-time Markov chain with a distinguished
/// state. Off-diagonal rates are stored sparsely per row; the diagonal is
/// implied as the negative row sum, so rows always sum to zero.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorMatrix {
    states: Vec<String>,
    rows: Vec<Vec<(usize, f64)>>,
    exit: Vec<f64>,
    origin: usize,
}

/// JSON layout `{"states": [...], "rates": [[...]], "origin": k}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeneratorDocument {
    pub states: Vec<Value>,
    pub rates: Vec<Vec<f64>>,
    pub origin: usize,
}

impl GeneratorMatrix {
    /// Builds a generator from sparse off-diagonal transitions. Zero rates are
    /// dropped; negative rates and self-loops are rejected.
    pub fn from_transitions(
        states: Vec<String>,
        transitions: Vec<Vec<(usize, f64)>>,
        origin: usize,
    ) -> Result<Self> {
        let n = states.len();
        if n == 0 {
            return Err(Error::InvalidGenerator("at least one state is required".into()));
        }
        if transitions.len() != n {
            return Err(Error::InvalidGenerator(format!(
                "{} states but {} transition rows",
                n,
                transitions.len()
            )));
        }
        if origin >= n {
            return Err(Error::InvalidGenerator(format!(
                "origin index {origin} out of bounds for {n} states"
            )));
        }
        let mut rows = Vec::with_capacity(n);
        let mut exit = Vec::with_capacity(n);
        for (i, row) in transitions.into_iter().enumerate() {
            let mut kept = Vec::with_capacity(row.len());
            let mut total = 0.0;
            for (j, rate) in row {
                if j >= n {
                    return Err(Error::InvalidGenerator(format!(
                        "row {i} targets state {j} out of bounds"
                    )));
                }
                if j == i {
                    return Err(Error::InvalidGenerator(format!(
                        "row {i} lists a self transition"
                    )));
                }
                if !(rate >= 0.0) || !rate.is_finite() {
                    return Err(Error::InvalidGenerator(format!(
                        "rate {i}->{j} = {rate} is not a finite nonnegative number"
                    )));
                }
                if rate > 0.0 {
                    total += rate;
                    kept.push((j, rate));
                }
            }
            rows.push(kept);
            exit.push(total);
        }
        Ok(GeneratorMatrix {
            states,
            rows,
            exit,
            origin,
        })
    }

    /// Builds a generator from a dense rate matrix whose diagonal must equal
    /// the negative off-diagonal row sum within 1e-12 relative tolerance.
    pub fn from_dense(states: Vec<String>, rates: &[Vec<f64>], origin: usize) -> Result<Self> {
        let n = states.len();
        if rates.len() != n {
            return Err(Error::InvalidGenerator(format!(
                "{} states but {} rate rows",
                n,
                rates.len()
            )));
        }
        let mut transitions = Vec::with_capacity(n);
        for (i, row) in rates.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidGenerator(format!(
                    "rate row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            let off: f64 = row
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, &r)| r)
                .sum();
            let scale = off.abs().max(row[i].abs()).max(f64::MIN_POSITIVE);
            if (off + row[i]).abs() > 1e-12 * scale {
                return Err(Error::InvalidGenerator(format!(
                    "row {i} sums to {} instead of 0",
                    off + row[i]
                )));
            }
            transitions.push(
                row.iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .map(|(j, &r)| (j, r))
                    .collect(),
            );
        }
        Self::from_transitions(states, transitions, origin)
    }

    pub fn from_document(doc: &GeneratorDocument) -> Result<Self> {
        let states = doc
            .states
            .iter()
            .map(|v| match v {
                Value::String(s) => s.clone(),
                other => other.to_string(),
            })
            .collect();
        Self::from_dense(states, &doc.rates, doc.origin)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: GeneratorDocument = serde_json::from_str(text)?;
        Self::from_document(&doc)
    }

    pub fn to_document(&self) -> GeneratorDocument {
        GeneratorDocument {
            states: self.states.iter().cloned().map(Value::String).collect(),
            rates: self.to_dense(),
            origin: self.origin,
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.len();
        let mut dense = vec![vec![0.0; n]; n];
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, r) in row {
                dense[i][j] += r;
            }
            dense[i][i] = -self.exit[i];
        }
        dense
    }

    /// One state and no transitions, so the chain never moves.
    pub fn single_state() -> Self {
        Self::from_transitions(vec!["0".into()], vec![vec![]], 0).expect("valid")
    }

    /// Two states with rates `a` (0 → 1) and `b` (1 → 0); origin 0.
    pub fn two_state(a: f64, b: f64) -> Result<Self> {
        Self::from_transitions(
            vec!["0".into(), "1".into()],
            vec![vec![(1, a)], vec![(0, b)]],
            0,
        )
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn origin(&self) -> usize {
        self.origin
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn exit_rate(&self, i: usize) -> f64 {
        self.exit[i]
    }

    pub fn max_exit_rate(&self) -> f64 {
        self.exit.iter().cloned().fold(0.0, f64::max)
    }

    pub fn transitions(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    /// Generator entry `Q[i][j]`.
    pub fn rate(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return -self.exit[i];
        }
        self.rows[i]
            .iter()
            .filter(|&&(k, _)| k == j)
            .map(|&(_, r)| r)
            .sum()
    }

    pub fn with_origin(&self, origin: usize) -> Result<Self> {
        if origin >= self.len() {
            return Err(Error::InvalidGenerator(format!(
                "origin index {origin} out of bounds for {} states",
                self.len()
            )));
        }
        let mut g = self.clone();
        g.origin = origin;
        Ok(g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_roundtrip_through_json() {
        let g = GeneratorMatrix::two_state(1.5, 0.5).unwrap();
        let text = serde_json::to_string(&g.to_document()).unwrap();
        let back = GeneratorMatrix::from_json(&text).unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn numeric_state_labels_are_accepted() {
        let g = GeneratorMatrix::from_json(
            r#"{"states":[0,1],"rates":[[-1,1],[2,-2]],"origin":1}"#,
        )
        .unwrap();
        assert_eq!(g.states(), &["0".to_string(), "1".to_string()]);
        assert_eq!(g.origin(), 1);
        assert_eq!(g.rate(1, 0), 2.0);
    }

    #[test]
    fn rejects_bad_row_sum() {
        let err = GeneratorMatrix::from_json(
            r#"{"states":["a","b"],"rates":[[-1,1],[2,-1.9]],"origin":0}"#,
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidGenerator(_)));
    }

    #[test]
    fn rejects_negative_rate_and_bad_origin() {
        assert!(GeneratorMatrix::from_dense(
            vec!["a".into(), "b".into()],
            &[vec![1.0, -1.0], vec![0.0, 0.0]],
            0
        )
        .is_err());
        assert!(GeneratorMatrix::two_state(1.0, 1.0)
            .unwrap()
            .with_origin(2)
            .is_err());
        assert!(GeneratorMatrix::from_transitions(vec![], vec![], 0).is_err());
    }
}
