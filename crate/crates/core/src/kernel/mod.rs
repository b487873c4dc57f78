//! Sources of the return probability `t ↦ p_t(i,i)`.

mod generator;
mod lattice;
mod simulate;
mod uniformization;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use generator::{GeneratorDocument, GeneratorMatrix};
pub use lattice::{build_difference_walk, Boundary};
pub use simulate::{simulate_local_time, LocalTimePath};
pub use uniformization::transition_row;

use uniformization::{detect_tail, return_probabilities_sorted, ReturnProbability};

/// Declared large-time behaviour of a kernel, used for analytic tail
/// integrals beyond the quadrature range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TailModel {
    /// `c·e^{-ρt}`
    #[serde(rename = "exp")]
    ExponentialDecay {
        rate: f64,
        #[serde(rename = "c")]
        amplitude: f64,
    },
    /// `c·t^{-α}`
    #[serde(rename = "poly")]
    PolynomialDecay {
        #[serde(rename = "alpha")]
        exponent: f64,
        #[serde(rename = "c")]
        amplitude: f64,
    },
    Constant { level: f64 },
    None,
}

impl TailModel {
    fn value(&self, t: f64) -> Option<f64> {
        match *self {
            TailModel::ExponentialDecay { rate, amplitude } => Some(amplitude * (-rate * t).exp()),
            TailModel::PolynomialDecay {
                exponent,
                amplitude,
            } => Some(amplitude * t.powf(-exponent)),
            TailModel::Constant { level } => Some(level),
            TailModel::None => None,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            TailModel::ExponentialDecay { rate, amplitude } => rate > 0.0 && amplitude >= 0.0,
            TailModel::PolynomialDecay {
                exponent,
                amplitude,
            } => exponent > 0.0 && amplitude >= 0.0,
            TailModel::Constant { level } => (0.0..=1.0).contains(&level),
            TailModel::None => true,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidKernel(format!("bad tail model {self:?}")))
        }
    }
}

/// Closed-form return-probability families used as analytic oracles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum ClosedFormFamily {
    /// `e^{-qt}`: leave once, never come back.
    PureEscape { q: f64 },
    /// `b/(a+b) + a/(a+b)·e^{-(a+b)t}`
    TwoState { a: f64, b: f64 },
    /// `p ≡ 1`
    ConstantOne,
    /// `1` on `[0, t0)`, then `c·t^{-α}` with `c = t0^α` (continuous at `t0`).
    PolyTail { alpha: f64, t0: f64 },
}

impl ClosedFormFamily {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            ClosedFormFamily::PureEscape { q } => q > 0.0 && q.is_finite(),
            ClosedFormFamily::TwoState { a, b } => a > 0.0 && b > 0.0 && (a + b).is_finite(),
            ClosedFormFamily::ConstantOne => true,
            ClosedFormFamily::PolyTail { alpha, t0 } => {
                alpha > 0.0 && t0 > 0.0 && alpha.is_finite() && t0.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidKernel(format!(
                "parameters of {self} must be positive and finite"
            )))
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        match *self {
            ClosedFormFamily::PureEscape { q } => (-q * t).exp(),
            ClosedFormFamily::TwoState { a, b } => {
                let s = a + b;
                1.0 + a / s * (-s * t).exp_m1()
            }
            ClosedFormFamily::ConstantOne => 1.0,
            ClosedFormFamily::PolyTail { alpha, t0 } => {
                if t < t0 {
                    1.0
                } else {
                    (t / t0).powf(-alpha)
                }
            }
        }
    }

    /// Amplitude `c` of the polynomial tail, `t0^α`.
    pub fn poly_amplitude(alpha: f64, t0: f64) -> f64 {
        t0.powf(alpha)
    }

    /// Tail model and the time from which the kernel switches to it in
    /// integrals. Exact families switch early so both the quadrature and the
    /// analytic tail take part.
    fn tail(&self) -> (TailModel, f64) {
        match *self {
            ClosedFormFamily::PureEscape { q } => (
                TailModel::ExponentialDecay {
                    rate: q,
                    amplitude: 1.0,
                },
                1.0 / q,
            ),
            ClosedFormFamily::TwoState { a, b } => {
                (TailModel::Constant { level: b / (a + b) }, 40.0 / (a + b))
            }
            ClosedFormFamily::ConstantOne => (TailModel::Constant { level: 1.0 }, 1.0),
            ClosedFormFamily::PolyTail { alpha, t0 } => (
                TailModel::PolynomialDecay {
                    exponent: alpha,
                    amplitude: Self::poly_amplitude(alpha, t0),
                },
                t0,
            ),
        }
    }

    /// Finite chain whose origin return probability is this family, when one
    /// exists.
    pub fn to_generator(&self) -> Option<GeneratorMatrix> {
        match *self {
            ClosedFormFamily::PureEscape { q } => GeneratorMatrix::from_transitions(
                vec!["i".into(), "away".into()],
                vec![vec![(1, q)], vec![]],
                0,
            )
            .ok(),
            ClosedFormFamily::TwoState { a, b } => GeneratorMatrix::two_state(a, b).ok(),
            ClosedFormFamily::ConstantOne => Some(GeneratorMatrix::single_state()),
            ClosedFormFamily::PolyTail { .. } => None,
        }
    }
}

impl fmt::Display for ClosedFormFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            ClosedFormFamily::PureEscape { q } => write!(f, "pure-escape:q={q}"),
            ClosedFormFamily::TwoState { a, b } => write!(f, "two-state:a={a},b={b}"),
            ClosedFormFamily::ConstantOne => write!(f, "constant-one"),
            ClosedFormFamily::PolyTail { alpha, t0 } => {
                write!(f, "poly-tail:alpha={alpha},t0={t0}")
            }
        }
    }
}

/// Parses `family[:key=value,...]`, e.g. `two-state:a=1,b=2`.
impl FromStr for ClosedFormFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, args) = s.split_once(':').unwrap_or((s, ""));
        let mut params = Vec::new();
        for part in args.split(',').filter(|p| !p.trim().is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("expected key=value, got `{part}`")))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("`{v}` is not a number")))?;
            params.push((k.trim().to_string(), v));
        }
        let get = |key: &str| -> Result<f64> {
            params
                .iter()
                .find(|(k, _)| k == key)
                .map(|&(_, v)| v)
                .ok_or_else(|| Error::Parse(format!("`{name}` needs parameter `{key}`")))
        };
        let allow = |keys: &[&str]| -> Result<()> {
            match params.iter().find(|(k, _)| !keys.contains(&k.as_str())) {
                Some((k, _)) => Err(Error::Parse(format!("unknown parameter `{k}` for `{name}`"))),
                None => Ok(()),
            }
        };
        let family = match name.trim() {
            "pure-escape" => {
                allow(&["q"])?;
                ClosedFormFamily::PureEscape { q: get("q")? }
            }
            "two-state" => {
                allow(&["a", "b"])?;
                ClosedFormFamily::TwoState {
                    a: get("a")?,
                    b: get("b")?,
                }
            }
            "constant-one" => {
                allow(&[])?;
                ClosedFormFamily::ConstantOne
            }
            "poly-tail" => {
                allow(&["alpha", "t0", "c"])?;
                let alpha = get("alpha")?;
                let t0 = get("t0")?;
                if let Ok(c) = get("c") {
                    let want = Self::poly_amplitude(alpha, t0);
                    if (c - want).abs() > 1e-12 * want.max(1.0) {
                        return Err(Error::InvalidKernel(format!(
                            "poly-tail amplitude must be t0^alpha = {want} for continuity, got {c}"
                        )));
                    }
                }
                ClosedFormFamily::PolyTail { alpha, t0 }
            }
            other => return Err(Error::Parse(format!("unknown kernel family `{other}`"))),
        };
        family.validate()?;
        Ok(family)
    }
}

/// Tabulated return probability: linear interpolation on the grid, the tail
/// model beyond it.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedKernel {
    times: Vec<f64>,
    values: Vec<f64>,
}

/// JSON layout `{"times": [...], "values": [...], "tail": {...}}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TabulatedDocument {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    #[serde(default = "no_tail")]
    pub tail: TailModel,
}

fn no_tail() -> TailModel {
    TailModel::None
}

impl TabulatedKernel {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() || times.len() < 2 {
            return Err(Error::InvalidKernel(
                "tabulated kernel needs matching times/values with at least two points".into(),
            ));
        }
        if times[0] != 0.0 {
            return Err(Error::InvalidKernel("tabulated grid must start at 0".into()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) || !times.iter().all(|t| t.is_finite()) {
            return Err(Error::InvalidKernel(
                "tabulated grid must be strictly increasing".into(),
            ));
        }
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidKernel(
                "tabulated values must lie in [0, 1]".into(),
            ));
        }
        Ok(TabulatedKernel { times, values })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn end(&self) -> f64 {
        *self.times.last().expect("nonempty")
    }

    fn interpolate(&self, t: f64) -> f64 {
        let k = self.times.partition_point(|&x| x <= t);
        if k == 0 {
            return self.values[0];
        }
        if k == self.times.len() {
            return self.values[k - 1];
        }
        let (t0, t1) = (self.times[k - 1], self.times[k]);
        let (v0, v1) = (self.values[k - 1], self.values[k]);
        v0 + (v1 - v0) * (t - t0) / (t1 - t0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum KernelSource {
    /// Return probability of the generator's distinguished state.
    Ctmc(Arc<GeneratorMatrix>),
    ClosedForm(ClosedFormFamily),
    Tabulated(TabulatedKernel),
}

/// A representation of `t ↦ p_t(i,i)` together with its declared tail.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnKernel {
    source: KernelSource,
    tail: TailModel,
    tail_start: f64,
}

impl ReturnKernel {
    pub fn closed_form(family: ClosedFormFamily) -> Result<Self> {
        family.validate()?;
        let (tail, tail_start) = family.tail();
        Ok(ReturnKernel {
            source: KernelSource::ClosedForm(family),
            tail,
            tail_start,
        })
    }

    /// Kernel of the generator's distinguished state. The tail model is
    /// detected from the chain; a chain that neither settles nor decays
    /// cleanly gets [`TailModel::None`].
    pub fn ctmc(generator: GeneratorMatrix) -> Self {
        let (tail, tail_start) = detect_tail(&generator);
        ReturnKernel {
            source: KernelSource::Ctmc(Arc::new(generator)),
            tail,
            tail_start,
        }
    }

    pub fn tabulated(table: TabulatedKernel, tail: TailModel) -> Result<Self> {
        tail.validate()?;
        let tail_start = table.end();
        Ok(ReturnKernel {
            source: KernelSource::Tabulated(table),
            tail,
            tail_start,
        })
    }

    pub fn from_tabulated_json(text: &str) -> Result<Self> {
        let doc: TabulatedDocument = serde_json::from_str(text)?;
        Self::tabulated(TabulatedKernel::new(doc.times, doc.values)?, doc.tail)
    }

    pub fn source(&self) -> &KernelSource {
        &self.source
    }

    pub fn tail(&self) -> TailModel {
        self.tail
    }

    /// Time from which integrals use the analytic tail.
    pub fn tail_start(&self) -> f64 {
        self.tail_start
    }

    /// Points where the kernel may fail to be smooth, within `(0, upto)`.
    pub(crate) fn breakpoints(&self, upto: f64) -> Vec<f64> {
        match &self.source {
            KernelSource::ClosedForm(ClosedFormFamily::PolyTail { t0, .. }) if *t0 < upto => {
                vec![*t0]
            }
            KernelSource::Tabulated(table) => table
                .times
                .iter()
                .copied()
                .filter(|&t| t > 0.0 && t < upto)
                .collect(),
            _ => Vec::new(),
        }
    }

    pub fn evaluator(&self) -> KernelEvaluator<'_> {
        let ctmc = match &self.source {
            KernelSource::Ctmc(gen) => Some(ReturnProbability::new(gen)),
            _ => None,
        };
        KernelEvaluator { kernel: self, ctmc }
    }

    pub fn generator(&self) -> Option<&GeneratorMatrix> {
        match &self.source {
            KernelSource::Ctmc(gen) => Some(gen),
            _ => None,
        }
    }

    pub fn describe(&self) -> String {
        match &self.source {
            KernelSource::Ctmc(gen) => format!("ctmc:states={},origin={}", gen.len(), gen.origin()),
            KernelSource::ClosedForm(f) => f.to_string(),
            KernelSource::Tabulated(t) => format!("tabulated:points={}", t.times.len()),
        }
    }
}

/// Pointwise evaluator with per-use caches. Not shared between threads; make
/// one per task.
pub struct KernelEvaluator<'a> {
    kernel: &'a ReturnKernel,
    ctmc: Option<ReturnProbability>,
}

impl KernelEvaluator<'_> {
    pub fn value(&mut self, t: f64) -> Result<f64> {
        match &self.kernel.source {
            KernelSource::Ctmc(_) => Ok(self.ctmc.as_mut().expect("ctmc cache").value(t)),
            KernelSource::ClosedForm(f) => Ok(f.value(t)),
            KernelSource::Tabulated(table) => {
                if t <= table.end() {
                    Ok(table.interpolate(t))
                } else {
                    self.kernel
                        .tail
                        .value(t)
                        .map(|v| v.clamp(0.0, 1.0))
                        .ok_or(Error::BeyondGrid { t, end: table.end() })
                }
            }
        }
    }
}

/// Evaluates `p_t(i,i)` at nonnegative, strictly increasing times.
pub fn evaluate_kernel(kernel: &ReturnKernel, times: &[f64]) -> Result<Vec<f64>> {
    if times.iter().any(|&t| !(t >= 0.0) || !t.is_finite()) {
        return Err(Error::Precondition(
            "evaluation times must be finite and nonnegative".into(),
        ));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Precondition(
            "evaluation times must be strictly increasing".into(),
        ));
    }
    match &kernel.source {
        KernelSource::Ctmc(gen) => Ok(return_probabilities_sorted(gen, times)),
        _ => {
            let mut eval = kernel.evaluator();
            times.iter().map(|&t| eval.value(t)).collect()
        }
    }
}
