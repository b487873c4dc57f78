use std::fmt;
use std::fs;
use std::path::Path;

use loctime::asymptotics::{self, RegimeLaw};
use loctime::json_number;
use loctime::kernel::KernelSource;
use loctime::montecarlo::{compare, McConfig};
use loctime::renewal::{refine, solve as solve_fixed, RenewalProblem, SolveStatus};
use loctime::{Error, ErrorClass};
use serde_json::{json, Value};

use crate::kernel_arg::{parse_kernel, ParsedKernel};
use crate::{AsymptoticsArgs, KernelOpts, OutOpts, RateCurveArgs, SolveArgs, TorusArgs, VerifyArgs};

#[derive(Debug)]
pub enum Failure {
    Core(Error),
    Io(String),
    /// The computation ran but missed its accuracy contract.
    Numerical(String),
    /// Monte Carlo and solver disagree.
    Mismatch(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Core(e) => match e.class() {
                ErrorClass::Precondition => 2,
                ErrorClass::Numerical => 3,
            },
            Failure::Io(_) => 2,
            Failure::Numerical(_) => 3,
            Failure::Mismatch(_) => 4,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Core(e) => write!(f, "{e}"),
            Failure::Io(m) | Failure::Numerical(m) | Failure::Mismatch(m) => f.write_str(m),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

type Outcome = Result<(), Failure>;

fn write_output(out: &OutOpts, name: &str, contents: &str) -> Outcome {
    let dir: &Path = &out.out;
    fs::create_dir_all(dir).map_err(|e| Failure::Io(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| Failure::Io(format!("cannot write {}: {e}", path.display())))
}

fn kernel(opts: &KernelOpts) -> Result<ParsedKernel, Failure> {
    Ok(parse_kernel(&opts.kernel, &opts.boundary)?)
}

fn config_line(config: &Value) -> Vec<String> {
    vec![format!("config: {config}")]
}

fn base_config(command: &str, k: &ParsedKernel) -> Value {
    json!({
        "command": command,
        "kernel": k.resolved,
        "version": env!("CARGO_PKG_VERSION"),
    })
}

fn set(config: &mut Value, key: &str, value: Value) {
    config[key] = value;
}

pub fn solve(a: &SolveArgs) -> Outcome {
    let k = kernel(&a.kernel)?;
    let step = a.step.unwrap_or(a.horizon / 100.0);
    let mut config = base_config("solve", &k);
    set(&mut config, "gamma", json_number(a.gamma));
    set(&mut config, "horizon", json_number(a.horizon));
    set(&mut config, "step", json_number(step));
    set(&mut config, "target", json_number(a.target));
    let problem = RenewalProblem::new(k.kernel, a.gamma, a.horizon, step)?;
    let sol = refine(&problem, a.target)?;
    write_output(&a.out, "solution.csv", &sol.to_csv(&config_line(&config)))?;
    if sol.status == SolveStatus::TargetNotMet {
        return Err(Failure::Numerical(format!(
            "target {} not met: best estimate {} at step {}",
            a.target, sol.error_estimate, sol.step
        )));
    }
    Ok(())
}

/// Evenly thinned grid indices, always including the last one.
fn sample_indices(len: usize, max: usize) -> Vec<usize> {
    let stride = len.div_ceil(max).max(1);
    let mut idx: Vec<usize> = (0..len).step_by(stride).collect();
    if idx.last() != Some(&(len - 1)) {
        idx.push(len - 1);
    }
    idx
}

pub fn asymptotics(a: &AsymptoticsArgs) -> Outcome {
    let k = kernel(&a.kernel)?;
    let mut config = base_config("asymptotics", &k);
    set(&mut config, "gamma", json_number(a.gamma));
    let report = asymptotics::classify(&k.kernel, a.gamma)?;
    let mut doc = json!({ "config": config.clone(), "report": report.to_json() });
    if let Some(horizon) = a.horizon {
        let step = a.step.unwrap_or(horizon / 1000.0);
        set(&mut config, "horizon", json_number(horizon));
        set(&mut config, "step", json_number(step));
        doc["config"] = config.clone();
        let sol = solve_fixed(&RenewalProblem::new(k.kernel.clone(), a.gamma, horizon, step)?)?;
        let mut rows = Vec::new();
        for i in sample_indices(sol.grid.len(), 200) {
            let (t, z) = (sol.grid[i], sol.values[i]);
            let mut row = json!({ "t": json_number(t), "z": json_number(z) });
            let prediction = match report.law {
                RegimeLaw::Supercritical { rate, .. } => {
                    row["scaled"] = json_number((-rate * t).exp() * z);
                    report.predicted(t)
                }
                RegimeLaw::Critical { hitting_moment } if !hitting_moment.is_finite() => {
                    if t == 0.0 {
                        None
                    } else {
                        let m = asymptotics::truncated_mean(&k.kernel, a.gamma, t)?;
                        let big_m = asymptotics::tail_mean(&k.kernel, t)?;
                        row["truncated_mean"] = json_number(m);
                        row["tail_mean"] = json_number(big_m);
                        Some(t / m)
                    }
                }
                RegimeLaw::Critical { .. } if t == 0.0 => None,
                _ => report.predicted(t),
            };
            if let Some(p) = prediction {
                row["prediction"] = json_number(p);
                row["ratio"] = json_number(z / p);
            }
            rows.push(row);
        }
        doc["trajectory"] = Value::Array(rows);
        doc["solver_error_estimate"] = json_number(sol.error_estimate);
    }
    let text = serde_json::to_string_pretty(&doc).map_err(Error::from)?;
    write_output(&a.out, "report.json", &(text + "\n"))?;
    write_output(&a.out, "report.csv", &report.to_csv(&config_line(&config)))
}

pub fn rate_curve(a: &RateCurveArgs) -> Outcome {
    let k = kernel(&a.kernel)?;
    let mut config = base_config("rate-curve", &k);
    set(&mut config, "gammas", Value::Array(a.gammas.iter().map(|&g| json_number(g)).collect()));
    let curve = asymptotics::rate_curve(&k.kernel, &a.gammas)?;
    write_output(&a.out, "rate_curve.csv", &curve.to_csv(&config_line(&config)))
}

pub fn verify(a: &VerifyArgs) -> Outcome {
    let k = kernel(&a.kernel)?;
    let generator = match k.kernel.source() {
        KernelSource::Ctmc(g) => (**g).clone(),
        KernelSource::ClosedForm(f) => f.to_generator().ok_or_else(|| {
            Error::Precondition(format!("kernel {f} has no Markov chain to simulate"))
        })?,
        KernelSource::Tabulated(_) => {
            return Err(Error::Precondition("tabulated kernels have no Markov chain to simulate".into()).into())
        }
    };
    let solver_gamma = a.solver_gamma.unwrap_or(a.gamma);
    let horizon = a.horizons.iter().cloned().fold(f64::NAN, f64::max);
    let mut config = base_config("verify", &k);
    set(&mut config, "gamma", json_number(a.gamma));
    set(&mut config, "solver_gamma", json_number(solver_gamma));
    set(&mut config, "horizons", Value::Array(a.horizons.iter().map(|&t| json_number(t)).collect()));
    set(&mut config, "replicas", json!(a.replicas));
    set(&mut config, "seed", json!(a.seed));
    set(&mut config, "step", json_number(a.step));

    let sol = solve_fixed(&RenewalProblem::new(k.kernel.clone(), solver_gamma, horizon, a.step)?)?;
    let invariants = sol.check_invariants();
    let mc = McConfig {
        start: generator.origin(),
        generator,
        gamma: a.gamma,
        horizons: a.horizons.clone(),
        replicas: a.replicas,
        seed: a.seed,
    };
    let cmp = compare(&mc, &sol)?;
    let mut header = config_line(&config);
    header.push(format!("invariants={}", invariants.all()));
    write_output(&a.out, "verify.csv", &cmp.to_csv(&header))?;
    if !invariants.all() {
        return Err(Failure::Numerical(format!("solver invariants violated: {invariants:?}")));
    }
    if !cmp.passed() {
        let worst = cmp.rows.iter().map(|r| r.z.abs()).fold(0.0, f64::max);
        return Err(Failure::Mismatch(format!(
            "Monte Carlo disagrees with the solver (max |z| = {worst})"
        )));
    }
    Ok(())
}

pub fn torus_rate(a: &TorusArgs) -> Outcome {
    let d = a.dim as usize;
    let kappa = a.jump_rate.unwrap_or_else(|| asymptotics::default_jump_rate(d));
    let config = json!({
        "command": "torus-rate",
        "dim": d,
        "gammas": a.gamma.iter().map(|&g| json_number(g)).collect::<Vec<_>>(),
        "jump_rate": json_number(kappa),
        "version": env!("CARGO_PKG_VERSION"),
    });
    let mut csv = format!("# config: {config}\ngamma,r\n");
    for &g in &a.gamma {
        let r = asymptotics::srw_torus_rate(d, g, Some(kappa))?;
        csv.push_str(&format!("{g},{r}\n"));
    }
    write_output(&a.out, "torus_rate.csv", &csv)
}
