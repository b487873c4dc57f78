//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line for
//! each, and exits nonzero if any fails.

use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use loctime::asymptotics::{
    classify, green_function, growth_rate, rate_curve, srw_torus_rate, tail_mean, truncated_mean,
    RegimeLaw,
};
use loctime::kernel::{
    build_difference_walk, Boundary, ClosedFormFamily, GeneratorMatrix, ReturnKernel, TabulatedKernel,
    TailModel,
};
use loctime::montecarlo::{compare, McConfig};
use loctime::renewal::{refine, solve, solve_by_series, RenewalProblem, RenewalSolution, SolveStatus};

type Check = Result<String, String>;

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn closed(f: ClosedFormFamily) -> ReturnKernel {
    ReturnKernel::closed_form(f).unwrap()
}

fn solved(kernel: &ReturnKernel, gamma: f64, horizon: f64, step: f64) -> RenewalSolution {
    solve(&RenewalProblem::new(kernel.clone(), gamma, horizon, step).unwrap()).unwrap()
}

fn criterion_1() -> Check {
    let start = Instant::now();
    let k = closed(ClosedFormFamily::ConstantOne);
    let sol = refine(&RenewalProblem::new(k, 1.0, 5.0, 0.05).unwrap(), 1e-6).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let worst = sol
        .grid
        .iter()
        .zip(&sol.values)
        .map(|(&t, &z)| (z / t.exp() - 1.0).abs())
        .fold(0.0, f64::max);
    ensure(worst <= 1e-6, format!("max relative error {worst:e}"))?;
    ensure(elapsed < 5.0, format!("took {elapsed:.2} s"))?;
    Ok(format!("max rel error {worst:.2e}, step {}, {elapsed:.2} s", sol.step))
}

fn criterion_2() -> Check {
    let k = closed(ClosedFormFamily::PureEscape { q: 2.0 });

    let sub = classify(&k, 1.0).unwrap();
    let limit = match sub.law {
        RegimeLaw::Subcritical { limit } => limit,
        other => return Err(format!("gamma=1 classified as {other:?}")),
    };
    ensure((limit / 2.0 - 1.0).abs() <= 0.01, format!("subcritical limit {limit}"))?;
    let sol = solved(&k, 1.0, 20.0, 0.01);
    let z_end = *sol.values.last().unwrap();
    let z_half = sol.value_at(10.0).unwrap();
    ensure((z_end - z_half).abs() < 1e-4 * z_end, "no plateau")?;
    ensure((z_end / limit - 1.0).abs() <= 0.01, format!("Z(20) = {z_end}"))?;

    let crit = classify(&k, 2.0).unwrap();
    let h = match crit.law {
        RegimeLaw::Critical { hitting_moment } => hitting_moment,
        other => return Err(format!("gamma=2 classified as {other:?}")),
    };
    let slope = 1.0 / (2.0 * h);
    ensure((slope - 2.0).abs() <= 1e-10, format!("critical slope {slope}"))?;
    let z10 = solved(&k, 2.0, 10.0, 0.01).value_at(10.0).unwrap();
    ensure((z10 / 21.0 - 1.0).abs() <= 0.01, format!("Z(10) = {z10}"))?;

    let sup = classify(&k, 5.0).unwrap();
    let (rate, prefactor) = match sup.law {
        RegimeLaw::Supercritical { rate, prefactor } => (rate, prefactor),
        other => return Err(format!("gamma=5 classified as {other:?}")),
    };
    ensure((rate - 3.0).abs() <= 1e-10, format!("rate {rate}"))?;
    let t = 4.0;
    let observed = (-rate * t).exp() * solved(&k, 5.0, t, 0.002).value_at(t).unwrap();
    ensure((observed / (5.0 / 3.0) - 1.0).abs() <= 0.02, format!("e^(-3t)Z(t) = {observed}"))?;
    ensure((prefactor / (5.0 / 3.0) - 1.0).abs() <= 0.02, format!("prefactor {prefactor}"))?;
    Ok(format!(
        "limit {limit:.6}, Z(10) {z10:.6}, slope {slope}, rate {rate:.12}, e^(-12)Z(4) {observed:.6}"
    ))
}

fn criterion_3() -> Check {
    let k = closed(ClosedFormFamily::TwoState { a: 1.0, b: 1.0 });
    let formula = |g: f64| 0.5 * (g - 2.0 + ((g - 2.0) * (g - 2.0) + 4.0 * g).sqrt());
    let golden = growth_rate(&k, 1.0).unwrap();
    ensure(
        (golden - (5f64.sqrt() - 1.0) / 2.0).abs() <= 1e-9,
        format!("r(1) = {golden}"),
    )?;
    let mut worst: f64 = 0.0;
    for i in 1..=128 {
        let g = 0.5 * i as f64;
        let r = growth_rate(&k, g).unwrap();
        worst = worst.max((r - formula(g)).abs());
    }
    ensure(worst <= 1e-9, format!("max deviation {worst:e}"))?;
    Ok(format!("r(1) = {golden:.12}, max deviation over 128 gammas {worst:.1e}"))
}

fn slope_fit(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

fn criterion_4() -> Check {
    let mut notes = Vec::new();
    for &alpha in &[1.2, 1.5, 1.8] {
        let k = closed(ClosedFormFamily::PolyTail { alpha, t0: 1.0 });
        let gamma = 1.0 / green_function(&k).unwrap();
        let horizon = 4000.0;
        let sol = solved(&k, gamma, horizon, 0.05);
        ensure(sol.grid.len() > 1000, "too few steps")?;
        let (mut lo, mut hi) = (f64::INFINITY, 0.0_f64);
        let (mut lt, mut lz) = (Vec::new(), Vec::new());
        for (i, (&t, &z)) in sol.grid.iter().zip(&sol.values).enumerate() {
            if t < horizon / 2.0 || i % 10 != 0 {
                continue;
            }
            let big_m = tail_mean(&k, t).unwrap();
            let m = truncated_mean(&k, gamma, t).unwrap();
            ensure(
                (gamma * big_m / m - 1.0).abs() < 1e-6,
                format!("alpha={alpha}: forms disagree at t={t}"),
            )?;
            let ratio = z * gamma * big_m / t;
            lo = lo.min(ratio);
            hi = hi.max(ratio);
            lt.push(t.ln());
            lz.push(z.ln());
        }
        let slope = slope_fit(&lt, &lz);
        ensure(
            lo >= 0.95 && hi <= 2.05,
            format!("alpha={alpha}: ratio range [{lo}, {hi}]"),
        )?;
        ensure(
            (slope - (alpha - 1.0)).abs() <= 0.05,
            format!("alpha={alpha}: slope {slope}"),
        )?;
        notes.push(format!("alpha={alpha}: ratio [{lo:.3},{hi:.3}] slope {slope:.3}"));
    }
    Ok(notes.join("; "))
}

fn criterion_5() -> Check {
    let grid = [
        0.1, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0, 256.0, 512.0, 1000.0,
    ];
    let kernels = [
        ("two-state", closed(ClosedFormFamily::TwoState { a: 1.0, b: 1.0 })),
        (
            "walk d=1 reflecting",
            ReturnKernel::ctmc(build_difference_walk(1, 16, Boundary::Reflecting).unwrap()),
        ),
        (
            "walk d=1 absorbing",
            ReturnKernel::ctmc(build_difference_walk(1, 16, Boundary::Absorbing).unwrap()),
        ),
    ];
    let mut notes = Vec::new();
    for (name, k) in &kernels {
        let curve = rate_curve(k, &grid).unwrap();
        ensure(curve.convex, format!("{name}: convexity fails"))?;
        ensure(curve.threshold_consistent, format!("{name}: sign pattern fails"))?;
        ensure(curve.slope_limit >= 0.95, format!("{name}: r(1000)/1000 = {}", curve.slope_limit))?;
        if curve.green.is_finite() {
            let gc = 1.0 / curve.green;
            let below = growth_rate(k, gc * 0.99).unwrap();
            let above = growth_rate(k, gc * 1.01).unwrap();
            ensure(below == 0.0 && above > 0.0, format!("{name}: threshold {gc}"))?;
            notes.push(format!("{name}: gamma_c {gc:.6}, slope {:.4}", curve.slope_limit));
        } else {
            ensure(curve.rates.iter().all(|&r| r > 0.0), format!("{name}: zero rate with G = inf"))?;
            notes.push(format!("{name}: G = inf, slope {:.4}", curve.slope_limit));
        }
    }
    Ok(notes.join("; "))
}

fn criterion_6() -> Check {
    let gamma = 4.0;
    let torus = srw_torus_rate(1, gamma, None).unwrap();
    let rate_at = |r: usize| {
        let k = ReturnKernel::ctmc(build_difference_walk(1, r, Boundary::Reflecting).unwrap());
        growth_rate(&k, gamma).unwrap()
    };
    let mut radius = 4;
    let mut prev = rate_at(radius);
    loop {
        let next = rate_at(2 * radius);
        radius *= 2;
        if (next - prev).abs() < 1e-5 {
            prev = next;
            break;
        }
        ensure(radius < 512, "truncation never resolved")?;
        prev = next;
    }
    let diff = (torus - prev).abs();
    ensure(diff <= 1e-4, format!("torus {torus} vs walk {prev}"))?;
    Ok(format!("torus {torus:.10}, walk(R={radius}) {prev:.10}, diff {diff:.1e}"))
}

fn criterion_7() -> Check {
    let families = [
        ClosedFormFamily::PureEscape { q: 2.0 },
        ClosedFormFamily::TwoState { a: 1.0, b: 1.0 },
        ClosedFormFamily::ConstantOne,
        ClosedFormFamily::PolyTail { alpha: 1.5, t0: 1.0 },
    ];
    let mut worst_share: f64 = 0.0;
    for f in families {
        for &gamma in &[0.3, 1.0, 3.0] {
            let p = RenewalProblem::new(closed(f), gamma, 5.0, 0.01).unwrap();
            let a = solve(&p).unwrap();
            let b = solve_by_series(&p, 1000).unwrap();
            ensure(b.status == SolveStatus::Converged, format!("{f} γ={gamma}: series not converged"))?;
            let budget = a.error_estimate + b.error_estimate;
            for (&za, &zb) in a.values.iter().zip(&b.values) {
                let gap = (za - zb).abs() / za;
                ensure(gap <= budget, format!("{f} γ={gamma}: gap {gap:e} > {budget:e}"))?;
                if budget > 0.0 {
                    worst_share = worst_share.max(gap / budget);
                }
            }
        }
    }
    Ok(format!("12 cases, largest gap is {:.1}% of the error budget", 100.0 * worst_share))
}

fn criterion_8() -> Check {
    let start = Instant::now();
    let gen = GeneratorMatrix::two_state(1.0, 1.0).unwrap();
    let kernel = ReturnKernel::ctmc(gen.clone());
    let config = McConfig {
        start: gen.origin(),
        generator: gen,
        gamma: 1.0,
        horizons: vec![1.0, 2.0, 3.0],
        replicas: 100_000,
        seed: 20240601,
    };
    let sol = solved(&kernel, 1.0, 3.0, 0.01);
    let good = compare(&config, &sol).unwrap();
    let zs: Vec<f64> = good.rows.iter().map(|r| r.z).collect();
    ensure(good.passed(), format!("z-scores {zs:?}"))?;
    let wrong = solved(&kernel, 1.3, 3.0, 0.01);
    let control = compare(&config, &wrong).unwrap();
    let z_last = control.rows.last().unwrap().z;
    ensure(z_last.abs() > 3.0, format!("negative control z = {z_last}"))?;
    let elapsed = start.elapsed().as_secs_f64();
    ensure(elapsed < 60.0, format!("took {elapsed:.1} s"))?;
    Ok(format!(
        "z = [{}], control z = {z_last:.1}, {elapsed:.2} s",
        zs.iter().map(|z| format!("{z:.2}")).collect::<Vec<_>>().join(", ")
    ))
}

fn criterion_9() -> Check {
    let three_state = GeneratorMatrix::from_dense(
        vec!["a".into(), "b".into(), "c".into()],
        &[
            vec![-2.0, 1.5, 0.5],
            vec![1.0, -1.0, 0.0],
            vec![0.2, 0.3, -0.5],
        ],
        0,
    )
    .unwrap();
    let table = TabulatedKernel::new(
        (0..=20).map(|i| 0.1 * i as f64).collect(),
        (0..=20).map(|i| (-0.1 * i as f64).exp()).collect(),
    )
    .unwrap();
    let kernels = vec![
        closed(ClosedFormFamily::PureEscape { q: 2.0 }),
        closed(ClosedFormFamily::TwoState { a: 1.0, b: 1.0 }),
        closed(ClosedFormFamily::ConstantOne),
        closed(ClosedFormFamily::PolyTail { alpha: 1.5, t0: 1.0 }),
        ReturnKernel::ctmc(three_state),
        ReturnKernel::ctmc(build_difference_walk(2, 4, Boundary::Reflecting).unwrap()),
        ReturnKernel::ctmc(build_difference_walk(1, 8, Boundary::Absorbing).unwrap()),
        ReturnKernel::tabulated(
            table,
            TailModel::ExponentialDecay {
                rate: 1.0,
                amplitude: 1.0,
            },
        )
        .unwrap(),
    ];
    let gammas = [0.0, 0.5, 2.0, 8.0];
    let mut solves = 0;
    for k in &kernels {
        let mut previous: Option<RenewalSolution> = None;
        for &g in &gammas {
            let sol = solved(k, g, 3.0, 0.01);
            let inv = sol.check_invariants();
            ensure(inv.all(), format!("{} γ={g}: {inv:?}", k.describe()))?;
            if let Some(prev) = &previous {
                let ok = prev
                    .values
                    .iter()
                    .zip(&sol.values)
                    .all(|(&lo, &hi)| hi >= lo * (1.0 - 1e-12));
                ensure(ok, format!("{} not monotone in gamma at γ={g}", k.describe()))?;
            }
            previous = Some(sol);
            solves += 1;
        }
    }
    Ok(format!("{solves} solves, all bounds and monotonicity checks hold"))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Check); 9] = [
        ("constant-kernel oracle", criterion_1),
        ("three regimes of pure escape", criterion_2),
        ("two-state analytic rate", criterion_3),
        ("critical weak bounds", criterion_4),
        ("rate-curve properties", criterion_5),
        ("torus cross-check", criterion_6),
        ("solver vs series", criterion_7),
        ("Monte Carlo concordance", criterion_8),
        ("bounds invariant sweep", criterion_9),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let n = i + 1;
        if !filter.is_empty() && !filter.iter().any(|f| *f == n.to_string()) {
            continue;
        }
        let outcome = panic::catch_unwind(AssertUnwindSafe(run))
            .unwrap_or_else(|_| Err("panicked".to_string()));
        match outcome {
            Ok(detail) => println!("criterion {n} ({name}): PASS: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("criterion {n} ({name}): FAIL: {detail}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
