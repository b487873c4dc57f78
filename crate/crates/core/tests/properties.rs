use loctime::asymptotics::{classify, laplace, RegimeLaw};
use loctime::kernel::{build_difference_walk, Boundary, ClosedFormFamily, ReturnKernel};
use loctime::renewal::{solve, RenewalProblem};

fn closed(f: ClosedFormFamily) -> ReturnKernel {
    ReturnKernel::closed_form(f).unwrap()
}

#[test]
fn laplace_transform_decreases() {
    let kernels = [
        closed(ClosedFormFamily::TwoState { a: 1.0, b: 2.0 }),
        closed(ClosedFormFamily::PolyTail { alpha: 1.5, t0: 1.0 }),
        ReturnKernel::ctmc(build_difference_walk(2, 3, Boundary::Reflecting).unwrap()),
    ];
    for k in &kernels {
        let values: Vec<f64> = [0.01, 0.1, 1.0, 10.0].iter().map(|&l| laplace(k, l).unwrap()).collect();
        assert!(values.windows(2).all(|w| w[1] < w[0]), "{values:?}");
    }
}

#[test]
fn supercritical_prefactor_matches_solution() {
    for (k, gamma) in [
        (closed(ClosedFormFamily::PureEscape { q: 2.0 }), 5.0),
        (closed(ClosedFormFamily::TwoState { a: 1.0, b: 1.0 }), 3.0),
    ] {
        let report = classify(&k, gamma).unwrap();
        let RegimeLaw::Supercritical { rate, .. } = report.law else {
            panic!("expected supercritical")
        };
        let horizon = (12.0 / rate).ceil();
        let sol = solve(&RenewalProblem::new(k, gamma, horizon, horizon / 4000.0).unwrap()).unwrap();
        let z = *sol.values.last().unwrap();
        let predicted = report.predicted(horizon).unwrap();
        assert!((z / predicted - 1.0).abs() < 0.02, "{z} vs {predicted}");
    }
}

#[test]
fn subcritical_plateau() {
    let k = closed(ClosedFormFamily::PureEscape { q: 2.0 });
    let report = classify(&k, 1.0).unwrap();
    let RegimeLaw::Subcritical { limit } = report.law else {
        panic!("expected subcritical")
    };
    assert!((limit - 2.0).abs() < 1e-12);
    let sol = solve(&RenewalProblem::new(k, 1.0, 20.0, 0.01).unwrap()).unwrap();
    assert!((sol.values.last().unwrap() - limit).abs() < 1e-6);
}

#[test]
fn gamma_zero_is_flat() {
    let k = closed(ClosedFormFamily::TwoState { a: 1.0, b: 1.0 });
    let report = classify(&k, 0.0).unwrap();
    assert_eq!(report.regime().as_str(), "subcritical");
    let sol = solve(&RenewalProblem::new(k, 0.0, 1.0, 0.1).unwrap()).unwrap();
    assert!(sol.values.iter().all(|&z| z == 1.0));
}
