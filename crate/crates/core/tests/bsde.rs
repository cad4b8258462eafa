use mfbsde::bsde::{
    regress_conditional, solve_standard, BackwardSolver, FnDriver, RegressionBasis,
};
use mfbsde::config::SolverConfig;
use mfbsde::ensemble::PathEnsemble;
use mfbsde::error::SolveError;
use mfbsde::grid::TimeGrid;
use mfbsde::scenario::{Constants, ScenarioSpec};

fn consts() -> Constants {
    Constants {
        c: 0.2,
        gamma: 0.4,
        alpha: 0.0,
        xi_bound: 1.0,
    }
}

fn config(steps: usize, paths: usize) -> SolverConfig {
    SolverConfig {
        steps,
        paths,
        ..SolverConfig::default()
    }
}

fn rms(a: &[f64], b: &[f64]) -> f64 {
    (a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64).sqrt()
}

fn mean(a: &[f64]) -> f64 {
    a.iter().sum::<f64>() / a.len() as f64
}

#[test]
fn regression_recovers_brownian_martingale() {
    let grid = TimeGrid::uniform(1.0, 2).unwrap();
    let ens = PathEnsemble::simulate(&grid, 1, 100_000, 7).unwrap();
    let t = grid.time(1);
    let state: Vec<f64> = ens.positions_at(1).iter().map(|w| w / t.sqrt()).collect();
    let (fitted, coefs) =
        regress_conditional(ens.positions_at(2), &state, &RegressionBasis::new(1, 3, 0.0)).unwrap();
    let err = rms(&fitted, ens.positions_at(1));
    // coefficient noise is of order sqrt(k (T - t) / P)
    assert!(err < 0.01, "rms error {err}");
    assert!((coefs[1] - t.sqrt()).abs() < 0.01, "{coefs:?}");
}

#[test]
fn zero_driver_gives_regression_martingale() {
    let cfg = config(20, 50_000);
    let grid = TimeGrid::uniform(1.0, cfg.steps).unwrap();
    let ens = PathEnsemble::simulate(&grid, 1, cfg.paths, 3).unwrap();
    let solver = BackwardSolver::new(&ens, &cfg).unwrap();
    let driver = FnDriver::new(1, 1, false, |_, _, _| vec![0.0]);
    let (y, z, _) = solver.solve(&driver, ens.positions_at(cfg.steps)).unwrap();
    for i in 0..=cfg.steps {
        assert!(rms(y.node(i), ens.positions_at(i)) < 0.02, "node {i}");
        assert!((mean(z.node(i)) - 1.0).abs() < 0.05, "node {i}: {}", mean(z.node(i)));
    }
}

#[test]
fn unit_driver_integrates_time() {
    let cfg = config(10, 2_000);
    let grid = TimeGrid::uniform(2.0, cfg.steps).unwrap();
    let ens = PathEnsemble::simulate(&grid, 1, cfg.paths, 1).unwrap();
    let solver = BackwardSolver::new(&ens, &cfg).unwrap();
    let driver = FnDriver::new(1, 1, false, |_, _, _| vec![1.0]);
    let (y, z, _) = solver.solve(&driver, &vec![0.0; cfg.paths]).unwrap();
    for i in 0..=cfg.steps {
        let exact = 2.0 - grid.time(i);
        assert!(y.node(i).iter().all(|v| (v - exact).abs() < 1e-12));
        assert!(z.node(i).iter().all(|v| v.abs() < 1e-12));
    }
}

#[test]
fn quadratic_driver_with_constant_terminal_is_constant() {
    let cfg = config(10, 2_000);
    let grid = TimeGrid::uniform(1.0, cfg.steps).unwrap();
    let ens = PathEnsemble::simulate(&grid, 1, cfg.paths, 1).unwrap();
    let solver = BackwardSolver::new(&ens, &cfg).unwrap();
    let driver = FnDriver::new(1, 1, false, |_, _, z: &[f64]| vec![0.5 * z[0] * z[0]]);
    let (y, z, _) = solver.solve(&driver, &vec![0.7; cfg.paths]).unwrap();
    assert!(y.values().iter().all(|v| (v - 0.7).abs() < 1e-12));
    assert!(z.values().iter().all(|v| v.abs() < 1e-12));
}

#[test]
fn standard_solve_of_zero_driver_keeps_constant() {
    let spec = ScenarioSpec::single("const", 1, 1, 1.0, "0.3", "0", consts()).unwrap();
    let cfg = config(8, 1_000);
    let grid = TimeGrid::uniform(1.0, cfg.steps).unwrap();
    let ens = PathEnsemble::simulate(&grid, 1, cfg.paths, 1).unwrap();
    let sol = solve_standard(&spec, None, None, &ens, &cfg).unwrap();
    assert!(sol.y.values().iter().all(|v| (v - 0.3).abs() < 1e-12));
    assert!(sol.z.values().iter().all(|v| v.abs() < 1e-12));
}

#[test]
fn linear_in_z_driver_matches_closed_form() {
    // f = c z, xi = W_T  =>  Y_t = W_t + c (T - t), Z = 1
    let c = 0.8;
    let spec = ScenarioSpec::single("lin", 1, 1, 1.0, "w", "0.8 * z", consts()).unwrap();
    let cfg = config(100, 100_000);
    let grid = TimeGrid::uniform(1.0, cfg.steps).unwrap();
    let ens = PathEnsemble::simulate(&grid, 1, cfg.paths, 11).unwrap();
    let sol = solve_standard(&spec, None, None, &ens, &cfg).unwrap();
    for i in 0..=cfg.steps {
        let t = grid.time(i);
        let m = mean(sol.y.node(i));
        let exact_mean = mean(ens.positions_at(i)) + c * (1.0 - t);
        assert!((m - exact_mean).abs() < 0.02 * c.max(1.0 - t), "node {i}: {m} vs {exact_mean}");
        assert!((mean(sol.z.node(i)) - 1.0).abs() < 0.02, "node {i}");
    }
}

#[test]
fn implicit_step_matches_backward_euler() {
    // f = -y, xi = 1  =>  Y_i = Y_{i+1} / (1 + h)
    let spec = ScenarioSpec::single("decay", 1, 1, 1.0, "1", "-y", consts()).unwrap();
    let cfg = config(16, 1_000);
    let grid = TimeGrid::uniform(1.0, cfg.steps).unwrap();
    let ens = PathEnsemble::simulate(&grid, 1, cfg.paths, 2).unwrap();
    let sol = solve_standard(&spec, None, None, &ens, &cfg).unwrap();
    let h = 1.0 / 16.0;
    let mut expected = 1.0;
    for i in (0..16).rev() {
        expected /= 1.0 + h;
        assert!(sol.y.node(i).iter().all(|v| (v - expected).abs() < 1e-10));
        assert!(sol.stats.inner_iterations[i] >= 2);
    }
    assert!((sol.y.node(0)[0] - (-1.0f64).exp()).abs() < 0.03);
}

#[test]
fn diverging_implicit_iteration_names_the_node() {
    let cfg = SolverConfig {
        max_inner: 20,
        ..config(4, 1_000)
    };
    let grid = TimeGrid::uniform(1.0, cfg.steps).unwrap();
    let ens = PathEnsemble::simulate(&grid, 1, cfg.paths, 2).unwrap();
    let solver = BackwardSolver::new(&ens, &cfg).unwrap();
    let driver = FnDriver::new(1, 1, true, |_, y: &[f64], _| vec![12.0 * y[0]]);
    let err = solver.solve(&driver, &vec![1.0; cfg.paths]).unwrap_err();
    assert!(matches!(err, SolveError::StepDivergence { node: 3, iterations: 20 }), "{err}");
}

#[test]
fn non_finite_driver_is_caught() {
    let cfg = config(4, 1_000);
    let grid = TimeGrid::uniform(1.0, cfg.steps).unwrap();
    let ens = PathEnsemble::simulate(&grid, 1, cfg.paths, 2).unwrap();
    let solver = BackwardSolver::new(&ens, &cfg).unwrap();
    let driver = FnDriver::new(1, 1, false, |t, _, _| vec![if t < 0.3 { f64::NAN } else { 0.0 }]);
    let err = solver.solve(&driver, &vec![1.0; cfg.paths]).unwrap_err();
    assert!(matches!(err, SolveError::NonFinite { node: 1 }), "{err}");
}

#[test]
fn clamp_activity_is_counted() {
    let cfg = config(10, 4_000);
    let grid = TimeGrid::uniform(1.0, cfg.steps).unwrap();
    let ens = PathEnsemble::simulate(&grid, 1, cfg.paths, 5).unwrap();
    let driver = FnDriver::new(1, 1, false, |_, _, z: &[f64]| vec![z[0]]);
    let loose = BackwardSolver::new(&ens, &cfg).unwrap().with_z_clamp(Some(10.0));
    let (_, _, stats) = loose.solve(&driver, ens.positions_at(10)).unwrap();
    assert_eq!(stats.total_clamped(), 0);
    let tight = BackwardSolver::new(&ens, &cfg).unwrap().with_z_clamp(Some(0.5));
    let (y, _, stats) = tight.solve(&driver, ens.positions_at(10)).unwrap();
    assert!(stats.total_clamped() > 9 * cfg.paths);
    // with z clamped to 0.5 the drift is 0.5 per unit time
    assert!((mean(y.node(0)) - mean(ens.positions_at(10)) - 0.5).abs() < 0.02);
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let spec = ScenarioSpec::single(
        "ex22",
        1,
        1,
        1.0,
        "sin(w)",
        "0.2*(1 + s + abs(y) + abs(ybar) + abs(sin(norm2(zbar)))) + 0.2*norm2(z)^2",
        consts(),
    )
    .unwrap();
    let cfg = config(10, 10_000);
    let grid = TimeGrid::uniform(1.0, cfg.steps).unwrap();
    let ens = PathEnsemble::simulate(&grid, 1, cfg.paths, 9).unwrap();
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| solve_standard(&spec, None, None, &ens, &cfg).unwrap())
    };
    let (a, b) = (run(1), run(4));
    assert_eq!(a.y.values(), b.y.values());
    assert_eq!(a.z.values(), b.z.values());
}

#[test]
fn two_dimensional_brownian_terminal() {
    // xi = W^1_T + 2 W^2_T with f = 0  =>  Z = (1, 2)
    let spec = ScenarioSpec::single("two", 1, 2, 1.0, "w[0] + 2*w[1]", "0", consts()).unwrap();
    let cfg = config(10, 40_000);
    let grid = TimeGrid::uniform(1.0, cfg.steps).unwrap();
    let ens = PathEnsemble::simulate(&grid, 2, cfg.paths, 4).unwrap();
    let sol = solve_standard(&spec, None, None, &ens, &cfg).unwrap();
    for i in 0..cfg.steps {
        let z = sol.z.node(i);
        let m0 = z.iter().step_by(2).sum::<f64>() / cfg.paths as f64;
        let m1 = z.iter().skip(1).step_by(2).sum::<f64>() / cfg.paths as f64;
        assert!((m0 - 1.0).abs() < 0.05 && (m1 - 2.0).abs() < 0.05, "node {i}: {m0} {m1}");
    }
}
