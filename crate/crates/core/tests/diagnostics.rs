use mfbsde::bsde::{solve_standard, BackwardSolver};
use mfbsde::catalog;
use mfbsde::certificate::OdeBound;
use mfbsde::config::SolverConfig;
use mfbsde::diagnostics::{
    bmo2_estimate, check_alpha_envelope, check_exponential_bound, check_lemma21, mp_norm, sp_norm,
    sup_norm, PhiTransform,
};
use mfbsde::ensemble::PathEnsemble;
use mfbsde::grid::TimeGrid;
use mfbsde::process::{MeanCurve, ProcessGrid};
use mfbsde::scenario::{Constants, ScenarioSpec};
use proptest::prelude::*;

fn ensemble(steps: usize, paths: usize) -> PathEnsemble {
    PathEnsemble::simulate(&TimeGrid::uniform(1.0, steps).unwrap(), 1, paths, 3).unwrap()
}

fn config() -> SolverConfig {
    SolverConfig {
        steps: 50,
        paths: 4000,
        ..SolverConfig::default()
    }
}

#[test]
fn sup_norm_of_constant_and_empty() {
    let grid = TimeGrid::uniform(1.0, 5).unwrap();
    assert_eq!(sup_norm(&ProcessGrid::constant(&grid, 7, &[-2.5])).unwrap(), 2.5);
    assert!(sup_norm(&ProcessGrid::zeros(&grid, 0, 1)).is_err());
}

#[test]
fn bmo_of_zero_and_unit_integrands() {
    let ens = ensemble(50, 4000);
    let solver = BackwardSolver::new(&ens, &config()).unwrap();
    let w = ens.grid().full_window();
    assert_eq!(bmo2_estimate(&ProcessGrid::zeros(ens.grid(), 4000, 1), &solver, w).unwrap(), 0.0);
    let one = bmo2_estimate(&ProcessGrid::constant(ens.grid(), 4000, &[1.0]), &solver, w).unwrap();
    assert!((one - 1.0).abs() < 0.02, "{one}");
}

#[test]
fn bmo_of_deterministic_curve_is_its_tail_integral() {
    let ens = ensemble(50, 2000);
    let solver = BackwardSolver::new(&ens, &config()).unwrap();
    let grid = ens.grid().clone();
    // int_0^1 s^2 ds = 1/3 is the largest tail
    let z = ProcessGrid::from_fn(&grid, 2000, 1, |_, i, out| out[0] = grid.time(i));
    let est = bmo2_estimate(&z, &solver, grid.full_window()).unwrap();
    assert!((est - 1.0 / 3.0).abs() < 1e-3, "{est}");
}

#[test]
fn bmo_is_monotone_on_dominated_curves() {
    let ens = ensemble(20, 1000);
    let solver = BackwardSolver::new(&ens, &config()).unwrap();
    let grid = ens.grid().clone();
    let small = ProcessGrid::from_fn(&grid, 1000, 1, |_, i, out| out[0] = (3.0 * grid.time(i)).sin());
    let large = ProcessGrid::from_fn(&grid, 1000, 1, |_, i, out| out[0] = 1.1 * (3.0 * grid.time(i)).sin().abs() + 0.1);
    let w = grid.full_window();
    assert!(bmo2_estimate(&small, &solver, w).unwrap() <= bmo2_estimate(&large, &solver, w).unwrap());
}

#[test]
fn norms_of_simple_processes() {
    let grid = TimeGrid::uniform(1.0, 10).unwrap();
    let y = ProcessGrid::constant(&grid, 50, &[-3.0]);
    for p in [1.0, 2.0, 4.5] {
        assert!((sp_norm(&y, p).unwrap() - 3.0).abs() < 1e-12);
    }
    let z = ProcessGrid::constant(&grid, 50, &[1.0]);
    assert!((mp_norm(&z, 2.0).unwrap() - 1.0).abs() < 1e-12);
    assert!(sp_norm(&y, 0.5).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn norms_are_homogeneous(scale in 0.1f64..10.0, p in 1.0f64..6.0, seed in 0u64..1000) {
        let ens = PathEnsemble::simulate(&TimeGrid::uniform(1.0, 8).unwrap(), 1, 64, seed).unwrap();
        let grid = ens.grid().clone();
        let y = ProcessGrid::from_fn(&grid, 64, 1, |q, i, out| out[0] = ens.position(q, i)[0].sin());
        let scaled = ProcessGrid::from_fn(&grid, 64, 1, |q, i, out| out[0] = scale * y.get(q, i)[0]);
        let (a, b) = (sp_norm(&y, p).unwrap(), sp_norm(&scaled, p).unwrap());
        prop_assert!((b - scale * a).abs() <= 1e-12 * b.max(1.0));
        let (a, b) = (mp_norm(&y, p).unwrap(), mp_norm(&scaled, p).unwrap());
        prop_assert!((b - scale * a).abs() <= 1e-12 * b.max(1.0));
    }

    #[test]
    fn phi_identity(gamma in 0.05f64..5.0, y in -5.0f64..5.0) {
        let phi = PhiTransform::new(gamma).unwrap();
        let lhs = phi.d2_phi(y) - gamma * phi.d_phi(y).abs();
        prop_assert!((lhs - 1.0).abs() <= 1e-12 * phi.d2_phi(y).max(1.0));
    }
}

fn consts() -> Constants {
    Constants {
        c: 0.2,
        gamma: 0.4,
        alpha: 0.0,
        xi_bound: 1.0,
    }
}

#[test]
fn exponential_bound_is_tight_for_constants() {
    let spec = ScenarioSpec::single("c", 1, 1, 1.0, "0.7", "0", consts())
        .unwrap()
        .with_envelope("0", 0.0, 0.4)
        .unwrap();
    let cfg = config();
    let ens = ensemble(cfg.steps, cfg.paths);
    let sol = solve_standard(&spec, None, None, &ens, &cfg).unwrap();
    let rep = check_lemma21(&sol.y, &spec).unwrap().unwrap();
    assert!((rep.lhs - (0.4f64 * 0.7).exp()).abs() < 1e-12);
    assert!(rep.margin.abs() < 1e-12, "{rep:?}");
}

#[test]
fn exponential_bound_holds_on_the_frozen_mean_example() {
    // with frozen zero means the generator is bounded by 0.2(1+s) + 0.2|y| + 0.2|z|^2
    let spec = ScenarioSpec::single(
        "frozen",
        1,
        1,
        1.0,
        "sin(w)",
        "0.2*(1 + s + abs(y) + abs(ybar) + abs(sin(norm2(zbar)))) + 0.2*norm2(z)^2",
        consts(),
    )
    .unwrap()
    .with_envelope("0.2*(1 + s)", 0.2, 0.4)
    .unwrap();
    let cfg = config();
    let ens = ensemble(cfg.steps, cfg.paths);
    let zero = MeanCurve::zeros(ens.grid(), 1);
    let sol = solve_standard(&spec, Some(&zero), Some(&zero), &ens, &cfg).unwrap();
    let rep = check_lemma21(&sol.y, &spec).unwrap().unwrap();
    assert!(rep.margin >= -0.05, "{rep:?}");

    let mut last = f64::NEG_INFINITY;
    for gamma in [0.4, 0.8, 1.6] {
        let g = |s: f64| Ok(0.2 * (1.0 + s));
        let m = check_exponential_bound(&sol.y, gamma, 0.2, g).unwrap().unwrap().margin;
        assert!(m > last, "gamma {gamma}: {m} after {last}");
        last = m;
    }
}

#[test]
fn no_envelope_means_no_report() {
    let spec = catalog::linear_mean_z();
    let grid = TimeGrid::uniform(1.0, 4).unwrap();
    assert!(check_lemma21(&ProcessGrid::zeros(&grid, 3, 1), &spec).unwrap().is_none());
}

#[test]
fn alpha_envelope_rates() {
    let ode = OdeBound::new(1.0, 1.0).unwrap();
    let grid = TimeGrid::uniform(1.0, 20).unwrap();
    assert_eq!(check_alpha_envelope(&ProcessGrid::zeros(&grid, 10, 1), &ode), 0.0);
    let half = ProcessGrid::from_fn(&grid, 10, 1, |_, i, out| out[0] = (ode.alpha(grid.time(i)) / 2.0).sqrt());
    assert_eq!(check_alpha_envelope(&half, &ode), 0.0);
    let double = ProcessGrid::from_fn(&grid, 10, 1, |_, i, out| out[0] = -(2.0 * ode.alpha(grid.time(i))).sqrt());
    assert_eq!(check_alpha_envelope(&double, &ode), 1.0);
}
