use mfbsde::catalog;
use mfbsde::oracle::fixtures::{self, Fixture};
use mfbsde::oracle::{
    brute_force_1d, linear_closed_form, LatticeConfig, LinearComponent, LinearMeanFieldSpec,
};
use mfbsde::scenario::{Constants, ScenarioSpec};

fn consts() -> Constants {
    Constants {
        c: 1.0,
        gamma: 1.0,
        alpha: 0.0,
        xi_bound: 1.0,
    }
}

#[test]
fn lattice_matches_linear_closed_form() {
    let spec = ScenarioSpec::single(
        "lin",
        1,
        1,
        1.0,
        "0.5 + w",
        "1 + 0.3*y + 0.2*ybar + 0.5*z + 0.4*zbar",
        consts(),
    )
    .unwrap();
    let lin = LinearMeanFieldSpec {
        horizon: 1.0,
        d: 1,
        components: vec![LinearComponent::constant(0.3, 0.2, &[0.5], &[0.4], 1.0, 0.5, &[1.0])],
    };
    let exact = linear_closed_form(&lin).unwrap();
    let lat = brute_force_1d(&spec, &LatticeConfig { steps: 1000, ..Default::default() }).unwrap();
    for (i, &t) in lat.times.iter().enumerate().step_by(100) {
        let (a, b) = (lat.m_y[i], exact.phi(0, t));
        assert!((a - b).abs() <= 5e-3 * b.abs(), "t = {t}: {a} vs {b}");
        let z = exact.psi(0, t)[0];
        if i < lat.times.len() - 1 {
            assert!((lat.m_z[i] - z).abs() <= 5e-3 * z.abs(), "t = {t}");
        }
    }
}

#[test]
fn lattice_mean_z_scenario() {
    let lat = brute_force_1d(&catalog::linear_mean_z(), &LatticeConfig { steps: 200, ..Default::default() })
        .unwrap();
    for (i, &t) in lat.times.iter().enumerate() {
        assert!((lat.m_y[i] - (1.0 - t)).abs() < 1e-9);
        assert!((lat.m_z[i] - 1.0).abs() < 1e-9);
    }
}

#[test]
fn lattice_rejects_vector_scenarios() {
    assert!(brute_force_1d(&catalog::ex41_vector(), &LatticeConfig::default()).is_err());
    assert!(brute_force_1d(&catalog::shift_square(), &LatticeConfig::default()).is_err());
}

#[test]
fn halving_the_lattice_step_contracts() {
    let fx = fixtures::generate("ex2.1-small", &LatticeConfig { steps: 400, ..Default::default() }).unwrap();
    assert!(fx.converged);
    assert!(fx.refinement.ratio <= 0.6, "{:?}", fx.refinement);
}

fn stored() -> Fixture {
    fixtures::load("ex2.1-small").expect("stored fixture")
}

#[test]
fn stored_fixture_is_consistent() {
    let fx = stored();
    assert!(fx.converged);
    assert_eq!(fx.times.len(), fx.lattice.steps + 1);
    assert!(fx.refinement.ratio <= 0.6);
    assert!(fx.scenario.contains("ex2.1-small"));
    // a coarse rerun lands near the stored fine solution
    let coarse = brute_force_1d(&catalog::ex21_small(), &LatticeConfig { steps: 250, ..Default::default() })
        .unwrap();
    assert!((coarse.m_y[0] - fx.m_y[0]).abs() < 1e-3);
    assert!((fx.m_y_at(0.25) - coarse.m_y_at(0.25)).abs() < 1e-3);
}

#[test]
fn missing_fixture_names_the_fix() {
    let dir = std::env::temp_dir().join("mfbsde-no-fixtures");
    let err = fixtures::load_from(&dir, "ex2.1-small").unwrap_err().to_string();
    assert!(err.contains("regenerate"), "{err}");
}

#[test]
fn fixture_round_trip() {
    let dir = std::env::temp_dir().join(format!("mfbsde-fixtures-{}", std::process::id()));
    let written = fixtures::regenerate(&dir).unwrap();
    assert_eq!(written.len(), fixtures::FIXTURES.len());
    let fx = fixtures::load_from(&dir, "ex2.1-small").unwrap();
    assert_eq!(fx, stored());
    std::fs::remove_dir_all(&dir).ok();
}
