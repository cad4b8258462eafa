use mfbsde::certificate::{
    certify, choose_delta_epsilon, ln_c_delta, mu_consts, solve_a, CertificateInputs, OdeBound,
};
use proptest::prelude::*;

fn inputs() -> impl Strategy<Value = CertificateInputs> {
    (0.0f64..2.0, 0.5f64..4.0, 0.0f64..0.9, 0.0f64..1.0, 0.25f64..2.0).prop_map(
        |(c, gamma, alpha, xi_bound, horizon)| CertificateInputs {
            c,
            gamma,
            alpha,
            xi_bound,
            horizon,
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn constant_chain_identities(i in inputs()) {
        let cert = certify(i).unwrap();
        prop_assert!(cert.discriminant >= 0.0);
        let alt = (1.0 + 2.0 * cert.discriminant.sqrt()) / 4.0;
        prop_assert!((cert.one_minus_delta_a - alt).abs() <= 1e-12);
        prop_assert!((cert.one_minus_delta_a - cert.one_minus_delta_a_alt).abs() <= 1e-12);
        prop_assert!(cert.root_residual.abs() <= 1e-10 * cert.a);
        prop_assert!(cert.a <= 6.0 * cert.k * (1.0 + 1e-12));
    }

    #[test]
    fn smaller_epsilon_keeps_identities(i in inputs(), shrink in 0.0f64..1.0) {
        let cert = certify(i).unwrap();
        let root = solve_a(cert.delta, cert.k, cert.m_epsilon * shrink).unwrap();
        prop_assert!(root.root_residual.abs() <= 1e-10 * root.a);
        prop_assert!(root.a <= cert.a * (1.0 + 1e-12));
    }

    #[test]
    fn epsilon_nonincreasing_in_xi(c in 0.01f64..2.0, gamma in 0.5f64..4.0, alpha in 0.0f64..0.9,
                                   horizon in 0.25f64..2.0, x0 in 0.0f64..1.0, dx in 0.0f64..1.0) {
        let a = choose_delta_epsilon(c, gamma, alpha, x0, horizon).unwrap();
        let b = choose_delta_epsilon(c, gamma, alpha, x0 + dx, horizon).unwrap();
        prop_assert!(b.ln_epsilon <= a.ln_epsilon + 1e-12 * a.ln_epsilon.abs());
    }
}

#[test]
fn mu1_decreases_to_zero_as_alpha_grows() {
    for gamma in [0.5, 1.0, 3.0] {
        let mut prev = f64::INFINITY;
        for k in 0..1000 {
            let alpha = k as f64 / 1000.0;
            let (mu1, _) = mu_consts(gamma, alpha).unwrap();
            assert!(mu1 < prev);
            prev = mu1;
        }
        assert!(mu_consts(gamma, 0.999999).unwrap().0 < 1e-5);
    }
}

#[test]
fn c_delta_large_delta_limit() {
    let (c, gamma, alpha, t): (f64, f64, f64, f64) = (0.7, 1.3, 0.4, 1.5);
    let limit = 6.0 / (1.0 - alpha) * gamma * c * t * (c * t).exp();
    let mut prev = f64::INFINITY;
    for p in 0..12 {
        let gap = ln_c_delta(c, gamma, alpha, t, 10f64.powi(p)).unwrap() - limit;
        assert!(gap >= 0.0 && gap <= prev);
        prev = gap;
    }
    assert!(prev <= 1e-9 * limit);
}

#[test]
fn ode_bound_shape() {
    let o = OdeBound::new(1.0, 1.0).unwrap();
    let mut prev = f64::INFINITY;
    for k in 0..=100 {
        let a = o.alpha(k as f64 / 100.0);
        assert!(a < prev);
        prev = a;
    }
    for c in [1e-3, 1e-6, 1e-9] {
        let o = OdeBound::new(c, 1.0).unwrap();
        let sup = (0..=100).map(|k| o.alpha(k as f64 / 100.0)).fold(0.0, f64::max);
        assert!(sup < 10.0 * c);
    }
}

#[test]
fn desk_scenarios() {
    for (c, gamma, alpha, xi, t) in [(0.2, 0.4, 0.0, 1.0, 1.0), (0.25, 0.5, 0.5, 1.0, 0.5)] {
        let cert = certify(CertificateInputs {
            c,
            gamma,
            alpha,
            xi_bound: xi,
            horizon: t,
        })
        .unwrap();
        println!("{cert}");
    }
}
