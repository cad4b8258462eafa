//! Scenarios used by the acceptance suite, the fixtures and the examples.

use crate::certificate::{c_tilde, OdeBound};
use crate::oracle::{LinearComponent, LinearMeanFieldSpec};
use crate::scenario::{Constants, Flags, ScenarioSpec};

fn flags(names: &[&str]) -> Flags {
    Flags::from_names(names.iter().copied()).expect("known flag names")
}

/// `f = E[z]`, `xi = W_T` on `[0, 1]`: `Y_t = W_t + (1 - t)`, `Z = 1`.
pub fn linear_mean_z() -> ScenarioSpec {
    ScenarioSpec::single(
        "linear-mean-z",
        1,
        1,
        1.0,
        "w",
        "zbar",
        Constants {
            c: 1.0,
            gamma: 1.0,
            alpha: 0.0,
            xi_bound: 1.0,
        },
    )
    .expect("valid scenario")
    .with_flags(flags(&["local", "global"]))
}

/// Closed-form counterpart of [`linear_mean_z`].
pub fn linear_mean_z_oracle() -> LinearMeanFieldSpec {
    LinearMeanFieldSpec {
        horizon: 1.0,
        d: 1,
        components: vec![LinearComponent::constant(0.0, 0.0, &[0.0], &[1.0], 0.0, 0.0, &[1.0])],
    }
}

/// `f1 = 0`, `f2 = |z|^2`, `xi = W_T`: `Y_t = W_t + (1 - t)`.
pub fn shift_square() -> ScenarioSpec {
    ScenarioSpec::additive(
        "shift-square",
        1,
        1,
        1.0,
        "w",
        "0",
        "norm2(z)^2",
        Constants {
            c: 1.0,
            gamma: 1.0,
            alpha: 0.0,
            xi_bound: 1.0,
        },
    )
    .expect("valid scenario")
    .with_flags(flags(&["shift"]))
}

/// The global-form example with desk constants `C = 0.2`, `gamma = 0.4`,
/// `T = 1`, `xi = sin(W_T)`. The growth envelope bounds `|E[Y]|` by
/// `sqrt(lambda)` from the ODE bound and `|sin|` by one.
pub fn ex22_desk() -> ScenarioSpec {
    let lambda = OdeBound::new(c_tilde(0.2, 1.0), 1.0).expect("valid bound").lambda();
    ScenarioSpec::single(
        "ex2.2-desk",
        1,
        1,
        1.0,
        "sin(w)",
        "0.2*(1 + s + abs(y) + abs(ybar) + abs(sin(norm2(zbar)))) + 0.2*norm2(z)^2",
        Constants {
            c: 0.2,
            gamma: 0.4,
            alpha: 0.0,
            xi_bound: 1.0,
        },
    )
    .expect("valid scenario")
    .with_flags(flags(&["local", "global"]))
    .with_envelope(&format!("0.2*(2 + s + {})", lambda.sqrt()), 0.2, 0.4)
    .expect("valid envelope")
}

/// The local-form example with `alpha = 0.5`, scaled to `C = 0.25`,
/// `gamma = 0.5`, on `[0, 0.5]` with `xi = sin(W_T)`.
pub fn ex21_small() -> ScenarioSpec {
    ScenarioSpec::single(
        "ex2.1-small",
        1,
        1,
        0.5,
        "sin(w)",
        "0.25*(1 + abs(y) + abs(ybar) + norm2(zbar)^1.5) + 0.25*norm2(z)^2",
        Constants {
            c: 0.25,
            gamma: 0.5,
            alpha: 0.5,
            xi_bound: 1.0,
        },
    )
    .expect("valid scenario")
    .with_flags(flags(&["local"]))
}

/// The multi-dimensional example with `n = d = 2` and
/// `xi = (sin W^1_T, cos W^2_T)`.
pub fn ex41_vector() -> ScenarioSpec {
    let f1 = "1 + abs(sin(y[0])) + abs(sin(ybar[0])) + norm2(z) + norm2(zbar); \
              1 + abs(sin(y[1])) + abs(sin(ybar[1])) + norm2(z) + norm2(zbar)";
    let f2 = "1 + abs(y[0]) + abs(ybar[0]) + 0.5*(norm2(z) + norm2(zbar))^2; \
              1 + abs(y[1]) + abs(ybar[1]) + 0.5*(norm2(z) + norm2(zbar))^2";
    ScenarioSpec::additive(
        "ex4.1-vector",
        2,
        2,
        1.0,
        "sin(w[0]); cos(w[1])",
        f1,
        f2,
        Constants {
            c: 1.0,
            gamma: 1.0,
            alpha: 0.0,
            xi_bound: 2f64.sqrt(),
        },
    )
    .expect("valid scenario")
    .with_flags(flags(&["multidim"]))
}
