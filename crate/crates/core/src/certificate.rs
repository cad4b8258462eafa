//! Explicit solvability constants for the local and global existence results.
//!
//! `C_delta` is doubly exponential in the inputs, so the chain is carried in
//! log space: the product `m * epsilon` that enters the quadratic for `A` is
//! formed from logarithms and stays representable even when `epsilon` itself
//! underflows.

use std::fmt;

use serde::Serialize;

use crate::error::{CertificateError, InvalidArgument};

fn check_alpha(alpha: f64) -> Result<(), CertificateError> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(InvalidArgument::new(format!("alpha must lie in [0, 1), got {alpha}")).into());
    }
    Ok(())
}

fn check_gamma(gamma: f64) -> Result<(), CertificateError> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(InvalidArgument::new(format!("gamma must be > 0, got {gamma}")).into());
    }
    Ok(())
}

fn check_nonneg(name: &str, v: f64) -> Result<(), CertificateError> {
    if !(v >= 0.0 && v.is_finite()) {
        return Err(InvalidArgument::new(format!("{name} must be finite and >= 0, got {v}")).into());
    }
    Ok(())
}

/// `1/2 (1-alpha) C^(2/(1-alpha)) (2(1+alpha))^((1+alpha)/(1-alpha))`.
pub fn beta_const(c: f64, alpha: f64) -> Result<f64, CertificateError> {
    check_nonneg("C", c)?;
    check_alpha(alpha)?;
    if c == 0.0 {
        return Ok(0.0);
    }
    let ln = (0.5 * (1.0 - alpha)).ln()
        + 2.0 / (1.0 - alpha) * c.ln()
        + (1.0 + alpha) / (1.0 - alpha) * (2.0 * (1.0 + alpha)).ln();
    exp_checked("beta", ln)
}

/// `(mu1, mu2)` with `mu1 = (1-alpha)(1 + (1-alpha)/((1+alpha) gamma))` and
/// `mu2 = (1+alpha)/2 + (1-alpha)/(2 gamma)`.
pub fn mu_consts(gamma: f64, alpha: f64) -> Result<(f64, f64), CertificateError> {
    check_gamma(gamma)?;
    check_alpha(alpha)?;
    let mu1 = (1.0 - alpha) * (1.0 + (1.0 - alpha) / ((1.0 + alpha) * gamma));
    let mu2 = 0.5 * (1.0 + alpha) + (1.0 - alpha) / (2.0 * gamma);
    Ok((mu1, mu2))
}

/// `(beta + C mu1) gamma^(2/(alpha-1)) + 2 C mu2`.
pub fn mu_const(c: f64, gamma: f64, alpha: f64, beta: f64, mu1: f64, mu2: f64) -> Result<f64, CertificateError> {
    check_nonneg("C", c)?;
    check_gamma(gamma)?;
    check_alpha(alpha)?;
    Ok((beta + c * mu1) * gamma.powf(2.0 / (alpha - 1.0)) + 2.0 * c * mu2)
}

/// Natural log of `C_delta`.
pub fn ln_c_delta(c: f64, gamma: f64, alpha: f64, horizon: f64, delta: f64) -> Result<f64, CertificateError> {
    check_nonneg("C", c)?;
    check_gamma(gamma)?;
    check_alpha(alpha)?;
    check_nonneg("T", horizon)?;
    if !(delta > 0.0) {
        return Err(InvalidArgument::new(format!("delta must be > 0, got {delta}")).into());
    }
    if c == 0.0 || horizon == 0.0 {
        return Ok(0.0);
    }
    let ect = (c * horizon).exp();
    let first = 6.0 / (1.0 - alpha) * gamma * c * horizon * ect;
    let ln_second = (0.5 * (1.0 - alpha)).ln()
        + 2.0 / (1.0 - alpha) * (3.0 / (1.0 - alpha) * gamma * c * ect).ln()
        + (1.0 + alpha) / (1.0 - alpha) * ((1.0 + alpha) / (2.0 * delta)).ln()
        + horizon.ln();
    let total = first + ln_second.exp();
    if !total.is_finite() {
        return Err(CertificateError::Overflow {
            name: "C_delta",
            log_value: f64::INFINITY,
        });
    }
    Ok(total)
}

/// `C_delta` itself; overflow is an error rather than `inf`.
pub fn c_delta(c: f64, gamma: f64, alpha: f64, horizon: f64, delta: f64) -> Result<f64, CertificateError> {
    exp_checked("C_delta", ln_c_delta(c, gamma, alpha, horizon, delta)?)
}

fn exp_checked(name: &'static str, ln: f64) -> Result<f64, CertificateError> {
    if ln > f64::MAX.ln() {
        Err(CertificateError::Overflow { name, log_value: ln })
    } else {
        Ok(ln.exp())
    }
}

/// Which term of the minimum defining `epsilon` is active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EpsilonBinding {
    /// `e^{-CT} / (3C)`.
    Lipschitz,
    /// `gamma^-2 e^{gamma |xi|} / (8 m)`.
    Quadratic,
    /// The horizon `T` itself.
    Horizon,
}

/// `delta`, `epsilon` and the intermediate quantities of their derivation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeltaEpsilon {
    pub delta: f64,
    /// `gamma^-2 e^{gamma |xi|}`.
    pub k: f64,
    pub mu: f64,
    pub ln_c_delta: f64,
    /// `ln m` with `m = mu C_delta e^{3 e^{CT} gamma |xi| / (1-alpha)}`.
    pub ln_m: f64,
    pub ln_epsilon: f64,
    /// `epsilon` as an f64; zero when it underflows.
    pub epsilon: f64,
    pub binding: EpsilonBinding,
    /// `m epsilon / (k / 8)`, in `[0, 1]`.
    pub rho: f64,
}

impl DeltaEpsilon {
    /// `m * epsilon`.
    pub fn m_epsilon(&self) -> f64 {
        self.k / 8.0 * self.rho
    }
}

/// `delta = gamma^2 e^{-gamma |xi|} / 8` and the largest admissible `epsilon`,
/// capped at the horizon (the Lipschitz term is `+inf` when `C = 0`).
pub fn choose_delta_epsilon(
    c: f64,
    gamma: f64,
    alpha: f64,
    xi_bound: f64,
    horizon: f64,
) -> Result<DeltaEpsilon, CertificateError> {
    check_nonneg("C", c)?;
    check_gamma(gamma)?;
    check_alpha(alpha)?;
    check_nonneg("|xi|", xi_bound)?;
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(InvalidArgument::new(format!("T must be > 0, got {horizon}")).into());
    }
    let gx = gamma * xi_bound;
    let delta = gamma * gamma * (-gx).exp() / 8.0;
    if !(delta > 0.0) {
        return Err(CertificateError::Infeasible(format!(
            "delta underflows (gamma |xi| = {gx})"
        )));
    }
    let ln_k = gx - 2.0 * gamma.ln();
    let k = ln_k.exp();
    let beta = beta_const(c, alpha)?;
    let (mu1, mu2) = mu_consts(gamma, alpha)?;
    let mu = mu_const(c, gamma, alpha, beta, mu1, mu2)?;
    let ln_cd = ln_c_delta(c, gamma, alpha, horizon, delta)?;
    let ect = (c * horizon).exp();
    let ln_m = mu.ln() + ln_cd + 3.0 * ect * gx / (1.0 - alpha);

    let ln_quadratic = ln_k - 8f64.ln() - ln_m;
    let ln_lipschitz = if c > 0.0 {
        -c * horizon - (3.0 * c).ln()
    } else {
        f64::INFINITY
    };
    let ln_horizon = horizon.ln();
    let (mut ln_eps, mut binding) = (ln_quadratic, EpsilonBinding::Quadratic);
    if ln_lipschitz < ln_eps {
        ln_eps = ln_lipschitz;
        binding = EpsilonBinding::Lipschitz;
    }
    if ln_horizon < ln_eps {
        ln_eps = ln_horizon;
        binding = EpsilonBinding::Horizon;
    }
    // m = 0 only when C = 0 and mu = 0, which needs no quadratic constraint.
    let rho = match binding {
        EpsilonBinding::Quadratic => 1.0,
        _ if ln_m == f64::NEG_INFINITY => 0.0,
        _ => (ln_eps - ln_quadratic).exp().min(1.0),
    };
    Ok(DeltaEpsilon {
        delta,
        k,
        mu,
        ln_c_delta: ln_cd,
        ln_m,
        ln_epsilon: ln_eps,
        epsilon: ln_eps.exp(),
        binding,
        rho,
    })
}

/// Smaller root of `delta A^2 - (1 + 4 k delta) A + 4 k + 4 m eps = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadraticRoot {
    pub discriminant: f64,
    pub a: f64,
    /// `1 - delta A` computed from `A`.
    pub one_minus_delta_a: f64,
    /// `(1 - 4 k delta + sqrt(Delta)) / 2`, equal to the above.
    pub one_minus_delta_a_alt: f64,
    /// `k + m eps / (1 - delta A) - A / 4`.
    pub root_residual: f64,
}

/// Solves the quadratic for `A` given `delta`, `k` and the product `m eps`.
///
/// A discriminant within rounding of zero (relative `1e-14`) is set to zero.
pub fn solve_a(delta: f64, k: f64, m_epsilon: f64) -> Result<QuadraticRoot, CertificateError> {
    if !(delta > 0.0 && k > 0.0 && m_epsilon >= 0.0) {
        return Err(InvalidArgument::new("solve_a needs delta > 0, k > 0, m eps >= 0").into());
    }
    let b = 1.0 + 4.0 * k * delta;
    let c = 4.0 * k + 4.0 * m_epsilon;
    let mut disc = (1.0 - 4.0 * k * delta).powi(2) - 16.0 * delta * m_epsilon;
    if disc < 0.0 && disc > -1e-14 * b * b {
        disc = 0.0;
    }
    if disc < 0.0 {
        return Err(CertificateError::Infeasible(format!(
            "discriminant {disc:e} < 0: epsilon too large for the quadratic to have a real root"
        )));
    }
    let sq = disc.sqrt();
    // 2c / (b + sqrt) is the smaller root without cancellation.
    let a = 2.0 * c / (b + sq);
    let one_minus = 1.0 - delta * a;
    let alt = 0.5 * (1.0 - 4.0 * k * delta + sq);
    let root_residual = k + m_epsilon / one_minus - a / 4.0;
    Ok(QuadraticRoot {
        discriminant: disc,
        a,
        one_minus_delta_a: one_minus,
        one_minus_delta_a_alt: alt,
        root_residual,
    })
}

/// `alpha(t) = -1/3 + (C~ + 1/3) e^{3 C~ (T - t)}`, the closed form of the
/// linear bound ODE with `alpha(T) = C~`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OdeBound {
    pub c_tilde: f64,
    pub horizon: f64,
}

impl OdeBound {
    pub fn new(c_tilde: f64, horizon: f64) -> Result<Self, InvalidArgument> {
        if !(c_tilde > 0.0 && c_tilde.is_finite()) {
            return Err(InvalidArgument::new(format!("C~ must be > 0, got {c_tilde}")));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(InvalidArgument::new(format!("T must be > 0, got {horizon}")));
        }
        Ok(Self { c_tilde, horizon })
    }

    pub fn alpha(&self, t: f64) -> f64 {
        let c = self.c_tilde;
        -1.0 / 3.0 + (c + 1.0 / 3.0) * (3.0 * c * (self.horizon - t)).exp()
    }

    /// Right-hand side of `alpha' = -C~ - 3 C~ alpha`.
    pub fn slope(&self, alpha: f64) -> f64 {
        -self.c_tilde - 3.0 * self.c_tilde * alpha
    }

    /// `lambda = sup alpha = alpha(0)`.
    pub fn lambda(&self) -> f64 {
        self.alpha(0.0)
    }
}

/// Convention for the global constant: `C~ = max(|xi|^2, 3C)`, from
/// `2|x| C (1 + |y| + |ybar|) <= C (1 + 3x^2 + y^2 + ybar^2)`.
pub fn c_tilde(c: f64, xi_bound: f64) -> f64 {
    (xi_bound * xi_bound).max(3.0 * c)
}

/// Inputs of a certificate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CertificateInputs {
    pub c: f64,
    pub gamma: f64,
    pub alpha: f64,
    pub xi_bound: f64,
    pub horizon: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Checks {
    pub discriminant_nonnegative: bool,
    pub one_minus_delta_a_positive: bool,
    pub root_identity: bool,
    pub epsilon_positive: bool,
    pub a_within_bound: bool,
}

impl Checks {
    pub fn all(&self) -> bool {
        self.discriminant_nonnegative
            && self.one_minus_delta_a_positive
            && self.root_identity
            && self.epsilon_positive
            && self.a_within_bound
    }
}

/// Global-solution part of a certificate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GlobalBound {
    pub c_tilde: f64,
    pub lambda: f64,
    /// Local window width at terminal bound `sqrt(lambda)`.
    pub eta_lambda: f64,
    pub ln_eta_lambda: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificate {
    pub inputs: CertificateInputs,
    pub beta: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub mu: f64,
    pub delta: f64,
    pub k: f64,
    pub ln_c_delta: f64,
    /// `None` when `C_delta` exceeds the f64 range.
    pub c_delta: Option<f64>,
    pub ln_m: f64,
    pub epsilon: f64,
    pub ln_epsilon: f64,
    pub epsilon_binding: EpsilonBinding,
    pub m_epsilon: f64,
    pub discriminant: f64,
    pub a: f64,
    pub a_bound: f64,
    pub one_minus_delta_a: f64,
    pub one_minus_delta_a_alt: f64,
    pub root_residual: f64,
    /// Sup bound on `|U|` implied by the exponential constraint of the ball.
    pub u_bound: f64,
    /// Chosen radius `min(sqrt(A), u_bound)`.
    pub r_epsilon: f64,
    pub global: Option<GlobalBound>,
    pub checks: Checks,
    pub feasible: bool,
    pub notes: Vec<String>,
}

/// Evaluates the full constant chain.
pub fn certify(inputs: CertificateInputs) -> Result<Certificate, CertificateError> {
    let CertificateInputs {
        c,
        gamma,
        alpha,
        xi_bound,
        horizon,
    } = inputs;
    let de = choose_delta_epsilon(c, gamma, alpha, xi_bound, horizon)?;
    let beta = beta_const(c, alpha)?;
    let (mu1, mu2) = mu_consts(gamma, alpha)?;
    let root = solve_a(de.delta, de.k, de.m_epsilon())?;
    let a_bound = 6.0 * de.k;
    let ect = (c * horizon).exp();
    let u_bound = (1.0 - alpha) / (2.0 * gamma)
        * (de.ln_c_delta + 3.0 * gamma * ect * xi_bound / (1.0 - alpha) - root.one_minus_delta_a.ln());
    let r_epsilon = root.a.sqrt().min(u_bound);

    let mut notes = vec![
        "r_epsilon = min(sqrt(A), U bound) is a chosen radius".to_string(),
        "eta_lambda = epsilon evaluated at |xi| = sqrt(lambda)".to_string(),
        "C~ = max(|xi|^2, 3C)".to_string(),
    ];
    if c == 0.0 {
        notes.push("C = 0: the Lipschitz term of epsilon is +inf; epsilon is capped at T".into());
    }
    let c_delta = (de.ln_c_delta <= f64::MAX.ln()).then(|| de.ln_c_delta.exp());
    if c_delta.is_none() {
        notes.push(format!("C_delta overflows f64 (ln C_delta = {:e})", de.ln_c_delta));
    }
    if de.epsilon == 0.0 {
        notes.push(format!("epsilon underflows f64 (ln epsilon = {:e})", de.ln_epsilon));
    }

    let ct = c_tilde(c, xi_bound);
    let global = if ct > 0.0 {
        let ode = OdeBound::new(ct, horizon).map_err(CertificateError::from)?;
        let lambda = ode.lambda();
        match choose_delta_epsilon(c, gamma, alpha, lambda.sqrt(), horizon) {
            Ok(eta) => Some(GlobalBound {
                c_tilde: ct,
                lambda,
                eta_lambda: eta.epsilon,
                ln_eta_lambda: eta.ln_epsilon,
            }),
            Err(e) => {
                notes.push(format!("eta_lambda unavailable: {e}"));
                None
            }
        }
    } else {
        notes.push("C~ = 0: the global bound is trivial".into());
        None
    };

    let checks = Checks {
        discriminant_nonnegative: root.discriminant >= 0.0,
        one_minus_delta_a_positive: root.one_minus_delta_a > 0.0,
        root_identity: root.root_residual.abs() <= 1e-10 * root.a,
        epsilon_positive: de.epsilon > 0.0,
        a_within_bound: root.a <= a_bound * (1.0 + 1e-12),
    };
    Ok(Certificate {
        inputs,
        beta,
        mu1,
        mu2,
        mu: de.mu,
        delta: de.delta,
        k: de.k,
        ln_c_delta: de.ln_c_delta,
        c_delta,
        ln_m: de.ln_m,
        epsilon: de.epsilon,
        ln_epsilon: de.ln_epsilon,
        epsilon_binding: de.binding,
        m_epsilon: de.m_epsilon(),
        discriminant: root.discriminant,
        a: root.a,
        a_bound,
        one_minus_delta_a: root.one_minus_delta_a,
        one_minus_delta_a_alt: root.one_minus_delta_a_alt,
        root_residual: root.root_residual,
        u_bound,
        r_epsilon,
        global,
        feasible: checks.all(),
        checks,
        notes,
    })
}

impl Certificate {
    /// Re-evaluates the quadratic for a caller-chosen `epsilon`.
    pub fn root_for_epsilon(&self, epsilon: f64) -> Result<QuadraticRoot, CertificateError> {
        if !(epsilon >= 0.0) {
            return Err(InvalidArgument::new("epsilon must be >= 0").into());
        }
        let m_eps = if epsilon == 0.0 {
            0.0
        } else {
            (self.ln_m + epsilon.ln()).exp()
        };
        solve_a(self.delta, self.k, m_eps)
    }
}

impl fmt::Display for Certificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let i = &self.inputs;
        let mut rows: Vec<(String, String)> = vec![
            ("C".into(), format!("{}", i.c)),
            ("gamma".into(), format!("{}", i.gamma)),
            ("alpha".into(), format!("{}", i.alpha)),
            ("|xi|_inf".into(), format!("{}", i.xi_bound)),
            ("T".into(), format!("{}", i.horizon)),
            ("beta".into(), format!("{:.6e}", self.beta)),
            ("mu1".into(), format!("{:.6e}", self.mu1)),
            ("mu2".into(), format!("{:.6e}", self.mu2)),
            ("mu".into(), format!("{:.6e}", self.mu)),
            ("delta".into(), format!("{:.6e}", self.delta)),
            ("ln C_delta".into(), format!("{:.6e}", self.ln_c_delta)),
            (
                "C_delta".into(),
                self.c_delta.map_or("overflow".to_string(), |v| format!("{v:.6e}")),
            ),
            ("epsilon".into(), format!("{:.6e}", self.epsilon)),
            ("ln epsilon".into(), format!("{:.6e}", self.ln_epsilon)),
            ("epsilon binding".into(), format!("{:?}", self.epsilon_binding).to_lowercase()),
            ("Delta".into(), format!("{:.6e}", self.discriminant)),
            ("A".into(), format!("{:.6e}", self.a)),
            ("A bound".into(), format!("{:.6e}", self.a_bound)),
            ("1 - delta A".into(), format!("{:.6e}", self.one_minus_delta_a)),
            ("root residual".into(), format!("{:.3e}", self.root_residual)),
            ("r_epsilon".into(), format!("{:.6e}", self.r_epsilon)),
        ];
        if let Some(g) = &self.global {
            rows.push(("C~".into(), format!("{}", g.c_tilde)));
            rows.push(("lambda".into(), format!("{:.6e}", g.lambda)));
            rows.push(("eta_lambda".into(), format!("{:.6e}", g.eta_lambda)));
        }
        let c = &self.checks;
        for (name, ok) in [
            ("Delta >= 0", c.discriminant_nonnegative),
            ("1 - delta A > 0", c.one_minus_delta_a_positive),
            ("root identity", c.root_identity),
            ("epsilon > 0", c.epsilon_positive),
            ("A <= 6 k", c.a_within_bound),
        ] {
            rows.push((name.into(), if ok { "ok" } else { "FAILED" }.into()));
        }
        rows.push(("feasible".into(), self.feasible.to_string()));
        let width = rows.iter().map(|r| r.0.len()).max().unwrap_or(0);
        for (k, v) in rows {
            writeln!(f, "{k:<width$}  {v}")?;
        }
        for n in &self.notes {
            writeln!(f, "note: {n}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    #[test]
    fn beta_values() {
        assert!(close(beta_const(1.0, 0.0).unwrap(), 1.0, 1e-15));
        assert!(close(beta_const(1.0, 0.5).unwrap(), 6.75, 1e-14));
        assert_eq!(beta_const(0.0, 0.3).unwrap(), 0.0);
        assert!(beta_const(1.0, 1.0).is_err());
    }

    #[test]
    fn mu_values() {
        let (a, b) = mu_consts(1.0, 0.0).unwrap();
        assert!(close(a, 2.0, 1e-15) && close(b, 1.0, 1e-15));
        let (a, b) = mu_consts(2.0, 0.0).unwrap();
        assert!(close(a, 1.5, 1e-15) && close(b, 0.75, 1e-15));
        assert!(close(mu_const(1.0, 1.0, 0.0, 1.0, 2.0, 1.0).unwrap(), 5.0, 1e-15));
        assert!(close(mu_const(1.0, 2.0, 0.0, 1.0, 1.5, 0.75).unwrap(), 2.125, 1e-15));
        assert_eq!(mu_const(0.0, 2.0, 0.4, 0.0, 1.5, 0.75).unwrap(), 0.0);
        assert!(mu_consts(0.0, 0.0).is_err());
    }

    #[test]
    fn c_delta_values() {
        assert_eq!(c_delta(0.0, 1.0, 0.5, 1.0, 0.1).unwrap(), 1.0);
        let e = std::f64::consts::E;
        let want = 6.0 * e + 4.5 * e * e;
        assert!(close(ln_c_delta(1.0, 1.0, 0.0, 1.0, 0.5).unwrap(), want, 1e-14));
        assert!(matches!(
            c_delta(2.0, 4.0, 0.9, 2.0, 1e-3),
            Err(CertificateError::Overflow { .. })
        ));
    }

    #[test]
    fn delta_values() {
        assert!(close(choose_delta_epsilon(1.0, 2.0, 0.0, 0.0, 1.0).unwrap().delta, 0.5, 1e-15));
        let de = choose_delta_epsilon(1.0, 1.0, 0.0, 8f64.ln(), 1.0).unwrap();
        assert!(close(de.delta, 1.0 / 64.0, 1e-15));
        let de = choose_delta_epsilon(0.0, 1.0, 0.0, 0.5, 0.7).unwrap();
        assert_eq!(de.binding, EpsilonBinding::Horizon);
        assert!(close(de.epsilon, 0.7, 1e-15));
    }

    #[test]
    fn quadratic_at_zero_epsilon() {
        let r = solve_a(0.5, 0.25, 0.0).unwrap();
        assert_eq!(r.discriminant, 0.25);
        assert_eq!(r.a, 1.0);
        assert!(r.a <= 1.5);
        assert_eq!(r.root_residual, 0.0);
        assert!(solve_a(0.5, 0.25, 1.0).is_err());
    }

    #[test]
    fn ode_values() {
        let o = OdeBound::new(1.0, 1.0).unwrap();
        assert!(close(o.alpha(1.0), 1.0, 1e-15));
        let want = -1.0 / 3.0 + 4.0 / 3.0 * 3f64.exp();
        assert!(close(o.lambda(), want, 1e-14));
        assert!((o.lambda() - 26.447).abs() < 1e-3);
    }

    #[test]
    fn certificate_for_zero_c() {
        let cert = certify(CertificateInputs {
            c: 0.0,
            gamma: 1.0,
            alpha: 0.2,
            xi_bound: 0.5,
            horizon: 2.0,
        })
        .unwrap();
        assert_eq!(cert.epsilon, 2.0);
        assert!(cert.feasible);
    }
}
