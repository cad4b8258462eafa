//! Empirical norms of sampled solutions and checks of the a-priori bounds.

use serde::{Deserialize, Serialize};

use crate::bsde::BackwardSolver;
use crate::certificate::{Certificate, OdeBound};
use crate::error::{InvalidArgument, SolveError};
use crate::grid::Window;
use crate::process::ProcessGrid;
use crate::scenario::ScenarioSpec;

fn row_norm_sq(row: &[f64]) -> f64 {
    row.iter().map(|v| v * v).sum()
}

/// `max |Y|` over paths and nodes.
pub fn sup_norm(y: &ProcessGrid) -> Result<f64, InvalidArgument> {
    sup_norm_on(y, y.grid().full_window())
}

pub fn sup_norm_on(y: &ProcessGrid, window: Window) -> Result<f64, InvalidArgument> {
    if y.n_paths() == 0 {
        return Err(InvalidArgument::new("sup norm of an empty ensemble"));
    }
    let dims = y.dims();
    Ok((window.start..=window.end)
        .flat_map(|i| y.node(i).chunks(dims).map(|r| row_norm_sq(r).sqrt()))
        .fold(0.0, f64::max))
}

/// Per-path trapezoidal `int_{t_i}^{t_end} q_s ds` for every node of the
/// window, node-major, where `sq(i)` gives the per-path integrand at node `i`.
fn tail_integrals_by(
    grid: &crate::grid::TimeGrid,
    paths: usize,
    window: Window,
    sq: impl Fn(usize) -> Vec<f64>,
) -> Vec<Vec<f64>> {
    let mut out = vec![vec![0.0; paths]; window.steps() + 1];
    let mut right = sq(window.end);
    for i in (window.start..window.end).rev() {
        let left = sq(i);
        let h = grid.step(i);
        let k = i - window.start;
        for p in 0..paths {
            out[k][p] = out[k + 1][p] + 0.5 * h * (left[p] + right[p]);
        }
        right = left;
    }
    out
}

fn tail_integrals(z: &ProcessGrid, window: Window) -> Vec<Vec<f64>> {
    let dims = z.dims();
    tail_integrals_by(z.grid(), z.n_paths(), window, |i| {
        z.node(i).chunks(dims).map(row_norm_sq).collect()
    })
}

fn difference_tails(a: &ProcessGrid, b: &ProcessGrid, window: Window) -> Vec<Vec<f64>> {
    let dims = a.dims();
    tail_integrals_by(a.grid(), a.n_paths(), window, |i| {
        a.node(i)
            .chunks(dims)
            .zip(b.node(i).chunks(dims))
            .map(|(x, y)| x.iter().zip(y).map(|(u, v)| (u - v) * (u - v)).sum())
            .collect()
    })
}

fn sup_of_conditional_tails(
    tails: &[Vec<f64>],
    solver: &BackwardSolver<'_>,
    window: Window,
) -> Result<f64, SolveError> {
    let mut sup = 0.0f64;
    for i in window.start..window.end {
        let tail = &tails[i - window.start];
        if tail.iter().all(|v| *v == 0.0) {
            continue;
        }
        let fitted = solver.conditional_expectation(i, &[tail])?;
        sup = fitted[0].iter().fold(sup, |a, &b| a.max(b));
    }
    Ok(sup)
}

/// Grid estimate of `||Z.W||^2_BMO2 = sup_t E_t[int_t^T |Z|^2 ds]` on the
/// window. Stopping times are restricted to grid nodes and `E_t` is the
/// regression estimate, so this is an under-approximation.
pub fn bmo2_estimate(
    z: &ProcessGrid,
    solver: &BackwardSolver<'_>,
    window: Window,
) -> Result<f64, SolveError> {
    if z.n_paths() == 0 {
        return Err(InvalidArgument::new("BMO estimate of an empty ensemble").into());
    }
    sup_of_conditional_tails(&tail_integrals(z, window), solver, window)
}

/// BMO2 estimate of the difference of two `Z` grids, without forming it.
pub fn bmo2_distance(
    a: &ProcessGrid,
    b: &ProcessGrid,
    solver: &BackwardSolver<'_>,
    window: Window,
) -> Result<f64, SolveError> {
    a.check_same_shape(b)?;
    sup_of_conditional_tails(&difference_tails(a, b, window), solver, window)
}

/// `max |a - b|` over paths and the window's nodes.
pub fn sup_distance_on(a: &ProcessGrid, b: &ProcessGrid, window: Window) -> f64 {
    let dims = a.dims();
    (window.start..=window.end)
        .flat_map(|i| {
            a.node(i)
                .chunks(dims)
                .zip(b.node(i).chunks(dims))
                .map(|(x, y)| x.iter().zip(y).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt())
        })
        .fold(0.0, f64::max)
}

/// `S^p` norm of `a - b` on the window.
pub fn sp_distance_on(a: &ProcessGrid, b: &ProcessGrid, p: f64, window: Window) -> Result<f64, InvalidArgument> {
    a.check_same_shape(b)?;
    if !(p >= 1.0) {
        return Err(InvalidArgument::new(format!("p must be >= 1, got {p}")));
    }
    let (paths, dims) = (a.n_paths(), a.dims());
    let mut sup = vec![0.0f64; paths];
    for i in window.start..=window.end {
        for (q, (x, y)) in a.node(i).chunks(dims).zip(b.node(i).chunks(dims)).enumerate() {
            let d: f64 = x.iter().zip(y).map(|(u, v)| (u - v) * (u - v)).sum();
            sup[q] = sup[q].max(d.sqrt());
        }
    }
    Ok((sup.iter().map(|s| s.powf(p)).sum::<f64>() / paths.max(1) as f64).powf(1.0 / p))
}

/// `M^p` norm of `a - b` on the window.
pub fn mp_distance_on(a: &ProcessGrid, b: &ProcessGrid, p: f64, window: Window) -> Result<f64, InvalidArgument> {
    a.check_same_shape(b)?;
    if !(p >= 1.0) {
        return Err(InvalidArgument::new(format!("p must be >= 1, got {p}")));
    }
    let total = &difference_tails(a, b, window)[0];
    Ok((total.iter().map(|v| v.powf(p / 2.0)).sum::<f64>() / total.len().max(1) as f64).powf(1.0 / p))
}

/// `(E[sup_t |Y_t|^p])^{1/p}`.
pub fn sp_norm(y: &ProcessGrid, p: f64) -> Result<f64, InvalidArgument> {
    sp_norm_on(y, p, y.grid().full_window())
}

pub fn sp_norm_on(y: &ProcessGrid, p: f64, window: Window) -> Result<f64, InvalidArgument> {
    if !(p >= 1.0) {
        return Err(InvalidArgument::new(format!("p must be >= 1, got {p}")));
    }
    let (paths, dims) = (y.n_paths(), y.dims());
    if paths == 0 {
        return Err(InvalidArgument::new("norm of an empty ensemble"));
    }
    let mut sup = vec![0.0f64; paths];
    for i in window.start..=window.end {
        for (s, row) in sup.iter_mut().zip(y.node(i).chunks(dims)) {
            *s = s.max(row_norm_sq(row).sqrt());
        }
    }
    Ok((sup.iter().map(|s| s.powf(p)).sum::<f64>() / paths as f64).powf(1.0 / p))
}

/// `(E[(int_0^T |Z|^2 ds)^{p/2}])^{1/p}` with trapezoidal quadrature.
pub fn mp_norm(z: &ProcessGrid, p: f64) -> Result<f64, InvalidArgument> {
    mp_norm_on(z, p, z.grid().full_window())
}

pub fn mp_norm_on(z: &ProcessGrid, p: f64, window: Window) -> Result<f64, InvalidArgument> {
    if !(p >= 1.0) {
        return Err(InvalidArgument::new(format!("p must be >= 1, got {p}")));
    }
    if z.n_paths() == 0 {
        return Err(InvalidArgument::new("norm of an empty ensemble"));
    }
    let total = &tail_integrals(z, window)[0];
    Ok((total.iter().map(|v| v.powf(p / 2.0)).sum::<f64>() / total.len() as f64).powf(1.0 / p))
}

/// The exponential transform `phi(y) = (e^{gamma|y|} - gamma|y| - 1) / gamma^2`,
/// which satisfies `phi'' - gamma |phi'| = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhiTransform {
    pub gamma: f64,
}

impl PhiTransform {
    pub fn new(gamma: f64) -> Result<Self, InvalidArgument> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(InvalidArgument::new(format!("gamma must be > 0, got {gamma}")));
        }
        Ok(Self { gamma })
    }

    pub fn phi(&self, y: f64) -> f64 {
        let g = self.gamma;
        let x = g * y.abs();
        (x.exp_m1() - x) / (g * g)
    }

    pub fn d_phi(&self, y: f64) -> f64 {
        (self.gamma * y.abs()).exp_m1() / self.gamma * y.signum()
    }

    pub fn d2_phi(&self, y: f64) -> f64 {
        (self.gamma * y.abs()).exp()
    }

    /// Bound `2 phi(|xi|) + 4 C phi'(lambda) (1 + lambda) T` on the BMO2
    /// norm of a global solution.
    pub fn bmo_budget(&self, xi_bound: f64, c: f64, lambda: f64, horizon: f64) -> f64 {
        2.0 * self.phi(xi_bound) + 4.0 * c * self.d_phi(lambda) * (1.0 + lambda) * horizon
    }
}

/// Comparison of `e^{gamma |Y_0|}` with the Monte Carlo estimate of
/// `E[exp(gamma e^{beta T} |xi| + gamma int_0^T |g_s| e^{beta s} ds)]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lemma21Report {
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs / lhs - 1`; negative values mean the bound is violated.
    pub margin: f64,
    pub rhs_std_error: f64,
}

/// Checks the exponential a-priori bound at `t = 0`. Returns `Ok(None)`
/// when the scenario declares no growth envelope.
pub fn check_lemma21(
    y: &ProcessGrid,
    spec: &ScenarioSpec,
) -> Result<Option<Lemma21Report>, SolveError> {
    let Some(env) = &spec.envelope else {
        return Ok(None);
    };
    check_exponential_bound(y, env.gamma, env.beta, |s| env.g_at(s))
}

/// Exponential bound with explicit envelope constants.
pub fn check_exponential_bound(
    y: &ProcessGrid,
    gamma: f64,
    beta: f64,
    g: impl Fn(f64) -> Result<f64, crate::dsl::EvalError>,
) -> Result<Option<Lemma21Report>, SolveError> {
    let paths = y.n_paths();
    if paths == 0 {
        return Err(InvalidArgument::new("bound check on an empty ensemble").into());
    }
    let dims = y.dims();
    let horizon = y.grid().horizon();
    let y0 = y.node(0).chunks(dims).map(|r| row_norm_sq(r).sqrt()).sum::<f64>() / paths as f64;
    let lhs = (gamma * y0).exp();

    // composite Simpson on a fine uniform grid
    let m = 2000;
    let h = horizon / m as f64;
    let mut integral = 0.0;
    for j in 0..=m {
        let s = j as f64 * h;
        let w = if j == 0 || j == m { 1.0 } else if j % 2 == 1 { 4.0 } else { 2.0 };
        integral += w * g(s)?.abs() * (beta * s).exp();
    }
    integral *= h / 3.0;

    let last = y.grid().steps();
    let scale = gamma * (beta * horizon).exp();
    let samples: Vec<f64> = y
        .node(last)
        .chunks(dims)
        .map(|r| (scale * row_norm_sq(r).sqrt() + gamma * integral).exp())
        .collect();
    let mean = samples.iter().sum::<f64>() / paths as f64;
    let var = samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (paths.max(2) - 1) as f64;
    Ok(Some(Lemma21Report {
        lhs,
        rhs: mean,
        margin: mean / lhs - 1.0,
        rhs_std_error: (var / paths as f64).sqrt(),
    }))
}

/// Fraction of `(path, node)` samples with `|Y_t|^2 > alpha(t)`.
pub fn check_alpha_envelope(y: &ProcessGrid, ode: &OdeBound) -> f64 {
    alpha_envelope_on(y, ode, y.grid().full_window())
}

pub fn alpha_envelope_on(y: &ProcessGrid, ode: &OdeBound, window: Window) -> f64 {
    let dims = y.dims();
    let grid = y.grid();
    let mut bad = 0usize;
    let mut total = 0usize;
    for i in window.start..=window.end {
        let a = ode.alpha(grid.time(i));
        for row in y.node(i).chunks(dims) {
            total += 1;
            if row_norm_sq(row) > a {
                bad += 1;
            }
        }
    }
    if total == 0 {
        0.0
    } else {
        bad as f64 / total as f64
    }
}

/// Diagnostics of one solution.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub sup_y: f64,
    pub bmo2_z: f64,
    pub p: f64,
    pub sp_y: f64,
    pub mp_z: f64,
    pub lemma21: Option<Lemma21Report>,
    pub alpha_violation_rate: Option<f64>,
    pub bmo_budget: Option<f64>,
    pub bmo_budget_respected: Option<bool>,
    pub phi_gamma: Option<f64>,
    pub notes: Vec<String>,
}

impl DiagnosticsReport {
    /// Recomputes every entry from the given grids. The α-envelope and BMO
    /// budget are evaluated only when the certificate has a global bound.
    pub fn compute(
        y: &ProcessGrid,
        z: &ProcessGrid,
        spec: &ScenarioSpec,
        solver: &BackwardSolver<'_>,
        certificate: Option<&Certificate>,
        p: f64,
    ) -> Result<Self, SolveError> {
        let full = y.grid().full_window();
        let mut notes = vec!["BMO2 is estimated over grid-node stopping times only".to_string()];
        let lemma21 = check_lemma21(y, spec)?;
        if lemma21.is_none() {
            notes.push("no growth envelope declared: exponential bound check skipped".into());
        }
        let bmo2_z = bmo2_estimate(z, solver, full)?;
        let mut report = Self {
            sup_y: sup_norm(y)?,
            bmo2_z,
            p,
            sp_y: sp_norm(y, p)?,
            mp_z: mp_norm(z, p)?,
            lemma21,
            notes,
            ..Self::default()
        };
        if let Some(global) = certificate.and_then(|c| c.global.as_ref()) {
            let ode = OdeBound::new(global.c_tilde, spec.horizon)?;
            report.alpha_violation_rate = Some(check_alpha_envelope(y, &ode));
            if spec.flags.global_form {
                let phi = PhiTransform::new(spec.constants.gamma)?;
                let budget = phi.bmo_budget(
                    spec.constants.xi_bound,
                    spec.constants.c,
                    global.lambda,
                    spec.horizon,
                );
                report.bmo_budget = Some(budget);
                report.bmo_budget_respected = Some(bmo2_z <= budget);
                report.phi_gamma = Some(phi.gamma);
            }
        }
        Ok(report)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phi_identity_and_values() {
        let phi = PhiTransform::new(0.7).unwrap();
        assert_eq!(phi.phi(0.0), 0.0);
        assert_eq!(phi.d_phi(0.0), 0.0);
        for y in [-3.0, -0.5, 0.1, 1.0, 4.0] {
            let id = phi.d2_phi(y) - phi.gamma * phi.d_phi(y).abs();
            assert!((id - 1.0).abs() < 1e-12, "{y}: {id}");
        }
    }
}
