//! Solvers that split the generator as `f1 + E[f2]` and carry the expected
//! part as a deterministic shift of `Y`.

use super::{
    convergence_step, in_window, FixedPointTrace, InitialGuess, MeanFieldSolver, Method, ShiftReport, SolveResult,
    WidthSource,
};
use crate::bsde::{evaluate_driver, ExprDriver, StateInput, SweepStats};
use crate::diagnostics::{bmo2_distance, mp_distance_on, sp_distance_on, sup_distance_on};
use crate::dsl::{GeneratorExpr, Var};
use crate::error::{NonConvergence, SolveError};
use crate::grid::Window;
use crate::process::{ensemble_mean, MeanCurve, ProcessGrid};
use crate::scenario::{Generator, ScenarioSpec};

/// Bit pattern digest of a grid's window nodes.
fn fingerprint(g: &ProcessGrid, window: Window) -> Vec<u64> {
    (window.start..=window.end)
        .flat_map(|i| g.node(i).iter().map(|v| v.to_bits()))
        .collect()
}

/// How the outer iteration measures distances.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Norms {
    /// Sup over paths and nodes for `Y`, BMO2 for `Z`.
    Bounded,
    /// `S^2` for `Y`, `M^2` for `Z`.
    Square,
}

/// Whether [`MeanFieldSolver::shift_simple`] accepts the scenario: an
/// additive generator with `f1` reading only `z` and `f2` only `(z, zbar)`.
pub fn simple_shift_applies(spec: &ScenarioSpec) -> bool {
    match &spec.generator {
        Generator::Additive { f1, f2 } => {
            ![Var::Y, Var::Ybar, Var::Zbar].iter().any(|v| f1.uses(*v))
                && ![Var::Y, Var::Ybar].iter().any(|v| f2.uses(*v))
        }
        Generator::Single(_) => false,
    }
}

impl MeanFieldSolver<'_> {
    /// Adds `int_t^{end} E[f2(s, U_s, E[U_s], Z_s, E[Z_s])] ds` to `y` on the
    /// window (trapezoidal) and returns the per-node shift relative to the
    /// window end, `n` values per node.
    fn apply_shift(
        &self,
        f2: &GeneratorExpr,
        u: Option<&ProcessGrid>,
        window: Window,
        y: &mut ProcessGrid,
        z: &ProcessGrid,
    ) -> Result<Vec<f64>, SolveError> {
        let (n, d) = (self.spec.n, self.spec.d);
        let grid = self.grid().clone();
        let m_z = ensemble_mean(z);
        let m_u = u.map(ensemble_mean);
        let driver = match u {
            Some(u) => ExprDriver::new(f2, n, d)
                .with_y(StateInput::Frozen(u))
                .with_means(m_u.as_ref(), Some(&m_z)),
            None => ExprDriver::new(f2, n, d)
                .with_y(StateInput::Zero)
                .with_means(None, Some(&m_z)),
        };
        let paths = self.n_paths() as f64;
        let mut means = vec![0.0; (window.steps() + 1) * n];
        for i in window.start..=window.end {
            let vals = evaluate_driver(&driver, i, grid.time(i), &[], z.node(i))?;
            let row = &mut means[(i - window.start) * n..(i - window.start + 1) * n];
            for chunk in vals.chunks(n) {
                for (m, v) in row.iter_mut().zip(chunk) {
                    *m += v;
                }
            }
            row.iter_mut().for_each(|m| *m /= paths);
        }
        let mut shift = vec![0.0; (window.steps() + 1) * n];
        for i in (window.start..window.end).rev() {
            let k = i - window.start;
            let h = grid.step(i);
            for c in 0..n {
                shift[k * n + c] = shift[(k + 1) * n + c] + 0.5 * h * (means[k * n + c] + means[(k + 1) * n + c]);
            }
        }
        for i in window.start..window.end {
            let k = i - window.start;
            for row in y.node_mut(i).chunks_mut(n) {
                for (v, s) in row.iter_mut().zip(&shift[k * n..(k + 1) * n]) {
                    *v += s;
                }
            }
        }
        Ok(shift)
    }

    /// Two-step solve for `f1(s, z) + E[f2(s, z, zbar)]`: a standard BSDE
    /// for `f1`, then the deterministic shift.
    pub fn shift_simple(&self) -> Result<SolveResult, SolveError> {
        let (f1, f2) = self.additive_generators(Method::Shift)?;
        for (name, var) in [("y", Var::Y), ("ybar", Var::Ybar), ("zbar", Var::Zbar)] {
            if f1.uses(var) {
                return Err(SolveError::Incompatible(format!(
                    "the simple shift solver needs f1 to depend on z only, but f1 reads '{name}'"
                )));
            }
        }
        for (name, var) in [("y", Var::Y), ("ybar", Var::Ybar)] {
            if f2.uses(var) {
                return Err(SolveError::Incompatible(format!(
                    "the simple shift solver needs f2 to depend on (z, zbar) only, but f2 reads '{name}'"
                )));
            }
        }
        let (n, d) = (self.spec.n, self.spec.d);
        let window = self.grid().full_window();
        let (mut y, mut z) = self.fresh_grids();
        let stats = self
            .solver
            .sweep(&ExprDriver::new(f1, n, d), window, &mut y, &mut z)?;
        let before = z.clone();
        let curve = self.apply_shift(f2, None, window, &mut y, &z)?;
        let z_invariant = fingerprint(&before, window) == fingerprint(&z, window);
        drop(before);
        let trace = FixedPointTrace {
            converged: true,
            ..FixedPointTrace::default()
        };
        self.finish(
            Method::Shift,
            y,
            z,
            vec![trace],
            vec![window],
            stats,
            None,
            Some(ShiftReport { curve, z_invariant }),
        )
    }

    fn initial_u(&self, y0: &ProcessGrid, window: Window) -> (ProcessGrid, MeanCurve) {
        let grid = self.grid();
        let nd = self.spec.n * self.spec.d;
        let mut u = y0.clone();
        let m_v = match &self.initial {
            InitialGuess::Martingale => MeanCurve::zeros(grid, nd),
            InitialGuess::Zero => {
                for i in window.start..window.end {
                    u.node_mut(i).iter_mut().for_each(|v| *v = 0.0);
                }
                MeanCurve::zeros(grid, nd)
            }
            InitialGuess::Constant { y, z } => {
                for i in window.start..window.end {
                    for row in u.node_mut(i).chunks_mut(y.len()) {
                        row.copy_from_slice(y);
                    }
                }
                MeanCurve::constant(grid, z)
            }
        };
        (u, m_v)
    }

    /// Outer iteration over `U` (and `E[V]`) on one window. With
    /// `Norms::Square`, `f1`'s mean of `z` is the solved `Z`'s own mean, found
    /// by an inner iteration; otherwise it is the frozen `E[V]`.
    #[allow(clippy::too_many_arguments)]
    fn iterate_shift(
        &self,
        f1: &GeneratorExpr,
        f2: &GeneratorExpr,
        window: Window,
        norms: Norms,
        y: &mut ProcessGrid,
        z: &mut ProcessGrid,
        stats: &mut SweepStats,
        z_invariant: &mut bool,
    ) -> Result<(FixedPointTrace, Vec<f64>), SolveError> {
        let (n, d) = (self.spec.n, self.spec.d);
        let mut trace = FixedPointTrace::new();
        stats.merge(&self.solver.sweep(&super::quadratic_zero(n, d), window, y, z)?);
        let (mut u, mut m_v) = self.initial_u(y, window);
        let mut z_prev = z.clone();

        loop {
            let m_u = ensemble_mean(&u);
            match norms {
                Norms::Bounded => {
                    let driver = ExprDriver::new(f1, n, d)
                        .with_y(StateInput::Frozen(&u))
                        .with_means(Some(&m_u), Some(&m_v));
                    stats.merge(&self.solver.sweep(&driver, window, y, z)?);
                }
                Norms::Square => {
                    let mut m_zbar = m_v.clone();
                    let mut inner = 0;
                    loop {
                        let driver = ExprDriver::new(f1, n, d)
                            .with_y(StateInput::Frozen(&u))
                            .with_means(Some(&m_u), Some(&m_zbar));
                        stats.merge(&self.solver.sweep(&driver, window, y, z)?);
                        inner += 1;
                        if !f1.uses(Var::Zbar) {
                            break;
                        }
                        let m_new = ensemble_mean(z);
                        let gap = m_new.sup_distance_on(&m_zbar, window.start, window.end);
                        m_zbar = m_new;
                        if gap < self.config.tol_fp || gap == 0.0 {
                            break;
                        }
                        if inner >= self.config.max_fp {
                            return Err(SolveError::NotConverged {
                                reason: NonConvergence::MaxIterations,
                                trace: Box::new(trace),
                            });
                        }
                    }
                }
            }
            let before = fingerprint(z, window);
            let shift = self.apply_shift(f2, Some(&u), window, y, z)?;
            *z_invariant &= before == fingerprint(z, window);

            let (y_dist, z_dist) = match norms {
                Norms::Bounded => (
                    sup_distance_on(y, &u, window),
                    bmo2_distance(z, &z_prev, &self.solver, window)?.sqrt(),
                ),
                Norms::Square => (
                    sp_distance_on(y, &u, 2.0, window)?,
                    mp_distance_on(z, &z_prev, 2.0, window)?,
                ),
            };
            trace.push(y_dist, z_dist);
            let residual = match norms {
                Norms::Bounded if f1.uses(Var::Zbar) => {
                    ensemble_mean(z).sup_distance_on(&m_v, window.start, window.end)
                }
                _ => 0.0,
            };
            if let Some(outcome) = convergence_step(&mut trace, &self.config, residual) {
                outcome?;
                return Ok((trace, shift));
            }
            u.copy_nodes_from(y, window.start, window.end);
            m_v = ensemble_mean(z);
            z_prev.copy_nodes_from(z, window.start, window.end);
        }
    }

    fn stitched_shift(&self, method: Method, norms: Norms) -> Result<SolveResult, SolveError> {
        let (f1, f2) = self.additive_generators(method)?;
        let windows = self.plan_windows(WidthSource::Uncertified)?;
        let n = self.spec.n;
        let (mut y, mut z) = self.fresh_grids();
        let mut stats = SweepStats::default();
        let mut traces = Vec::with_capacity(windows.len());
        let mut z_invariant = true;
        let mut curve = vec![0.0; self.grid().len() * n];
        for (index, &w) in windows.iter().enumerate() {
            let (trace, shift) = self
                .iterate_shift(f1, f2, w, norms, &mut y, &mut z, &mut stats, &mut z_invariant)
                .map_err(|e| in_window(index, e))?;
            let base: Vec<f64> = curve[w.end * n..(w.end + 1) * n].to_vec();
            for i in w.start..w.end {
                let k = i - w.start;
                for c in 0..n {
                    curve[i * n + c] = base[c] + shift[k * n + c];
                }
            }
            traces.push(trace);
        }
        let mut result = self.finish(
            method,
            y,
            z,
            traces,
            windows,
            stats,
            None,
            Some(ShiftReport { curve, z_invariant }),
        )?;
        if self.config.windows.is_none() && self.config.override_epsilon.is_none() {
            result
                .warnings
                .push("no certified window width for this solver: solved on a single window".into());
        }
        Ok(result)
    }

    /// Fixed point over `(U, E[V])` for `f1(s, U, E[U], z, E[V]) + E[f2(s, U,
    /// E[U], Z, E[Z])]`, window by window.
    pub fn shift_fixed_point(&self) -> Result<SolveResult, SolveError> {
        self.stitched_shift(Method::ShiftFixedPoint, Norms::Bounded)
    }

    /// The multi-dimensional Lipschitz/quadratic split, with distances in
    /// `S^2` and `M^2`.
    pub fn multidim(&self) -> Result<SolveResult, SolveError> {
        self.stitched_shift(Method::Multidim, Norms::Square)
    }
}
