//! The quadratic solution map, its local iteration, stitching and the
//! direct Picard scheme.

use super::{
    convergence_step, in_window, EnvelopeCheck, InitialGuess, FixedPointTrace, Method, MeanFieldSolver, SolveResult, WidthSource,
    BALL_TOLERANCE,
};
use crate::bsde::{evaluate_driver, BackwardSolver, Driver, ExprDriver, FnDriver, StateInput, SweepStats};
use crate::certificate::OdeBound;
use crate::config::SolverConfig;
use crate::diagnostics::{alpha_envelope_on, bmo2_distance, bmo2_estimate, check_alpha_envelope, sup_norm_on};
use crate::dsl::{GeneratorExpr, Var};
use crate::ensemble::PathEnsemble;
use crate::error::{InvalidArgument, SolveError};
use crate::grid::Window;
use crate::process::{ensemble_mean, MeanCurve, ProcessGrid};
use crate::scenario::{Generator, ScenarioSpec};

use super::BallCheck;

/// One application of the solution map: solves the BSDE whose generator
/// sees `E[U] = m_u` and `E[V] = m_v`, and returns `(Y, Z, E[Y], E[Z])`.
pub fn gamma_map(
    m_u: &MeanCurve,
    m_v: &MeanCurve,
    spec: &ScenarioSpec,
    ensemble: &PathEnsemble,
    config: &SolverConfig,
) -> Result<(ProcessGrid, ProcessGrid, MeanCurve, MeanCurve), SolveError> {
    let Generator::Single(expr) = &spec.generator else {
        return Err(SolveError::Incompatible("the solution map needs a single generator".into()));
    };
    if m_u.dims() != spec.n || m_v.dims() != spec.n * spec.d {
        return Err(InvalidArgument::new("mean curve dimensions do not match the scenario").into());
    }
    let solver = BackwardSolver::new(ensemble, config)?;
    let driver = ExprDriver::new(expr, spec.n, spec.d).with_means(Some(m_u), Some(m_v));
    let terminal = crate::bsde::terminal_values(spec, ensemble)?;
    let (y, z, _) = solver.solve(&driver, &terminal)?;
    let (m_y, m_z) = (ensemble_mean(&y), ensemble_mean(&z));
    Ok((y, z, m_y, m_z))
}

/// Sup distance between the means of an iterate and the frozen means it
/// was computed from, over the mean arguments the generator reads.
pub(super) fn mean_residual(
    expr: &GeneratorExpr,
    window: Window,
    y: (&MeanCurve, &MeanCurve),
    z: (&MeanCurve, &MeanCurve),
) -> f64 {
    let mut r = 0.0;
    if expr.uses(Var::Ybar) {
        r += y.0.sup_distance_on(y.1, window.start, window.end);
    }
    if expr.uses(Var::Zbar) {
        r += z.0.sup_distance_on(z.1, window.start, window.end);
    }
    r
}

pub(super) fn zero_driver(n: usize, d: usize) -> impl Driver {
    FnDriver::new(n, d, false, move |_, _, _| vec![0.0; n])
}

impl MeanFieldSolver<'_> {
    /// Replaces the driver-zero iterate on `window` by the configured
    /// initial guess, for the schemes that iterate whole processes.
    fn seed_processes(&self, window: Window, y: &mut ProcessGrid, z: &mut ProcessGrid) {
        let (yv, zv) = match &self.initial {
            InitialGuess::Martingale => return,
            InitialGuess::Zero => (vec![0.0; self.spec.n], vec![0.0; self.spec.n * self.spec.d]),
            InitialGuess::Constant { y, z } => (y.clone(), z.clone()),
        };
        for i in window.start..window.end {
            for row in y.node_mut(i).chunks_mut(yv.len()) {
                row.copy_from_slice(&yv);
            }
        }
        for i in window.start..=window.end {
            for row in z.node_mut(i).chunks_mut(zv.len()) {
                row.copy_from_slice(&zv);
            }
        }
    }

    fn ball_check(
        &self,
        iteration: usize,
        y: &ProcessGrid,
        z: &ProcessGrid,
        window: Window,
        limits: (f64, f64),
    ) -> Result<BallCheck, SolveError> {
        let bmo2 = bmo2_estimate(z, &self.solver, window)?;
        let y_sup = sup_norm_on(y, window)?;
        Ok(BallCheck {
            iteration,
            bmo2,
            bmo2_limit: limits.0,
            bmo2_ok: bmo2 <= limits.0 * (1.0 + BALL_TOLERANCE),
            y_sup,
            y_sup_limit: limits.1,
            y_sup_ok: y_sup <= limits.1 * (1.0 + BALL_TOLERANCE),
        })
    }

    /// Iterates the solution map on one window. Node `window.end` of `y`
    /// holds the terminal values; `y` and `z` receive the fixed point.
    fn iterate_gamma(
        &self,
        expr: &GeneratorExpr,
        window: Window,
        y: &mut ProcessGrid,
        z: &mut ProcessGrid,
        stats: &mut SweepStats,
        limits: (f64, f64),
    ) -> Result<FixedPointTrace, SolveError> {
        let (n, d) = (self.spec.n, self.spec.d);
        let mut trace = FixedPointTrace::new();

        stats.merge(&self.solver.sweep(&zero_driver(n, d), window, y, z)?);
        trace.ball.push(self.ball_check(0, y, z, window, limits)?);
        let (mut m_u, mut m_v) = self.initial_curves(y);
        let mut prev_m_y = ensemble_mean(y);
        let mut z_prev = z.clone();

        loop {
            let driver = ExprDriver::new(expr, n, d).with_means(Some(&m_u), Some(&m_v));
            stats.merge(&self.solver.sweep(&driver, window, y, z)?);
            let m_y = ensemble_mean(y);
            let m_z = ensemble_mean(z);
            let y_dist = m_y.sup_distance_on(&prev_m_y, window.start, window.end);
            let z_dist = bmo2_distance(z, &z_prev, &self.solver, window)?.sqrt();
            trace.push(y_dist, z_dist);
            trace
                .ball
                .push(self.ball_check(trace.iterations(), y, z, window, limits)?);
            let residual = mean_residual(expr, window, (&m_y, &m_u), (&m_z, &m_v));
            if let Some(outcome) = convergence_step(&mut trace, &self.config, residual) {
                outcome?;
                return Ok(trace);
            }
            prev_m_y = m_y.clone();
            m_u = m_y;
            m_v = m_z;
            z_prev.copy_nodes_from(z, window.start, window.end);
        }
    }

    /// Fixed point of the solution map on `[T - width, T]`. The width
    /// defaults to the certified epsilon (or its override) and may not
    /// exceed it.
    pub fn local(&self, width: Option<f64>) -> Result<SolveResult, SolveError> {
        let expr = self.single_generator(Method::Local)?;
        let grid = self.grid();
        let certified = self.certificate.as_ref().map(|c| c.epsilon);
        let limit = self.config.override_epsilon.or(certified);
        let width = width.or(limit).ok_or_else(|| {
            InvalidArgument::new("the scenario admits no certificate; give a window width with the override")
        })?;
        if !(width > 0.0) {
            return Err(SolveError::WindowExceedsCertificate {
                width: grid.step(grid.steps() - 1),
                epsilon: width,
            });
        }
        let window = grid.terminal_window(width);
        if let Some(limit) = limit {
            let actual = window.width(grid);
            if actual > limit * (1.0 + 1e-9) {
                return Err(SolveError::WindowExceedsCertificate {
                    width: actual,
                    epsilon: limit,
                });
            }
        }
        let (mut y, mut z) = self.fresh_grids();
        let mut stats = SweepStats::default();
        let trace = self.iterate_gamma(
            expr,
            window,
            &mut y,
            &mut z,
            &mut stats,
            self.ball_limits(WidthSource::Local),
        )?;
        self.finish(Method::Local, y, z, vec![trace], vec![window], stats, None, None)
    }

    fn envelope_ode(&self) -> Option<OdeBound> {
        let g = self.certificate.as_ref()?.global.as_ref()?;
        OdeBound::new(g.c_tilde, self.spec.horizon).ok()
    }

    /// Backward stitching of local fixed points over windows no wider than
    /// `eta_lambda` (or the override).
    pub fn global(&self) -> Result<SolveResult, SolveError> {
        let expr = self.single_generator(Method::Global)?;
        self.require_global_form(Method::Global)?;
        let windows = self.plan_windows(WidthSource::Global)?;
        let limits = self.ball_limits(WidthSource::Global);
        let (mut y, mut z) = self.fresh_grids();
        let mut stats = SweepStats::default();
        let mut traces = Vec::with_capacity(windows.len());
        for (index, &w) in windows.iter().enumerate() {
            let trace = self
                .iterate_gamma(expr, w, &mut y, &mut z, &mut stats, limits)
                .map_err(|e| in_window(index, e))?;
            traces.push(trace);
        }
        let envelope = self.envelope_ode().map(|ode| {
            let rate = check_alpha_envelope(&y, &ode);
            EnvelopeCheck {
                rate,
                iterate_rates: Vec::new(),
                flagged: rate > 0.0,
            }
        });
        self.finish(Method::Global, y, z, traces, windows, stats, envelope, None)
    }

    /// Picard on one window: `Y^{j+1}` solves the BSDE with driver
    /// `f(s, 0, 0, z, 0) + [f(s, Y^j, E[Y^j], Z^j, E[Z^j]) - f(s, 0, 0, Z^j, 0)]`.
    #[allow(clippy::too_many_arguments)]
    fn iterate_picard(
        &self,
        expr: &GeneratorExpr,
        window: Window,
        y: &mut ProcessGrid,
        z: &mut ProcessGrid,
        stats: &mut SweepStats,
        limits: (f64, f64),
        ode: Option<&OdeBound>,
        rates: &mut Vec<f64>,
    ) -> Result<FixedPointTrace, SolveError> {
        let (n, d) = (self.spec.n, self.spec.d);
        let grid = self.grid().clone();
        let mut trace = FixedPointTrace::new();
        stats.merge(&self.solver.sweep(&zero_driver(n, d), window, y, z)?);
        trace.ball.push(self.ball_check(0, y, z, window, limits)?);
        if let Some(ode) = ode {
            rates.push(alpha_envelope_on(y, ode, window));
        }
        self.seed_processes(window, y, z);
        let mut extra = ProcessGrid::zeros(&grid, self.n_paths(), n);
        let mut z_prev = z.clone();
        let mut prev_m_y = ensemble_mean(y);

        loop {
            let (m_y, m_z) = (prev_m_y.clone(), ensemble_mean(z));
            {
                let full = ExprDriver::new(expr, n, d)
                    .with_y(StateInput::Frozen(y))
                    .with_means(Some(&m_y), Some(&m_z));
                let bare = ExprDriver::new(expr, n, d).with_y(StateInput::Zero);
                for i in window.start..window.end {
                    let t = grid.time(i);
                    let a = evaluate_driver(&full, i, t, &[], z.node(i))?;
                    let b = evaluate_driver(&bare, i, t, &[], z.node(i))?;
                    for ((e, a), b) in extra.node_mut(i).iter_mut().zip(&a).zip(&b) {
                        *e = a - b;
                    }
                }
            }
            let driver = ExprDriver::new(expr, n, d)
                .with_y(StateInput::Zero)
                .with_extra(&extra);
            stats.merge(&self.solver.sweep(&driver, window, y, z)?);
            let m_y = ensemble_mean(y);
            let y_dist = m_y.sup_distance_on(&prev_m_y, window.start, window.end);
            let z_dist = bmo2_distance(z, &z_prev, &self.solver, window)?.sqrt();
            trace.push(y_dist, z_dist);
            trace
                .ball
                .push(self.ball_check(trace.iterations(), y, z, window, limits)?);
            if let Some(ode) = ode {
                rates.push(alpha_envelope_on(y, ode, window));
            }
            if let Some(outcome) = convergence_step(&mut trace, &self.config, 0.0) {
                outcome?;
                return Ok(trace);
            }
            prev_m_y = m_y;
            z_prev.copy_nodes_from(z, window.start, window.end);
        }
    }

    /// Direct Picard iteration on the full driver, over the same windows as
    /// [`MeanFieldSolver::global`].
    pub fn picard(&self) -> Result<SolveResult, SolveError> {
        let expr = self.single_generator(Method::Picard)?;
        self.require_global_form(Method::Picard)?;
        let windows = self.plan_windows(WidthSource::Global)?;
        let limits = self.ball_limits(WidthSource::Global);
        let ode = self.envelope_ode();
        let (mut y, mut z) = self.fresh_grids();
        let mut stats = SweepStats::default();
        let mut traces = Vec::with_capacity(windows.len());
        let mut iterate_rates = Vec::with_capacity(windows.len());
        for (index, &w) in windows.iter().enumerate() {
            let mut rates = Vec::new();
            let trace = self
                .iterate_picard(expr, w, &mut y, &mut z, &mut stats, limits, ode.as_ref(), &mut rates)
                .map_err(|e| in_window(index, e))?;
            traces.push(trace);
            iterate_rates.push(rates);
        }
        let envelope = ode.map(|ode| {
            let rate = check_alpha_envelope(&y, &ode);
            let worst = iterate_rates.iter().flatten().fold(rate, |a, &b| a.max(b));
            EnvelopeCheck {
                rate,
                iterate_rates,
                flagged: worst > 0.0,
            }
        });
        self.finish(Method::Picard, y, z, traces, windows, stats, envelope, None)
    }
}
