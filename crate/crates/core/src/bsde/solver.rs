//! Backward sweep: `Y_i = E_i[Y_{i+1}] + h f(t_i, Y_i, Z_i)` with
//! `Z_i = E_i[(Y_{i+1} - E_i[Y_{i+1}]) dW_i^T] / h`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::driver::{Driver, ExprDriver};
use super::regression::{Projector, RegressionBasis};
use crate::config::SolverConfig;
use crate::dsl::{EvalError, EvalErrorKind};
use crate::ensemble::PathEnsemble;
use crate::error::{InvalidArgument, SolveError};
use crate::grid::Window;
use crate::process::{MeanCurve, ProcessGrid};
use crate::scenario::{Generator, ScenarioSpec};

const CHUNK: usize = 4096;

/// Per-node bookkeeping of a sweep.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepStats {
    /// Implicit `y` iterations used at each node (0 where no step was taken).
    pub inner_iterations: Vec<usize>,
    /// Paths whose `z` was clamped before the driver call, per node.
    pub clamped: Vec<usize>,
    pub z_clamp: Option<f64>,
}

impl SweepStats {
    fn new(len: usize, z_clamp: Option<f64>) -> Self {
        Self {
            inner_iterations: vec![0; len],
            clamped: vec![0; len],
            z_clamp,
        }
    }

    pub fn max_inner(&self) -> usize {
        self.inner_iterations.iter().copied().max().unwrap_or(0)
    }

    pub fn total_clamped(&self) -> usize {
        self.clamped.iter().sum()
    }

    /// Folds another sweep over the same grid into this one.
    pub fn merge(&mut self, other: &SweepStats) {
        if self.inner_iterations.len() < other.inner_iterations.len() {
            self.inner_iterations.resize(other.inner_iterations.len(), 0);
            self.clamped.resize(other.clamped.len(), 0);
        }
        for (a, b) in self.inner_iterations.iter_mut().zip(&other.inner_iterations) {
            *a = (*a).max(*b);
        }
        for (a, b) in self.clamped.iter_mut().zip(&other.clamped) {
            *a += *b;
        }
        if self.z_clamp.is_none() {
            self.z_clamp = other.z_clamp;
        }
    }
}

/// Result of one backward step, path-major.
#[derive(Debug, Clone)]
pub struct StepOutput {
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    pub iterations: usize,
    pub clamped: usize,
}

/// Regression-based backward solver bound to one path ensemble. Projectors
/// are fitted once per node and reused by every sweep.
#[derive(Debug)]
pub struct BackwardSolver<'e> {
    ensemble: &'e PathEnsemble,
    projectors: Vec<Projector>,
    tol_inner: f64,
    max_inner: usize,
    z_clamp: Option<f64>,
}

impl<'e> BackwardSolver<'e> {
    pub fn new(ensemble: &'e PathEnsemble, config: &SolverConfig) -> Result<Self, SolveError> {
        config.validate()?;
        let d = ensemble.dim();
        let grid = ensemble.grid();
        let projectors = (0..grid.len())
            .into_par_iter()
            .map(|i| {
                let basis = if grid.time(i) > 0.0 {
                    RegressionBasis::new(d, config.degree, config.ridge)
                } else {
                    RegressionBasis::constant(d, config.ridge)
                };
                Projector::fit(basis, &scaled_state(ensemble, i), i)
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            ensemble,
            projectors,
            tol_inner: config.tol_inner,
            max_inner: config.max_inner,
            z_clamp: config.z_clamp,
        })
    }

    /// Clamp on the Euclidean norm of each path's `z` in driver calls.
    pub fn with_z_clamp(mut self, clamp: Option<f64>) -> Self {
        self.z_clamp = clamp;
        self
    }

    pub fn z_clamp(&self) -> Option<f64> {
        self.z_clamp
    }

    pub fn ensemble(&self) -> &'e PathEnsemble {
        self.ensemble
    }

    pub fn projector(&self, node: usize) -> &Projector {
        &self.projectors[node]
    }

    /// Regression state at a node: `W_t / sqrt(t)`.
    pub fn state(&self, node: usize) -> Vec<f64> {
        scaled_state(self.ensemble, node)
    }

    /// Estimates `E[target | W_{t_node}]` for each target column.
    pub fn conditional_expectation(
        &self,
        node: usize,
        targets: &[&[f64]],
    ) -> Result<Vec<Vec<f64>>, SolveError> {
        let state = self.state(node);
        Ok(self.projectors[node].project(&state, targets)?)
    }

    /// One step from node `node + 1` to `node`. `y_next` is path-major with
    /// `n` values per path.
    pub fn backward_step(
        &self,
        node: usize,
        y_next: &[f64],
        driver: &dyn Driver,
    ) -> Result<StepOutput, SolveError> {
        let grid = self.ensemble.grid();
        if node >= grid.steps() {
            return Err(InvalidArgument::new(format!("no step starts at node {node}")).into());
        }
        let p_count = self.ensemble.n_paths();
        let (n, d) = (driver.n(), driver.d());
        if d != self.ensemble.dim() || y_next.len() != p_count * n {
            return Err(InvalidArgument::new("driver or terminal shape does not match the ensemble").into());
        }
        if y_next.iter().any(|v| !v.is_finite()) {
            return Err(SolveError::NonFinite { node: node + 1 });
        }
        let h = grid.step(node);
        let t = grid.time(node);
        let state = self.state(node);
        let proj = &self.projectors[node];

        let y_cols: Vec<Vec<f64>> = (0..n)
            .map(|k| (0..p_count).map(|p| y_next[p * n + k]).collect())
            .collect();
        let y_refs: Vec<&[f64]> = y_cols.iter().map(Vec::as_slice).collect();
        let y_hat_cols = proj.project(&state, &y_refs)?;

        let dw = self.ensemble.increments_at(node);
        let mut z_targets: Vec<Vec<f64>> = Vec::with_capacity(n * d);
        for k in 0..n {
            for j in 0..d {
                z_targets.push(
                    (0..p_count)
                        .map(|p| (y_cols[k][p] - y_hat_cols[k][p]) * dw[p * d + j])
                        .collect(),
                );
            }
        }
        let z_refs: Vec<&[f64]> = z_targets.iter().map(Vec::as_slice).collect();
        let z_cols = proj.project(&state, &z_refs)?;

        let nd = n * d;
        let mut y_hat = vec![0.0; p_count * n];
        for (k, col) in y_hat_cols.iter().enumerate() {
            for (p, v) in col.iter().enumerate() {
                y_hat[p * n + k] = *v;
            }
        }
        let mut z = vec![0.0; p_count * nd];
        for (c, col) in z_cols.iter().enumerate() {
            for (p, v) in col.iter().enumerate() {
                z[p * nd + c] = *v / h;
            }
        }

        let mut z_eval = z.clone();
        let mut clamped = 0;
        if let Some(level) = self.z_clamp {
            for row in z_eval.chunks_mut(nd) {
                let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm > level {
                    let s = level / norm;
                    row.iter_mut().for_each(|v| *v *= s);
                    clamped += 1;
                }
            }
        }

        let (y, iterations) = if driver.uses_y() {
            self.implicit_y(node, t, h, &y_hat, &z_eval, driver)?
        } else {
            let f = eval_all(driver, node, t, &y_hat, &z_eval, n, nd)?;
            (y_hat.iter().zip(&f).map(|(a, b)| a + h * b).collect(), 1)
        };
        if y.iter().chain(&z).any(|v| !v.is_finite()) {
            return Err(SolveError::NonFinite { node });
        }
        Ok(StepOutput {
            y,
            z,
            iterations,
            clamped,
        })
    }

    fn implicit_y(
        &self,
        node: usize,
        t: f64,
        h: f64,
        y_hat: &[f64],
        z: &[f64],
        driver: &dyn Driver,
    ) -> Result<(Vec<f64>, usize), SolveError> {
        let n = driver.n();
        let nd = n * driver.d();
        let p_count = y_hat.len() / n;
        let mut y = y_hat.to_vec();
        let mut damping = vec![1.0; p_count];
        let mut last_residual = vec![f64::INFINITY; p_count];
        for iteration in 1..=self.max_inner {
            let f = eval_all(driver, node, t, &y, z, n, nd)?;
            let mut done = true;
            for p in 0..p_count {
                let rows = p * n..(p + 1) * n;
                let mut residual = 0.0f64;
                let mut scale = 0.0f64;
                for k in rows.clone() {
                    let target = y_hat[k] + h * f[k];
                    residual = residual.max((target - y[k]).abs());
                    scale = scale.max(y[k].abs());
                }
                if residual > self.tol_inner * (1.0 + scale) {
                    done = false;
                }
                if residual > last_residual[p] {
                    damping[p] *= 0.5;
                }
                last_residual[p] = residual;
                let a = damping[p];
                for k in rows {
                    let target = y_hat[k] + h * f[k];
                    y[k] += a * (target - y[k]);
                }
            }
            if done {
                return Ok((y, iteration));
            }
        }
        Err(SolveError::StepDivergence {
            node,
            iterations: self.max_inner,
        })
    }

    /// Sweeps backward over `window`. Node `window.end` of `y` must already
    /// hold the terminal values; `y` and `z` are filled on the window. When
    /// the window ends at the horizon, `Z_N` is set to `Z_{N-1}`.
    pub fn sweep(
        &self,
        driver: &dyn Driver,
        window: Window,
        y: &mut ProcessGrid,
        z: &mut ProcessGrid,
    ) -> Result<SweepStats, SolveError> {
        let grid = self.ensemble.grid();
        let mut stats = SweepStats::new(grid.len(), self.z_clamp);
        if window.end > grid.steps() || window.start >= window.end {
            return Err(InvalidArgument::new(format!(
                "window {}..={} is not inside the grid",
                window.start, window.end
            ))
            .into());
        }
        if y.dims() != driver.n() || z.dims() != driver.n() * driver.d() {
            return Err(InvalidArgument::new("output grids do not match the driver").into());
        }
        for i in (window.start..window.end).rev() {
            let out = self.backward_step(i, y.node(i + 1), driver)?;
            y.node_mut(i).copy_from_slice(&out.y);
            z.node_mut(i).copy_from_slice(&out.z);
            stats.inner_iterations[i] = out.iterations;
            stats.clamped[i] = out.clamped;
        }
        if window.end == grid.steps() {
            let last = z.node(window.end - 1).to_vec();
            z.node_mut(window.end).copy_from_slice(&last);
        }
        Ok(stats)
    }

    /// Full sweep from terminal values (path-major, `n` per path).
    pub fn solve(
        &self,
        driver: &dyn Driver,
        terminal: &[f64],
    ) -> Result<(ProcessGrid, ProcessGrid, SweepStats), SolveError> {
        let grid = self.ensemble.grid();
        let p_count = self.ensemble.n_paths();
        let mut y = ProcessGrid::zeros(grid, p_count, driver.n());
        let mut z = ProcessGrid::zeros(grid, p_count, driver.n() * driver.d());
        if terminal.len() != p_count * driver.n() {
            return Err(InvalidArgument::new("terminal values do not match the ensemble").into());
        }
        y.node_mut(grid.steps()).copy_from_slice(terminal);
        let stats = self.sweep(driver, grid.full_window(), &mut y, &mut z)?;
        Ok((y, z, stats))
    }
}

fn scaled_state(ensemble: &PathEnsemble, node: usize) -> Vec<f64> {
    let t = ensemble.grid().time(node);
    let pos = ensemble.positions_at(node);
    if t > 0.0 {
        let s = 1.0 / t.sqrt();
        pos.iter().map(|w| w * s).collect()
    } else {
        vec![0.0; pos.len()]
    }
}

/// Evaluates a driver on every path of a node in parallel chunks. `z` has
/// `n * d` values per path; `y` has `n` per path (it may be empty when the
/// driver does not read it).
pub fn evaluate_driver(
    driver: &dyn Driver,
    node: usize,
    t: f64,
    y: &[f64],
    z: &[f64],
) -> Result<Vec<f64>, SolveError> {
    let n = driver.n();
    let nd = n * driver.d();
    let p_count = z.len() / nd;
    let y = if y.is_empty() { &vec![0.0; p_count * n][..] } else { y };
    eval_all(driver, node, t, y, z, n, nd)
}

fn eval_all(
    driver: &dyn Driver,
    node: usize,
    t: f64,
    y: &[f64],
    z: &[f64],
    n: usize,
    nd: usize,
) -> Result<Vec<f64>, SolveError> {
    let p_count = y.len() / n;
    let chunks = p_count.div_ceil(CHUNK);
    let parts: Vec<Result<Vec<f64>, EvalError>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let (lo, hi) = (c * CHUNK, ((c + 1) * CHUNK).min(p_count));
            driver.eval(node, t, lo..hi, &y[lo * n..hi * n], &z[lo * nd..hi * nd])
        })
        .collect();
    let mut out = Vec::with_capacity(p_count * n);
    for part in parts {
        out.extend(part?);
    }
    if out.len() != p_count * n {
        return Err(EvalError {
            kind: EvalErrorKind::Dimension(format!(
                "driver returned {} values for {} paths of dimension {n}",
                out.len(),
                p_count
            )),
            node: "driver".into(),
            line: 0,
            col: 0,
        }
        .into());
    }
    Ok(out)
}

/// Terminal values `xi` on the ensemble, path-major.
pub fn terminal_values(spec: &ScenarioSpec, ensemble: &PathEnsemble) -> Result<Vec<f64>, SolveError> {
    let last = ensemble.grid().steps();
    Ok(spec
        .terminal
        .evaluate(ensemble.positions_at(last), ensemble.dim())?)
}

/// Solution of a BSDE with frozen mean curves.
#[derive(Debug, Clone)]
pub struct StandardSolution {
    pub y: ProcessGrid,
    pub z: ProcessGrid,
    pub stats: SweepStats,
}

/// Solves the scenario's BSDE with `E[Y]` and `E[Z]` frozen at the given
/// curves (zero when absent). Only single-generator scenarios qualify.
pub fn solve_standard(
    spec: &ScenarioSpec,
    ybar: Option<&MeanCurve>,
    zbar: Option<&MeanCurve>,
    ensemble: &PathEnsemble,
    config: &SolverConfig,
) -> Result<StandardSolution, SolveError> {
    let Generator::Single(expr) = &spec.generator else {
        return Err(SolveError::Incompatible(
            "the frozen-mean solver needs a single generator".into(),
        ));
    };
    let solver = BackwardSolver::new(ensemble, config)?;
    let driver = ExprDriver::new(expr, spec.n, spec.d).with_means(ybar, zbar);
    let terminal = terminal_values(spec, ensemble)?;
    let (y, z, stats) = solver.solve(&driver, &terminal)?;
    Ok(StandardSolution { y, z, stats })
}
