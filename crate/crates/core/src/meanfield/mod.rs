//! Fixed-point solvers for mean-field BSDEs.
//!
//! The quadratic solvers iterate deterministic mean curves: the generator
//! touches the frozen inputs only through `E[U_s]` and `E[V_s]`, so the
//! solution map can be iterated on curves instead of whole processes. The
//! shift solvers split off an additive expected driver as a deterministic
//! time integral, leaving `Z` untouched.

mod quadratic;
mod shift;
mod trace;

use serde::{Deserialize, Serialize};

pub use quadratic::gamma_map;
pub use shift::simple_shift_applies;
use quadratic::zero_driver as quadratic_zero;
pub use trace::{BallCheck, FixedPointTrace};

use crate::bsde::{terminal_values, BackwardSolver, SweepStats};
use crate::certificate::{certify, Certificate, CertificateInputs};
use crate::config::SolverConfig;
use crate::diagnostics::DiagnosticsReport;
use crate::dsl::GeneratorExpr;
use crate::ensemble::PathEnsemble;
use crate::error::{InvalidArgument, SolveError};
use crate::grid::{TimeGrid, Window};
use crate::process::{ensemble_mean, MeanCurve, ProcessGrid};
use crate::scenario::{Generator, ScenarioSpec};

/// Relative slack on the ball radius in membership checks.
pub const BALL_TOLERANCE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Local,
    Global,
    Picard,
    Shift,
    ShiftFixedPoint,
    Multidim,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Local => "local",
            Method::Global => "global",
            Method::Picard => "picard",
            Method::Shift => "shift",
            Method::ShiftFixedPoint => "shift-fixed-point",
            Method::Multidim => "multidim",
        }
    }

    /// The structural flag whose form the method solves.
    pub fn structural_flag(&self) -> &'static str {
        match self {
            Method::Local => "local",
            Method::Global | Method::Picard => "global",
            Method::Shift | Method::ShiftFixedPoint => "shift",
            Method::Multidim => "multidim",
        }
    }
}

/// Starting point of an outer iteration. Iterate zero is always the
/// driver-zero solve; this only chooses the first frozen inputs.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialGuess {
    /// `(E[Y^0], 0)` with `Y^0` the martingale of the terminal value.
    Martingale,
    /// Both curves zero.
    Zero,
    /// Constant curves with the given values.
    Constant { y: Vec<f64>, z: Vec<f64> },
}

/// `|Y_t|^2 <= alpha(t)` bookkeeping for the global solvers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeCheck {
    /// Violation rate of the emitted solution.
    pub rate: f64,
    /// Violation rate of each Picard iterate, per window (terminal first).
    pub iterate_rates: Vec<Vec<f64>>,
    /// Set when any sample exceeds the envelope.
    pub flagged: bool,
}

/// The deterministic shift added to `Y` by the shift solvers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftReport {
    /// `int_t^T E[f2] ds` per node, `n` values per node.
    pub curve: Vec<f64>,
    /// Whether the `Z` grid was bit-identical before and after every shift.
    pub z_invariant: bool,
}

/// Output of every mean-field solver.
#[derive(Debug, Clone)]
pub struct SolveResult {
    pub method: Method,
    pub scenario: String,
    pub y: ProcessGrid,
    pub z: ProcessGrid,
    pub m_y: MeanCurve,
    pub m_z: MeanCurve,
    /// One trace per window, terminal window first.
    pub traces: Vec<FixedPointTrace>,
    pub windows: Vec<Window>,
    pub certificate: Option<Certificate>,
    pub diagnostics: DiagnosticsReport,
    pub stats: SweepStats,
    pub envelope: Option<EnvelopeCheck>,
    pub shift: Option<ShiftReport>,
    pub warnings: Vec<String>,
}

impl SolveResult {
    /// Trace of the terminal window.
    pub fn trace(&self) -> &FixedPointTrace {
        &self.traces[0]
    }

    pub fn converged(&self) -> bool {
        self.traces.iter().all(|t| t.converged)
    }

    /// Serializable view without the per-path grids.
    pub fn summary(&self) -> SolveSummary {
        SolveSummary {
            method: self.method,
            scenario: self.scenario.clone(),
            times: self.y.grid().nodes().to_vec(),
            m_y: self.m_y.clone(),
            m_z: self.m_z.clone(),
            sd_y: self.y.node_std(),
            traces: self.traces.clone(),
            windows: self.windows.clone(),
            certificate: self.certificate.clone(),
            diagnostics: self.diagnostics.clone(),
            stats: self.stats.clone(),
            envelope: self.envelope.clone(),
            shift: self.shift.clone(),
            warnings: self.warnings.clone(),
        }
    }
}

/// JSON form of a [`SolveResult`].
#[derive(Debug, Clone, Serialize)]
pub struct SolveSummary {
    pub method: Method,
    pub scenario: String,
    pub times: Vec<f64>,
    pub m_y: MeanCurve,
    pub m_z: MeanCurve,
    pub sd_y: MeanCurve,
    pub traces: Vec<FixedPointTrace>,
    pub windows: Vec<Window>,
    pub certificate: Option<Certificate>,
    pub diagnostics: DiagnosticsReport,
    pub stats: SweepStats,
    pub envelope: Option<EnvelopeCheck>,
    pub shift: Option<ShiftReport>,
    pub warnings: Vec<String>,
}

/// Certificate of a scenario's constants, if they admit one.
pub fn scenario_certificate(spec: &ScenarioSpec) -> Option<Certificate> {
    let k = &spec.constants;
    certify(CertificateInputs {
        c: k.c,
        gamma: k.gamma,
        alpha: k.alpha,
        xi_bound: k.xi_bound,
        horizon: spec.horizon,
    })
    .ok()
}

/// Simulates the ensemble described by a solver configuration.
pub fn simulate_ensemble(spec: &ScenarioSpec, config: &SolverConfig) -> Result<PathEnsemble, SolveError> {
    config.validate()?;
    let grid = TimeGrid::uniform(spec.horizon, config.steps)?;
    let ens = if config.antithetic {
        PathEnsemble::simulate_antithetic(&grid, spec.d, config.paths, config.seed)?
    } else {
        PathEnsemble::simulate(&grid, spec.d, config.paths, config.seed)?
    };
    Ok(ens)
}

/// Which certified width bounds the windows of a solver.
#[derive(Debug, Clone, Copy, PartialEq)]
enum WidthSource {
    /// The local existence width `epsilon`.
    Local,
    /// The global step `eta_lambda`.
    Global,
    /// No certified width exists; windows come from the configuration.
    Uncertified,
}

/// Shared state of the mean-field solvers on one ensemble.
pub struct MeanFieldSolver<'e> {
    spec: &'e ScenarioSpec,
    config: SolverConfig,
    solver: BackwardSolver<'e>,
    terminal: Vec<f64>,
    certificate: Option<Certificate>,
    /// Certificate at `|xi| = sqrt(lambda)`, which sizes the global windows.
    global_certificate: Option<Certificate>,
    initial: InitialGuess,
    warnings: Vec<String>,
}

impl<'e> MeanFieldSolver<'e> {
    pub fn new(
        spec: &'e ScenarioSpec,
        ensemble: &'e PathEnsemble,
        config: &SolverConfig,
    ) -> Result<Self, SolveError> {
        spec.validate().map_err(|e| InvalidArgument::new(e.to_string()))?;
        config.validate()?;
        if ensemble.dim() != spec.d {
            return Err(InvalidArgument::new("ensemble dimension differs from the scenario's d").into());
        }
        if (ensemble.grid().horizon() - spec.horizon).abs() > 1e-12 * spec.horizon {
            return Err(InvalidArgument::new("ensemble horizon differs from the scenario's").into());
        }
        let certificate = scenario_certificate(spec);
        let global_certificate = certificate
            .as_ref()
            .and_then(|c| c.global.as_ref())
            .and_then(|g| {
                let k = &spec.constants;
                certify(CertificateInputs {
                    c: k.c,
                    gamma: k.gamma,
                    alpha: k.alpha,
                    xi_bound: g.lambda.sqrt(),
                    horizon: spec.horizon,
                })
                .ok()
            });
        let mut warnings = Vec::new();
        if config.override_epsilon.is_some() {
            warnings.push("window width taken from the unsafe epsilon override".to_string());
        }
        let z_clamp = config.z_clamp.or_else(|| {
            let a = certificate.as_ref().map(|c| c.a).filter(|a| a.is_finite() && *a > 0.0)?;
            let grid = ensemble.grid();
            let h_min = (0..grid.steps()).map(|i| grid.step(i)).fold(f64::INFINITY, f64::min);
            Some((a / h_min).sqrt().max(10.0))
        });
        let solver = BackwardSolver::new(ensemble, config)?.with_z_clamp(z_clamp);
        let terminal = terminal_values(spec, ensemble)?;
        Ok(Self {
            spec,
            config: config.clone(),
            solver,
            terminal,
            certificate,
            global_certificate,
            initial: InitialGuess::Martingale,
            warnings,
        })
    }

    pub fn with_initial(mut self, initial: InitialGuess) -> Self {
        self.initial = initial;
        self
    }

    pub fn certificate(&self) -> Option<&Certificate> {
        self.certificate.as_ref()
    }

    pub fn backward_solver(&self) -> &BackwardSolver<'e> {
        &self.solver
    }

    pub fn spec(&self) -> &ScenarioSpec {
        self.spec
    }

    fn grid(&self) -> &TimeGrid {
        self.solver.ensemble().grid()
    }

    fn n_paths(&self) -> usize {
        self.solver.ensemble().n_paths()
    }

    fn single_generator(&self, method: Method) -> Result<&'e GeneratorExpr, SolveError> {
        match &self.spec.generator {
            Generator::Single(f) => Ok(f),
            Generator::Additive { .. } => Err(SolveError::Incompatible(format!(
                "the {} solver needs the '{}' structural form with a single generator, but scenario '{}' \
                 splits it into f1 + E[f2] (declared flags: {})",
                method.name(),
                method.structural_flag(),
                self.spec.name,
                self.declared_flags()
            ))),
        }
    }

    fn additive_generators(&self, method: Method) -> Result<(&'e GeneratorExpr, &'e GeneratorExpr), SolveError> {
        match &self.spec.generator {
            Generator::Additive { f1, f2 } => Ok((f1, f2)),
            Generator::Single(_) => Err(SolveError::Incompatible(format!(
                "the {} solver needs the '{}' structural form f1 + E[f2], but scenario '{}' has a single \
                 generator (declared flags: {})",
                method.name(),
                method.structural_flag(),
                self.spec.name,
                self.declared_flags()
            ))),
        }
    }

    fn declared_flags(&self) -> String {
        let names = self.spec.flags.names();
        if names.is_empty() {
            "none".into()
        } else {
            names.join(", ")
        }
    }

    fn require_global_form(&self, method: Method) -> Result<(), SolveError> {
        if self.spec.flags.global_form {
            Ok(())
        } else {
            Err(SolveError::Incompatible(format!(
                "the {} solver needs the 'global' structural flag (bounded-growth h), \
                 which scenario '{}' does not declare",
                method.name(),
                self.spec.name
            )))
        }
    }

    /// Splits the grid into equal windows no wider than the applicable
    /// certified width (or its override).
    fn plan_windows(&self, source: WidthSource) -> Result<Vec<Window>, SolveError> {
        let grid = self.grid();
        let horizon = grid.horizon();
        let certified = match source {
            WidthSource::Local => self.certificate.as_ref().map(|c| c.epsilon),
            WidthSource::Global => self
                .certificate
                .as_ref()
                .and_then(|c| c.global.as_ref())
                .map(|g| g.eta_lambda),
            WidthSource::Uncertified => None,
        };
        let limit = self.config.override_epsilon.or(certified);
        let count = match (self.config.windows, limit) {
            (Some(k), _) => k,
            (None, Some(limit)) => {
                let k = (horizon / limit * (1.0 - 1e-12)).ceil();
                if !(k >= 1.0 && k <= grid.steps() as f64) {
                    return Err(SolveError::WindowExceedsCertificate {
                        width: horizon / grid.steps() as f64,
                        epsilon: limit,
                    });
                }
                k as usize
            }
            (None, None) => {
                if source != WidthSource::Uncertified {
                    return Err(InvalidArgument::new(
                        "the scenario admits no certificate; set windows or the epsilon override",
                    )
                    .into());
                }
                1
            }
        };
        let windows = grid.windows(count)?;
        if let Some(limit) = limit {
            for w in &windows {
                let width = w.width(grid);
                if width > limit * (1.0 + 1e-9) {
                    return Err(SolveError::WindowExceedsCertificate { width, epsilon: limit });
                }
            }
        }
        Ok(windows)
    }

    /// Ball limits `(A, U bound)` for the window checks.
    fn ball_limits(&self, source: WidthSource) -> (f64, f64) {
        let cert = match source {
            WidthSource::Global => self.global_certificate.as_ref(),
            _ => self.certificate.as_ref(),
        };
        cert.map_or((f64::INFINITY, f64::INFINITY), |c| (c.a, c.u_bound))
    }

    fn initial_curves(&self, y0: &ProcessGrid) -> (MeanCurve, MeanCurve) {
        let grid = self.grid();
        let (n, nd) = (self.spec.n, self.spec.n * self.spec.d);
        match &self.initial {
            InitialGuess::Martingale => (ensemble_mean(y0), MeanCurve::zeros(grid, nd)),
            InitialGuess::Zero => (MeanCurve::zeros(grid, n), MeanCurve::zeros(grid, nd)),
            InitialGuess::Constant { y, z } => (MeanCurve::constant(grid, y), MeanCurve::constant(grid, z)),
        }
    }

    fn fresh_grids(&self) -> (ProcessGrid, ProcessGrid) {
        let grid = self.grid();
        let mut y = ProcessGrid::zeros(grid, self.n_paths(), self.spec.n);
        let z = ProcessGrid::zeros(grid, self.n_paths(), self.spec.n * self.spec.d);
        y.node_mut(grid.steps()).copy_from_slice(&self.terminal);
        (y, z)
    }

    #[allow(clippy::too_many_arguments)]
    fn finish(
        &self,
        method: Method,
        y: ProcessGrid,
        z: ProcessGrid,
        traces: Vec<FixedPointTrace>,
        windows: Vec<Window>,
        stats: SweepStats,
        envelope: Option<EnvelopeCheck>,
        shift: Option<ShiftReport>,
    ) -> Result<SolveResult, SolveError> {
        let diagnostics = DiagnosticsReport::compute(
            &y,
            &z,
            self.spec,
            &self.solver,
            self.certificate.as_ref(),
            2.0,
        )?;
        let mut warnings = self.warnings.clone();
        if stats.total_clamped() > 0 {
            warnings.push(format!(
                "z clamp at {:.4} was active on {} (path, node) samples",
                stats.z_clamp.unwrap_or(f64::NAN),
                stats.total_clamped()
            ));
        }
        if envelope.as_ref().is_some_and(|e| e.flagged) {
            warnings.push("some samples exceed the alpha(t) envelope".to_string());
        }
        Ok(SolveResult {
            method,
            scenario: self.spec.name.clone(),
            m_y: ensemble_mean(&y),
            m_z: ensemble_mean(&z),
            y,
            z,
            traces,
            windows,
            certificate: self.certificate.clone(),
            diagnostics,
            stats,
            envelope,
            shift,
            warnings,
        })
    }
}

/// Reports a failed outer iteration, or `Ok` once the distance is small.
/// `residual` measures how far the frozen mean inputs of this iterate are
/// from its own means; successive iterates can agree while the inputs are
/// still inconsistent (a generator that vanishes at the initial guess).
fn convergence_step(
    trace: &mut FixedPointTrace,
    config: &SolverConfig,
    residual: f64,
) -> Option<Result<(), SolveError>> {
    let small = |v: f64| v < config.tol_fp || v == 0.0;
    let last = trace.last_distance().unwrap_or(f64::INFINITY);
    if small(last) && small(residual) {
        trace.converged = true;
        return Some(Ok(()));
    }
    if trace.stalled(3) {
        return Some(Err(SolveError::NotConverged {
            reason: crate::error::NonConvergence::NonContraction,
            trace: Box::new(trace.clone()),
        }));
    }
    if trace.iterations() >= config.max_fp {
        return Some(Err(SolveError::NotConverged {
            reason: crate::error::NonConvergence::MaxIterations,
            trace: Box::new(trace.clone()),
        }));
    }
    None
}

fn in_window(index: usize, e: SolveError) -> SolveError {
    SolveError::Window {
        index,
        source: Box::new(e),
    }
}

/// `local_solve` on a fresh ensemble: one window `[T - width, T]`.
pub fn local_solve(spec: &ScenarioSpec, width: Option<f64>, config: &SolverConfig) -> Result<SolveResult, SolveError> {
    let ens = simulate_ensemble(spec, config)?;
    MeanFieldSolver::new(spec, &ens, config)?.local(width)
}

pub fn global_solve(spec: &ScenarioSpec, config: &SolverConfig) -> Result<SolveResult, SolveError> {
    let ens = simulate_ensemble(spec, config)?;
    MeanFieldSolver::new(spec, &ens, config)?.global()
}

pub fn picard_global(spec: &ScenarioSpec, config: &SolverConfig) -> Result<SolveResult, SolveError> {
    let ens = simulate_ensemble(spec, config)?;
    MeanFieldSolver::new(spec, &ens, config)?.picard()
}

pub fn shift_solve_simple(spec: &ScenarioSpec, config: &SolverConfig) -> Result<SolveResult, SolveError> {
    let ens = simulate_ensemble(spec, config)?;
    MeanFieldSolver::new(spec, &ens, config)?.shift_simple()
}

pub fn shift_fixed_point(spec: &ScenarioSpec, config: &SolverConfig) -> Result<SolveResult, SolveError> {
    let ens = simulate_ensemble(spec, config)?;
    MeanFieldSolver::new(spec, &ens, config)?.shift_fixed_point()
}

pub fn multidim_solve(spec: &ScenarioSpec, config: &SolverConfig) -> Result<SolveResult, SolveError> {
    let ens = simulate_ensemble(spec, config)?;
    MeanFieldSolver::new(spec, &ens, config)?.multidim()
}
