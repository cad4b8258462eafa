//! Problem statements: generators, terminal condition, declared constants.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dsl::{
    check_signature, eval_scalar, evaluate, evaluate_batch, parse, parse_expr, BatchBindings,
    BatchVar, Bindings, DslError, EvalError, Expr, GeneratorExpr, Signature,
};
use crate::error::InvalidArgument;

/// Structural constants the user asserts for a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Constants {
    /// Growth and Lipschitz constant.
    pub c: f64,
    /// Coefficient of the quadratic term `gamma/2 |z|^2`.
    pub gamma: f64,
    /// Exponent of the mean-of-`z` growth, in `[0, 1)`.
    pub alpha: f64,
    /// Declared bound on `|xi|`.
    pub xi_bound: f64,
}

impl Constants {
    pub fn validate(&self) -> Result<(), InvalidArgument> {
        if !(self.c >= 0.0 && self.c.is_finite()) {
            return Err(InvalidArgument::new(format!("C must be finite and >= 0, got {}", self.c)));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(InvalidArgument::new(format!("gamma must be > 0, got {}", self.gamma)));
        }
        if !(0.0..1.0).contains(&self.alpha) {
            return Err(InvalidArgument::new(format!("alpha must lie in [0, 1), got {}", self.alpha)));
        }
        if !(self.xi_bound >= 0.0) {
            return Err(InvalidArgument::new(format!(
                "xi_bound must be >= 0, got {}",
                self.xi_bound
            )));
        }
        Ok(())
    }
}

/// Structural forms the user asserts the generator has. Recorded verbatim;
/// solvers use them only to refuse obviously mismatched requests.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Flags {
    /// Linear-quadratic growth with locally Lipschitz dependence (local theory).
    pub local_form: bool,
    /// `f(s,0,0,0,0) + h` has linear growth in `(y, ybar)` and `h` is Lipschitz
    /// (global theory).
    pub global_form: bool,
    /// Additive expectation `f1 + E[f2]` with scalar values.
    pub shift_form: bool,
    /// Additive expectation with Lipschitz `f1`, vector values.
    pub multidim_form: bool,
}

impl Flags {
    pub fn from_names<'a>(names: impl IntoIterator<Item = &'a str>) -> Result<Self, InvalidArgument> {
        let mut f = Flags::default();
        for n in names {
            match n {
                "local" => f.local_form = true,
                "global" => f.global_form = true,
                "shift" => f.shift_form = true,
                "multidim" => f.multidim_form = true,
                other => {
                    return Err(InvalidArgument::new(format!(
                        "unknown structural flag '{other}' (expected local, global, shift, multidim)"
                    )))
                }
            }
        }
        Ok(f)
    }

    pub fn names(&self) -> Vec<&'static str> {
        let mut v = Vec::new();
        if self.local_form {
            v.push("local");
        }
        if self.global_form {
            v.push("global");
        }
        if self.shift_form {
            v.push("shift");
        }
        if self.multidim_form {
            v.push("multidim");
        }
        v
    }
}

/// How the driver is split.
#[derive(Debug, Clone, PartialEq)]
pub enum Generator {
    Single(GeneratorExpr),
    /// `f1(s, y, ybar, z, zbar) + E[f2(s, y, ybar, z, zbar)]`.
    Additive { f1: GeneratorExpr, f2: GeneratorExpr },
}

impl Generator {
    pub fn is_single(&self) -> bool {
        matches!(self, Generator::Single(_))
    }
}

/// Terminal condition `xi = phi(W_T)`, optionally clamped to `|xi| <= clamp`.
#[derive(Debug, Clone, PartialEq)]
pub struct Terminal {
    pub expr: GeneratorExpr,
    pub clamp: Option<f64>,
}

impl Terminal {
    /// Evaluates `xi` for a batch of terminal positions laid out path-major
    /// (`d` coordinates per path). Result is path-major with `n` values per path.
    pub fn evaluate(&self, positions: &[f64], d: usize) -> Result<Vec<f64>, EvalError> {
        let paths = positions.len() / d;
        let cols: Vec<Vec<f64>> = (0..d)
            .map(|j| (0..paths).map(|p| positions[p * d + j]).collect())
            .collect();
        let mut bb = BatchBindings::empty(paths, 0.0, d);
        bb.w = BatchVar::Cols(cols.iter().map(|c| c.as_slice()).collect());
        let comps = evaluate_batch(&self.expr, &bb)?;
        let n = comps.len();
        let mut out = vec![0.0; paths * n];
        for (k, col) in comps.iter().enumerate() {
            for p in 0..paths {
                out[p * n + k] = col[p];
            }
        }
        if let Some(c) = self.clamp {
            for row in out.chunks_mut(n) {
                let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm > c {
                    let s = c / norm;
                    row.iter_mut().for_each(|x| *x *= s);
                }
            }
        }
        Ok(out)
    }

    pub fn evaluate_point(&self, w: &[f64]) -> Result<Vec<f64>, EvalError> {
        let mut v = evaluate(&self.expr, &Bindings::terminal(w))?;
        if let Some(c) = self.clamp {
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > c {
                v.iter_mut().for_each(|x| *x *= c / norm);
            }
        }
        Ok(v)
    }
}

/// Growth envelope `|f(s, y, z)| <= g(s) + beta |y| + gamma/2 |z|^2` of the
/// frozen-mean problem, used by the exponential a-priori bound check.
#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    pub g: Expr,
    pub beta: f64,
    pub gamma: f64,
}

impl Envelope {
    pub fn g_at(&self, s: f64) -> Result<f64, EvalError> {
        eval_scalar(&self.g, &Bindings::new(s, &[], &[], &[], &[], 1))
    }
}

/// A mean-field BSDE problem.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub name: String,
    /// Dimension of `Y`.
    pub n: usize,
    /// Brownian dimension.
    pub d: usize,
    pub horizon: f64,
    pub terminal: Terminal,
    pub generator: Generator,
    pub constants: Constants,
    pub flags: Flags,
    pub envelope: Option<Envelope>,
}

impl ScenarioSpec {
    /// Validates dimensions, constants and variable usage.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.n == 0 || self.d == 0 {
            return Err(InvalidArgument::new("n and d must be >= 1").into());
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(InvalidArgument::new(format!(
                "horizon must be positive, got {}",
                self.horizon
            ))
            .into());
        }
        self.constants.validate()?;
        if let Some(c) = self.terminal.clamp {
            if !(c >= 0.0) {
                return Err(InvalidArgument::new("terminal clamp must be >= 0").into());
            }
            if c > self.constants.xi_bound {
                return Err(InvalidArgument::new(format!(
                    "terminal clamp {c} exceeds the declared xi_bound {}",
                    self.constants.xi_bound
                ))
                .into());
            }
        }
        if self.terminal.expr.output_dim() != self.n {
            return Err(InvalidArgument::new(format!(
                "terminal condition has {} components, expected n = {}",
                self.terminal.expr.output_dim(),
                self.n
            ))
            .into());
        }
        check_signature(&self.terminal.expr, &Signature::terminal(self.d))?;
        let sig = Signature::generator(self.n, self.d);
        let gens: Vec<&GeneratorExpr> = match &self.generator {
            Generator::Single(f) => vec![f],
            Generator::Additive { f1, f2 } => vec![f1, f2],
        };
        for g in gens {
            if g.output_dim() != self.n {
                return Err(InvalidArgument::new(format!(
                    "generator has {} components, expected n = {}",
                    g.output_dim(),
                    self.n
                ))
                .into());
            }
            check_signature(g, &sig)?;
        }
        if let Some(env) = &self.envelope {
            check_signature(
                &GeneratorExpr {
                    components: vec![env.g.clone()],
                },
                &Signature::time_only(),
            )?;
        }
        Ok(())
    }

    /// Builds a single-generator scenario from expression texts. A
    /// one-component generator is repeated for every output dimension.
    pub fn single(
        name: &str,
        n: usize,
        d: usize,
        horizon: f64,
        terminal: &str,
        generator: &str,
        constants: Constants,
    ) -> Result<Self, ScenarioError> {
        let spec = ScenarioSpec {
            name: name.to_string(),
            n,
            d,
            horizon,
            terminal: Terminal {
                expr: parse(terminal)?,
                clamp: None,
            },
            generator: Generator::Single(parse(generator)?.broadcast(n)),
            constants,
            flags: Flags::default(),
            envelope: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Builds an additive-expectation scenario from expression texts.
    #[allow(clippy::too_many_arguments)]
    pub fn additive(
        name: &str,
        n: usize,
        d: usize,
        horizon: f64,
        terminal: &str,
        f1: &str,
        f2: &str,
        constants: Constants,
    ) -> Result<Self, ScenarioError> {
        let spec = ScenarioSpec {
            name: name.to_string(),
            n,
            d,
            horizon,
            terminal: Terminal {
                expr: parse(terminal)?,
                clamp: None,
            },
            generator: Generator::Additive {
                f1: parse(f1)?.broadcast(n),
                f2: parse(f2)?.broadcast(n),
            },
            constants,
            flags: Flags::default(),
            envelope: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_flags(mut self, flags: Flags) -> Self {
        self.flags = flags;
        self
    }

    pub fn with_clamp(mut self, clamp: f64) -> Self {
        self.terminal.clamp = Some(clamp);
        self
    }

    pub fn with_envelope(mut self, g: &str, beta: f64, gamma: f64) -> Result<Self, ScenarioError> {
        self.envelope = Some(Envelope {
            g: parse_expr(g)?,
            beta,
            gamma,
        });
        self.validate()?;
        Ok(self)
    }

    pub fn is_additive(&self) -> bool {
        matches!(self.generator, Generator::Additive { .. })
    }

    /// Whether any generator reads the means `ybar` or `zbar`.
    pub fn uses_means(&self) -> bool {
        use crate::dsl::Var;
        match &self.generator {
            Generator::Single(f) => f.uses(Var::Ybar) || f.uses(Var::Zbar),
            Generator::Additive { f1, f2 } => {
                f1.uses(Var::Ybar) || f1.uses(Var::Zbar) || f2.uses(Var::Ybar) || f2.uses(Var::Zbar)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScenarioError {
    #[error(transparent)]
    InvalidArgument(#[from] InvalidArgument),
    #[error(transparent)]
    Dsl(#[from] DslError),
}

impl From<ScenarioError> for crate::error::Error {
    fn from(e: ScenarioError) -> Self {
        match e {
            ScenarioError::InvalidArgument(e) => e.into(),
            ScenarioError::Dsl(e) => e.into(),
        }
    }
}

/// Outcome of sampling the declared growth bound at random points.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthSpotCheck {
    pub samples: usize,
    pub violations: usize,
    /// Largest `|f| / bound` seen.
    pub worst_ratio: f64,
}

impl GrowthSpotCheck {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Samples `|f(s,y,ybar,z,zbar)| <= C(2 + |y| + |ybar| + |zbar|^(1+alpha)) + gamma/2 |z|^2`
/// at random points. This is evidence, not a proof.
pub fn spot_check_growth(
    spec: &ScenarioSpec,
    samples: usize,
    seed: u64,
) -> Result<GrowthSpotCheck, EvalError> {
    let Generator::Single(f) = &spec.generator else {
        return Ok(GrowthSpotCheck {
            samples: 0,
            violations: 0,
            worst_ratio: 0.0,
        });
    };
    let Constants { c, gamma, alpha, .. } = spec.constants;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n, d) = (spec.n, spec.d);
    let mut violations = 0;
    let mut worst: f64 = 0.0;
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    for _ in 0..samples {
        let scale = 10f64.powf(rng.gen_range(-2.0..1.5));
        let s = rng.gen_range(0.0..=spec.horizon);
        let mut draw = |len: usize| -> Vec<f64> {
            (0..len).map(|_| scale * rng.gen_range(-1.0..1.0)).collect()
        };
        let y = draw(n);
        let yb = draw(n);
        let z = draw(n * d);
        let zb = draw(n * d);
        let val = evaluate(f, &Bindings::new(s, &y, &yb, &z, &zb, d))?;
        let bound = c * (2.0 + norm(&y) + norm(&yb) + norm(&zb).powf(1.0 + alpha))
            + 0.5 * gamma * norm(&z).powi(2);
        let ratio = norm(&val) / bound;
        worst = worst.max(ratio);
        if ratio > 1.0 + 1e-12 {
            violations += 1;
        }
    }
    Ok(GrowthSpotCheck {
        samples,
        violations,
        worst_ratio: worst,
    })
}
