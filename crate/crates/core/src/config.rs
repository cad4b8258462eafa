//! Solver settings and the TOML scenario file format.
//!
//! ```toml
//! [scenario]
//! name = "example"
//! n = 1
//! d = 1
//! horizon = 1.0
//! terminal = "sin(w[0])"
//! terminal_clamp = 1.0              # optional
//! generator = "..."                 # or builtin = "ex2.2", or f1 = "...", f2 = "..."
//! flags = ["local", "global"]
//!
//! [constants]
//! C = 0.2
//! gamma = 0.4
//! alpha = 0.0
//! xi_bound = 1.0
//!
//! [envelope]                        # optional
//! g = "0.2*(1 + s)"
//! beta = 0.2
//! gamma = 0.4
//!
//! [solver]                          # every key optional
//! steps = 50
//! paths = 20000
//!
//! [output]
//! dir = "out"
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dsl::{parse, parse_expr, Builtin};
use crate::error::{Error, InvalidArgument};
use crate::scenario::{Constants, Envelope, Flags, Generator, ScenarioSpec, Terminal};

/// Numerical settings shared by all solvers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Number of time steps `N`.
    pub steps: usize,
    pub paths: usize,
    /// Total polynomial degree of the regression basis.
    pub degree: usize,
    /// Ridge added to the normalized Gram matrix.
    pub ridge: f64,
    /// Tolerance of the implicit per-node `y` iteration.
    pub tol_inner: f64,
    pub max_inner: usize,
    /// Tolerance of outer fixed-point iterations.
    pub tol_fp: f64,
    pub max_fp: usize,
    pub seed: u64,
    /// Number of equal stitching windows; `None` lets the certificate decide.
    pub windows: Option<usize>,
    /// Unsafe: replaces the certified window width in all checks.
    pub override_epsilon: Option<f64>,
    /// Absolute clamp on `|z|` in driver evaluations; `None` picks
    /// `max(10, sqrt(A / h))`.
    pub z_clamp: Option<f64>,
    /// Pair every path with its reflection.
    pub antithetic: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            steps: 50,
            paths: 20_000,
            degree: 3,
            ridge: 1e-10,
            tol_inner: 1e-12,
            max_inner: 100,
            tol_fp: 1e-6,
            max_fp: 50,
            seed: 1,
            windows: None,
            override_epsilon: None,
            z_clamp: None,
            antithetic: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), InvalidArgument> {
        if self.steps == 0 {
            return Err(InvalidArgument::new("steps must be >= 1"));
        }
        if self.paths < 2 {
            return Err(InvalidArgument::new("paths must be >= 2"));
        }
        if !(self.tol_inner > 0.0) || !(self.tol_fp >= 0.0) {
            return Err(InvalidArgument::new("tolerances must be positive"));
        }
        if self.max_inner == 0 || self.max_fp == 0 {
            return Err(InvalidArgument::new("iteration caps must be >= 1"));
        }
        if !(self.ridge >= 0.0) {
            return Err(InvalidArgument::new("ridge must be >= 0"));
        }
        if let Some(e) = self.override_epsilon {
            if !(e > 0.0) {
                return Err(InvalidArgument::new("override_epsilon must be > 0"));
            }
        }
        if let Some(w) = self.windows {
            if w == 0 || w > self.steps {
                return Err(InvalidArgument::new(format!(
                    "windows must lie in 1..={}",
                    self.steps
                )));
            }
        }
        if let Some(z) = self.z_clamp {
            if !(z > 0.0) {
                return Err(InvalidArgument::new("z_clamp must be > 0"));
            }
        }
        if self.antithetic && self.paths % 2 != 0 {
            return Err(InvalidArgument::new("antithetic sampling needs an even path count"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    name: Option<String>,
    #[serde(default = "one")]
    n: usize,
    #[serde(default = "one")]
    d: usize,
    horizon: f64,
    terminal: String,
    terminal_clamp: Option<f64>,
    generator: Option<String>,
    builtin: Option<String>,
    f1: Option<String>,
    f2: Option<String>,
    #[serde(default)]
    flags: Vec<String>,
}

fn one() -> usize {
    1
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConstants {
    #[serde(rename = "C")]
    c: f64,
    gamma: f64,
    #[serde(default)]
    alpha: f64,
    xi_bound: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEnvelope {
    g: String,
    beta: f64,
    gamma: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    scenario: RawScenario,
    constants: RawConstants,
    envelope: Option<RawEnvelope>,
    #[serde(default)]
    solver: SolverConfig,
    #[serde(default)]
    output: OutputConfig,
}

/// A parsed scenario file.
#[derive(Debug, Clone)]
pub struct ScenarioFile {
    pub spec: ScenarioSpec,
    pub solver: SolverConfig,
    pub output: OutputConfig,
}

impl ScenarioFile {
    pub fn from_toml(text: &str) -> Result<Self, Error> {
        let raw: RawFile = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let s = raw.scenario;
        let n = s.n;
        let generator = match (s.generator, s.builtin, s.f1, s.f2) {
            (Some(g), None, None, None) => Generator::Single(parse(&g)?.broadcast(n)),
            (None, Some(b), None, None) => {
                let b: Builtin = b.parse()?;
                Generator::Single(b.expr().broadcast(n))
            }
            (None, None, Some(f1), Some(f2)) => Generator::Additive {
                f1: parse(&f1)?.broadcast(n),
                f2: parse(&f2)?.broadcast(n),
            },
            _ => {
                return Err(Error::Config(
                    "[scenario] needs exactly one of: generator, builtin, or the pair f1 + f2".into(),
                ))
            }
        };
        let envelope = match raw.envelope {
            Some(e) => Some(Envelope {
                g: parse_expr(&e.g)?,
                beta: e.beta,
                gamma: e.gamma,
            }),
            None => None,
        };
        let spec = ScenarioSpec {
            name: s.name.unwrap_or_else(|| "scenario".into()),
            n,
            d: s.d,
            horizon: s.horizon,
            terminal: Terminal {
                expr: parse(&s.terminal)?,
                clamp: s.terminal_clamp,
            },
            generator,
            constants: Constants {
                c: raw.constants.c,
                gamma: raw.constants.gamma,
                alpha: raw.constants.alpha,
                xi_bound: raw.constants.xi_bound,
            },
            flags: Flags::from_names(s.flags.iter().map(String::as_str))?,
            envelope,
        };
        spec.validate()?;
        raw.solver.validate()?;
        Ok(Self {
            spec,
            solver: raw.solver,
            output: raw.output,
        })
    }

    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE: &str = r#"
[scenario]
name = "desk"
horizon = 1.0
terminal = "sin(w[0])"
builtin = "ex2.2"
flags = ["global"]

[constants]
C = 1.0
gamma = 1.0
xi_bound = 1.0

[solver]
steps = 10
paths = 100
"#;

    #[test]
    fn parses_example() {
        let f = ScenarioFile::from_toml(EXAMPLE).unwrap();
        assert_eq!(f.spec.name, "desk");
        assert!(f.spec.flags.global_form);
        assert_eq!(f.solver.steps, 10);
        assert_eq!(f.solver.degree, 3);
        assert_eq!(
            f.spec.generator,
            Generator::Single(Builtin::Ex22.expr())
        );
    }

    #[test]
    fn rejects_bad_input() {
        let bad_alpha = EXAMPLE.replace("xi_bound = 1.0", "xi_bound = 1.0\nalpha = 1.0");
        let err = ScenarioFile::from_toml(&bad_alpha).unwrap_err();
        assert!(err.is_input_error(), "{err}");
        let both = EXAMPLE.replace("builtin = \"ex2.2\"", "builtin = \"ex2.2\"\ngenerator = \"y\"");
        assert!(matches!(ScenarioFile::from_toml(&both), Err(Error::Config(_))));
        let unknown = EXAMPLE.replace("paths = 100", "paths = 100\nfoo = 1");
        assert!(ScenarioFile::from_toml(&unknown).is_err());
        let syntax = EXAMPLE.replace("sin(w[0])", "sin(w[0]");
        assert!(matches!(ScenarioFile::from_toml(&syntax), Err(Error::Dsl(_))));
    }
}
