//! Stored reference solutions. Each fixture records the scenario and the
//! lattice settings that produced it, so it can be rebuilt from scratch.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::lattice::{brute_force_1d, LatticeConfig};
use crate::catalog;
use crate::error::{Error, Result};
use crate::scenario::{Generator, ScenarioSpec};

pub const FIXTURE_VERSION: u32 = 1;

/// Names of all fixtures known to [`generate`].
pub const FIXTURES: &[&str] = &["ex2.1-small"];

/// Change of `E[Y_0]` under successive halvings of the lattice step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Refinement {
    pub steps: Vec<usize>,
    pub m_y0: Vec<f64>,
    /// `|m(4N) - m(2N)| / |m(2N) - m(N)|`.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fixture {
    pub name: String,
    pub version: u32,
    pub scenario: String,
    pub lattice: LatticeConfig,
    pub times: Vec<f64>,
    pub m_y: Vec<f64>,
    pub m_z: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub refinement: Refinement,
}

impl Fixture {
    pub fn m_y_at(&self, t: f64) -> f64 {
        super::lattice::interpolate(&self.times, &self.m_y, t)
    }

    pub fn m_z_at(&self, t: f64) -> f64 {
        super::lattice::interpolate(&self.times, &self.m_z, t)
    }
}

/// Fixture directory; `MFBSDE_FIXTURES` overrides the in-tree default.
pub fn fixture_dir() -> PathBuf {
    std::env::var_os("MFBSDE_FIXTURES")
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures"))
}

pub fn fixture_scenario(name: &str) -> Result<ScenarioSpec> {
    match name {
        "ex2.1-small" => Ok(catalog::ex21_small()),
        other => Err(Error::Fixture(format!("unknown fixture '{other}'"))),
    }
}

fn describe(spec: &ScenarioSpec) -> String {
    let gen = match &spec.generator {
        Generator::Single(f) => format!("f = {f}"),
        Generator::Additive { f1, f2 } => format!("f1 = {f1}, f2 = {f2}"),
    };
    let c = spec.constants;
    format!(
        "{}: T = {}, xi = {}, {gen}, C = {}, gamma = {}, alpha = {}",
        spec.name, spec.horizon, spec.terminal.expr, c.c, c.gamma, c.alpha
    )
}

/// Builds a fixture by running the lattice solver at `config.steps` and at
/// a quarter and half of it.
pub fn generate(name: &str, config: &LatticeConfig) -> Result<Fixture> {
    let spec = fixture_scenario(name)?;
    let fine = brute_force_1d(&spec, config)?;
    let mut steps = vec![config.steps / 4, config.steps / 2];
    let mut m_y0 = Vec::new();
    for &s in &steps {
        let cfg = LatticeConfig { steps: s, ..config.clone() };
        m_y0.push(brute_force_1d(&spec, &cfg)?.m_y[0]);
    }
    steps.push(config.steps);
    m_y0.push(fine.m_y[0]);
    let ratio = (m_y0[2] - m_y0[1]).abs() / (m_y0[1] - m_y0[0]).abs();
    Ok(Fixture {
        name: name.to_string(),
        version: FIXTURE_VERSION,
        scenario: describe(&spec),
        lattice: config.clone(),
        iterations: fine.trace.iterations(),
        converged: fine.trace.converged,
        times: fine.times,
        m_y: fine.m_y,
        m_z: fine.m_z,
        refinement: Refinement { steps, m_y0, ratio },
    })
}

/// Regenerates every fixture into `dir` and returns the written paths.
pub fn regenerate(dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for name in FIXTURES {
        let fx = generate(name, &LatticeConfig::default())?;
        let path = dir.join(format!("{name}.json"));
        fs::write(&path, serde_json::to_string_pretty(&fx)?)?;
        written.push(path);
    }
    Ok(written)
}

pub fn load(name: &str) -> Result<Fixture> {
    load_from(&fixture_dir(), name)
}

pub fn load_from(dir: &Path, name: &str) -> Result<Fixture> {
    let path = dir.join(format!("{name}.json"));
    let text = fs::read_to_string(&path).map_err(|e| {
        Error::Fixture(format!(
            "cannot read {}: {e}; regenerate with `mfbsde fixtures --out {}`",
            path.display(),
            dir.display()
        ))
    })?;
    let fx: Fixture = serde_json::from_str(&text)?;
    if fx.version != FIXTURE_VERSION {
        return Err(Error::Fixture(format!(
            "{} has version {}, expected {FIXTURE_VERSION}; regenerate with `mfbsde fixtures`",
            path.display(),
            fx.version
        )));
    }
    Ok(fx)
}
