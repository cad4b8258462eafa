//! Binomial-lattice solver for one-dimensional mean-field BSDEs.
//!
//! `W` moves by `+-sqrt(h)` with probability 1/2. At each node
//! `Z = (Y_up - Y_down) / (2 sqrt(h))` and `Y` solves
//! `Y = (Y_up + Y_down)/2 + h f(t, Y, Z, E[Y_t], E[Z_t])` by fixed-point
//! iteration. An outer iteration updates the mean curves until they settle.

use serde::{Deserialize, Serialize};

use crate::dsl::{evaluate_batch, BatchBindings, BatchVar, Var};
use crate::error::{InvalidArgument, NonConvergence, SolveError};
use crate::meanfield::FixedPointTrace;
use crate::scenario::{Generator, ScenarioSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeConfig {
    pub steps: usize,
    /// Stop when successive mean curves differ by less than this in sup norm.
    pub tol: f64,
    pub max_iterations: usize,
    pub tol_inner: f64,
    pub max_inner: usize,
}

impl Default for LatticeConfig {
    fn default() -> Self {
        Self {
            steps: 1000,
            tol: 1e-10,
            max_iterations: 100,
            tol_inner: 1e-13,
            max_inner: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeSolution {
    pub times: Vec<f64>,
    pub m_y: Vec<f64>,
    pub m_z: Vec<f64>,
    pub trace: FixedPointTrace,
    /// `Y` at lattice level `i`, index `j` = number of up moves.
    #[serde(skip)]
    pub y: Vec<Vec<f64>>,
}

impl LatticeSolution {
    /// Linear interpolation of `E[Y]` at time `t`.
    pub fn m_y_at(&self, t: f64) -> f64 {
        interpolate(&self.times, &self.m_y, t)
    }

    pub fn m_z_at(&self, t: f64) -> f64 {
        interpolate(&self.times, &self.m_z, t)
    }
}

pub(crate) fn interpolate(times: &[f64], values: &[f64], t: f64) -> f64 {
    let last = times.len() - 1;
    if t <= times[0] {
        return values[0];
    }
    if t >= times[last] {
        return values[last];
    }
    let k = times.partition_point(|&s| s <= t) - 1;
    let w = (t - times[k]) / (times[k + 1] - times[k]);
    values[k] * (1.0 - w) + values[k + 1] * w
}

/// Binomial probabilities `C(i, j) / 2^i` for `j = 0..=i`.
fn level_weights(i: usize, ln_fact: &[f64]) -> Vec<f64> {
    let ln2 = std::f64::consts::LN_2;
    (0..=i)
        .map(|j| (ln_fact[i] - ln_fact[j] - ln_fact[i - j] - i as f64 * ln2).exp())
        .collect()
}

pub fn brute_force_1d(spec: &ScenarioSpec, config: &LatticeConfig) -> Result<LatticeSolution, SolveError> {
    let Generator::Single(expr) = &spec.generator else {
        return Err(SolveError::Incompatible("the lattice oracle needs a single generator".into()));
    };
    if spec.n != 1 || spec.d != 1 {
        return Err(SolveError::Incompatible("the lattice oracle is one-dimensional (n = d = 1)".into()));
    }
    if config.steps == 0 || !(config.tol > 0.0) || config.max_iterations == 0 {
        return Err(InvalidArgument::new("lattice needs steps >= 1, tol > 0 and at least one iteration").into());
    }
    let big_n = config.steps;
    let h = spec.horizon / big_n as f64;
    let sh = h.sqrt();
    let times: Vec<f64> = (0..=big_n).map(|i| i as f64 * h).collect();
    let mut ln_fact = vec![0.0; big_n + 1];
    for k in 1..=big_n {
        ln_fact[k] = ln_fact[k - 1] + (k as f64).ln();
    }
    let weights: Vec<Vec<f64>> = (0..=big_n).map(|i| level_weights(i, &ln_fact)).collect();

    let terminal: Vec<f64> = {
        let w: Vec<f64> = (0..=big_n).map(|j| (2.0 * j as f64 - big_n as f64) * sh).collect();
        spec.terminal
            .evaluate(&w, 1)
            .map_err(SolveError::Driver)?
    };
    let uses_y = expr.uses(Var::Y);

    let sweep = |m_y: &[f64], m_z: &[f64], f_on: bool| -> Result<(Vec<Vec<f64>>, Vec<f64>, Vec<f64>), SolveError> {
        let mut levels: Vec<Vec<f64>> = vec![Vec::new(); big_n + 1];
        levels[big_n] = terminal.clone();
        let mut new_my = vec![0.0; big_n + 1];
        let mut new_mz = vec![0.0; big_n + 1];
        for i in (0..big_n).rev() {
            let next = &levels[i + 1];
            let cond: Vec<f64> = (0..=i).map(|j| 0.5 * (next[j + 1] + next[j])).collect();
            let z: Vec<f64> = (0..=i).map(|j| (next[j + 1] - next[j]) / (2.0 * sh)).collect();
            let mut y = cond.clone();
            if f_on {
                let t = times[i];
                let eval = |y: &[f64]| -> Result<Vec<f64>, SolveError> {
                    let mut bb = BatchBindings::empty(i + 1, t, 1);
                    bb.y = BatchVar::Cols(vec![y]);
                    bb.z = BatchVar::Cols(vec![&z]);
                    let ybar = [m_y[i]];
                    let zbar = [m_z[i]];
                    bb.ybar = BatchVar::Const(&ybar);
                    bb.zbar = BatchVar::Const(&zbar);
                    Ok(evaluate_batch(expr, &bb)?.swap_remove(0))
                };
                if uses_y {
                    let mut done = false;
                    for _ in 0..config.max_inner {
                        let f = eval(&y)?;
                        let mut worst = 0.0f64;
                        for j in 0..=i {
                            let target = cond[j] + h * f[j];
                            worst = worst.max((target - y[j]).abs() / (1.0 + y[j].abs()));
                            y[j] = target;
                        }
                        if worst <= config.tol_inner {
                            done = true;
                            break;
                        }
                    }
                    if !done {
                        return Err(SolveError::StepDivergence {
                            node: i,
                            iterations: config.max_inner,
                        });
                    }
                } else {
                    let f = eval(&y)?;
                    for j in 0..=i {
                        y[j] = cond[j] + h * f[j];
                    }
                }
            }
            if y.iter().chain(&z).any(|v| !v.is_finite()) {
                return Err(SolveError::NonFinite { node: i });
            }
            new_my[i] = weights[i].iter().zip(&y).map(|(w, v)| w * v).sum();
            new_mz[i] = weights[i].iter().zip(&z).map(|(w, v)| w * v).sum();
            levels[i] = y;
        }
        new_my[big_n] = weights[big_n].iter().zip(&terminal).map(|(w, v)| w * v).sum();
        new_mz[big_n] = new_mz[big_n - 1];
        Ok((levels, new_my, new_mz))
    };

    // iterate zero: the martingale of the terminal value, with E[Z] = 0
    let (_, mut m_y, _) = sweep(&vec![0.0; big_n + 1], &vec![0.0; big_n + 1], false)?;
    let mut m_z = vec![0.0; big_n + 1];
    let mut trace = FixedPointTrace::new();
    loop {
        let (levels, new_my, new_mz) = sweep(&m_y, &m_z, true)?;
        let dy = new_my.iter().zip(&m_y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let dz = new_mz.iter().zip(&m_z).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        trace.push(dy, dz);
        m_y = new_my;
        m_z = new_mz;
        if dy + dz < config.tol {
            trace.converged = true;
            return Ok(LatticeSolution {
                times,
                m_y,
                m_z,
                trace,
                y: levels,
            });
        }
        if trace.iterations() >= config.max_iterations {
            return Err(SolveError::NotConverged {
                reason: NonConvergence::MaxIterations,
                trace: Box::new(trace),
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::Constants;

    fn consts() -> Constants {
        Constants {
            c: 0.25,
            gamma: 0.5,
            alpha: 0.5,
            xi_bound: 1.0,
        }
    }

    #[test]
    fn zero_driver_is_an_exact_martingale() {
        let spec = ScenarioSpec::single("m", 1, 1, 1.0, "w^2", "0", consts()).unwrap();
        let sol = brute_force_1d(&spec, &LatticeConfig { steps: 64, ..Default::default() }).unwrap();
        // E[W_T^2 | W_t] = W_t^2 + T - t holds exactly on the binomial lattice
        let h: f64 = 1.0 / 64.0;
        for (i, level) in sol.y.iter().enumerate() {
            for (j, y) in level.iter().enumerate() {
                let w = (2.0 * j as f64 - i as f64) * h.sqrt();
                assert!((y - (w * w + 1.0 - i as f64 * h)).abs() < 1e-12);
            }
        }
        assert_eq!(sol.trace.iterations(), 1);
    }

    #[test]
    fn weights_sum_to_one() {
        let mut ln_fact = vec![0.0; 2001];
        for k in 1..=2000 {
            ln_fact[k] = ln_fact[k - 1] + (k as f64).ln();
        }
        for i in [0, 1, 7, 2000] {
            let s: f64 = level_weights(i, &ln_fact).iter().sum();
            assert!((s - 1.0).abs() < 1e-10, "{i}: {s}");
        }
    }
}
