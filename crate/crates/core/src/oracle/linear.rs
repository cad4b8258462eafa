//! Closed-form solutions of linear mean-field BSDEs
//! `f = a y + b E[y] + c.z + dz.E[z] + g` with `xi = p + q.W_T`.
//!
//! The ansatz `Y_t = phi(t) + psi(t).W_t` gives `Z_t = psi(t)` with
//! `psi' = -a psi` and `phi' = -(a + b) phi - (c + dz).psi - g`.

use serde::{Deserialize, Serialize};

use crate::error::InvalidArgument;
use crate::grid::TimeGrid;
use crate::process::MeanCurve;

/// Right-continuous piecewise-constant function on `[0, T]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Piecewise {
    /// Interior breakpoints, strictly increasing.
    pub knots: Vec<f64>,
    /// `knots.len() + 1` values.
    pub values: Vec<f64>,
}

impl Piecewise {
    pub fn constant(v: f64) -> Self {
        Self {
            knots: Vec::new(),
            values: vec![v],
        }
    }

    pub fn new(knots: Vec<f64>, values: Vec<f64>) -> Result<Self, InvalidArgument> {
        if values.len() != knots.len() + 1 {
            return Err(InvalidArgument::new("piecewise function needs one more value than knots"));
        }
        if knots.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(InvalidArgument::new("knots must be strictly increasing"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(InvalidArgument::new("piecewise values must be finite"));
        }
        Ok(Self { knots, values })
    }

    /// Value on the piece containing `(t - 0, t)`, i.e. left limit at knots.
    fn value_left_of(&self, t: f64) -> f64 {
        let k = self.knots.iter().take_while(|&&x| x < t).count();
        self.values[k]
    }

    pub fn value(&self, t: f64) -> f64 {
        let k = self.knots.iter().take_while(|&&x| x <= t).count();
        self.values[k]
    }
}

/// One component of a (diagonal) linear system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearComponent {
    pub a: Piecewise,
    pub b: Piecewise,
    /// Coefficients of `z`, one per Brownian coordinate.
    pub c: Vec<Piecewise>,
    /// Coefficients of `E[z]`.
    pub dz: Vec<Piecewise>,
    pub g: Piecewise,
    /// Terminal intercept.
    pub p: f64,
    /// Terminal loading on `W_T`.
    pub q: Vec<f64>,
}

impl LinearComponent {
    /// Constant coefficients.
    #[allow(clippy::too_many_arguments)]
    pub fn constant(a: f64, b: f64, c: &[f64], dz: &[f64], g: f64, p: f64, q: &[f64]) -> Self {
        Self {
            a: Piecewise::constant(a),
            b: Piecewise::constant(b),
            c: c.iter().map(|&v| Piecewise::constant(v)).collect(),
            dz: dz.iter().map(|&v| Piecewise::constant(v)).collect(),
            g: Piecewise::constant(g),
            p,
            q: q.to_vec(),
        }
    }

    fn knots(&self) -> Vec<f64> {
        let mut k: Vec<f64> = std::iter::once(&self.a)
            .chain([&self.b, &self.g])
            .chain(&self.c)
            .chain(&self.dz)
            .flat_map(|f| f.knots.iter().copied())
            .collect();
        k.sort_by(f64::total_cmp);
        k.dedup();
        k
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearMeanFieldSpec {
    pub horizon: f64,
    pub d: usize,
    pub components: Vec<LinearComponent>,
}

impl LinearMeanFieldSpec {
    pub fn validate(&self) -> Result<(), InvalidArgument> {
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(InvalidArgument::new("horizon must be positive"));
        }
        if self.components.is_empty() || self.d == 0 {
            return Err(InvalidArgument::new("need n >= 1 and d >= 1"));
        }
        for c in &self.components {
            if c.c.len() != self.d || c.dz.len() != self.d || c.q.len() != self.d {
                return Err(InvalidArgument::new("z coefficients and q must have length d"));
            }
        }
        Ok(())
    }
}

/// `(e^{x tau} - 1) / x`, equal to `tau` at `x = 0`.
fn expm1_ratio(x: f64, tau: f64) -> f64 {
    if x == 0.0 {
        tau
    } else {
        (x * tau).exp_m1() / x
    }
}

/// Exact solution of a [`LinearMeanFieldSpec`].
#[derive(Debug, Clone)]
pub struct LinearSolution {
    spec: LinearMeanFieldSpec,
    /// Breakpoints `T = s_0 > s_1 > ... > 0` with `(phi, psi)` at each.
    anchors: Vec<Vec<(f64, f64, Vec<f64>)>>,
}

pub fn linear_closed_form(spec: &LinearMeanFieldSpec) -> Result<LinearSolution, InvalidArgument> {
    spec.validate()?;
    let t_end = spec.horizon;
    let anchors = spec
        .components
        .iter()
        .map(|comp| {
            let mut breaks: Vec<f64> = comp.knots().into_iter().filter(|&k| k > 0.0 && k < t_end).collect();
            breaks.reverse();
            let mut out = vec![(t_end, comp.p, comp.q.clone())];
            let mut cur = (t_end, comp.p, comp.q.clone());
            for &s in &breaks {
                let (phi, psi) = propagate(comp, cur.0, cur.1, &cur.2, s);
                cur = (s, phi, psi);
                out.push(cur.clone());
            }
            out
        })
        .collect();
    Ok(LinearSolution {
        spec: spec.clone(),
        anchors,
    })
}

/// Moves `(phi, psi)` from `t1` back to `t <= t1` on one constant piece.
fn propagate(comp: &LinearComponent, t1: f64, phi1: f64, psi1: &[f64], t: f64) -> (f64, Vec<f64>) {
    let tau = t1 - t;
    let a = comp.a.value_left_of(t1);
    let kappa = a + comp.b.value_left_of(t1);
    let g = comp.g.value_left_of(t1);
    let s: f64 = psi1
        .iter()
        .enumerate()
        .map(|(j, p)| (comp.c[j].value_left_of(t1) + comp.dz[j].value_left_of(t1)) * p)
        .sum();
    let psi = psi1.iter().map(|p| p * (a * tau).exp()).collect();
    let phi = (kappa * tau).exp() * (phi1 + s * expm1_ratio(a - kappa, tau)) + g * expm1_ratio(kappa, tau);
    (phi, psi)
}

impl LinearSolution {
    pub fn spec(&self) -> &LinearMeanFieldSpec {
        &self.spec
    }

    fn state(&self, k: usize, t: f64) -> (f64, Vec<f64>) {
        let anchors = &self.anchors[k];
        let (t1, phi1, psi1) = anchors
            .iter()
            .rev()
            .find(|(s, _, _)| *s >= t)
            .unwrap_or(&anchors[0]);
        propagate(&self.spec.components[k], *t1, *phi1, psi1, t)
    }

    /// `phi_k(t) = E[Y^k_t]`.
    pub fn phi(&self, k: usize, t: f64) -> f64 {
        self.state(k, t).0
    }

    /// `psi_k(t) = Z^k_t`, one entry per Brownian coordinate.
    pub fn psi(&self, k: usize, t: f64) -> Vec<f64> {
        self.state(k, t).1
    }

    pub fn y(&self, k: usize, t: f64, w: &[f64]) -> f64 {
        let (phi, psi) = self.state(k, t);
        phi + psi.iter().zip(w).map(|(a, b)| a * b).sum::<f64>()
    }

    /// `(E[Y], E[Z])` at the nodes of `grid`.
    pub fn mean_curves(&self, grid: &TimeGrid) -> (MeanCurve, MeanCurve) {
        let n = self.spec.components.len();
        let d = self.spec.d;
        let m_y = MeanCurve::from_fn(grid, n, |_, t| (0..n).map(|k| self.phi(k, t)).collect());
        let m_z = MeanCurve::from_fn(grid, n * d, |_, t| (0..n).flat_map(|k| self.psi(k, t)).collect());
        (m_y, m_z)
    }
}

/// Means produced by the frozen-mean map for a linear generator: with
/// `E[U] = m_u` and `E[V] = m_v` fixed, `E[Y]` solves
/// `phi' = -a phi - b m_u - c.psi - dz.m_v - g`. Integrated by RK4 with
/// linear interpolation of the input curves between nodes.
pub fn linear_mean_flow(
    spec: &LinearMeanFieldSpec,
    m_u: &MeanCurve,
    m_v: &MeanCurve,
    substeps: usize,
) -> Result<MeanCurve, InvalidArgument> {
    spec.validate()?;
    let grid = m_u.grid().clone();
    let n = spec.components.len();
    let d = spec.d;
    if m_u.dims() != n || m_v.dims() != n * d {
        return Err(InvalidArgument::new("mean curve dimensions do not match the linear spec"));
    }
    let exact = linear_closed_form(spec)?;
    let mut values = vec![0.0; grid.len() * n];
    for (k, comp) in spec.components.iter().enumerate() {
        let last = grid.steps();
        values[last * n + k] = comp.p;
        let rhs = |t: f64, phi: f64, lerp: f64, i: usize| -> f64 {
            let mu = m_u.value(i)[k] * (1.0 - lerp) + m_u.value(i + 1)[k] * lerp;
            let psi = exact.psi(k, t);
            let mut r = comp.a.value(t) * phi + comp.b.value(t) * mu + comp.g.value(t);
            for j in 0..d {
                let mv = m_v.value(i)[k * d + j] * (1.0 - lerp) + m_v.value(i + 1)[k * d + j] * lerp;
                r += comp.c[j].value(t) * psi[j] + comp.dz[j].value(t) * mv;
            }
            -r
        };
        let mut phi = comp.p;
        for i in (0..last).rev() {
            let (t0, t1) = (grid.time(i), grid.time(i + 1));
            let h = (t1 - t0) / substeps as f64;
            for m in 0..substeps {
                // integrate backward from t1 towards t0
                let t = t1 - m as f64 * h;
                let frac = |s: f64| (s - t0) / (t1 - t0);
                let k1 = rhs(t, phi, frac(t), i);
                let k2 = rhs(t - h / 2.0, phi - h / 2.0 * k1, frac(t - h / 2.0), i);
                let k3 = rhs(t - h / 2.0, phi - h / 2.0 * k2, frac(t - h / 2.0), i);
                let k4 = rhs(t - h, phi - h * k3, frac(t - h), i);
                phi -= h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            }
            values[i * n + k] = phi;
        }
    }
    MeanCurve::from_values(&grid, n, values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(comp: LinearComponent) -> LinearMeanFieldSpec {
        LinearMeanFieldSpec {
            horizon: 1.0,
            d: 1,
            components: vec![comp],
        }
    }

    #[test]
    fn mean_of_z_drift() {
        let s = linear_closed_form(&single(LinearComponent::constant(0.0, 0.0, &[0.0], &[1.0], 0.0, 0.0, &[1.0])))
            .unwrap();
        for t in [0.0, 0.3, 1.0] {
            assert!((s.phi(0, t) - (1.0 - t)).abs() < 1e-15);
            assert_eq!(s.psi(0, t), vec![1.0]);
        }
    }

    #[test]
    fn mean_of_y_growth() {
        let s = linear_closed_form(&single(LinearComponent::constant(0.0, 1.0, &[0.0], &[0.0], 0.0, 1.0, &[0.0])))
            .unwrap();
        for t in [0.0, 0.5, 1.0] {
            assert!((s.phi(0, t) - (1.0 - t).exp()).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_spec_is_zero() {
        let s = linear_closed_form(&single(LinearComponent::constant(0.0, 0.0, &[0.0], &[0.0], 0.0, 0.0, &[0.0])))
            .unwrap();
        assert_eq!(s.phi(0, 0.2), 0.0);
        assert_eq!(s.psi(0, 0.2), vec![0.0]);
    }

    #[test]
    fn piecewise_matches_fine_ode() {
        let comp = LinearComponent {
            a: Piecewise::new(vec![0.5], vec![0.3, -0.2]).unwrap(),
            b: Piecewise::new(vec![0.25], vec![0.1, 0.4]).unwrap(),
            c: vec![Piecewise::constant(0.7)],
            dz: vec![Piecewise::new(vec![0.6], vec![-0.5, 0.2]).unwrap()],
            g: Piecewise::new(vec![0.3, 0.8], vec![1.0, 0.0, -1.0]).unwrap(),
            p: 0.4,
            q: vec![1.3],
        };
        let s = linear_closed_form(&single(comp.clone())).unwrap();
        // explicit RK4 on (phi, psi) with many steps
        let m = 200_000;
        let h = 1.0 / m as f64;
        let (mut phi, mut psi) = (comp.p, comp.q[0]);
        // coefficients are looked up at the step midpoint so no stage reads across a knot
        let f = |tl: f64, phi: f64, psi: f64| {
            let a = comp.a.value(tl);
            (
                -(a + comp.b.value(tl)) * phi - (comp.c[0].value(tl) + comp.dz[0].value(tl)) * psi - comp.g.value(tl),
                -a * psi,
            )
        };
        for j in 0..m {
            let t = 1.0 - j as f64 * h;
            let tm = t - h / 2.0;
            let (a1, b1) = f(tm, phi, psi);
            let (a2, b2) = f(tm, phi - h / 2.0 * a1, psi - h / 2.0 * b1);
            let (a3, b3) = f(tm, phi - h / 2.0 * a2, psi - h / 2.0 * b2);
            let (a4, b4) = f(tm, phi - h * a3, psi - h * b3);
            phi -= h / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4);
            psi -= h / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4);
        }
        assert!((s.phi(0, 0.0) - phi).abs() < 1e-8, "{} vs {phi}", s.phi(0, 0.0));
        assert!((s.psi(0, 0.0)[0] - psi).abs() < 1e-8);
    }
}
