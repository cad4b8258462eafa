//! Least-squares projection onto polynomial features of the state.
//!
//! Features are tensor products of normalized probabilists' Hermite
//! polynomials `He_k(x) / sqrt(k!)` with total degree at most `p`, which are
//! orthonormal under a standard Gaussian and keep the Gram matrix well
//! conditioned when the state is `W_t / sqrt(t)`.
//!
//! All sums over paths are taken in fixed-size chunks that are combined in
//! chunk order, so results do not depend on the thread count.

use nalgebra::{Cholesky, DMatrix, Dyn};
use rayon::prelude::*;

use crate::error::RegressionError;

const CHUNK: usize = 4096;
/// Largest accepted `(max diag L / min diag L)^2` of the Gram factor.
const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionBasis {
    dim: usize,
    degree: usize,
    ridge: f64,
    exponents: Vec<Vec<usize>>,
}

impl RegressionBasis {
    pub fn new(dim: usize, degree: usize, ridge: f64) -> Self {
        let mut exponents = Vec::new();
        for total in 0..=degree {
            let mut current = vec![0; dim];
            push_compositions(&mut exponents, &mut current, 0, total);
        }
        Self {
            dim,
            degree,
            ridge,
            exponents,
        }
    }

    /// The constant function only.
    pub fn constant(dim: usize, ridge: f64) -> Self {
        Self::new(dim, 0, ridge)
    }

    pub fn len(&self) -> usize {
        self.exponents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exponents.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn ridge(&self) -> f64 {
        self.ridge
    }

    /// Writes the feature vector of state `x` into `out`.
    pub fn features(&self, x: &[f64], out: &mut [f64]) {
        let p = self.degree;
        // he[j * (p + 1) + k] = He_k(x_j) / sqrt(k!)
        let mut he = vec![0.0; self.dim * (p + 1)];
        for (j, &xj) in x.iter().enumerate().take(self.dim) {
            let row = &mut he[j * (p + 1)..(j + 1) * (p + 1)];
            let (mut prev, mut cur) = (0.0, 1.0);
            let mut fact = 1.0;
            row[0] = 1.0;
            for k in 1..=p {
                let next = xj * cur - (k - 1) as f64 * prev;
                prev = cur;
                cur = next;
                fact *= k as f64;
                row[k] = cur / fact.sqrt();
            }
        }
        for (f, e) in out.iter_mut().zip(&self.exponents) {
            let mut v = 1.0;
            for (j, &k) in e.iter().enumerate() {
                if k > 0 {
                    v *= he[j * (p + 1) + k];
                }
            }
            *f = v;
        }
    }
}

fn push_compositions(out: &mut Vec<Vec<usize>>, cur: &mut Vec<usize>, pos: usize, left: usize) {
    if pos + 1 == cur.len() || cur.is_empty() {
        if let Some(last) = cur.last_mut() {
            *last = left;
        }
        if !cur.is_empty() || left == 0 {
            out.push(cur.clone());
        }
        return;
    }
    for k in (0..=left).rev() {
        cur[pos] = k;
        push_compositions(out, cur, pos + 1, left - k);
    }
    cur[pos] = 0;
}

/// Cached factorization of one node's normal equations.
#[derive(Debug, Clone)]
pub struct Projector {
    basis: RegressionBasis,
    chol: Cholesky<f64, Dyn>,
    n_paths: usize,
    condition: f64,
}

impl Projector {
    /// Factors `Phi^T Phi / P + ridge I` for states laid out path-major.
    pub fn fit(basis: RegressionBasis, states: &[f64], node: usize) -> Result<Self, RegressionError> {
        let dim = basis.dim();
        if dim == 0 || states.len() % dim != 0 {
            return Err(RegressionError::Shape(format!(
                "{} state values do not split into vectors of length {dim}",
                states.len()
            )));
        }
        let n_paths = states.len() / dim;
        let k = basis.len();
        if n_paths <= k {
            return Err(RegressionError::TooFewPaths {
                paths: n_paths,
                features: k,
            });
        }
        let partial: Vec<Vec<f64>> = states
            .par_chunks(CHUNK * dim)
            .map(|chunk| {
                let mut g = vec![0.0; k * k];
                let mut phi = vec![0.0; k];
                for x in chunk.chunks_exact(dim) {
                    basis.features(x, &mut phi);
                    for a in 0..k {
                        let pa = phi[a];
                        for b in a..k {
                            g[a * k + b] += pa * phi[b];
                        }
                    }
                }
                g
            })
            .collect();
        let mut gram = DMatrix::<f64>::zeros(k, k);
        for g in &partial {
            for a in 0..k {
                for b in a..k {
                    gram[(a, b)] += g[a * k + b];
                }
            }
        }
        let scale = 1.0 / n_paths as f64;
        for a in 0..k {
            for b in a..k {
                let v = gram[(a, b)] * scale;
                gram[(a, b)] = v;
                gram[(b, a)] = v;
            }
            // the intercept is not penalized, so constants are fitted exactly
            if a > 0 {
                gram[(a, a)] += basis.ridge();
            }
        }
        let chol = Cholesky::new(gram).ok_or(RegressionError::RankDeficient {
            node,
            condition: f64::INFINITY,
        })?;
        let diag = chol.l_dirty().diagonal();
        let (lo, hi) = diag
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v.abs()), hi.max(v.abs())));
        let condition = (hi / lo).powi(2);
        if !(condition <= MAX_CONDITION) {
            return Err(RegressionError::RankDeficient { node, condition });
        }
        Ok(Self {
            basis,
            chol,
            n_paths,
            condition,
        })
    }

    pub fn basis(&self) -> &RegressionBasis {
        &self.basis
    }

    pub fn condition(&self) -> f64 {
        self.condition
    }

    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    /// Least-squares coefficients for each target column.
    pub fn coefficients(&self, states: &[f64], targets: &[&[f64]]) -> Result<Vec<Vec<f64>>, RegressionError> {
        let dim = self.basis.dim();
        let k = self.basis.len();
        let m = targets.len();
        for t in targets {
            if t.len() != self.n_paths {
                return Err(RegressionError::Shape(format!(
                    "target of length {} for {} paths",
                    t.len(),
                    self.n_paths
                )));
            }
        }
        if states.len() != self.n_paths * dim {
            return Err(RegressionError::Shape("state array does not match the fit".into()));
        }
        let chunks = self.n_paths.div_ceil(CHUNK);
        let partial: Vec<Vec<f64>> = (0..chunks)
            .into_par_iter()
            .map(|c| {
                let (lo, hi) = (c * CHUNK, ((c + 1) * CHUNK).min(self.n_paths));
                let mut rhs = vec![0.0; k * m];
                let mut phi = vec![0.0; k];
                for p in lo..hi {
                    self.basis.features(&states[p * dim..(p + 1) * dim], &mut phi);
                    for (j, t) in targets.iter().enumerate() {
                        let v = t[p];
                        for a in 0..k {
                            rhs[j * k + a] += phi[a] * v;
                        }
                    }
                }
                rhs
            })
            .collect();
        let mut rhs = DMatrix::<f64>::zeros(k, m);
        for part in &partial {
            for j in 0..m {
                for a in 0..k {
                    rhs[(a, j)] += part[j * k + a];
                }
            }
        }
        rhs /= self.n_paths as f64;
        let sol = self.chol.solve(&rhs);
        Ok((0..m).map(|j| sol.column(j).iter().copied().collect()).collect())
    }

    /// Evaluates fitted values `Phi c` for each coefficient vector.
    pub fn evaluate(&self, states: &[f64], coefs: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let dim = self.basis.dim();
        let k = self.basis.len();
        let mut out: Vec<Vec<f64>> = vec![vec![0.0; self.n_paths]; coefs.len()];
        let mut views: Vec<&mut [f64]> = out.iter_mut().map(|v| v.as_mut_slice()).collect();
        // split every output column into the same chunks
        let mut per_chunk: Vec<Vec<&mut [f64]>> = Vec::new();
        let mut rest: Vec<&mut [f64]> = views.drain(..).collect();
        while rest.first().is_some_and(|r| !r.is_empty()) {
            let mut head = Vec::with_capacity(rest.len());
            let mut tail = Vec::with_capacity(rest.len());
            for r in rest {
                let at = r.len().min(CHUNK);
                let (h, t) = r.split_at_mut(at);
                head.push(h);
                tail.push(t);
            }
            per_chunk.push(head);
            rest = tail;
        }
        per_chunk.into_par_iter().enumerate().for_each(|(c, mut cols)| {
            let mut phi = vec![0.0; k];
            let base = c * CHUNK;
            let len = cols.first().map_or(0, |c| c.len());
            for q in 0..len {
                let p = base + q;
                self.basis.features(&states[p * dim..(p + 1) * dim], &mut phi);
                for (col, coef) in cols.iter_mut().zip(coefs) {
                    let mut v = 0.0;
                    for a in 0..k {
                        v += phi[a] * coef[a];
                    }
                    col[q] = v;
                }
            }
        });
        out
    }

    /// Fitted conditional expectations of each target.
    pub fn project(&self, states: &[f64], targets: &[&[f64]]) -> Result<Vec<Vec<f64>>, RegressionError> {
        let coefs = self.coefficients(states, targets)?;
        Ok(self.evaluate(states, &coefs))
    }
}

/// One-shot regression of `values` on features of `states` (path-major,
/// `basis.dim()` coordinates per path). Returns fitted values and coefficients.
pub fn regress_conditional(
    values: &[f64],
    states: &[f64],
    basis: &RegressionBasis,
) -> Result<(Vec<f64>, Vec<f64>), RegressionError> {
    let proj = Projector::fit(basis.clone(), states, 0)?;
    let coefs = proj.coefficients(states, &[values])?;
    let fitted = proj.evaluate(states, &coefs).pop().expect("one target");
    Ok((fitted, coefs.into_iter().next().expect("one target")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basis_sizes() {
        assert_eq!(RegressionBasis::new(1, 3, 0.0).len(), 4);
        assert_eq!(RegressionBasis::new(2, 3, 0.0).len(), 10);
        assert_eq!(RegressionBasis::new(3, 2, 0.0).len(), 10);
        assert_eq!(RegressionBasis::constant(2, 0.0).len(), 1);
    }

    #[test]
    fn hermite_values() {
        let b = RegressionBasis::new(1, 3, 0.0);
        let mut f = [0.0; 4];
        b.features(&[2.0], &mut f);
        // He_2(2) = 3, He_3(2) = 2
        assert_eq!(f[0], 1.0);
        assert_eq!(f[1], 2.0);
        assert!((f[2] - 3.0 / 2f64.sqrt()).abs() < 1e-15);
        assert!((f[3] - 2.0 / 6f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn constants_and_linear_are_reproduced() {
        let states: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64 / 30.0 - 1.7).collect();
        let b = RegressionBasis::new(1, 3, 1e-12);
        let (fit, _) = regress_conditional(&vec![2.5; 1000], &states, &b).unwrap();
        let worst = fit.iter().map(|v| (v - 2.5).abs()).fold(0.0, f64::max); assert!(worst < 1e-12, "{worst}");
        let (fit, _) = regress_conditional(&states, &states, &b).unwrap();
        assert!(fit.iter().zip(&states).all(|(a, b)| (a - b).abs() < 1e-10));
    }

    #[test]
    fn failures_are_reported() {
        let b = RegressionBasis::new(1, 3, 0.0);
        assert!(matches!(
            regress_conditional(&[1.0; 3], &[0.0, 1.0, 2.0], &b),
            Err(RegressionError::TooFewPaths { .. })
        ));
        assert!(matches!(
            regress_conditional(&[1.0; 100], &[0.5; 100], &b),
            Err(RegressionError::RankDeficient { .. })
        ));
    }
}
