//! Sampled adapted processes and their deterministic mean curves.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::InvalidArgument;
use crate::grid::TimeGrid;

/// Values of an adapted process per `(path, node)`, each a vector of
/// `dims` reals. `dims = n` for `Y` and `n * d` (row-major `n x d`) for `Z`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessGrid {
    grid: TimeGrid,
    n_paths: usize,
    dims: usize,
    values: Vec<f64>,
}

impl ProcessGrid {
    pub fn zeros(grid: &TimeGrid, n_paths: usize, dims: usize) -> Self {
        Self::constant(grid, n_paths, &vec![0.0; dims])
    }

    pub fn constant(grid: &TimeGrid, n_paths: usize, value: &[f64]) -> Self {
        let dims = value.len();
        let mut values = Vec::with_capacity(grid.len() * n_paths * dims);
        for _ in 0..grid.len() * n_paths {
            values.extend_from_slice(value);
        }
        Self {
            grid: grid.clone(),
            n_paths,
            dims,
            values,
        }
    }

    /// Builds a grid by evaluating `f(path, node, out)` at every sample.
    pub fn from_fn(
        grid: &TimeGrid,
        n_paths: usize,
        dims: usize,
        mut f: impl FnMut(usize, usize, &mut [f64]),
    ) -> Self {
        let mut g = Self::zeros(grid, n_paths, dims);
        for i in 0..grid.len() {
            for p in 0..n_paths {
                f(p, i, g.get_mut(p, i));
            }
        }
        g
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn get(&self, p: usize, i: usize) -> &[f64] {
        let at = (i * self.n_paths + p) * self.dims;
        &self.values[at..at + self.dims]
    }

    pub fn get_mut(&mut self, p: usize, i: usize) -> &mut [f64] {
        let at = (i * self.n_paths + p) * self.dims;
        &mut self.values[at..at + self.dims]
    }

    /// All samples at node `i`, path-major.
    pub fn node(&self, i: usize) -> &[f64] {
        let stride = self.n_paths * self.dims;
        &self.values[i * stride..(i + 1) * stride]
    }

    pub fn node_mut(&mut self, i: usize) -> &mut [f64] {
        let stride = self.n_paths * self.dims;
        &mut self.values[i * stride..(i + 1) * stride]
    }

    /// Component `k` at node `i` as a column over paths.
    pub fn column(&self, i: usize, k: usize) -> Vec<f64> {
        self.node(i).chunks_exact(self.dims).map(|v| v[k]).collect()
    }

    pub fn set_column(&mut self, i: usize, k: usize, col: &[f64]) {
        let dims = self.dims;
        for (v, c) in self.node_mut(i).chunks_exact_mut(dims).zip(col) {
            v[k] = *c;
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// First node holding a non-finite value, if any.
    pub fn first_non_finite_node(&self) -> Option<usize> {
        (0..self.grid.len()).find(|&i| self.node(i).iter().any(|v| !v.is_finite()))
    }

    /// `a * self + b * other`, sample by sample.
    pub fn combine(&self, a: f64, other: &ProcessGrid, b: f64) -> Result<Self, InvalidArgument> {
        self.check_same_shape(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| a * x + b * y)
            .collect();
        Ok(Self {
            values,
            ..self.clone()
        })
    }

    pub fn check_same_shape(&self, other: &ProcessGrid) -> Result<(), InvalidArgument> {
        if self.n_paths != other.n_paths
            || self.dims != other.dims
            || self.grid.len() != other.grid.len()
        {
            return Err(InvalidArgument::new(format!(
                "process shapes differ: {}x{}x{} vs {}x{}x{}",
                self.n_paths,
                self.grid.len(),
                self.dims,
                other.n_paths,
                other.grid.len(),
                other.dims
            )));
        }
        Ok(())
    }

    /// Copies node range `start..=end` from `other`.
    pub fn copy_nodes_from(&mut self, other: &ProcessGrid, start: usize, end: usize) {
        let stride = self.n_paths * self.dims;
        self.values[start * stride..(end + 1) * stride]
            .copy_from_slice(&other.values[start * stride..(end + 1) * stride]);
    }

    /// Per-node sample standard deviation of each component.
    pub fn node_std(&self) -> MeanCurve {
        let mean = ensemble_mean(self);
        let dims = self.dims;
        let denom = (self.n_paths.max(2) - 1) as f64;
        let values: Vec<f64> = (0..self.grid.len())
            .into_par_iter()
            .flat_map_iter(|i| {
                let m = mean.value(i);
                let mut acc = vec![0.0; dims];
                for v in self.node(i).chunks_exact(dims) {
                    for k in 0..dims {
                        let d = v[k] - m[k];
                        acc[k] += d * d;
                    }
                }
                acc.into_iter().map(move |s| (s / denom).sqrt())
            })
            .collect();
        MeanCurve {
            grid: self.grid.clone(),
            dims,
            values,
        }
    }

    /// Per-node `E|X_t|^2` with `|.|` the Euclidean (Frobenius) norm.
    pub fn node_mean_square(&self) -> Vec<f64> {
        let p = self.n_paths as f64;
        (0..self.grid.len())
            .into_par_iter()
            .map(|i| self.node(i).iter().map(|v| v * v).sum::<f64>() / p)
            .collect()
    }

    /// Per-node `max_p |X_t|`.
    pub fn node_abs_max(&self) -> Vec<f64> {
        (0..self.grid.len())
            .into_par_iter()
            .map(|i| {
                self.node(i)
                    .chunks_exact(self.dims)
                    .map(norm2)
                    .fold(0.0, f64::max)
            })
            .collect()
    }
}

/// Deterministic curve `t_i -> m(t_i)` with one vector per node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanCurve {
    grid: TimeGrid,
    dims: usize,
    values: Vec<f64>,
}

impl MeanCurve {
    pub fn zeros(grid: &TimeGrid, dims: usize) -> Self {
        Self::constant(grid, &vec![0.0; dims])
    }

    pub fn constant(grid: &TimeGrid, value: &[f64]) -> Self {
        let mut values = Vec::with_capacity(grid.len() * value.len());
        for _ in 0..grid.len() {
            values.extend_from_slice(value);
        }
        Self {
            grid: grid.clone(),
            dims: value.len(),
            values,
        }
    }

    pub fn from_fn(grid: &TimeGrid, dims: usize, mut f: impl FnMut(usize, f64) -> Vec<f64>) -> Self {
        let mut values = Vec::with_capacity(grid.len() * dims);
        for (i, &t) in grid.nodes().iter().enumerate() {
            let v = f(i, t);
            assert_eq!(v.len(), dims, "curve value has wrong dimension");
            values.extend(v);
        }
        Self {
            grid: grid.clone(),
            dims,
            values,
        }
    }

    pub fn from_values(grid: &TimeGrid, dims: usize, values: Vec<f64>) -> Result<Self, InvalidArgument> {
        if values.len() != grid.len() * dims {
            return Err(InvalidArgument::new(format!(
                "curve needs {} values, got {}",
                grid.len() * dims,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(InvalidArgument::new("curve values must be finite"));
        }
        Ok(Self {
            grid: grid.clone(),
            dims,
            values,
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn value(&self, i: usize) -> &[f64] {
        &self.values[i * self.dims..(i + 1) * self.dims]
    }

    pub fn value_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.values[i * self.dims..(i + 1) * self.dims]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Component `k` along the grid.
    pub fn component(&self, k: usize) -> Vec<f64> {
        self.values.chunks_exact(self.dims).map(|v| v[k]).collect()
    }

    /// `max_i |m(t_i) - other(t_i)|` over nodes `start..=end`.
    pub fn sup_distance_on(&self, other: &MeanCurve, start: usize, end: usize) -> f64 {
        (start..=end)
            .map(|i| {
                let d: Vec<f64> = self
                    .value(i)
                    .iter()
                    .zip(other.value(i))
                    .map(|(a, b)| a - b)
                    .collect();
                norm2(&d)
            })
            .fold(0.0, f64::max)
    }

    pub fn sup_distance(&self, other: &MeanCurve) -> f64 {
        self.sup_distance_on(other, 0, self.grid.steps())
    }
}

/// Node-wise average over paths. Summation runs in path order at every node,
/// so the result does not depend on the thread schedule.
pub fn ensemble_mean(process: &ProcessGrid) -> MeanCurve {
    let dims = process.dims;
    let p = process.n_paths as f64;
    let values: Vec<f64> = (0..process.grid.len())
        .into_par_iter()
        .flat_map_iter(|i| {
            let mut acc = vec![0.0; dims];
            for v in process.node(i).chunks_exact(dims) {
                for (a, x) in acc.iter_mut().zip(v) {
                    *a += x;
                }
            }
            acc.into_iter().map(move |s| s / p)
        })
        .collect();
    MeanCurve {
        grid: process.grid.clone(),
        dims,
        values,
    }
}

pub(crate) fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::PathEnsemble;
    use proptest::prelude::*;

    fn grid() -> TimeGrid {
        TimeGrid::uniform(1.0, 4).unwrap()
    }

    #[test]
    fn mean_of_constant() {
        let g = grid();
        let p = ProcessGrid::constant(&g, 7, &[1.5, -2.0]);
        let m = ensemble_mean(&p);
        for i in 0..g.len() {
            assert_eq!(m.value(i), &[1.5, -2.0]);
        }
    }

    #[test]
    fn mean_of_single_path_is_the_path() {
        let g = grid();
        let p = ProcessGrid::from_fn(&g, 1, 1, |_, i, out| out[0] = (i as f64).sin());
        let m = ensemble_mean(&p);
        for i in 0..g.len() {
            assert_eq!(m.value(i)[0], (i as f64).sin());
        }
    }

    #[test]
    fn brownian_mean_is_near_zero() {
        let g = TimeGrid::uniform(1.0, 10).unwrap();
        let n = 20_000;
        let e = PathEnsemble::simulate(&g, 1, n, 11).unwrap();
        let w = ProcessGrid::from_fn(&g, n, 1, |p, i, out| out[0] = e.position(p, i)[0]);
        let m = ensemble_mean(&w);
        for i in 0..g.len() {
            let bound = 4.0 * (g.time(i) / n as f64).sqrt();
            assert!(m.value(i)[0].abs() <= bound + 1e-15);
        }
    }

    #[test]
    fn std_and_second_moment() {
        let g = grid();
        let p = ProcessGrid::from_fn(&g, 2, 1, |p, _, out| out[0] = if p == 0 { 1.0 } else { -1.0 });
        assert!(p.node_mean_square().iter().all(|&v| v == 1.0));
        let sd = p.node_std();
        assert!((sd.value(0)[0] - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(p.node_abs_max(), vec![1.0; 5]);
    }

    proptest! {
        #[test]
        fn mean_is_linear(a in -3.0..3.0f64, b in -3.0..3.0f64, seed in 0u64..1000) {
            let g = grid();
            let mut s = seed;
            let mut next = move || { s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407); ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5 };
            let p = ProcessGrid::from_fn(&g, 13, 2, |_, _, o| { o[0] = next(); o[1] = next(); });
            let q = ProcessGrid::from_fn(&g, 13, 2, |_, _, o| { o[0] = next(); o[1] = next(); });
            let lhs = ensemble_mean(&p.combine(a, &q, b).unwrap());
            let mp = ensemble_mean(&p);
            let mq = ensemble_mean(&q);
            for i in 0..g.len() {
                for k in 0..2 {
                    let rhs = a * mp.value(i)[k] + b * mq.value(i)[k];
                    let scale = 1.0f64.max(rhs.abs());
                    prop_assert!((lhs.value(i)[k] - rhs).abs() <= 1e-12 * scale);
                }
            }
        }
    }
}
