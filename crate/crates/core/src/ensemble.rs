//! Seeded Brownian path ensembles.
//!
//! Each path draws its Gaussian increments from its own ChaCha8 stream
//! (`stream = path index`), so any sub-ensemble can be regenerated on its own
//! and the result never depends on thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::InvalidArgument;
use crate::grid::TimeGrid;

/// `n_paths` samples of a `d`-dimensional Brownian motion on a grid.
///
/// Storage is node-major: `increment(p, i)` is the slice
/// `W_{t_{i+1}} - W_{t_i}` of path `p`.
#[derive(Debug, Clone)]
pub struct PathEnsemble {
    grid: TimeGrid,
    dim: usize,
    n_paths: usize,
    seed: u64,
    antithetic: bool,
    increments: Vec<f64>,
    positions: Vec<f64>,
}

impl PathEnsemble {
    /// Simulates i.i.d. centred Gaussian increments with variance `h_i` per
    /// coordinate.
    pub fn simulate(
        grid: &TimeGrid,
        dim: usize,
        n_paths: usize,
        seed: u64,
    ) -> Result<Self, InvalidArgument> {
        Self::build(grid, dim, n_paths, seed, false)
    }

    /// Like [`PathEnsemble::simulate`] but path `2k + 1` is the reflection
    /// `-W` of path `2k`. Requires an even path count.
    pub fn simulate_antithetic(
        grid: &TimeGrid,
        dim: usize,
        n_paths: usize,
        seed: u64,
    ) -> Result<Self, InvalidArgument> {
        if n_paths % 2 != 0 {
            return Err(InvalidArgument::new(
                "antithetic ensembles need an even number of paths",
            ));
        }
        Self::build(grid, dim, n_paths, seed, true)
    }

    fn build(
        grid: &TimeGrid,
        dim: usize,
        n_paths: usize,
        seed: u64,
        antithetic: bool,
    ) -> Result<Self, InvalidArgument> {
        if dim == 0 {
            return Err(InvalidArgument::new("Brownian dimension must be >= 1"));
        }
        if n_paths < 2 {
            return Err(InvalidArgument::new("ensemble needs at least two paths"));
        }
        let steps = grid.steps();
        let sd: Vec<f64> = (0..steps).map(|i| grid.step(i).sqrt()).collect();
        let base_paths = if antithetic { n_paths / 2 } else { n_paths };

        let per_path: Vec<Vec<f64>> = (0..base_paths)
            .into_par_iter()
            .map(|p| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(p as u64);
                let mut out = Vec::with_capacity(steps * dim);
                for s in &sd {
                    for _ in 0..dim {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        out.push(s * z);
                    }
                }
                out
            })
            .collect();

        let mut increments = vec![0.0; n_paths * steps * dim];
        for (b, path) in per_path.iter().enumerate() {
            for i in 0..steps {
                let src = &path[i * dim..(i + 1) * dim];
                if antithetic {
                    for (k, sign) in [(2 * b, 1.0), (2 * b + 1, -1.0)] {
                        let dst = (i * n_paths + k) * dim;
                        for j in 0..dim {
                            increments[dst + j] = sign * src[j];
                        }
                    }
                } else {
                    let dst = (i * n_paths + b) * dim;
                    increments[dst..dst + dim].copy_from_slice(src);
                }
            }
        }

        let mut positions = vec![0.0; n_paths * (steps + 1) * dim];
        let stride = n_paths * dim;
        for i in 0..steps {
            let (head, tail) = positions.split_at_mut((i + 1) * stride);
            let prev = &head[i * stride..];
            let next = &mut tail[..stride];
            let inc = &increments[i * stride..(i + 1) * stride];
            for ((n, p), dw) in next.iter_mut().zip(prev).zip(inc) {
                *n = p + dw;
            }
        }

        Ok(Self {
            grid: grid.clone(),
            dim,
            n_paths,
            seed,
            antithetic,
            increments,
            positions,
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn is_antithetic(&self) -> bool {
        self.antithetic
    }

    /// `ΔW_i` of path `p` (length `d`).
    pub fn increment(&self, p: usize, i: usize) -> &[f64] {
        let at = (i * self.n_paths + p) * self.dim;
        &self.increments[at..at + self.dim]
    }

    /// `W_{t_i}` of path `p` (length `d`).
    pub fn position(&self, p: usize, i: usize) -> &[f64] {
        let at = (i * self.n_paths + p) * self.dim;
        &self.positions[at..at + self.dim]
    }

    /// All increments at step `i`, path-major within the node.
    pub fn increments_at(&self, i: usize) -> &[f64] {
        let stride = self.n_paths * self.dim;
        &self.increments[i * stride..(i + 1) * stride]
    }

    /// All positions at node `i`, path-major within the node.
    pub fn positions_at(&self, i: usize) -> &[f64] {
        let stride = self.n_paths * self.dim;
        &self.positions[i * stride..(i + 1) * stride]
    }

    /// Flat increment array in `(path, step, coordinate)` order.
    pub fn increments_path_major(&self) -> Vec<f64> {
        let steps = self.grid.steps();
        let mut out = Vec::with_capacity(self.increments.len());
        for p in 0..self.n_paths {
            for i in 0..steps {
                out.extend_from_slice(self.increment(p, i));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_ensemble() {
        let g = TimeGrid::uniform(1.0, 20).unwrap();
        let a = PathEnsemble::simulate(&g, 2, 50, 7).unwrap();
        let b = PathEnsemble::simulate(&g, 2, 50, 7).unwrap();
        assert_eq!(a.increments_path_major(), b.increments_path_major());
        let c = PathEnsemble::simulate(&g, 2, 50, 8).unwrap();
        assert_ne!(a.increments_path_major(), c.increments_path_major());
    }

    #[test]
    fn sub_ensembles_are_prefixes() {
        let g = TimeGrid::uniform(1.0, 5).unwrap();
        let small = PathEnsemble::simulate(&g, 1, 10, 3).unwrap();
        let large = PathEnsemble::simulate(&g, 1, 40, 3).unwrap();
        for p in 0..10 {
            for i in 0..5 {
                assert_eq!(small.increment(p, i), large.increment(p, i));
            }
        }
    }

    #[test]
    fn positions_are_cumulative_increments() {
        let g = TimeGrid::uniform(1.0, 8).unwrap();
        let e = PathEnsemble::simulate(&g, 3, 5, 1).unwrap();
        for p in 0..5 {
            assert!(e.position(p, 0).iter().all(|&w| w == 0.0));
            let mut acc = [0.0; 3];
            for i in 0..8 {
                for j in 0..3 {
                    acc[j] += e.increment(p, i)[j];
                }
                assert_eq!(e.position(p, i + 1), &acc);
            }
        }
    }

    #[test]
    fn antithetic_pairs_reflect() {
        let g = TimeGrid::uniform(1.0, 4).unwrap();
        let e = PathEnsemble::simulate_antithetic(&g, 1, 6, 9).unwrap();
        for k in 0..3 {
            for i in 0..4 {
                assert_eq!(e.increment(2 * k, i)[0], -e.increment(2 * k + 1, i)[0]);
            }
        }
        assert!(PathEnsemble::simulate_antithetic(&g, 1, 5, 9).is_err());
    }

    #[test]
    fn preconditions() {
        let g = TimeGrid::uniform(1.0, 4).unwrap();
        assert!(PathEnsemble::simulate(&g, 0, 10, 1).is_err());
        assert!(PathEnsemble::simulate(&g, 1, 1, 1).is_err());
    }
}
