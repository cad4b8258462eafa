//! Time discretisation of `[0, T]`.

use serde::{Deserialize, Serialize};

use crate::error::InvalidArgument;

/// Strictly increasing time nodes `0 = t_0 < t_1 < ... < t_N = T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    nodes: Vec<f64>,
}

impl TimeGrid {
    /// Uniform partition of `[0, horizon]` into `steps` intervals.
    pub fn uniform(horizon: f64, steps: usize) -> Result<Self, InvalidArgument> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(InvalidArgument::new(format!(
                "horizon must be positive and finite, got {horizon}"
            )));
        }
        if steps == 0 {
            return Err(InvalidArgument::new("grid needs at least one step"));
        }
        let h = horizon / steps as f64;
        let mut nodes: Vec<f64> = (0..steps).map(|i| i as f64 * h).collect();
        // Pin the last node so that t_N == T bit-for-bit.
        nodes.push(horizon);
        Ok(Self { nodes })
    }

    /// Arbitrary node list; must start at zero and be strictly increasing.
    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self, InvalidArgument> {
        if nodes.len() < 2 {
            return Err(InvalidArgument::new("grid needs at least two nodes"));
        }
        if nodes[0] != 0.0 {
            return Err(InvalidArgument::new("first grid node must be 0"));
        }
        for w in nodes.windows(2) {
            if !(w[1] > w[0]) || !w[1].is_finite() {
                return Err(InvalidArgument::new(format!(
                    "grid nodes must be strictly increasing and finite ({} then {})",
                    w[0], w[1]
                )));
            }
        }
        Ok(Self { nodes })
    }

    /// Grid with one coarse step `[0, T - width]` followed by `steps` uniform
    /// steps on the terminal window `[T - width, T]`. Falls back to a uniform
    /// grid when the window covers the whole horizon.
    pub fn with_terminal_window(
        horizon: f64,
        width: f64,
        steps: usize,
    ) -> Result<Self, InvalidArgument> {
        if !(width > 0.0) {
            return Err(InvalidArgument::new(format!(
                "window width must be positive, got {width}"
            )));
        }
        if width >= horizon {
            return Self::uniform(horizon, steps);
        }
        if steps == 0 {
            return Err(InvalidArgument::new("window needs at least one step"));
        }
        let start = horizon - width;
        if !(start > 0.0) {
            return Self::uniform(horizon, steps);
        }
        let h = width / steps as f64;
        let mut nodes = Vec::with_capacity(steps + 2);
        nodes.push(0.0);
        for k in 0..steps {
            nodes.push(start + k as f64 * h);
        }
        nodes.push(horizon);
        Self::from_nodes(nodes)
    }

    pub fn horizon(&self) -> f64 {
        *self.nodes.last().expect("grid is never empty")
    }

    /// Number of steps `N`.
    pub fn steps(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn time(&self, i: usize) -> f64 {
        self.nodes[i]
    }

    /// Step size `h_i = t_{i+1} - t_i`.
    pub fn step(&self, i: usize) -> f64 {
        self.nodes[i + 1] - self.nodes[i]
    }

    /// Splits the node range `0..=N` into `count` contiguous windows with
    /// shared boundary nodes, ordered from the terminal window backwards.
    pub fn windows(&self, count: usize) -> Result<Vec<Window>, InvalidArgument> {
        let n = self.steps();
        if count == 0 || count > n {
            return Err(InvalidArgument::new(format!(
                "cannot split {n} steps into {count} windows"
            )));
        }
        let mut out = Vec::with_capacity(count);
        for k in 0..count {
            // windows counted from the end: k = 0 is the terminal window
            let end = n - (k * n) / count;
            let start = n - ((k + 1) * n) / count;
            out.push(Window { start, end });
        }
        Ok(out)
    }

    /// Nodes lying in `[T - width, T]`, as a window. The start node is the
    /// earliest node not before `T - width` (up to rounding).
    pub fn terminal_window(&self, width: f64) -> Window {
        let cut = self.horizon() - width;
        let tol = 1e-12 * self.horizon();
        let start = self
            .nodes
            .iter()
            .position(|&t| t >= cut - tol)
            .unwrap_or(0)
            .min(self.steps() - 1);
        Window {
            start,
            end: self.steps(),
        }
    }

    pub fn full_window(&self) -> Window {
        Window {
            start: 0,
            end: self.steps(),
        }
    }
}

/// Closed node range `start..=end` of a grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub start: usize,
    pub end: usize,
}

impl Window {
    pub fn width(&self, grid: &TimeGrid) -> f64 {
        grid.time(self.end) - grid.time(self.start)
    }

    pub fn steps(&self) -> usize {
        self.end - self.start
    }

    pub fn contains(&self, i: usize) -> bool {
        i >= self.start && i <= self.end
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_quarters() {
        let g = TimeGrid::uniform(1.0, 4).unwrap();
        assert_eq!(g.nodes(), &[0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(g.step(2), 0.25);
    }

    #[test]
    fn single_step() {
        let g = TimeGrid::uniform(2.0, 1).unwrap();
        assert_eq!(g.nodes(), &[0.0, 2.0]);
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(TimeGrid::uniform(0.0, 4).is_err());
        assert!(TimeGrid::uniform(-1.0, 4).is_err());
        assert!(TimeGrid::uniform(1.0, 0).is_err());
        assert!(TimeGrid::from_nodes(vec![0.0, 0.5, 0.5, 1.0]).is_err());
        assert!(TimeGrid::from_nodes(vec![0.1, 1.0]).is_err());
    }

    #[test]
    fn last_node_is_horizon_exactly() {
        for n in [3, 7, 10, 33, 100] {
            let g = TimeGrid::uniform(0.7, n).unwrap();
            assert_eq!(g.horizon(), 0.7);
            assert!(g.nodes().windows(2).all(|w| w[1] > w[0]));
        }
    }

    #[test]
    fn terminal_window_grid() {
        let g = TimeGrid::with_terminal_window(1.0, 0.1, 4).unwrap();
        assert_eq!(g.steps(), 5);
        assert_eq!(g.time(1), 0.9);
        let w = g.terminal_window(0.1);
        assert_eq!(w, Window { start: 1, end: 5 });
        assert!((w.width(&g) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn windows_cover_grid() {
        let g = TimeGrid::uniform(1.0, 10).unwrap();
        let ws = g.windows(3).unwrap();
        assert_eq!(ws[0].end, 10);
        assert_eq!(ws.last().unwrap().start, 0);
        for pair in ws.windows(2) {
            assert_eq!(pair[0].start, pair[1].end);
        }
        assert!(g.windows(11).is_err());
    }
}
