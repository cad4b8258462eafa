use serde::{Deserialize, Serialize};

/// Membership of one iterate in the solution ball.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BallCheck {
    pub iteration: usize,
    /// Empirical BMO2 estimate of the iterate's martingale part.
    pub bmo2: f64,
    /// Radius the BMO2 estimate is compared against (`A` for local windows).
    pub bmo2_limit: f64,
    pub bmo2_ok: bool,
    /// `sup |Y|` compared against the exponential sup bound of the ball.
    pub y_sup: f64,
    pub y_sup_limit: f64,
    pub y_sup_ok: bool,
}

/// Evidence recorded by an outer fixed-point iteration.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FixedPointTrace {
    /// Distance between iterate `j + 1` and iterate `j`.
    pub distances: Vec<f64>,
    /// The `Y` part of each distance (sup over nodes of the mean curve gap,
    /// or the S2 distance for the L2 solvers).
    pub y_distances: Vec<f64>,
    /// The `Z` part of each distance (BMO2 or M2 estimate).
    pub z_distances: Vec<f64>,
    /// `distances[j] / distances[j - 1]`, from the second distance on.
    pub ratios: Vec<f64>,
    pub ball: Vec<BallCheck>,
    pub converged: bool,
}

impl FixedPointTrace {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records one iteration and returns the total distance.
    pub fn push(&mut self, y_distance: f64, z_distance: f64) -> f64 {
        let total = y_distance + z_distance;
        if let Some(&prev) = self.distances.last() {
            let ratio = if prev > 0.0 {
                total / prev
            } else if total == 0.0 {
                0.0
            } else {
                f64::INFINITY
            };
            self.ratios.push(ratio);
        }
        self.distances.push(total);
        self.y_distances.push(y_distance);
        self.z_distances.push(z_distance);
        total
    }

    pub fn iterations(&self) -> usize {
        self.distances.len()
    }

    pub fn last_distance(&self) -> Option<f64> {
        self.distances.last().copied()
    }

    /// Longest run of consecutive ratios strictly below one.
    pub fn longest_contracting_run(&self) -> usize {
        let mut best = 0;
        let mut run = 0;
        for &r in &self.ratios {
            if r < 1.0 {
                run += 1;
                best = best.max(run);
            } else {
                run = 0;
            }
        }
        best
    }

    /// Whether the last `k` ratios are all `>= 1`.
    pub fn stalled(&self, k: usize) -> bool {
        self.ratios.len() >= k && self.ratios[self.ratios.len() - k..].iter().all(|&r| r >= 1.0)
    }

    /// Mean of the last `k` ratios, if that many exist.
    pub fn mean_last_ratios(&self, k: usize) -> Option<f64> {
        if k == 0 || self.ratios.len() < k {
            return None;
        }
        let tail = &self.ratios[self.ratios.len() - k..];
        Some(tail.iter().sum::<f64>() / k as f64)
    }

    /// Whether every iterate after the first passed both ball checks.
    pub fn ball_stable(&self) -> bool {
        self.ball
            .iter()
            .filter(|b| b.iteration >= 1)
            .all(|b| b.bmo2_ok && b.y_sup_ok)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratios_start_at_second_distance() {
        let mut t = FixedPointTrace::new();
        t.push(1.0, 0.0);
        assert!(t.ratios.is_empty());
        t.push(0.25, 0.25);
        t.push(0.1, 0.0);
        t.push(0.2, 0.0);
        assert_eq!(t.ratios, vec![0.5, 0.2, 2.0]);
        assert_eq!(t.longest_contracting_run(), 2);
        assert!(!t.stalled(2));
        assert!(t.stalled(1));
    }

    #[test]
    fn zero_distances() {
        let mut t = FixedPointTrace::new();
        t.push(0.0, 0.0);
        t.push(0.0, 0.0);
        assert_eq!(t.ratios, vec![0.0]);
    }
}
