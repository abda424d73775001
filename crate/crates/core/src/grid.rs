//! Uniform time grids.

use crate::error::invalid;
use crate::Result;

/// Relative tolerance used to decide whether a time lies on a grid node.
pub const NODE_TOL: f64 = 1e-9;

/// Uniform grid `0 = t_0 < t_1 < … < t_N = t_end` with `t_k = k·dt`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    dt: f64,
    steps: usize,
}

impl TimeGrid {
    /// Grid with step `dt` reaching `t_end`; `t_end / dt` must be an integer
    /// up to [`NODE_TOL`].
    pub fn new(t_end: f64, dt: f64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(invalid(format!("time step must be positive, got {dt}")));
        }
        if !(t_end.is_finite() && t_end >= 0.0) {
            return Err(invalid(format!("horizon must be nonnegative, got {t_end}")));
        }
        let ratio = t_end / dt;
        let steps = ratio.round();
        if (ratio - steps).abs() > NODE_TOL * ratio.max(1.0) {
            return Err(invalid(format!(
                "horizon {t_end} is not a multiple of the step {dt}"
            )));
        }
        Ok(Self {
            dt,
            steps: steps as usize,
        })
    }

    pub fn with_steps(dt: f64, steps: usize) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(invalid(format!("time step must be positive, got {dt}")));
        }
        Ok(Self { dt, steps })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Number of intervals `N`; there are `N + 1` nodes.
    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn len(&self) -> usize {
        self.steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn t_end(&self) -> f64 {
        self.dt * self.steps as f64
    }

    pub fn node(&self, k: usize) -> f64 {
        self.dt * k as f64
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.steps).map(move |k| self.node(k))
    }

    /// Index of the node equal to `t`, if `t` is grid-aligned.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        if t < -NODE_TOL * self.dt {
            return None;
        }
        let r = t / self.dt;
        let k = r.round();
        if (r - k).abs() <= NODE_TOL * r.abs().max(1.0) && k as usize <= self.steps {
            Some(k as usize)
        } else {
            None
        }
    }

    /// Sub-grid `[0, m·dt]` with the same step.
    pub fn truncated(&self, m: usize) -> Self {
        Self {
            dt: self.dt,
            steps: m.min(self.steps),
        }
    }

    /// Same horizon, half the step.
    pub fn refined(&self) -> Self {
        Self {
            dt: self.dt / 2.0,
            steps: self.steps * 2,
        }
    }

    pub fn same_nodes(&self, other: &TimeGrid) -> bool {
        self.steps == other.steps && (self.dt - other.dt).abs() <= NODE_TOL * self.dt
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nodes_are_uniform() {
        let g = TimeGrid::new(1.0, 0.125).unwrap();
        assert_eq!(g.steps(), 8);
        let nodes: Vec<f64> = g.nodes().collect();
        for w in nodes.windows(2) {
            assert!((w[1] - w[0] - 0.125).abs() < 1e-15);
        }
        assert_eq!(nodes[0], 0.0);
        assert!((g.t_end() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_misaligned_horizon() {
        assert!(TimeGrid::new(1.0, 0.3).is_err());
        assert!(TimeGrid::new(1.0, 0.0).is_err());
        assert!(TimeGrid::new(1.0, -0.1).is_err());
    }

    #[test]
    fn index_lookup() {
        let g = TimeGrid::new(40.0, 1.0 / 200.0).unwrap();
        assert_eq!(g.index_of(4.0), Some(800));
        assert_eq!(g.index_of(4.0025), None);
        assert_eq!(g.index_of(41.0), None);
    }
}
