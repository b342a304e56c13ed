use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceConfig {
    pub window: usize,
    pub rel_tol: f64,
    pub patience: usize,
    /// Episodes run with a higher exploration rate never count as stable.
    pub max_epsilon: f64,
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        Self {
            window: 100,
            rel_tol: 0.01,
            patience: 100,
            max_epsilon: 0.1,
        }
    }
}

/// Tracks a per-episode series and reports convergence.
///
/// Episode `t` is stable when its value lies within `rel_tol` of the mean
/// of the previous `window` episodes (fewer at the start). The run has
/// converged once `patience` consecutive episodes are stable; the first of
/// them is the convergence episode.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ConvergenceTracker {
    pub series: Vec<f64>,
    pub streak: usize,
    /// 1-based episode where the stable run began.
    pub converged_at: Option<usize>,
}

impl ConvergenceTracker {
    /// Record the next value. Returns true once converged.
    pub fn observe(&mut self, config: &ConvergenceConfig, value: f64, epsilon: f64) -> bool {
        let t = self.series.len();
        let stable = if t == 0 || epsilon > config.max_epsilon {
            false
        } else {
            let from = t.saturating_sub(config.window.max(1));
            let prev = &self.series[from..];
            let mean = prev.iter().sum::<f64>() / prev.len() as f64;
            (value - mean).abs() <= config.rel_tol * mean.abs()
        };
        self.series.push(value);
        self.streak = if stable { self.streak + 1 } else { 0 };
        if self.converged_at.is_none() && self.streak >= config.patience.max(1) {
            self.converged_at = Some(self.series.len() - self.streak + 1);
        }
        self.converged_at.is_some()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(window: usize, patience: usize) -> ConvergenceConfig {
        ConvergenceConfig {
            window,
            rel_tol: 0.01,
            patience,
            max_epsilon: 0.1,
        }
    }

    #[test]
    fn constant_series_converges_at_second_episode() {
        let c = cfg(5, 3);
        let mut t = ConvergenceTracker::default();
        let done: Vec<bool> = (0..6).map(|_| t.observe(&c, 50.0, 0.0)).collect();
        assert_eq!(done, vec![false, false, false, true, true, true]);
        assert_eq!(t.converged_at, Some(2));
    }

    #[test]
    fn high_exploration_never_counts() {
        let c = cfg(5, 2);
        let mut t = ConvergenceTracker::default();
        for _ in 0..10 {
            assert!(!t.observe(&c, 50.0, 0.5));
        }
        t.observe(&c, 50.0, 0.05);
        assert!(t.observe(&c, 50.0, 0.05));
        assert_eq!(t.converged_at, Some(11));
    }

    #[test]
    fn jump_resets_the_streak() {
        let c = cfg(3, 3);
        let mut t = ConvergenceTracker::default();
        for v in [10.0, 10.0, 10.0, 20.0, 20.0, 20.0, 20.0] {
            t.observe(&c, v, 0.0);
        }
        // 20 vs trailing means 10, 13.3, 16.7 are unstable; the mean of
        // three 20s is reached at episode 7
        assert_eq!(t.streak, 1);
        assert_eq!(t.converged_at, None);
    }
}
