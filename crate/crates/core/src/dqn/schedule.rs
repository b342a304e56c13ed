use serde::{Deserialize, Serialize};

/// Exponentially decaying exploration rate,
/// `ε(t) = end + (start − end)·exp(−t / decay_steps)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExplorationSchedule {
    pub eps_start: f64,
    pub eps_end: f64,
    pub decay_steps: f64,
}

impl Default for ExplorationSchedule {
    fn default() -> Self {
        Self {
            eps_start: 0.9,
            eps_end: 0.02,
            decay_steps: 100_000.0,
        }
    }
}

impl ExplorationSchedule {
    pub fn epsilon(&self, step: u64) -> f64 {
        self.eps_end + (self.eps_start - self.eps_end) * (-(step as f64) / self.decay_steps).exp()
    }

    /// First step at which ε is at most `eps`, if ever.
    pub fn step_reaching(&self, eps: f64) -> Option<u64> {
        if eps <= self.eps_end {
            return None;
        }
        if eps >= self.eps_start {
            return Some(0);
        }
        let t = -self.decay_steps * ((eps - self.eps_end) / (self.eps_start - self.eps_end)).ln();
        Some(t.ceil() as u64)
    }
}
