use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Linear ε decay from `start` to `end` over `decay_episodes`, then flat.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub end: f64,
    pub decay_episodes: u64,
}

impl Default for EpsilonSchedule {
    fn default() -> Self {
        Self {
            start: 1.0,
            end: 0.05,
            decay_episodes: 1000,
        }
    }
}

impl EpsilonSchedule {
    pub fn validate(&self, path: &str) -> Result<()> {
        if !(0.0 <= self.end && self.end <= self.start && self.start <= 1.0) {
            return Err(Error::config(
                path,
                format!(
                    "need 0 <= eps_end ({}) <= eps_start ({}) <= 1",
                    self.end, self.start
                ),
            ));
        }
        Ok(())
    }

    pub fn at(&self, episode: u64) -> f64 {
        if self.decay_episodes == 0 || episode >= self.decay_episodes {
            return self.end;
        }
        let frac = episode as f64 / self.decay_episodes as f64;
        self.start + (self.end - self.start) * frac
    }
}
