//! Cooperative multi-agent environments with a redundancy knob.
//!
//! Agents `0..n_essential` are essential, the remaining `n_redundant` agents are
//! redundant. Every environment exposes per-agent local observations plus a
//! ground-truth state vector whose indices are partitioned among the agents
//! (and an unowned remainder).

mod corridor;
mod levers;
mod oracle;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lrp::SliceMap;
use crate::tensor_net::Rng;

pub use corridor::{CorridorAction, CorridorState, PianoCorridor, CORRIDOR_ACTIONS};
pub use levers::SignalLevers;
pub use oracle::{
    corridor_oracle, corridor_oracle_action, enumerate_oracle, CorridorSolution, OracleResult,
    PolicyEntry,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvKind {
    SignalLevers,
    PianoCorridor,
}

impl EnvKind {
    pub fn name(self) -> &'static str {
        match self {
            EnvKind::SignalLevers => "signal_levers",
            EnvKind::PianoCorridor => "piano_corridor",
        }
    }
}

fn default_essential() -> usize {
    4
}
fn default_levers() -> usize {
    2
}
fn default_corridor_length() -> usize {
    4
}
fn default_horizon() -> usize {
    20
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvSpec {
    pub kind: EnvKind,
    #[serde(default = "default_essential")]
    pub n_essential: usize,
    #[serde(default)]
    pub n_redundant: usize,
    /// Lever count K (levers game).
    #[serde(default = "default_levers")]
    pub levers: usize,
    /// Corridor length L (corridor game).
    #[serde(default = "default_corridor_length")]
    pub corridor_length: usize,
    /// Episode horizon T (corridor game).
    #[serde(default = "default_horizon")]
    pub horizon: usize,
}

impl EnvSpec {
    pub fn levers(n_essential: usize, n_redundant: usize, levers: usize) -> Self {
        Self {
            kind: EnvKind::SignalLevers,
            n_essential,
            n_redundant,
            levers,
            corridor_length: default_corridor_length(),
            horizon: default_horizon(),
        }
    }

    pub fn corridor(n_essential: usize, n_redundant: usize, length: usize, horizon: usize) -> Self {
        Self {
            kind: EnvKind::PianoCorridor,
            n_essential,
            n_redundant,
            levers: default_levers(),
            corridor_length: length,
            horizon,
        }
    }

    pub fn n_agents(&self) -> usize {
        self.n_essential + self.n_redundant
    }

    pub fn is_essential(&self, agent: usize) -> bool {
        agent < self.n_essential
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_essential < 1 {
            return Err(Error::config("env.n_essential", "must be >= 1"));
        }
        match self.kind {
            EnvKind::SignalLevers if self.levers < 2 => {
                Err(Error::config("env.levers", "must be >= 2"))
            }
            EnvKind::PianoCorridor if self.corridor_length < 2 => {
                Err(Error::config("env.corridor_length", "must be >= 2"))
            }
            EnvKind::PianoCorridor if self.horizon < 1 => {
                Err(Error::config("env.horizon", "must be >= 1"))
            }
            _ => Ok(()),
        }
    }

    pub fn n_actions(&self) -> usize {
        match self.kind {
            EnvKind::SignalLevers => self.levers,
            EnvKind::PianoCorridor => CORRIDOR_ACTIONS,
        }
    }

    /// Per-agent local observation length.
    pub fn obs_len(&self) -> usize {
        let m = self.n_agents();
        match self.kind {
            EnvKind::SignalLevers => 1 + self.levers + m,
            EnvKind::PianoCorridor => 1 + 1 + 2 * self.corridor_length + 1 + m,
        }
    }

    pub fn state_len(&self) -> usize {
        let m = self.n_agents();
        match self.kind {
            EnvKind::SignalLevers => self.levers + m,
            EnvKind::PianoCorridor => self.corridor_length + m * (1 + self.corridor_length) + m,
        }
    }

    /// Longest possible episode.
    pub fn max_steps(&self) -> usize {
        match self.kind {
            EnvKind::SignalLevers => 1,
            EnvKind::PianoCorridor => self.horizon,
        }
    }

    pub fn build(&self) -> Result<Box<dyn CooperativeEnv>> {
        self.validate()?;
        Ok(match self.kind {
            EnvKind::SignalLevers => Box::new(SignalLevers::new(self.clone())),
            EnvKind::PianoCorridor => Box::new(PianoCorridor::new(self.clone())),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointObservation {
    /// One local observation per agent, all of equal length.
    pub local: Vec<Vec<f64>>,
    /// Ground-truth state.
    pub state: Vec<f64>,
    /// Which state indices belong to which agent.
    pub ownership: Arc<SliceMap>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub obs: JointObservation,
    pub reward: f64,
    pub terminal: bool,
    pub win: bool,
}

pub trait CooperativeEnv: Send {
    fn spec(&self) -> &EnvSpec;

    fn reset(&mut self, rng: &mut Rng) -> JointObservation;

    /// Advances one step. Fails on a wrong number of actions, an out-of-range
    /// action index, or stepping a finished episode.
    fn step(&mut self, actions: &[usize]) -> Result<StepResult>;

    fn observe(&self) -> JointObservation;
}

pub(crate) fn one_hot_into(out: &mut Vec<f64>, hot: usize, len: usize) {
    out.extend((0..len).map(|i| if i == hot { 1.0 } else { 0.0 }));
}

pub(crate) fn check_actions(actions: &[usize], n_agents: usize, n_actions: usize) -> Result<()> {
    if actions.len() != n_agents {
        return Err(Error::Usage(format!(
            "expected {n_agents} actions, got {}",
            actions.len()
        )));
    }
    if let Some((i, a)) = actions.iter().enumerate().find(|(_, &a)| a >= n_actions) {
        return Err(Error::Usage(format!(
            "agent {i} chose action {a}, valid range is 0..{n_actions}"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_bounds() {
        assert!(EnvSpec::levers(0, 1, 2).validate().is_err());
        assert!(EnvSpec::levers(1, 0, 1).validate().is_err());
        assert!(EnvSpec::corridor(1, 0, 1, 5).validate().is_err());
        assert!(EnvSpec::corridor(1, 0, 3, 0).validate().is_err());
        assert!(EnvSpec::corridor(1, 0, 3, 1).validate().is_ok());
    }

    #[test]
    fn encoding_lengths() {
        assert_eq!(EnvSpec::levers(2, 1, 2).obs_len(), 6);
        assert_eq!(EnvSpec::corridor(2, 1, 4, 20).obs_len(), 14);
        assert_eq!(EnvSpec::levers(2, 1, 2).state_len(), 5);
        assert_eq!(EnvSpec::corridor(2, 1, 4, 20).state_len(), 22);
    }
}
