use serde::{Deserialize, Serialize};

use crate::envs::EnvSpec;
use crate::error::{Error, Result};
use crate::lrp::LrpRule;
use crate::marl::{CriticInput, EpsilonSchedule, LearnerSettings, StrategyKind};
use crate::tensor_net::OptimizerKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalarWidth {
    F64,
    F32,
}

/// Complete description of one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub env: EnvSpec,
    pub strategy: StrategyKind,
    #[serde(default)]
    pub lrp: LrpRule,
    #[serde(default)]
    pub training: TrainingConfig,
    #[serde(default)]
    pub io: IoConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub gamma: f64,
    pub eps_start: f64,
    pub eps_end: f64,
    pub eps_decay_episodes: u64,
    /// Gradient steps between target-network syncs.
    pub sync_interval: u64,
    pub optimizer: OptimizerKind,
    pub critic_lr: f64,
    pub agent_lr: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    /// Transitions collected before the first train step.
    pub warmup: usize,
    pub episodes: u64,
    pub eval_interval: u64,
    pub eval_episodes: u64,
    pub seed: u64,
    pub critic_input: CriticInput,
    pub scalar: ScalarWidth,
    pub agent_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
    pub stack_depth: usize,
    /// Decompose the TD target rather than the critic prediction (RDN).
    pub decompose_target: bool,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            eps_start: 1.0,
            eps_end: 0.05,
            eps_decay_episodes: 1000,
            sync_interval: 200,
            optimizer: OptimizerKind::Adam,
            critic_lr: 5e-4,
            agent_lr: 5e-4,
            batch_size: 32,
            buffer_capacity: 50_000,
            warmup: 1000,
            episodes: 2000,
            eval_interval: 100,
            eval_episodes: 100,
            seed: 0,
            critic_input: CriticInput::LocalConcat,
            scalar: ScalarWidth::F64,
            agent_hidden: vec![32],
            critic_hidden: vec![64],
            stack_depth: 1,
            decompose_target: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IoConfig {
    /// Record real elapsed time in `wall_ms`. Off by default so that metrics
    /// files are reproducible byte for byte.
    pub wall_clock: bool,
    pub snapshots: bool,
}

impl Default for IoConfig {
    fn default() -> Self {
        Self {
            wall_clock: false,
            snapshots: true,
        }
    }
}

impl RunConfig {
    pub fn new(env: EnvSpec, strategy: StrategyKind) -> Self {
        Self {
            env,
            strategy,
            lrp: LrpRule::default(),
            training: TrainingConfig::default(),
            io: IoConfig::default(),
        }
    }

    pub fn epsilon_schedule(&self) -> EpsilonSchedule {
        EpsilonSchedule {
            start: self.training.eps_start,
            end: self.training.eps_end,
            decay_episodes: self.training.eps_decay_episodes,
        }
    }

    pub fn learner_settings(&self) -> LearnerSettings {
        LearnerSettings {
            gamma: self.training.gamma,
            sync_interval: self.training.sync_interval,
            rule: self.lrp,
            decompose_target: self.training.decompose_target,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.env.validate()?;
        self.lrp.validate()?;
        let t = &self.training;
        if !(0.0..1.0).contains(&t.gamma) {
            return Err(Error::config(
                "training.gamma",
                format!("{} not in [0, 1)", t.gamma),
            ));
        }
        self.epsilon_schedule().validate("training.eps_start")?;
        let positive = [
            ("training.sync_interval", t.sync_interval as f64),
            ("training.batch_size", t.batch_size as f64),
            ("training.buffer_capacity", t.buffer_capacity as f64),
            ("training.episodes", t.episodes as f64),
            ("training.eval_interval", t.eval_interval as f64),
            ("training.eval_episodes", t.eval_episodes as f64),
            ("training.stack_depth", t.stack_depth as f64),
        ];
        for (path, v) in positive {
            if v < 1.0 {
                return Err(Error::config(path, "must be >= 1"));
            }
        }
        for (path, lr) in [
            ("training.critic_lr", t.critic_lr),
            ("training.agent_lr", t.agent_lr),
        ] {
            if !(lr > 0.0 && lr.is_finite()) {
                return Err(Error::config(path, "must be a positive finite number"));
            }
        }
        if t.buffer_capacity < t.batch_size {
            return Err(Error::config(
                "training.buffer_capacity",
                "must hold at least one batch",
            ));
        }
        if !t.episodes.is_multiple_of(t.eval_interval) {
            return Err(Error::config(
                "training.eval_interval",
                format!("must divide training.episodes ({})", t.episodes),
            ));
        }
        for (path, widths) in [
            ("training.agent_hidden", &t.agent_hidden),
            ("training.critic_hidden", &t.critic_hidden),
        ] {
            if widths.contains(&0) {
                return Err(Error::config(path, "hidden widths must be positive"));
            }
        }
        Ok(())
    }

    /// Short identifier used for run directories.
    pub fn run_id(&self) -> String {
        format!(
            "{}-{}-e{}-r{}-s{}",
            self.env.kind.name(),
            self.strategy.name(),
            self.env.n_essential,
            self.env.n_redundant,
            self.training.seed
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let c = RunConfig::new(EnvSpec::levers(2, 0, 2), StrategyKind::Rdn);
        c.validate().unwrap();
    }

    #[test]
    fn bound_violations_name_their_path() {
        let mut c = RunConfig::new(EnvSpec::levers(2, 0, 2), StrategyKind::Rdn);
        c.training.gamma = 1.5;
        assert!(c
            .validate()
            .unwrap_err()
            .to_string()
            .contains("training.gamma"));
        let mut c = RunConfig::new(EnvSpec::levers(2, 0, 2), StrategyKind::Rdn);
        c.training.episodes = 105;
        c.training.eval_interval = 10;
        assert!(c
            .validate()
            .unwrap_err()
            .to_string()
            .contains("eval_interval"));
    }
}
