//! Episode loop, greedy evaluation, redundancy sweeps and relevance replay.

mod config;
mod eval;
mod relevance;
mod run;
mod sweep;

pub use config::{IoConfig, RunConfig, ScalarWidth, TrainingConfig};
pub use eval::{evaluate_bank, evaluate_policy, EvalResult};
pub use relevance::relevance_trace;
pub use run::{build_learner, run, MetricsRow, RunOutput};
pub use sweep::{
    quantile, sweep, SweepCell, SweepPlan, SweepRun, SweepTable, DEFAULT_REDUNDANT_COUNTS,
};

use crate::error::Result;
use crate::marl::{AgentBank, EpsilonSchedule};
use crate::tensor_net::{MlpSnapshot, Rng};

/// ε for a given training episode.
pub fn epsilon_at(schedule: &EpsilonSchedule, episode: u64) -> f64 {
    schedule.at(episode)
}

/// Greedy evaluation of saved agent networks under `config`'s environment.
pub fn evaluate(
    agents: &[MlpSnapshot],
    config: &RunConfig,
    episodes: u64,
    rng: &mut Rng,
) -> Result<EvalResult> {
    let t = &config.training;
    let bank = AgentBank::<f64>::from_snapshots(agents, false, t.optimizer, t.agent_lr)?;
    evaluate_bank(&bank, &config.env, t.stack_depth, episodes, rng)
}
