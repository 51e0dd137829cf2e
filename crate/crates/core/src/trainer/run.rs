use std::time::Instant;

use crate::envs::EnvSpec;
use crate::error::{Error, Result};
use crate::marl::{
    AgentBank, CriticLayout, CriticPair, Learner, ObservationStacker, ReplayBuffer, StepReport,
    Transition,
};
use crate::tensor_net::{MlpSnapshot, Rng, Scalar};

use super::config::{RunConfig, ScalarWidth};
use super::eval::evaluate_bank;

/// One row per evaluation block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsRow {
    /// Training episodes completed when the row was taken.
    pub episode: u64,
    pub win_rate: f64,
    pub mean_return: f64,
    /// Block means over train steps; NaN when no step ran in the block.
    pub critic_loss: f64,
    pub agent_loss: f64,
    pub conservation_residual: f64,
    pub epsilon: f64,
    /// Mean |credit| per (sample, agent) by role; NaN when the role is empty.
    pub essential_mean_abs_rel: f64,
    pub redundant_mean_abs_rel: f64,
    pub wall_ms: u64,
}

impl MetricsRow {
    /// Bitwise equality (NaN == NaN).
    pub fn bit_eq(&self, other: &MetricsRow) -> bool {
        let f = |r: &MetricsRow| {
            [
                r.win_rate,
                r.mean_return,
                r.critic_loss,
                r.agent_loss,
                r.conservation_residual,
                r.epsilon,
                r.essential_mean_abs_rel,
                r.redundant_mean_abs_rel,
            ]
            .map(f64::to_bits)
        };
        self.episode == other.episode && self.wall_ms == other.wall_ms && f(self) == f(other)
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub metrics: Vec<MetricsRow>,
    pub agents: Vec<MlpSnapshot>,
    pub critic: Option<MlpSnapshot>,
    pub critic_target: Option<MlpSnapshot>,
}

impl RunOutput {
    pub fn final_win_rate(&self) -> Option<f64> {
        self.metrics.last().map(|r| r.win_rate)
    }
}

#[derive(Default)]
struct BlockStats {
    steps: u64,
    critic_loss: f64,
    agent_loss: f64,
    residual: f64,
    essential: (f64, usize),
    redundant: (f64, usize),
}

impl BlockStats {
    fn add(&mut self, r: &StepReport) {
        self.steps += 1;
        self.critic_loss += r.critic_loss;
        self.agent_loss += r.agent_loss;
        self.residual += r.mean_abs_residual;
        self.essential.0 += r.essential_abs_credit.0;
        self.essential.1 += r.essential_abs_credit.1;
        self.redundant.0 += r.redundant_abs_credit.0;
        self.redundant.1 += r.redundant_abs_credit.1;
    }

    fn mean(total: f64, n: u64) -> f64 {
        if n == 0 {
            f64::NAN
        } else {
            total / n as f64
        }
    }
}

pub(crate) fn critic_layout(config: &RunConfig) -> Result<CriticLayout> {
    let spec = &config.env;
    let probe = spec.build()?.observe();
    Ok(CriticLayout {
        mode: config.training.critic_input,
        n_agents: spec.n_agents(),
        obs_len: spec.obs_len() * config.training.stack_depth,
        n_actions: spec.n_actions(),
        state_ownership: (*probe.ownership).clone(),
    })
}

pub(crate) fn roles(spec: &EnvSpec) -> Vec<bool> {
    (0..spec.n_agents()).map(|i| spec.is_essential(i)).collect()
}

/// Builds freshly initialised networks for `config`.
pub fn build_learner<T: Scalar>(config: &RunConfig, rng: &Rng) -> Result<Learner<T>> {
    let spec = &config.env;
    let t = &config.training;
    let bank = AgentBank::new(
        spec.n_agents(),
        spec.obs_len() * t.stack_depth,
        &t.agent_hidden,
        spec.n_actions(),
        config.strategy.needs_agent_targets(),
        t.optimizer,
        t.agent_lr,
        &mut rng.child("agents"),
    )?;
    let critic = if config.strategy.needs_critic() {
        Some(CriticPair::new(
            critic_layout(config)?,
            &t.critic_hidden,
            t.sync_interval,
            t.optimizer,
            t.critic_lr,
            &mut rng.child("critic"),
        )?)
    } else {
        None
    };
    Learner::new(
        config.strategy,
        bank,
        critic,
        config.learner_settings(),
        roles(spec),
    )
}

/// Trains according to `config`. Deterministic in the config (including its
/// seed) unless `io.wall_clock` is set.
pub fn run(config: &RunConfig) -> Result<RunOutput> {
    match config.training.scalar {
        ScalarWidth::F64 => run_typed::<f64>(config),
        ScalarWidth::F32 => run_typed::<f32>(config),
    }
}

fn run_typed<T: Scalar>(config: &RunConfig) -> Result<RunOutput> {
    config.validate()?;
    let started = Instant::now();
    let t = &config.training;
    let root = Rng::new(t.seed);
    let mut learner: Learner<T> = build_learner(config, &root.child("init"))?;
    let mut env_rng = root.child("env");
    let mut explore_rng = root.child("explore");
    let mut replay_rng = root.child("replay");
    let mut env = config.env.build()?;
    let mut buffer = ReplayBuffer::new(t.buffer_capacity);
    let mut stacker = ObservationStacker::new(t.stack_depth);
    let schedule = config.epsilon_schedule();
    let train_after = t.warmup.max(t.batch_size);

    let mut metrics = Vec::new();
    let mut block = BlockStats::default();
    for episode in 0..t.episodes {
        let eps = schedule.at(episode);
        let first = env.reset(&mut env_rng);
        let mut obs = stacker.reset(&first.local);
        let mut state = first.state;
        for step_idx in 0.. {
            let actions = learner.bank().select_actions(&obs, eps, &mut explore_rng)?;
            let step = env.step(&actions)?;
            let next_obs = stacker.push(&step.obs.local);
            buffer.push(Transition {
                obs,
                state,
                actions,
                reward: step.reward,
                next_obs: next_obs.clone(),
                next_state: step.obs.state.clone(),
                terminal: step.terminal,
            });
            if buffer.len() >= train_after {
                let batch = buffer.sample(t.batch_size, &mut replay_rng);
                let report = learner
                    .train_step(&batch)
                    .map_err(|e| e.with_context(format!("episode {episode}, step {step_idx}")))?;
                block.add(&report);
            }
            if step.terminal {
                break;
            }
            obs = next_obs;
            state = step.obs.state;
        }

        if (episode + 1) % t.eval_interval == 0 {
            let block_idx = (episode + 1) / t.eval_interval;
            let mut eval_rng = root.child(&format!("eval/{block_idx}"));
            let eval = evaluate_bank(
                learner.bank(),
                &config.env,
                t.stack_depth,
                t.eval_episodes,
                &mut eval_rng,
            )?;
            let b = std::mem::take(&mut block);
            metrics.push(MetricsRow {
                episode: episode + 1,
                win_rate: eval.win_rate,
                mean_return: eval.mean_return,
                critic_loss: BlockStats::mean(b.critic_loss, b.steps),
                agent_loss: BlockStats::mean(b.agent_loss, b.steps),
                conservation_residual: BlockStats::mean(b.residual, b.steps),
                epsilon: eps,
                essential_mean_abs_rel: BlockStats::mean(b.essential.0, b.essential.1 as u64),
                redundant_mean_abs_rel: BlockStats::mean(b.redundant.0, b.redundant.1 as u64),
                wall_ms: if config.io.wall_clock {
                    started.elapsed().as_millis() as u64
                } else {
                    0
                },
            });
        }
    }

    if metrics.is_empty() {
        return Err(Error::Training("run produced no evaluation rows".into()));
    }
    Ok(RunOutput {
        metrics,
        agents: learner.bank().snapshots(),
        critic: learner.critic().map(|c| c.snapshot()),
        critic_target: learner.critic().map(|c| c.target_snapshot()),
    })
}
