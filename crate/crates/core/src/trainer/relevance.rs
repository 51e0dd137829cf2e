use crate::error::Result;
use crate::marl::{AgentBank, CriticPair, Learner, ObservationStacker, StrategyKind, Transition};
use crate::run_io::TraceRecord;
use crate::tensor_net::{MlpSnapshot, Rng};

use super::config::RunConfig;
use super::run::{critic_layout, roles};

/// Replays trained agents greedily for `episodes` episodes and decomposes the
/// trained critic at every visited (o, a).
pub fn relevance_trace(
    config: &RunConfig,
    agents: &[MlpSnapshot],
    critic: &MlpSnapshot,
    episodes: u64,
    rng: &mut Rng,
) -> Result<Vec<TraceRecord>> {
    let t = &config.training;
    let bank = AgentBank::<f64>::from_snapshots(agents, false, t.optimizer, t.agent_lr)?;
    let pair = CriticPair::from_net(
        critic_layout(config)?,
        critic.restore()?,
        t.sync_interval,
        t.optimizer,
        t.critic_lr,
    )?;
    let mut settings = config.learner_settings();
    settings.decompose_target = false;
    let learner = Learner::new(
        StrategyKind::Rdn,
        bank,
        Some(pair),
        settings,
        roles(&config.env),
    )?;

    let mut env = config.env.build()?;
    let mut stacker = ObservationStacker::new(t.stack_depth);
    let mut records = Vec::new();
    for episode in 0..episodes {
        let first = env.reset(rng);
        let mut obs = stacker.reset(&first.local);
        let mut state = first.state;
        for step_idx in 0u64.. {
            let actions = learner.bank().greedy_joint(&obs)?;
            let probe = Transition {
                obs,
                state,
                actions,
                reward: 0.0,
                next_obs: Vec::new(),
                next_state: Vec::new(),
                terminal: true,
            };
            let rep = learner.decompose(&probe, None)?;
            records.push(TraceRecord {
                episode,
                t: step_idx,
                q_tot: rep.q_tot,
                per_agent: rep.per_agent.clone(),
                unattributed: rep.unattributed,
                bias_absorbed: rep.total_bias_absorbed(),
                residual: rep.conservation_residual,
            });
            let step = env.step(&probe.actions)?;
            if step.terminal {
                break;
            }
            obs = stacker.push(&step.obs.local);
            state = step.obs.state;
        }
    }
    Ok(records)
}
