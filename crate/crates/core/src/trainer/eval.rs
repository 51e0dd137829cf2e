use crate::envs::{EnvSpec, JointObservation};
use crate::error::{Error, Result};
use crate::marl::{AgentBank, ObservationStacker};
use crate::tensor_net::{Rng, Scalar};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalResult {
    pub win_rate: f64,
    pub mean_return: f64,
    pub episodes: u64,
}

/// Runs `episodes` episodes of `policy` on a fresh environment driven by
/// `rng`. The policy sees the raw joint observation and the stacked local
/// observations.
pub fn evaluate_policy<F>(
    spec: &EnvSpec,
    stack_depth: usize,
    episodes: u64,
    rng: &mut Rng,
    mut policy: F,
) -> Result<EvalResult>
where
    F: FnMut(&JointObservation, &[Vec<f64>]) -> Result<Vec<usize>>,
{
    if episodes == 0 {
        return Err(Error::Usage("evaluation needs at least one episode".into()));
    }
    let mut env = spec.build()?;
    let mut stacker = ObservationStacker::new(stack_depth);
    let mut wins = 0u64;
    let mut total_return = 0.0;
    for _ in 0..episodes {
        let mut obs = env.reset(rng);
        let mut stacked = stacker.reset(&obs.local);
        loop {
            let actions = policy(&obs, &stacked)?;
            let step = env.step(&actions)?;
            total_return += step.reward;
            if step.win {
                wins += 1;
            }
            if step.terminal {
                break;
            }
            stacked = stacker.push(&step.obs.local);
            obs = step.obs;
        }
    }
    Ok(EvalResult {
        win_rate: wins as f64 / episodes as f64,
        mean_return: total_return / episodes as f64,
        episodes,
    })
}

/// Greedy (ε = 0) evaluation of an agent bank. Never touches the bank's
/// parameters or any training stream.
pub fn evaluate_bank<T: Scalar>(
    bank: &AgentBank<T>,
    spec: &EnvSpec,
    stack_depth: usize,
    episodes: u64,
    rng: &mut Rng,
) -> Result<EvalResult> {
    if bank.n_agents() != spec.n_agents() || bank.n_actions() != spec.n_actions() {
        return Err(Error::config(
            "agents",
            format!(
                "bank has {} agents x {} actions, environment needs {} x {}",
                bank.n_agents(),
                bank.n_actions(),
                spec.n_agents(),
                spec.n_actions()
            ),
        ));
    }
    if bank.input_len() != spec.obs_len() * stack_depth {
        return Err(Error::config(
            "agents",
            format!(
                "agent input length {} does not match observation length {} x stack {}",
                bank.input_len(),
                spec.obs_len(),
                stack_depth
            ),
        ));
    }
    evaluate_policy(spec, stack_depth, episodes, rng, |_, stacked| {
        bank.greedy_joint(stacked)
    })
}
