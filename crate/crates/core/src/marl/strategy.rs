use serde::{Deserialize, Serialize};

use super::agents::{to_scalar, AgentBank};
use super::critic::CriticPair;
use super::replay::Transition;
use crate::error::{Error, Result};
use crate::lrp::{lrp_backward, lrp_backward_seeded, LrpRule, RelevanceReport};
use crate::tensor_net::{argmax, GradientSet, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    /// Critic decomposed by relevance propagation into per-agent targets.
    Rdn,
    /// Additive mixing of per-agent utilities.
    Vdn,
    /// Independent Q-learning on the shared reward.
    Iql,
}

impl StrategyKind {
    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::Rdn => "rdn",
            StrategyKind::Vdn => "vdn",
            StrategyKind::Iql => "iql",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "rdn" => Some(StrategyKind::Rdn),
            "vdn" => Some(StrategyKind::Vdn),
            "iql" => Some(StrategyKind::Iql),
            _ => None,
        }
    }

    pub fn needs_critic(self) -> bool {
        self == StrategyKind::Rdn
    }

    pub fn needs_agent_targets(self) -> bool {
        self != StrategyKind::Rdn
    }
}

/// Per-train-step diagnostics.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepReport {
    /// TD loss of the joint value (critic for RDN, mixture for VDN; 0 for IQL).
    pub critic_loss: f64,
    /// Mean over agents of each agent's regression loss.
    pub agent_loss: f64,
    /// Mean |conservation residual| over decomposed samples (RDN only).
    pub mean_abs_residual: f64,
    /// Sum of |credit| over (sample, essential agent) pairs and the pair count.
    /// Credit is Q̃ for RDN and the chosen-action utility otherwise.
    pub essential_abs_credit: (f64, usize),
    pub redundant_abs_credit: (f64, usize),
}

/// Strategy-independent learning hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearnerSettings {
    pub gamma: f64,
    /// Gradient steps between target syncs.
    pub sync_interval: u64,
    pub rule: LrpRule,
    /// Decompose the TD target instead of the critic prediction (RDN).
    pub decompose_target: bool,
}

/// Per-agent Q-networks plus whatever joint machinery the strategy needs.
#[derive(Debug, Clone)]
pub struct Learner<T> {
    kind: StrategyKind,
    bank: AgentBank<T>,
    critic: Option<CriticPair<T>>,
    settings: LearnerSettings,
    essential: Vec<bool>,
    agent_updates: u64,
}

/// Additive mixing; the fold starts at zero so a single agent mixes to itself.
pub fn vdn_mix<T: Scalar>(chosen: &[T]) -> T {
    chosen.iter().fold(T::zero(), |acc, &q| acc + q)
}

fn mean_sq<T: Scalar>(diffs: &[T]) -> f64 {
    diffs.iter().map(|d| d.as_f64() * d.as_f64()).sum::<f64>() / diffs.len() as f64
}

impl<T: Scalar> Learner<T> {
    pub fn new(
        kind: StrategyKind,
        bank: AgentBank<T>,
        critic: Option<CriticPair<T>>,
        settings: LearnerSettings,
        essential: Vec<bool>,
    ) -> Result<Self> {
        if kind.needs_critic() && critic.is_none() {
            return Err(Error::config("strategy", "rdn needs a critic"));
        }
        if kind.needs_agent_targets() && !bank.has_targets() {
            return Err(Error::config("strategy", "agent target networks missing"));
        }
        if essential.len() != bank.n_agents() {
            return Err(Error::config(
                "strategy",
                "role list does not match agent count",
            ));
        }
        if settings.sync_interval == 0 {
            return Err(Error::config("training.sync_interval", "must be >= 1"));
        }
        settings.rule.validate()?;
        Ok(Self {
            kind,
            bank,
            critic,
            settings,
            essential,
            agent_updates: 0,
        })
    }

    pub fn kind(&self) -> StrategyKind {
        self.kind
    }

    pub fn bank(&self) -> &AgentBank<T> {
        &self.bank
    }

    pub fn critic(&self) -> Option<&CriticPair<T>> {
        self.critic.as_ref()
    }

    pub fn settings(&self) -> &LearnerSettings {
        &self.settings
    }

    pub fn train_step(&mut self, batch: &[&Transition]) -> Result<StepReport> {
        if batch.is_empty() {
            return Err(Error::Training("empty batch".into()));
        }
        match self.kind {
            StrategyKind::Rdn => self.rdn_train_step(batch),
            StrategyKind::Vdn => self.vdn_train_step(batch),
            StrategyKind::Iql => self.iql_train_step(batch),
        }
    }

    /// `r + γ·(1 - terminal)·next`, skipping `next` entirely for terminal
    /// samples.
    fn bootstrap(&self, tr: &Transition, next: impl FnOnce() -> Result<f64>) -> Result<f64> {
        if tr.terminal || self.settings.gamma == 0.0 {
            Ok(tr.reward)
        } else {
            Ok(tr.reward + self.settings.gamma * next()?)
        }
    }

    /// TD target for the joint critic, with next actions chosen greedily by the
    /// online agents.
    pub fn critic_td_target(&self, tr: &Transition) -> Result<f64> {
        let critic = self
            .critic
            .as_ref()
            .ok_or_else(|| Error::Usage("no critic".into()))?;
        self.bootstrap(tr, || {
            let next_actions = self.bank.greedy_joint(&tr.next_obs)?;
            Ok(critic
                .target_value(&tr.next_obs, &tr.next_state, &next_actions)?
                .as_f64())
        })
    }

    /// Relevance decomposition of the online critic at `(o, a)`, attributed to
    /// agents. `seed` overrides the injected relevance.
    pub fn decompose(&self, tr: &Transition, seed: Option<f64>) -> Result<RelevanceReport> {
        let critic = self
            .critic
            .as_ref()
            .ok_or_else(|| Error::Usage("no critic".into()))?;
        let (_, cache) = critic.critic_forward(&tr.obs, &tr.state, &tr.actions, false)?;
        let mut rep = match seed {
            None => lrp_backward(critic.online(), &cache, self.settings.rule)?,
            Some(s) => lrp_backward_seeded(critic.online(), &cache, T::of(s), self.settings.rule)?,
        };
        rep.attribute(critic.slices())?;
        Ok(rep)
    }

    fn rdn_train_step(&mut self, batch: &[&Transition]) -> Result<StepReport> {
        let b = T::of(batch.len() as f64);
        let two = T::of(2.0);

        // Critic regression onto y = r + γ Q'_tot(o', a').
        let targets = batch
            .iter()
            .map(|tr| self.critic_td_target(tr))
            .collect::<Result<Vec<f64>>>()?;
        let critic = self.critic.as_mut().expect("checked at construction");
        let mut grads = GradientSet::zeros_like(critic.online());
        let mut diffs = Vec::with_capacity(batch.len());
        for (tr, &y) in batch.iter().zip(&targets) {
            let (q, cache) = critic.critic_forward(&tr.obs, &tr.state, &tr.actions, false)?;
            let d = q - T::of(y);
            critic
                .online()
                .accumulate_backward(&cache, &[two * d / b], &mut grads)?;
            diffs.push(d);
        }
        let critic_loss = mean_sq(&diffs);
        if !critic_loss.is_finite() {
            return Err(Error::Training(format!(
                "critic loss is {critic_loss} (batch of {}, first target {})",
                batch.len(),
                targets[0]
            )));
        }
        let (net, opt) = critic.online_and_opt();
        opt.step(net, &grads)?;
        critic.after_update()?;

        // Decompose the updated critic and regress each agent onto its share.
        let m = self.bank.n_agents();
        let mut per_agent_targets = Vec::with_capacity(batch.len());
        let mut residual = 0.0;
        let mut ess = (0.0, 0);
        let mut red = (0.0, 0);
        for (tr, &y) in batch.iter().zip(&targets) {
            let seed = self.settings.decompose_target.then_some(y);
            let rep = self.decompose(tr, seed)?;
            residual += rep.conservation_residual.abs();
            for (i, &credit) in rep.per_agent.iter().enumerate() {
                let acc = if self.essential[i] {
                    &mut ess
                } else {
                    &mut red
                };
                acc.0 += credit.abs();
                acc.1 += 1;
            }
            per_agent_targets.push(rep.per_agent);
        }
        let mut agent_loss = 0.0;
        for i in 0..m {
            let targets_i: Vec<f64> = per_agent_targets.iter().map(|t| t[i]).collect();
            agent_loss += self.regress_agent(i, batch, &targets_i)?.0;
        }
        self.agent_updates += 1;
        Ok(StepReport {
            critic_loss,
            agent_loss: agent_loss / m as f64,
            mean_abs_residual: residual / batch.len() as f64,
            essential_abs_credit: ess,
            redundant_abs_credit: red,
        })
    }

    /// One optimiser step of agent `i` on mean (Q_i(o_i, a_i) - target)^2 over
    /// the batch; only the taken-action output receives gradient. Returns the
    /// loss before the step and Σ|Q_i(o_i, a_i)| over the batch.
    pub fn regress_agent(
        &mut self,
        i: usize,
        batch: &[&Transition],
        targets: &[f64],
    ) -> Result<(f64, f64)> {
        let b = T::of(batch.len() as f64);
        let two = T::of(2.0);
        let (net, opt) = self.bank.parts_mut(i);
        let mut grads = GradientSet::zeros_like(net);
        let mut diffs = Vec::with_capacity(batch.len());
        let mut d_out = vec![T::zero(); net.output_len()];
        let mut abs_chosen = 0.0;
        for (tr, &y) in batch.iter().zip(targets) {
            let (q, cache) = net.forward(&to_scalar(&tr.obs[i]))?;
            let a = tr.actions[i];
            abs_chosen += q[a].as_f64().abs();
            let d = q[a] - T::of(y);
            d_out[a] = two * d / b;
            net.accumulate_backward(&cache, &d_out, &mut grads)?;
            d_out[a] = T::zero();
            diffs.push(d);
        }
        let loss = mean_sq(&diffs);
        if !loss.is_finite() {
            return Err(Error::Training(format!("agent {i} loss is {loss}")));
        }
        opt.step(net, &grads)
            .map_err(|e| e.with_context(format!("agent {i}")))?;
        Ok((loss, abs_chosen))
    }

    fn max_target_q(&self, i: usize, obs: &[f64]) -> Result<f64> {
        let q = self.bank.target_q_values(i, obs)?;
        Ok(q[argmax(&q)].as_f64())
    }

    fn after_agent_update(&mut self) -> Result<()> {
        self.agent_updates += 1;
        if self
            .agent_updates
            .is_multiple_of(self.settings.sync_interval)
        {
            self.bank.sync_targets()?;
        }
        Ok(())
    }

    /// Mixed value Σ_i Q_i(o_i, a_i) under the online agents.
    pub fn vdn_q_tot(&self, obs: &[Vec<f64>], actions: &[usize]) -> Result<T> {
        let chosen = (0..self.bank.n_agents())
            .map(|i| Ok(self.bank.q_values(i, &obs[i])?[actions[i]]))
            .collect::<Result<Vec<T>>>()?;
        Ok(vdn_mix(&chosen))
    }

    fn vdn_train_step(&mut self, batch: &[&Transition]) -> Result<StepReport> {
        let m = self.bank.n_agents();
        let b = T::of(batch.len() as f64);
        let two = T::of(2.0);
        let mut grads: Vec<_> = (0..m)
            .map(|i| GradientSet::zeros_like(self.bank.net(i)))
            .collect();
        let mut diffs = Vec::with_capacity(batch.len());
        let mut ess = (0.0, 0);
        let mut red = (0.0, 0);
        for tr in batch {
            let y = self.bootstrap(tr, || {
                let next: Vec<f64> = (0..m)
                    .map(|i| self.max_target_q(i, &tr.next_obs[i]))
                    .collect::<Result<_>>()?;
                Ok(vdn_mix(&next))
            })?;
            let mut caches = Vec::with_capacity(m);
            let mut chosen = Vec::with_capacity(m);
            for i in 0..m {
                let (q, cache) = self.bank.net(i).forward(&to_scalar(&tr.obs[i]))?;
                let qa = q[tr.actions[i]];
                let acc = if self.essential[i] {
                    &mut ess
                } else {
                    &mut red
                };
                acc.0 += qa.as_f64().abs();
                acc.1 += 1;
                chosen.push(qa);
                caches.push(cache);
            }
            let d = vdn_mix(&chosen) - T::of(y);
            let g = two * d / b;
            for (i, cache) in caches.iter().enumerate() {
                let mut d_out = vec![T::zero(); self.bank.n_actions()];
                d_out[tr.actions[i]] = g;
                self.bank
                    .net(i)
                    .accumulate_backward(cache, &d_out, &mut grads[i])?;
            }
            diffs.push(d);
        }
        let loss = mean_sq(&diffs);
        if !loss.is_finite() {
            return Err(Error::Training(format!("mixed TD loss is {loss}")));
        }
        for (i, g) in grads.iter().enumerate() {
            let (net, opt) = self.bank.parts_mut(i);
            opt.step(net, g)
                .map_err(|e| e.with_context(format!("agent {i}")))?;
        }
        self.after_agent_update()?;
        Ok(StepReport {
            critic_loss: loss,
            agent_loss: loss,
            mean_abs_residual: 0.0,
            essential_abs_credit: ess,
            redundant_abs_credit: red,
        })
    }

    fn iql_train_step(&mut self, batch: &[&Transition]) -> Result<StepReport> {
        let m = self.bank.n_agents();
        let mut total = 0.0;
        let mut ess = (0.0, 0);
        let mut red = (0.0, 0);
        for i in 0..m {
            let targets = batch
                .iter()
                .map(|tr| self.bootstrap(tr, || self.max_target_q(i, &tr.next_obs[i])))
                .collect::<Result<Vec<f64>>>()?;
            let (loss, abs_chosen) = self.regress_agent(i, batch, &targets)?;
            let acc = if self.essential[i] {
                &mut ess
            } else {
                &mut red
            };
            acc.0 += abs_chosen;
            acc.1 += batch.len();
            total += loss;
        }
        self.after_agent_update()?;
        Ok(StepReport {
            critic_loss: 0.0,
            agent_loss: total / m as f64,
            mean_abs_residual: 0.0,
            essential_abs_credit: ess,
            redundant_abs_credit: red,
        })
    }
}
