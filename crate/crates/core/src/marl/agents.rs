use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::tensor_net::{argmax, Mlp, MlpSnapshot, OptimizerKind, OptimizerState, Rng, Scalar};

/// Concatenates the last `depth` local observations of each agent, newest
/// last. On reset the first observation fills every slot.
#[derive(Debug, Clone)]
pub struct ObservationStacker {
    depth: usize,
    frames: Vec<VecDeque<Vec<f64>>>,
}

impl ObservationStacker {
    pub fn new(depth: usize) -> Self {
        assert!(depth >= 1, "stack depth must be >= 1");
        Self {
            depth,
            frames: Vec::new(),
        }
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn reset(&mut self, local: &[Vec<f64>]) -> Vec<Vec<f64>> {
        self.frames = local
            .iter()
            .map(|o| std::iter::repeat_n(o.clone(), self.depth).collect())
            .collect();
        self.stacked()
    }

    pub fn push(&mut self, local: &[Vec<f64>]) -> Vec<Vec<f64>> {
        for (q, o) in self.frames.iter_mut().zip(local) {
            q.pop_front();
            q.push_back(o.clone());
        }
        self.stacked()
    }

    fn stacked(&self) -> Vec<Vec<f64>> {
        self.frames
            .iter()
            .map(|q| q.iter().flatten().copied().collect())
            .collect()
    }
}

pub(crate) fn to_scalar<T: Scalar>(x: &[f64]) -> Vec<T> {
    x.iter().map(|&v| T::of(v)).collect()
}

/// One Q-network per agent (plus optional target copies), each with its own
/// optimiser state. All agents share the architecture.
#[derive(Debug, Clone)]
pub struct AgentBank<T> {
    nets: Vec<Mlp<T>>,
    targets: Vec<Mlp<T>>,
    opts: Vec<OptimizerState<T>>,
    n_actions: usize,
}

impl<T: Scalar> AgentBank<T> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        n_agents: usize,
        input_len: usize,
        hidden: &[usize],
        n_actions: usize,
        with_targets: bool,
        optimizer: OptimizerKind,
        lr: f64,
        rng: &mut Rng,
    ) -> Result<Self> {
        let mut sizes = vec![input_len];
        sizes.extend_from_slice(hidden);
        sizes.push(n_actions);
        let nets = (0..n_agents)
            .map(|i| Mlp::new(&sizes, &mut rng.child(&format!("agent/{i}"))))
            .collect::<Result<Vec<_>>>()?;
        Self::from_nets(nets, with_targets, optimizer, lr)
    }

    pub fn from_nets(
        nets: Vec<Mlp<T>>,
        with_targets: bool,
        optimizer: OptimizerKind,
        lr: f64,
    ) -> Result<Self> {
        let first = nets
            .first()
            .ok_or_else(|| Error::config("agents", "need at least one agent"))?;
        if nets.iter().any(|n| !n.same_architecture(first)) {
            return Err(Error::config(
                "agents",
                "agents must share one architecture",
            ));
        }
        let n_actions = first.output_len();
        let targets = if with_targets {
            nets.clone()
        } else {
            Vec::new()
        };
        let opts = nets
            .iter()
            .map(|n| OptimizerState::new(optimizer, lr, n))
            .collect();
        Ok(Self {
            nets,
            targets,
            opts,
            n_actions,
        })
    }

    pub fn from_snapshots(
        snaps: &[MlpSnapshot],
        with_targets: bool,
        optimizer: OptimizerKind,
        lr: f64,
    ) -> Result<Self> {
        let nets = snaps
            .iter()
            .map(|s| s.restore())
            .collect::<Result<Vec<_>>>()?;
        Self::from_nets(nets, with_targets, optimizer, lr)
    }

    pub fn n_agents(&self) -> usize {
        self.nets.len()
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn input_len(&self) -> usize {
        self.nets[0].input_len()
    }

    pub fn net(&self, i: usize) -> &Mlp<T> {
        &self.nets[i]
    }

    pub fn target(&self, i: usize) -> Option<&Mlp<T>> {
        self.targets.get(i)
    }

    pub fn has_targets(&self) -> bool {
        !self.targets.is_empty()
    }

    pub(crate) fn parts_mut(&mut self, i: usize) -> (&mut Mlp<T>, &mut OptimizerState<T>) {
        (&mut self.nets[i], &mut self.opts[i])
    }

    pub fn snapshots(&self) -> Vec<MlpSnapshot> {
        self.nets.iter().map(MlpSnapshot::capture).collect()
    }

    pub fn q_values(&self, i: usize, obs: &[f64]) -> Result<Vec<T>> {
        self.nets[i].predict(&to_scalar(obs))
    }

    pub fn target_q_values(&self, i: usize, obs: &[f64]) -> Result<Vec<T>> {
        let net = self
            .targets
            .get(i)
            .ok_or_else(|| Error::Usage("agent bank has no target networks".into()))?;
        net.predict(&to_scalar(obs))
    }

    pub fn greedy(&self, i: usize, obs: &[f64]) -> Result<usize> {
        Ok(argmax(&self.q_values(i, obs)?))
    }

    pub fn greedy_joint(&self, obs: &[Vec<f64>]) -> Result<Vec<usize>> {
        self.check_arity(obs)?;
        obs.iter()
            .enumerate()
            .map(|(i, o)| self.greedy(i, o))
            .collect()
    }

    /// ε-greedy joint action. Every agent consumes one uniform draw (and one
    /// more when exploring), so the stream layout does not depend on Q-values.
    pub fn select_actions(&self, obs: &[Vec<f64>], eps: f64, rng: &mut Rng) -> Result<Vec<usize>> {
        self.check_arity(obs)?;
        if !(0.0..=1.0).contains(&eps) {
            return Err(Error::Usage(format!("epsilon {eps} outside [0, 1]")));
        }
        obs.iter()
            .enumerate()
            .map(|(i, o)| {
                if rng.uniform() < eps {
                    Ok(rng.below(self.n_actions))
                } else {
                    self.greedy(i, o)
                }
            })
            .collect()
    }

    pub fn sync_targets(&mut self) -> Result<()> {
        for (t, n) in self.targets.iter_mut().zip(&self.nets) {
            t.copy_parameters_from(n)?;
        }
        Ok(())
    }

    fn check_arity(&self, obs: &[Vec<f64>]) -> Result<()> {
        if obs.len() != self.nets.len() {
            return Err(Error::config(
                "agents",
                format!("{} observations for {} agents", obs.len(), self.nets.len()),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor_net::{Activation, Layer};

    fn fixed_bank(q: [f64; 3]) -> AgentBank<f64> {
        // Zero weights, biases carry the Q-row.
        let net = Mlp::from_layers(vec![Layer::new(
            2,
            3,
            vec![0.0; 6],
            q.to_vec(),
            Activation::Identity,
        )
        .unwrap()])
        .unwrap();
        AgentBank::from_nets(vec![net], false, OptimizerKind::Sgd, 0.1).unwrap()
    }

    #[test]
    fn greedy_ties_break_low() {
        let bank = fixed_bank([0.1, 0.9, 0.9]);
        let a = bank
            .select_actions(&[vec![0.0, 0.0]], 0.0, &mut Rng::new(0))
            .unwrap();
        assert_eq!(a, vec![1]);
    }

    #[test]
    fn seeded_selection_repeats() {
        let mut rng = Rng::new(3);
        let bank: AgentBank<f64> =
            AgentBank::new(3, 4, &[8], 5, false, OptimizerKind::Adam, 1e-3, &mut rng).unwrap();
        let obs = vec![vec![0.1, 0.2, 0.3, 0.4]; 3];
        let run = |seed| {
            let mut r = Rng::new(seed);
            (0..50)
                .map(|_| bank.select_actions(&obs, 0.5, &mut r).unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(run(9), run(9));
    }

    #[test]
    fn stacker_keeps_last_frames() {
        let mut s = ObservationStacker::new(2);
        let first = s.reset(&[vec![1.0], vec![2.0]]);
        assert_eq!(first, vec![vec![1.0, 1.0], vec![2.0, 2.0]]);
        let next = s.push(&[vec![3.0], vec![4.0]]);
        assert_eq!(next, vec![vec![1.0, 3.0], vec![2.0, 4.0]]);
    }

    #[test]
    fn arity_checked() {
        let bank = fixed_bank([0.0; 3]);
        assert!(bank.greedy_joint(&[vec![0.0; 2], vec![0.0; 2]]).is_err());
        assert!(bank
            .select_actions(&[vec![0.0; 2]], 1.5, &mut Rng::new(0))
            .is_err());
    }
}
