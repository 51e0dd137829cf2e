use serde::{Deserialize, Serialize};

use super::agents::to_scalar;
use crate::error::{Error, Result};
use crate::lrp::SliceMap;
use crate::tensor_net::{
    ActivationCache, Mlp, MlpSnapshot, OptimizerKind, OptimizerState, Rng, Scalar,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriticInput {
    /// `[o_1 ; onehot(a_1) ; ... ; o_m ; onehot(a_m)]`
    LocalConcat,
    /// `[state ; onehot(a_1) ; ... ; onehot(a_m)]`
    FullState,
}

/// Shapes the critic needs to know about.
#[derive(Debug, Clone)]
pub struct CriticLayout {
    pub mode: CriticInput,
    pub n_agents: usize,
    pub obs_len: usize,
    pub n_actions: usize,
    /// Ownership of the ground-truth state indices (full-state mode).
    pub state_ownership: SliceMap,
}

impl CriticLayout {
    pub fn input_len(&self) -> usize {
        let actions = self.n_agents * self.n_actions;
        match self.mode {
            CriticInput::LocalConcat => self.n_agents * self.obs_len + actions,
            CriticInput::FullState => self.state_ownership.input_len() + actions,
        }
    }

    /// Which critic-input indices belong to which agent.
    pub fn slice_map(&self) -> SliceMap {
        let m = self.n_agents;
        match self.mode {
            CriticInput::LocalConcat => {
                SliceMap::contiguous(&vec![self.obs_len + self.n_actions; m])
            }
            CriticInput::FullState => {
                let s = self.state_ownership.input_len();
                let owned = (0..m)
                    .map(|i| {
                        let mut idx = self.state_ownership.owned(i).to_vec();
                        let a0 = s + i * self.n_actions;
                        idx.extend(a0..a0 + self.n_actions);
                        idx
                    })
                    .collect();
                SliceMap::new(
                    owned,
                    self.state_ownership.unowned().to_vec(),
                    self.input_len(),
                )
                .expect("state ownership is a partition")
            }
        }
    }

    pub fn encode<T: Scalar>(
        &self,
        obs: &[Vec<f64>],
        state: &[f64],
        actions: &[usize],
    ) -> Result<Vec<T>> {
        let m = self.n_agents;
        if actions.len() != m || (self.mode == CriticInput::LocalConcat && obs.len() != m) {
            return Err(Error::config(
                "critic",
                format!(
                    "expected {m} agents, got {} observations and {} actions",
                    obs.len(),
                    actions.len()
                ),
            ));
        }
        if let Some(&a) = actions.iter().find(|&&a| a >= self.n_actions) {
            return Err(Error::config("critic", format!("action {a} out of range")));
        }
        let mut x = Vec::with_capacity(self.input_len());
        let one_hot = |x: &mut Vec<T>, a: usize| {
            x.extend((0..self.n_actions).map(|k| if k == a { T::one() } else { T::zero() }))
        };
        match self.mode {
            CriticInput::LocalConcat => {
                for (o, &a) in obs.iter().zip(actions) {
                    if o.len() != self.obs_len {
                        return Err(Error::config(
                            "critic",
                            format!("observation length {} != {}", o.len(), self.obs_len),
                        ));
                    }
                    x.extend(o.iter().map(|&v| T::of(v)));
                    one_hot(&mut x, a);
                }
            }
            CriticInput::FullState => {
                if state.len() != self.state_ownership.input_len() {
                    return Err(Error::config(
                        "critic",
                        format!(
                            "state length {} != {}",
                            state.len(),
                            self.state_ownership.input_len()
                        ),
                    ));
                }
                x.extend(to_scalar::<T>(state));
                for &a in actions {
                    one_hot(&mut x, a);
                }
            }
        }
        Ok(x)
    }
}

/// Online critic, its target copy, and the online critic's optimiser.
#[derive(Debug, Clone)]
pub struct CriticPair<T> {
    online: Mlp<T>,
    target: Mlp<T>,
    opt: OptimizerState<T>,
    layout: CriticLayout,
    slices: SliceMap,
    sync_interval: u64,
    updates: u64,
}

impl<T: Scalar> CriticPair<T> {
    pub fn new(
        layout: CriticLayout,
        hidden: &[usize],
        sync_interval: u64,
        optimizer: OptimizerKind,
        lr: f64,
        rng: &mut Rng,
    ) -> Result<Self> {
        let mut sizes = vec![layout.input_len()];
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        let online = Mlp::new(&sizes, rng)?;
        Self::from_net(layout, online, sync_interval, optimizer, lr)
    }

    pub fn from_net(
        layout: CriticLayout,
        online: Mlp<T>,
        sync_interval: u64,
        optimizer: OptimizerKind,
        lr: f64,
    ) -> Result<Self> {
        if online.input_len() != layout.input_len() || online.output_len() != 1 {
            return Err(Error::config(
                "critic",
                format!(
                    "critic must map {} inputs to 1 output, got {:?}",
                    layout.input_len(),
                    online.sizes()
                ),
            ));
        }
        if sync_interval == 0 {
            return Err(Error::config("training.sync_interval", "must be >= 1"));
        }
        let target = online.clone();
        let opt = OptimizerState::new(optimizer, lr, &online);
        let slices = layout.slice_map();
        Ok(Self {
            online,
            target,
            opt,
            layout,
            slices,
            sync_interval,
            updates: 0,
        })
    }

    pub fn layout(&self) -> &CriticLayout {
        &self.layout
    }

    pub fn slices(&self) -> &SliceMap {
        &self.slices
    }

    pub fn online(&self) -> &Mlp<T> {
        &self.online
    }

    pub fn target(&self) -> &Mlp<T> {
        &self.target
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn snapshot(&self) -> MlpSnapshot {
        MlpSnapshot::capture(&self.online)
    }

    pub fn target_snapshot(&self) -> MlpSnapshot {
        MlpSnapshot::capture(&self.target)
    }

    pub fn critic_forward(
        &self,
        obs: &[Vec<f64>],
        state: &[f64],
        actions: &[usize],
        use_target: bool,
    ) -> Result<(T, ActivationCache<T>)> {
        let x = self.layout.encode(obs, state, actions)?;
        let net = if use_target {
            &self.target
        } else {
            &self.online
        };
        let (out, cache) = net.forward(&x)?;
        Ok((out[0], cache))
    }

    pub fn target_value(&self, obs: &[Vec<f64>], state: &[f64], actions: &[usize]) -> Result<T> {
        let x = self.layout.encode(obs, state, actions)?;
        Ok(self.target.predict(&x)?[0])
    }

    pub(crate) fn online_and_opt(&mut self) -> (&mut Mlp<T>, &mut OptimizerState<T>) {
        (&mut self.online, &mut self.opt)
    }

    /// Records one gradient step and syncs the target every `sync_interval`
    /// steps.
    pub(crate) fn after_update(&mut self) -> Result<()> {
        self.updates += 1;
        if self.updates.is_multiple_of(self.sync_interval) {
            self.sync()?;
        }
        Ok(())
    }

    pub fn sync(&mut self) -> Result<()> {
        self.target.copy_parameters_from(&self.online)
    }
}
