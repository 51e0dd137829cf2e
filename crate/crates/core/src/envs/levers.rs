use std::sync::Arc;

use super::{check_actions, one_hot_into, CooperativeEnv, EnvSpec, JointObservation, StepResult};
use crate::error::{Error, Result};
use crate::lrp::SliceMap;
use crate::tensor_net::Rng;

/// One-shot coordination game. A target lever is announced to everyone; the
/// team scores 1 iff every essential agent pulls the target and no redundant
/// agent touches it.
#[derive(Debug, Clone)]
pub struct SignalLevers {
    spec: EnvSpec,
    target: usize,
    done: bool,
    ownership: Arc<SliceMap>,
}

impl SignalLevers {
    pub fn new(spec: EnvSpec) -> Self {
        let k = spec.levers;
        let m = spec.n_agents();
        let owned = (0..m).map(|i| vec![k + i]).collect();
        let ownership = SliceMap::new(owned, (0..k).collect(), k + m).expect("static layout");
        Self {
            spec,
            target: 0,
            done: true,
            ownership: Arc::new(ownership),
        }
    }

    pub fn target(&self) -> usize {
        self.target
    }

    /// Puts the game in a known state (tests and oracles).
    pub fn set_target(&mut self, target: usize) {
        assert!(target < self.spec.levers);
        self.target = target;
        self.done = false;
    }

    /// 1 iff the joint action wins for `target`.
    pub fn payoff(spec: &EnvSpec, target: usize, actions: &[usize]) -> f64 {
        let win = actions.iter().enumerate().all(|(i, &a)| {
            if spec.is_essential(i) {
                a == target
            } else {
                a != target
            }
        });
        if win {
            1.0
        } else {
            0.0
        }
    }
}

impl CooperativeEnv for SignalLevers {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, rng: &mut Rng) -> JointObservation {
        self.target = rng.below(self.spec.levers);
        self.done = false;
        self.observe()
    }

    fn step(&mut self, actions: &[usize]) -> Result<StepResult> {
        if self.done {
            return Err(Error::Usage("episode finished; call reset".into()));
        }
        check_actions(actions, self.spec.n_agents(), self.spec.levers)?;
        let reward = Self::payoff(&self.spec, self.target, actions);
        self.done = true;
        Ok(StepResult {
            obs: self.observe(),
            reward,
            terminal: true,
            win: reward > 0.0,
        })
    }

    fn observe(&self) -> JointObservation {
        let (k, m) = (self.spec.levers, self.spec.n_agents());
        let local = (0..m)
            .map(|i| {
                let mut o = Vec::with_capacity(self.spec.obs_len());
                o.push(if self.spec.is_essential(i) { 1.0 } else { 0.0 });
                one_hot_into(&mut o, self.target, k);
                one_hot_into(&mut o, i, m);
                o
            })
            .collect();
        let mut state = Vec::with_capacity(self.spec.state_len());
        one_hot_into(&mut state, self.target, k);
        state.extend((0..m).map(|i| if self.spec.is_essential(i) { 1.0 } else { 0.0 }));
        JointObservation {
            local,
            state,
            ownership: Arc::clone(&self.ownership),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn game(ne: usize, nr: usize, k: usize, target: usize) -> SignalLevers {
        let mut g = SignalLevers::new(EnvSpec::levers(ne, nr, k));
        g.set_target(target);
        g
    }

    #[test]
    fn win_needs_essentials_on_target_and_redundant_off() {
        let mut g = game(2, 1, 2, 1);
        let r = g.step(&[1, 1, 0]).unwrap();
        assert_eq!(r.reward, 1.0);
        assert!(r.win && r.terminal);

        let mut g = game(2, 1, 2, 1);
        let r = g.step(&[1, 1, 1]).unwrap();
        assert_eq!(r.reward, 0.0);
        assert!(!r.win && r.terminal);
    }

    #[test]
    fn observation_layout() {
        let g = game(2, 1, 2, 1);
        let obs = g.observe();
        assert_eq!(obs.local.len(), 3);
        for (i, o) in obs.local.iter().enumerate() {
            assert_eq!(o.len(), 6);
            assert_eq!(o[0], if i < 2 { 1.0 } else { 0.0 });
            assert_eq!(&o[1..3], &[0.0, 1.0]);
            assert_eq!(o[3..].iter().position(|&v| v == 1.0), Some(i));
            assert_eq!(o[3..].iter().sum::<f64>(), 1.0);
        }
        assert_eq!(obs.state, vec![0.0, 1.0, 1.0, 1.0, 0.0]);
        assert_eq!(obs.ownership.unowned(), &[0, 1]);
        assert_eq!(obs.ownership.owned(2), &[4]);
    }

    #[test]
    fn bad_actions_and_double_step_are_usage_errors() {
        let mut g = game(1, 1, 3, 0);
        assert!(matches!(g.step(&[0]), Err(Error::Usage(_))));
        assert!(matches!(g.step(&[0, 3]), Err(Error::Usage(_))));
        g.step(&[0, 1]).unwrap();
        assert!(matches!(g.step(&[0, 1]), Err(Error::Usage(_))));
    }

    #[test]
    fn reset_is_seed_deterministic() {
        let mut a = SignalLevers::new(EnvSpec::levers(2, 3, 4));
        let mut b = a.clone();
        for s in 0..20 {
            assert_eq!(a.reset(&mut Rng::new(s)), b.reset(&mut Rng::new(s)));
        }
    }
}
