use std::sync::Arc;

use super::{check_actions, one_hot_into, CooperativeEnv, EnvSpec, JointObservation, StepResult};
use crate::error::{Error, Result};
use crate::lrp::SliceMap;
use crate::tensor_net::Rng;

pub const CORRIDOR_ACTIONS: usize = 6;

pub const ADVANCE_REWARD: f64 = 0.1;
pub const GOAL_REWARD: f64 = 1.0;
pub const STEP_COST: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(usize)]
pub enum CorridorAction {
    Left = 0,
    Right = 1,
    Up = 2,
    Down = 3,
    Stay = 4,
    Push = 5,
}

impl CorridorAction {
    pub fn from_index(i: usize) -> Option<Self> {
        use CorridorAction::*;
        [Left, Right, Up, Down, Stay, Push].get(i).copied()
    }
}

/// Full corridor state. Row 0 is the payload lane, row 1 the side lane.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CorridorState {
    pub payload: usize,
    /// `(row, col)` per agent.
    pub positions: Vec<(usize, usize)>,
    pub t: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub next: CorridorState,
    pub reward: f64,
    pub advanced: bool,
    pub win: bool,
}

/// Two-row corridor. Essential agents must push the payload along row 0 to the
/// last column together; anyone standing right in front of the payload blocks
/// it, so redundant agents have to step into row 1.
#[derive(Debug, Clone)]
pub struct PianoCorridor {
    spec: EnvSpec,
    state: CorridorState,
    done: bool,
    ownership: Arc<SliceMap>,
}

impl PianoCorridor {
    pub fn new(spec: EnvSpec) -> Self {
        let (l, m) = (spec.corridor_length, spec.n_agents());
        // [payload one-hot (L) | per-agent (row bit, col one-hot) | role bits]
        let owned = (0..m)
            .map(|i| {
                let mut idx: Vec<usize> = (l + i * (l + 1)..l + (i + 1) * (l + 1)).collect();
                idx.push(l + m * (l + 1) + i);
                idx
            })
            .collect();
        let ownership =
            SliceMap::new(owned, (0..l).collect(), spec.state_len()).expect("static layout");
        let state = CorridorState {
            payload: 0,
            positions: vec![(0, 0); m],
            t: 0,
        };
        Self {
            spec,
            state,
            done: true,
            ownership: Arc::new(ownership),
        }
    }

    pub fn state(&self) -> &CorridorState {
        &self.state
    }

    /// Puts the game in a known state (tests and oracles).
    pub fn set_state(&mut self, state: CorridorState) {
        assert_eq!(state.positions.len(), self.spec.n_agents());
        self.done = state.t >= self.spec.horizon || state.payload + 1 >= self.spec.corridor_length;
        self.state = state;
    }

    /// Deterministic dynamics. Movement resolves simultaneously (clamped, agents
    /// may share cells); then the payload advances iff every essential agent
    /// stands on it and pushes and the cell ahead is empty. Pushers follow the
    /// payload into its new column.
    pub fn transition(spec: &EnvSpec, s: &CorridorState, actions: &[usize]) -> Transition {
        let l = spec.corridor_length;
        let mut positions = s.positions.clone();
        for ((row, col), &a) in positions.iter_mut().zip(actions) {
            match CorridorAction::from_index(a) {
                Some(CorridorAction::Left) => *col = col.saturating_sub(1),
                Some(CorridorAction::Right) => *col = (*col + 1).min(l - 1),
                Some(CorridorAction::Up) => *row = 0,
                Some(CorridorAction::Down) => *row = 1,
                _ => {}
            }
        }
        let p = s.payload;
        let all_push = (0..spec.n_essential)
            .all(|i| positions[i] == (0, p) && actions[i] == CorridorAction::Push as usize);
        let ahead_clear = p + 1 < l && !positions.iter().any(|&pos| pos == (0, p + 1));
        let advanced = all_push && ahead_clear;
        let mut payload = p;
        if advanced {
            payload += 1;
            for pos in positions.iter_mut().take(spec.n_essential) {
                pos.1 = payload;
            }
        }
        let win = payload == l - 1;
        let mut reward = -STEP_COST;
        if advanced {
            reward += ADVANCE_REWARD;
        }
        if win {
            reward += GOAL_REWARD;
        }
        Transition {
            next: CorridorState {
                payload,
                positions,
                t: s.t + 1,
            },
            reward,
            advanced,
            win,
        }
    }

    fn blocked_ahead(&self) -> bool {
        let p = self.state.payload;
        self.state.positions.iter().any(|&pos| pos == (0, p + 1))
    }
}

impl CooperativeEnv for PianoCorridor {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, rng: &mut Rng) -> JointObservation {
        let l = self.spec.corridor_length;
        let positions = (0..self.spec.n_agents())
            .map(|i| {
                if self.spec.is_essential(i) {
                    (0, 0)
                } else {
                    (0, 1 + rng.below(l - 1))
                }
            })
            .collect();
        self.state = CorridorState {
            payload: 0,
            positions,
            t: 0,
        };
        self.done = false;
        self.observe()
    }

    fn step(&mut self, actions: &[usize]) -> Result<StepResult> {
        if self.done {
            return Err(Error::Usage("episode finished; call reset".into()));
        }
        check_actions(actions, self.spec.n_agents(), CORRIDOR_ACTIONS)?;
        let tr = Self::transition(&self.spec, &self.state, actions);
        self.state = tr.next;
        let terminal = tr.win || self.state.t >= self.spec.horizon;
        self.done = terminal;
        Ok(StepResult {
            obs: self.observe(),
            reward: tr.reward,
            terminal,
            win: tr.win,
        })
    }

    fn observe(&self) -> JointObservation {
        let (l, m) = (self.spec.corridor_length, self.spec.n_agents());
        let p = self.state.payload;
        let blocked = if self.blocked_ahead() { 1.0 } else { 0.0 };
        let role = |i: usize| if self.spec.is_essential(i) { 1.0 } else { 0.0 };
        let local = (0..m)
            .map(|i| {
                let (row, col) = self.state.positions[i];
                let mut o = Vec::with_capacity(self.spec.obs_len());
                o.push(role(i));
                o.push(row as f64);
                one_hot_into(&mut o, col, l);
                one_hot_into(&mut o, p, l);
                o.push(blocked);
                one_hot_into(&mut o, i, m);
                o
            })
            .collect();
        let mut state = Vec::with_capacity(self.spec.state_len());
        one_hot_into(&mut state, p, l);
        for &(row, col) in &self.state.positions {
            state.push(row as f64);
            one_hot_into(&mut state, col, l);
        }
        state.extend((0..m).map(role));
        JointObservation {
            local,
            state,
            ownership: Arc::clone(&self.ownership),
        }
    }
}
