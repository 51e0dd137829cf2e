//! Exact optima for small instances: exhaustive enumeration for the levers game
//! and finite-horizon joint value iteration for the corridor.

use serde::{Deserialize, Serialize};

use super::corridor::{CorridorState, PianoCorridor, CORRIDOR_ACTIONS};
use super::levers::SignalLevers;
use super::{EnvKind, EnvSpec};
use crate::error::{Error, Result};

pub const LEVERS_MAX_JOINT_ACTIONS: f64 = 1e6;
pub const CORRIDOR_MAX_STATE_ACTIONS: f64 = 1e7;
pub const VALUE_ITERATION_TOL: f64 = 1e-10;
/// Policy tables are exported only below this many entries.
pub const POLICY_TABLE_LIMIT: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PolicyEntry {
    // Corridor first: untagged decoding tries variants in order.
    Corridor {
        payload: usize,
        positions: Vec<(usize, usize)>,
        steps_left: usize,
        joint_action: Vec<usize>,
    },
    Levers {
        target: usize,
        joint_action: Vec<usize>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub spec: EnvSpec,
    /// Optimal expected (undiscounted) return from the reset distribution.
    pub optimal_value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub policy: Option<Vec<PolicyEntry>>,
}

pub fn enumerate_oracle(spec: &EnvSpec) -> Result<OracleResult> {
    spec.validate()?;
    match spec.kind {
        EnvKind::SignalLevers => levers_oracle(spec),
        EnvKind::PianoCorridor => corridor_oracle(spec).map(|o| o.result),
    }
}

/// Decodes joint action index `idx` in base `n` (agent 0 least significant).
fn decode(mut idx: usize, n: usize, m: usize, out: &mut [usize]) {
    for slot in out.iter_mut().take(m) {
        *slot = idx % n;
        idx /= n;
    }
}

fn levers_oracle(spec: &EnvSpec) -> Result<OracleResult> {
    let (k, m) = (spec.levers, spec.n_agents());
    let joint = (k as f64).powi(m as i32);
    if joint > LEVERS_MAX_JOINT_ACTIONS {
        return Err(Error::Capacity(format!(
            "{k}^{m} joint actions exceed the enumeration limit of {LEVERS_MAX_JOINT_ACTIONS}"
        )));
    }
    let joint = joint as usize;
    let mut actions = vec![0; m];
    let mut total = 0.0;
    let mut policy = Vec::with_capacity(k);
    for target in 0..k {
        let mut best = (f64::NEG_INFINITY, 0);
        for idx in 0..joint {
            decode(idx, k, m, &mut actions);
            let r = SignalLevers::payoff(spec, target, &actions);
            if r > best.0 {
                best = (r, idx);
            }
        }
        decode(best.1, k, m, &mut actions);
        total += best.0;
        policy.push(PolicyEntry::Levers {
            target,
            joint_action: actions.clone(),
        });
    }
    Ok(OracleResult {
        spec: spec.clone(),
        optimal_value: total / k as f64,
        policy: Some(policy),
    })
}

/// Value tables from the corridor oracle, indexed `[steps_left][state]`.
pub struct CorridorSolution {
    pub result: OracleResult,
    pub values: Vec<Vec<f64>>,
    pub greedy: Vec<Vec<usize>>,
    pub sweeps: usize,
}

struct StateCodec {
    l: usize,
    m: usize,
    cells: usize,
}

impl StateCodec {
    fn n_states(&self) -> usize {
        (self.l - 1) * self.cells.pow(self.m as u32)
    }

    fn encode(&self, payload: usize, positions: &[(usize, usize)]) -> usize {
        let mut idx = 0;
        for &(row, col) in positions.iter().rev() {
            idx = idx * self.cells + row * self.l + col;
        }
        payload * self.cells.pow(self.m as u32) + idx
    }

    fn decode(&self, mut idx: usize) -> (usize, Vec<(usize, usize)>) {
        let per = self.cells.pow(self.m as u32);
        let payload = idx / per;
        idx %= per;
        let positions = (0..self.m)
            .map(|_| {
                let c = idx % self.cells;
                idx /= self.cells;
                (c / self.l, c % self.l)
            })
            .collect();
        (payload, positions)
    }
}

pub fn corridor_oracle(spec: &EnvSpec) -> Result<CorridorSolution> {
    let (l, m, horizon) = (spec.corridor_length, spec.n_agents(), spec.horizon);
    let codec = StateCodec { l, m, cells: 2 * l };
    let size = (l as f64 - 1.0)
        * ((2 * l) as f64).powi(m as i32)
        * (CORRIDOR_ACTIONS as f64).powi(m as i32);
    if size > CORRIDOR_MAX_STATE_ACTIONS {
        return Err(Error::Capacity(format!(
            "joint state-action space of {size:.3e} exceeds {CORRIDOR_MAX_STATE_ACTIONS:.0e}"
        )));
    }
    let n_states = codec.n_states();
    let n_joint = CORRIDOR_ACTIONS.pow(m as u32);

    // Precompute transitions: (reward, next state or None when the game is won).
    let mut actions = vec![0; m];
    let mut table: Vec<(f64, Option<usize>)> = Vec::with_capacity(n_states * n_joint);
    for s in 0..n_states {
        let (payload, positions) = codec.decode(s);
        let state = CorridorState {
            payload,
            positions,
            t: 0,
        };
        for a in 0..n_joint {
            decode(a, CORRIDOR_ACTIONS, m, &mut actions);
            let tr = PianoCorridor::transition(spec, &state, &actions);
            let next = (!tr.win).then(|| codec.encode(tr.next.payload, &tr.next.positions));
            table.push((tr.reward, next));
        }
    }

    // values[τ][s]: optimal return with τ steps left; values[0] == 0.
    let mut values = vec![vec![0.0; n_states]; horizon + 1];
    let mut greedy = vec![vec![0usize; n_states]; horizon + 1];
    let mut sweeps = 0;
    loop {
        sweeps += 1;
        let mut delta: f64 = 0.0;
        for tau in 1..=horizon {
            for s in 0..n_states {
                let mut best = (f64::NEG_INFINITY, 0);
                for a in 0..n_joint {
                    let (r, next) = table[s * n_joint + a];
                    let q = r + next.map_or(0.0, |n| values[tau - 1][n]);
                    if q > best.0 {
                        best = (q, a);
                    }
                }
                delta = delta.max((best.0 - values[tau][s]).abs());
                values[tau][s] = best.0;
                greedy[tau][s] = best.1;
            }
        }
        if delta <= VALUE_ITERATION_TOL {
            break;
        }
    }

    // Reset distribution: essentials at (0,0), each redundant agent uniformly
    // on row 0 in columns 1..L.
    let n_r = spec.n_redundant;
    let starts = (l - 1).pow(n_r as u32);
    let mut total = 0.0;
    for idx in 0..starts {
        let mut cols = vec![0; n_r];
        decode(idx, l - 1, n_r, &mut cols);
        let positions: Vec<_> = (0..m)
            .map(|i| {
                if i < spec.n_essential {
                    (0, 0)
                } else {
                    (0, 1 + cols[i - spec.n_essential])
                }
            })
            .collect();
        total += values[horizon][codec.encode(0, &positions)];
    }
    let optimal_value = total / starts as f64;

    let policy = (n_states * horizon <= POLICY_TABLE_LIMIT).then(|| {
        let mut entries = Vec::with_capacity(n_states * horizon);
        for tau in 1..=horizon {
            for s in 0..n_states {
                let (payload, positions) = codec.decode(s);
                let mut joint_action = vec![0; m];
                decode(greedy[tau][s], CORRIDOR_ACTIONS, m, &mut joint_action);
                entries.push(PolicyEntry::Corridor {
                    payload,
                    positions,
                    steps_left: tau,
                    joint_action,
                });
            }
        }
        entries
    });

    Ok(CorridorSolution {
        result: OracleResult {
            spec: spec.clone(),
            optimal_value,
            policy,
        },
        values,
        greedy,
        sweeps,
    })
}

/// Optimal joint action for a live corridor state under the oracle solution.
pub fn corridor_oracle_action(
    spec: &EnvSpec,
    sol: &CorridorSolution,
    state: &CorridorState,
) -> Vec<usize> {
    let codec = StateCodec {
        l: spec.corridor_length,
        m: spec.n_agents(),
        cells: 2 * spec.corridor_length,
    };
    let tau = spec.horizon - state.t;
    let mut joint = vec![0; spec.n_agents()];
    decode(
        sol.greedy[tau][codec.encode(state.payload, &state.positions)],
        CORRIDOR_ACTIONS,
        spec.n_agents(),
        &mut joint,
    );
    joint
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::CooperativeEnv;
    use crate::tensor_net::Rng;

    #[test]
    fn levers_optimum_is_one() {
        let r = enumerate_oracle(&EnvSpec::levers(2, 1, 2)).unwrap();
        assert_eq!(r.optimal_value, 1.0);
        match &r.policy.unwrap()[1] {
            PolicyEntry::Levers {
                target,
                joint_action,
            } => {
                assert_eq!(*target, 1);
                assert_eq!(joint_action, &vec![1, 1, 0]);
            }
            other => panic!("unexpected entry {other:?}"),
        }
        assert_eq!(
            enumerate_oracle(&EnvSpec::levers(2, 0, 2))
                .unwrap()
                .optimal_value,
            1.0
        );
        assert_eq!(
            enumerate_oracle(&EnvSpec::levers(1, 3, 4))
                .unwrap()
                .optimal_value,
            1.0
        );
    }

    #[test]
    fn levers_capacity_limit() {
        let err = enumerate_oracle(&EnvSpec::levers(4, 20, 2)).unwrap_err();
        assert!(matches!(err, Error::Capacity(_)));
    }

    #[test]
    fn corridor_calibration_instance() {
        // Two pushes: 2 * 0.1 + 1.0 - 2 * 0.01.
        let sol = corridor_oracle(&EnvSpec::corridor(1, 0, 3, 5)).unwrap();
        assert!((sol.result.optimal_value - 1.18).abs() < 1e-12);
        assert!(sol.sweeps >= 2);
    }

    #[test]
    fn corridor_capacity_limit() {
        let err = enumerate_oracle(&EnvSpec::corridor(2, 3, 6, 20)).unwrap_err();
        assert!(matches!(err, Error::Capacity(_)));
    }

    #[test]
    fn oracle_policy_rollout_attains_oracle_value() {
        let spec = EnvSpec::corridor(2, 1, 4, 8);
        let sol = corridor_oracle(&spec).unwrap();
        // L - 1 pushes from every start.
        assert!((sol.result.optimal_value - (3.0 * 0.1 + 1.0 - 0.03)).abs() < 1e-12);
        let mut env = PianoCorridor::new(spec.clone());
        let mut rng = Rng::new(0);
        for _ in 0..10 {
            env.reset(&mut rng);
            let mut ret = 0.0;
            loop {
                let a = corridor_oracle_action(&spec, &sol, env.state());
                let r = env.step(&a).unwrap();
                ret += r.reward;
                if r.terminal {
                    assert!(r.win);
                    break;
                }
            }
            assert!((ret - sol.result.optimal_value).abs() < 1e-12);
        }
    }

    #[test]
    fn short_horizon_caps_value() {
        // One step is not enough to reach column 2.
        let sol = corridor_oracle(&EnvSpec::corridor(1, 0, 3, 1)).unwrap();
        assert!((sol.result.optimal_value - 0.09).abs() < 1e-12);
    }

    #[test]
    fn oracle_json_export() {
        let r = enumerate_oracle(&EnvSpec::corridor(1, 0, 3, 2)).unwrap();
        let text = serde_json::to_string(&r).unwrap();
        let back: OracleResult = serde_json::from_str(&text).unwrap();
        assert_eq!(back.optimal_value, r.optimal_value);
        assert!(back.policy.is_some());
    }
}
