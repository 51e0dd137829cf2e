//! Replay, ε-greedy agents, the joint critic, and the three learning
//! strategies behind one `train_step` contract.

mod agents;
mod critic;
mod replay;
mod schedule;
mod strategy;

pub use agents::{AgentBank, ObservationStacker};
pub use critic::{CriticInput, CriticLayout, CriticPair};
pub use replay::{ReplayBuffer, Transition};
pub use schedule::EpsilonSchedule;
pub use strategy::{vdn_mix, Learner, LearnerSettings, StepReport, StrategyKind};
