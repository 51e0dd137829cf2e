//! Multi-agent Q-learning workbench built around relevance decomposition: a
//! joint critic over all agents' observations and actions is trained by TD
//! learning, and its output is split into per-agent regression targets with
//! layer-wise relevance propagation. Additive mixing (VDN) and independent
//! Q-learning serve as baselines on two cooperative games whose number of
//! redundant agents can be dialled up or down.

pub mod checks;
pub mod envs;
pub mod error;
pub mod lrp;
pub mod marl;
pub mod run_io;
pub mod tensor_net;
pub mod trainer;

pub use error::{Error, Result};
