//! Minimal dense numeric engine: seeded streams, multi-layer perceptrons with
//! activation caching, optimisers and a finite-difference gradient oracle.

mod gradcheck;
mod mlp;
mod optim;
mod rng;
mod scalar;
mod snapshot;

pub use gradcheck::{finite_diff_grad, max_relative_error};
pub(crate) use mlp::sparse_support;
pub use mlp::{Activation, ActivationCache, GradientSet, Layer, LayerGrad, Mlp};
pub use optim::{OptimizerKind, OptimizerState, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};
pub use rng::{derive_seed, Rng};
pub use scalar::{argmax, axpy, dot, Scalar};
pub use snapshot::{LayerRecord, MlpSnapshot, SNAPSHOT_FORMAT};
