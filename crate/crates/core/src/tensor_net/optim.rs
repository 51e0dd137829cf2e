use serde::{Deserialize, Serialize};

use super::mlp::{GradientSet, Mlp};
use super::scalar::Scalar;
use crate::error::{Error, Result};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Adam,
    Sgd,
}

/// Per-network optimiser state. Adam moments mirror the parameter layout.
#[derive(Debug, Clone)]
pub struct OptimizerState<T> {
    kind: OptimizerKind,
    lr: f64,
    first: Option<GradientSet<T>>,
    second: Option<GradientSet<T>>,
    step: u64,
}

impl<T: Scalar> OptimizerState<T> {
    pub fn new(kind: OptimizerKind, lr: f64, net: &Mlp<T>) -> Self {
        let (first, second) = match kind {
            OptimizerKind::Adam => (
                Some(GradientSet::zeros_like(net)),
                Some(GradientSet::zeros_like(net)),
            ),
            OptimizerKind::Sgd => (None, None),
        };
        Self {
            kind,
            lr,
            first,
            second,
            step: 0,
        }
    }

    pub fn kind(&self) -> OptimizerKind {
        self.kind
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Applies one update. The network is left untouched if any gradient
    /// component is non-finite.
    pub fn step(&mut self, net: &mut Mlp<T>, grads: &GradientSet<T>) -> Result<()> {
        if !grads.matches(net) {
            return Err(Error::config(
                "optimizer",
                "gradient shapes do not match network",
            ));
        }
        for (l, g) in grads.layers.iter().enumerate() {
            if g.weights.iter().chain(&g.bias).any(|v| !v.is_finite()) {
                return Err(Error::Training(format!(
                    "non-finite gradient component in layer {l}"
                )));
            }
        }
        self.step += 1;
        let lr = T::of(self.lr);
        match self.kind {
            OptimizerKind::Sgd => net.apply_update(|l, w, b| {
                let g = &grads.layers[l];
                for (p, &d) in w.iter_mut().zip(&g.weights) {
                    *p = *p - lr * d;
                }
                for (p, &d) in b.iter_mut().zip(&g.bias) {
                    *p = *p - lr * d;
                }
            }),
            OptimizerKind::Adam => {
                let b1 = T::of(ADAM_BETA1);
                let b2 = T::of(ADAM_BETA2);
                let eps = T::of(ADAM_EPS);
                let t = self.step as i32;
                let c1 = T::one() - T::of(ADAM_BETA1.powi(t));
                let c2 = T::one() - T::of(ADAM_BETA2.powi(t));
                let m = self.first.as_mut().expect("adam state");
                let v = self.second.as_mut().expect("adam state");
                net.apply_update(|l, w, b| {
                    let g = &grads.layers[l];
                    let (ml, vl) = (&mut m.layers[l], &mut v.layers[l]);
                    let update = |p: &mut [T], d: &[T], mm: &mut [T], vv: &mut [T]| {
                        for i in 0..p.len() {
                            mm[i] = b1 * mm[i] + (T::one() - b1) * d[i];
                            vv[i] = b2 * vv[i] + (T::one() - b2) * d[i] * d[i];
                            let mhat = mm[i] / c1;
                            let vhat = vv[i] / c2;
                            p[i] = p[i] - lr * mhat / (vhat.sqrt() + eps);
                        }
                    };
                    update(w, &g.weights, &mut ml.weights, &mut vl.weights);
                    update(b, &g.bias, &mut ml.bias, &mut vl.bias);
                });
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor_net::mlp::{Activation, Layer};

    fn scalar_net(w: f64) -> Mlp<f64> {
        Mlp::from_layers(vec![Layer::new(
            1,
            1,
            vec![w],
            vec![0.0],
            Activation::Identity,
        )
        .unwrap()])
        .unwrap()
    }

    fn grad_of(net: &Mlp<f64>, g: f64) -> GradientSet<f64> {
        let mut gs = GradientSet::zeros_like(net);
        gs.layers[0].weights[0] = g;
        gs
    }

    #[test]
    fn sgd_step() {
        let mut net = scalar_net(1.0);
        let mut opt = OptimizerState::new(OptimizerKind::Sgd, 0.1, &net);
        {
            let g = grad_of(&net, 2.0);
            opt.step(&mut net, &g)
        }
        .unwrap();
        assert!((net.layers()[0].weights()[0] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn zero_gradient_leaves_params_but_counts_step() {
        let mut net = scalar_net(1.0);
        let mut opt = OptimizerState::new(OptimizerKind::Sgd, 0.1, &net);
        {
            let g = grad_of(&net, 0.0);
            opt.step(&mut net, &g)
        }
        .unwrap();
        assert_eq!(net.layers()[0].weights()[0], 1.0);

        let mut adam = OptimizerState::new(OptimizerKind::Adam, 1e-3, &net);
        {
            let g = grad_of(&net, 0.0);
            adam.step(&mut net, &g)
        }
        .unwrap();
        assert_eq!(adam.steps(), 1);
        assert_eq!(net.layers()[0].weights()[0], 1.0);
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        // m = 0.1, v = 0.001; bias-corrected both give 1, so Δ = -lr / (1 + 1e-8).
        let mut net = scalar_net(0.0);
        let mut adam = OptimizerState::new(OptimizerKind::Adam, 1e-3, &net);
        {
            let g = grad_of(&net, 1.0);
            adam.step(&mut net, &g)
        }
        .unwrap();
        let expected = -1e-3 / (1.0 + 1e-8);
        assert!((net.layers()[0].weights()[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn non_finite_gradient_names_layer() {
        let mut net = scalar_net(0.0);
        let mut opt = OptimizerState::new(OptimizerKind::Adam, 1e-3, &net);
        let err = {
            let g = grad_of(&net, f64::NAN);
            opt.step(&mut net, &g)
        }
        .unwrap_err();
        assert!(err.to_string().contains("layer 0"), "{err}");
        assert_eq!(net.layers()[0].weights()[0], 0.0);
    }
}
