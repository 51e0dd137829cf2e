use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use super::rng::Rng;
use super::scalar::{axpy, dot, Scalar};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply<T: Scalar>(self, z: T) -> T {
        match self {
            Activation::Relu => {
                if z > T::zero() {
                    z
                } else {
                    T::zero()
                }
            }
            Activation::Identity => z,
        }
    }
}

/// Dense affine layer followed by an element-wise activation.
///
/// `weights` is row-major with `fan_out` rows and `fan_in` columns, so row `k`
/// holds the incoming weights of output unit `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer<T> {
    fan_in: usize,
    fan_out: usize,
    weights: Vec<T>,
    bias: Vec<T>,
    activation: Activation,
}

impl<T: Scalar> Layer<T> {
    pub fn new(
        fan_in: usize,
        fan_out: usize,
        weights: Vec<T>,
        bias: Vec<T>,
        activation: Activation,
    ) -> Result<Self> {
        if fan_in == 0 || fan_out == 0 {
            return Err(Error::config("layer", "layer dimensions must be positive"));
        }
        if weights.len() != fan_in * fan_out || bias.len() != fan_out {
            return Err(Error::config(
                "layer",
                format!(
                    "expected {fan_out}x{fan_in} weights and {fan_out} biases, got {} and {}",
                    weights.len(),
                    bias.len()
                ),
            ));
        }
        Ok(Self {
            fan_in,
            fan_out,
            weights,
            bias,
            activation,
        })
    }

    pub fn fan_in(&self) -> usize {
        self.fan_in
    }

    pub fn fan_out(&self) -> usize {
        self.fan_out
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn bias(&self) -> &[T] {
        &self.bias
    }

    /// Incoming weights of output unit `k`.
    #[inline]
    pub fn row(&self, k: usize) -> &[T] {
        &self.weights[k * self.fan_in..(k + 1) * self.fan_in]
    }

    #[inline]
    pub fn weight(&self, k: usize, j: usize) -> T {
        self.weights[k * self.fan_in + j]
    }

    /// `W x + b`, before the activation.
    pub fn pre_activation(&self, x: &[T]) -> Vec<T> {
        match sparse_support(x) {
            Some(nz) => (0..self.fan_out)
                .map(|k| {
                    let row = self.row(k);
                    nz.iter().fold(T::zero(), |acc, &j| acc + row[j] * x[j]) + self.bias[k]
                })
                .collect(),
            None => (0..self.fan_out)
                .map(|k| dot(self.row(k), x) + self.bias[k])
                .collect(),
        }
    }

    fn params_mut(&mut self) -> (&mut [T], &mut [T]) {
        (&mut self.weights, &mut self.bias)
    }
}

const SPARSE_MIN_LEN: usize = 128;

/// Indices of the non-zero entries of a wide input that is at most half
/// non-zero. Wide one-hot encoded inputs take this path.
pub(crate) fn sparse_support<T: Scalar>(x: &[T]) -> Option<Vec<usize>> {
    if x.len() < SPARSE_MIN_LEN {
        return None;
    }
    let count = x.iter().filter(|&&v| v != T::zero()).count();
    if count * 2 > x.len() {
        return None;
    }
    let mut nz = Vec::with_capacity(count);
    nz.extend((0..x.len()).filter(|&j| x[j] != T::zero()));
    Some(nz)
}

static NEXT_STAMP: AtomicU64 = AtomicU64::new(1);

fn fresh_stamp() -> u64 {
    NEXT_STAMP.fetch_add(1, Ordering::Relaxed)
}

/// Feed-forward network of dense layers.
///
/// Every parameter mutation gives the network a new stamp; caches remember the
/// stamp they were produced under so that `backward` can reject stale caches.
#[derive(Debug)]
pub struct Mlp<T> {
    layers: Vec<Layer<T>>,
    stamp: u64,
}

impl<T: Clone> Clone for Mlp<T> {
    fn clone(&self) -> Self {
        Self {
            layers: self.layers.clone(),
            stamp: fresh_stamp(),
        }
    }
}

impl<T: PartialEq> PartialEq for Mlp<T> {
    fn eq(&self, other: &Self) -> bool {
        self.layers == other.layers
    }
}

/// Input plus the post-activation vector of every layer from one forward pass.
#[derive(Debug, Clone)]
pub struct ActivationCache<T> {
    activations: Vec<Vec<T>>,
    stamp: u64,
}

impl<T> ActivationCache<T> {
    pub fn input(&self) -> &[T] {
        &self.activations[0]
    }

    pub fn output(&self) -> &[T] {
        self.activations
            .last()
            .expect("cache holds at least the input")
    }

    /// Post-activation of layer `l` (0-based); `layer_input(l)` is its input.
    pub fn layer_output(&self, l: usize) -> &[T] {
        &self.activations[l + 1]
    }

    pub fn layer_input(&self, l: usize) -> &[T] {
        &self.activations[l]
    }

    pub fn len(&self) -> usize {
        self.activations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.activations.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad<T> {
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

/// Gradients with the same shapes as a network's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet<T> {
    pub layers: Vec<LayerGrad<T>>,
}

impl<T: Scalar> GradientSet<T> {
    pub fn zeros_like(net: &Mlp<T>) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| LayerGrad {
                    weights: vec![T::zero(); l.weights.len()],
                    bias: vec![T::zero(); l.bias.len()],
                })
                .collect(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.iter().all(|g| g == T::zero())
    }

    pub fn iter(&self) -> impl Iterator<Item = T> + '_ {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.bias.iter()).copied())
    }

    pub fn scale(&mut self, factor: T) {
        for l in &mut self.layers {
            for g in l.weights.iter_mut().chain(l.bias.iter_mut()) {
                *g = *g * factor;
            }
        }
    }

    pub fn matches(&self, net: &Mlp<T>) -> bool {
        self.layers.len() == net.layers.len()
            && self
                .layers
                .iter()
                .zip(&net.layers)
                .all(|(g, l)| g.weights.len() == l.weights.len() && g.bias.len() == l.bias.len())
    }
}

impl<T: Scalar> Mlp<T> {
    /// Builds a randomly initialised network with layer widths `sizes`
    /// (`sizes[0]` inputs, `sizes.last()` outputs). Hidden layers use ReLU with
    /// Kaiming-uniform weights; the output layer is linear with weights uniform
    /// in ±1/√fan_in. Biases start at zero.
    pub fn new(sizes: &[usize], rng: &mut Rng) -> Result<Self> {
        if sizes.len() < 2 {
            return Err(Error::config(
                "mlp",
                "need at least input and output widths",
            ));
        }
        let n = sizes.len() - 1;
        let mut layers = Vec::with_capacity(n);
        for l in 0..n {
            let (fan_in, fan_out) = (sizes[l], sizes[l + 1]);
            let last = l + 1 == n;
            let bound = if last {
                1.0 / (fan_in as f64).sqrt()
            } else {
                (6.0 / fan_in as f64).sqrt()
            };
            let weights = (0..fan_in * fan_out)
                .map(|_| T::of(rng.uniform_range(-bound, bound)))
                .collect();
            let act = if last {
                Activation::Identity
            } else {
                Activation::Relu
            };
            layers.push(Layer::new(
                fan_in,
                fan_out,
                weights,
                vec![T::zero(); fan_out],
                act,
            )?);
        }
        Self::from_layers(layers)
    }

    pub fn from_layers(layers: Vec<Layer<T>>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::config("mlp", "network has no layers"));
        }
        for (l, pair) in layers.windows(2).enumerate() {
            if pair[0].fan_out != pair[1].fan_in {
                return Err(Error::config(
                    format!("mlp.layers[{}]", l + 1),
                    format!(
                        "fan_in {} does not match previous fan_out {}",
                        pair[1].fan_in, pair[0].fan_out
                    ),
                ));
            }
        }
        Ok(Self {
            layers,
            stamp: fresh_stamp(),
        })
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    pub fn input_len(&self) -> usize {
        self.layers[0].fan_in
    }

    pub fn output_len(&self) -> usize {
        self.layers[self.layers.len() - 1].fan_out
    }

    pub fn num_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    /// Layer widths, input first.
    pub fn sizes(&self) -> Vec<usize> {
        std::iter::once(self.input_len())
            .chain(self.layers.iter().map(|l| l.fan_out))
            .collect()
    }

    pub fn same_architecture(&self, other: &Mlp<T>) -> bool {
        self.layers.len() == other.layers.len()
            && self.layers.iter().zip(&other.layers).all(|(a, b)| {
                a.fan_in == b.fan_in && a.fan_out == b.fan_out && a.activation == b.activation
            })
    }

    /// Mutable access to the weights and bias of layer `l`. Invalidates caches.
    pub fn params_mut(&mut self, l: usize) -> (&mut [T], &mut [T]) {
        self.stamp = fresh_stamp();
        self.layers[l].params_mut()
    }

    fn check_input(&self, x: &[T]) -> Result<()> {
        if x.len() != self.input_len() {
            return Err(Error::config(
                "mlp.input",
                format!("expected {} inputs, got {}", self.input_len(), x.len()),
            ));
        }
        Ok(())
    }

    pub fn forward(&self, x: &[T]) -> Result<(Vec<T>, ActivationCache<T>)> {
        self.check_input(x)?;
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(x.to_vec());
        for layer in &self.layers {
            let input = activations.last().unwrap();
            let mut out = layer.pre_activation(input);
            for v in &mut out {
                *v = layer.activation.apply(*v);
            }
            activations.push(out);
        }
        let cache = ActivationCache {
            activations,
            stamp: self.stamp,
        };
        Ok((cache.output().to_vec(), cache))
    }

    /// Forward pass without retaining activations.
    pub fn predict(&self, x: &[T]) -> Result<Vec<T>> {
        self.check_input(x)?;
        let mut cur = x.to_vec();
        for layer in &self.layers {
            cur = layer.pre_activation(&cur);
            for v in &mut cur {
                *v = layer.activation.apply(*v);
            }
        }
        Ok(cur)
    }

    fn check_cache(&self, cache: &ActivationCache<T>) -> Result<()> {
        if cache.stamp != self.stamp {
            return Err(Error::Usage(
                "activation cache is stale or belongs to a different network".into(),
            ));
        }
        if cache.activations.len() != self.layers.len() + 1 {
            return Err(Error::Usage("activation cache has the wrong depth".into()));
        }
        Ok(())
    }

    pub fn backward(&self, cache: &ActivationCache<T>, d_out: &[T]) -> Result<GradientSet<T>> {
        let mut grads = GradientSet::zeros_like(self);
        self.accumulate_backward(cache, d_out, &mut grads)?;
        Ok(grads)
    }

    /// Adds dLoss/dθ for one sample into `grads`.
    pub fn accumulate_backward(
        &self,
        cache: &ActivationCache<T>,
        d_out: &[T],
        grads: &mut GradientSet<T>,
    ) -> Result<()> {
        self.check_cache(cache)?;
        if d_out.len() != self.output_len() {
            return Err(Error::Usage(format!(
                "upstream gradient has length {}, network outputs {}",
                d_out.len(),
                self.output_len()
            )));
        }
        if !grads.matches(self) {
            return Err(Error::Usage("gradient set does not match network".into()));
        }
        let mut delta = d_out.to_vec();
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let out = cache.layer_output(l);
            if layer.activation == Activation::Relu {
                for (d, &a) in delta.iter_mut().zip(out) {
                    if a <= T::zero() {
                        *d = T::zero();
                    }
                }
            }
            let input = cache.layer_input(l);
            let support = sparse_support(input);
            let g = &mut grads.layers[l];
            for (k, &dk) in delta.iter().enumerate() {
                if dk == T::zero() {
                    continue;
                }
                g.bias[k] = g.bias[k] + dk;
                let gw = &mut g.weights[k * layer.fan_in..(k + 1) * layer.fan_in];
                match &support {
                    Some(nz) => {
                        for &j in nz {
                            gw[j] = gw[j] + dk * input[j];
                        }
                    }
                    None => axpy(dk, input, gw),
                }
            }
            if l > 0 {
                let mut next = vec![T::zero(); layer.fan_in];
                for (k, &dk) in delta.iter().enumerate() {
                    if dk != T::zero() {
                        axpy(dk, layer.row(k), &mut next);
                    }
                }
                delta = next;
            }
        }
        Ok(())
    }

    /// Overwrites this network's parameters with `src`'s.
    pub fn copy_parameters_from(&mut self, src: &Mlp<T>) -> Result<()> {
        if !self.same_architecture(src) {
            return Err(Error::config(
                "mlp",
                format!(
                    "cannot copy parameters between architectures {:?} and {:?}",
                    src.sizes(),
                    self.sizes()
                ),
            ));
        }
        for (d, s) in self.layers.iter_mut().zip(&src.layers) {
            d.weights.copy_from_slice(&s.weights);
            d.bias.copy_from_slice(&s.bias);
        }
        self.stamp = fresh_stamp();
        Ok(())
    }

    pub(crate) fn apply_update(&mut self, mut f: impl FnMut(usize, &mut [T], &mut [T])) {
        for (l, layer) in self.layers.iter_mut().enumerate() {
            let (w, b) = layer.params_mut();
            f(l, w, b);
        }
        self.stamp = fresh_stamp();
    }

    /// Converts to another scalar width.
    pub fn cast<U: Scalar>(&self) -> Mlp<U> {
        let layers = self
            .layers
            .iter()
            .map(|l| Layer {
                fan_in: l.fan_in,
                fan_out: l.fan_out,
                weights: l.weights.iter().map(|w| U::of(w.as_f64())).collect(),
                bias: l.bias.iter().map(|b| U::of(b.as_f64())).collect(),
                activation: l.activation,
            })
            .collect();
        Mlp {
            layers,
            stamp: fresh_stamp(),
        }
    }
}
