//! Layer-wise relevance propagation over a cached forward pass.
//!
//! Relevance is seeded at the scalar output and redistributed layer by layer to
//! the inputs. Under the ε-rule with ε = 0 the only leak is the share each
//! layer hands to its biases, which is tracked in [`RelevanceReport::bias_absorbed`].
//! Input relevance is then summed over index slices owned by each agent.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor_net::{sparse_support, ActivationCache, Layer, Mlp, Scalar};

pub const DEFAULT_EPSILON: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum LrpRule {
    Epsilon {
        #[serde(default = "default_epsilon")]
        epsilon: f64,
    },
    AlphaBeta {
        #[serde(default = "default_alpha")]
        alpha: f64,
        #[serde(default)]
        beta: f64,
    },
}

fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}

fn default_alpha() -> f64 {
    1.0
}

impl Default for LrpRule {
    fn default() -> Self {
        LrpRule::Epsilon {
            epsilon: DEFAULT_EPSILON,
        }
    }
}

impl LrpRule {
    pub fn epsilon(epsilon: f64) -> Self {
        LrpRule::Epsilon { epsilon }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            LrpRule::Epsilon { epsilon } => {
                if !(epsilon >= 0.0 && epsilon.is_finite()) {
                    return Err(Error::config("lrp.epsilon", "must be finite and >= 0"));
                }
            }
            LrpRule::AlphaBeta { alpha, beta } => {
                if !(alpha >= 1.0 && alpha.is_finite()) {
                    return Err(Error::config("lrp.alpha", "must be finite and >= 1"));
                }
                if (alpha - beta - 1.0).abs() > 1e-12 {
                    return Err(Error::config("lrp.beta", "alpha - beta must equal 1"));
                }
            }
        }
        Ok(())
    }
}

/// Assignment of critic-input indices to agents.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceMap {
    owned: Vec<Vec<usize>>,
    unowned: Vec<usize>,
    input_len: usize,
}

impl SliceMap {
    /// Validates that the owned sets and `unowned` partition `0..input_len`.
    pub fn new(owned: Vec<Vec<usize>>, unowned: Vec<usize>, input_len: usize) -> Result<Self> {
        let mut seen = vec![false; input_len];
        for (who, idx) in owned
            .iter()
            .enumerate()
            .flat_map(|(i, s)| s.iter().map(move |&j| (Some(i), j)))
            .chain(unowned.iter().map(|&j| (None, j)))
        {
            let label = who.map_or("unowned".to_string(), |i| format!("agent {i}"));
            if idx >= input_len {
                return Err(Error::config(
                    "slice_map",
                    format!("index {idx} of {label} out of range for input length {input_len}"),
                ));
            }
            if seen[idx] {
                return Err(Error::config(
                    "slice_map",
                    format!("index {idx} assigned twice (second owner: {label})"),
                ));
            }
            seen[idx] = true;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::config(
                "slice_map",
                format!("index {missing} has no owner and is not marked unowned"),
            ));
        }
        Ok(Self {
            owned,
            unowned,
            input_len,
        })
    }

    /// Consecutive blocks of the given lengths, one per agent, no unowned part.
    pub fn contiguous(lengths: &[usize]) -> Self {
        let mut start = 0;
        let owned = lengths
            .iter()
            .map(|&n| {
                let s: Vec<usize> = (start..start + n).collect();
                start += n;
                s
            })
            .collect();
        Self {
            owned,
            unowned: Vec::new(),
            input_len: start,
        }
    }

    pub fn n_agents(&self) -> usize {
        self.owned.len()
    }

    pub fn input_len(&self) -> usize {
        self.input_len
    }

    pub fn owned(&self, agent: usize) -> &[usize] {
        &self.owned[agent]
    }

    pub fn unowned(&self) -> &[usize] {
        &self.unowned
    }

    pub fn swap_agents(&mut self, a: usize, b: usize) {
        self.owned.swap(a, b);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub per_agent: Vec<f64>,
    pub unattributed: f64,
}

/// Sums input relevance over each agent's slice and over the unowned indices.
pub fn aggregate_per_agent(r_in: &[f64], slices: &SliceMap) -> Result<Aggregate> {
    if r_in.len() != slices.input_len {
        return Err(Error::config(
            "slice_map",
            format!(
                "slice map covers {} indices but relevance has {}",
                slices.input_len,
                r_in.len()
            ),
        ));
    }
    let sum = |idx: &[usize]| idx.iter().map(|&j| r_in[j]).sum::<f64>();
    Ok(Aggregate {
        per_agent: slices.owned.iter().map(|s| sum(s)).collect(),
        unattributed: sum(&slices.unowned),
    })
}

/// Result of one decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct RelevanceReport {
    /// Network output at the decomposed input.
    pub q_tot: f64,
    /// Relevance injected at the output (equals `q_tot` unless reseeded).
    pub seed: f64,
    pub r_in: Vec<f64>,
    /// Empty until [`RelevanceReport::attribute`] is called.
    pub per_agent: Vec<f64>,
    pub unattributed: f64,
    /// Relevance absorbed by the biases of each layer, input layer first.
    pub bias_absorbed: Vec<f64>,
    /// `seed - (Σ r_in + Σ bias_absorbed)`.
    pub conservation_residual: f64,
}

impl RelevanceReport {
    pub fn attribute(&mut self, slices: &SliceMap) -> Result<()> {
        let agg = aggregate_per_agent(&self.r_in, slices)?;
        self.per_agent = agg.per_agent;
        self.unattributed = agg.unattributed;
        Ok(())
    }

    pub fn total_bias_absorbed(&self) -> f64 {
        self.bias_absorbed.iter().sum()
    }
}

/// Redistributes `r_upper` (one entry per output unit of `layer`) onto the
/// layer's inputs `lower`. Returns the lower relevance and the total relevance
/// attributed to the biases.
pub fn lrp_layer<T: Scalar>(
    lower: &[T],
    layer: &Layer<T>,
    r_upper: &[T],
    rule: LrpRule,
) -> Result<(Vec<T>, T)> {
    lrp_layer_shifted(lower, layer, r_upper, rule, 0.0)
}

fn lrp_layer_shifted<T: Scalar>(
    lower: &[T],
    layer: &Layer<T>,
    r_upper: &[T],
    rule: LrpRule,
    denominator_shift: f64,
) -> Result<(Vec<T>, T)> {
    if lower.len() != layer.fan_in() || r_upper.len() != layer.fan_out() {
        return Err(Error::config(
            "lrp",
            format!(
                "layer is {}x{} but got {} activations and {} upper relevances",
                layer.fan_out(),
                layer.fan_in(),
                lower.len(),
                r_upper.len()
            ),
        ));
    }
    let z = layer.pre_activation(lower);
    // Inputs at zero receive no relevance under either rule.
    let support: Vec<usize> = sparse_support(lower).unwrap_or_else(|| (0..lower.len()).collect());
    match rule {
        LrpRule::Epsilon { epsilon } => {
            let eps = T::of(epsilon);
            let shift = T::of(denominator_shift);
            // s_k = R_k / d_k, then R_j = a_j Σ_k W_kj s_k.
            let mut weighted = vec![T::zero(); layer.fan_in()];
            let mut bias_total = T::zero();
            for k in 0..layer.fan_out() {
                let r = r_upper[k];
                if r == T::zero() {
                    continue;
                }
                let sign = if z[k] >= T::zero() {
                    T::one()
                } else {
                    -T::one()
                };
                let d = z[k] + eps * sign + shift;
                let s = r / d;
                if !s.is_finite() {
                    return Err(Error::Numerical(format!(
                        "relevance of unit {k} is not finite (denominator {:e})",
                        d.as_f64()
                    )));
                }
                let row = layer.row(k);
                for &j in &support {
                    weighted[j] = weighted[j] + s * row[j];
                }
                bias_total = bias_total + layer.bias()[k] * s;
            }
            let mut r_lower = vec![T::zero(); layer.fan_in()];
            for &j in &support {
                r_lower[j] = lower[j] * weighted[j];
            }
            Ok((r_lower, bias_total))
        }
        LrpRule::AlphaBeta { alpha, beta } => {
            let (alpha, beta) = (T::of(alpha), T::of(beta));
            let mut r_lower = vec![T::zero(); layer.fan_in()];
            let mut bias_total = T::zero();
            for k in 0..layer.fan_out() {
                let r = r_upper[k];
                if r == T::zero() {
                    continue;
                }
                let row = layer.row(k);
                let b = layer.bias()[k];
                let mut pos = b.max(T::zero());
                let mut neg = b.min(T::zero());
                for &j in &support {
                    let c = lower[j] * row[j];
                    if c > T::zero() {
                        pos = pos + c;
                    } else {
                        neg = neg + c;
                    }
                }
                // An empty pool contributes nothing.
                let sp = if pos > T::zero() {
                    alpha * r / pos
                } else {
                    T::zero()
                };
                let sn = if neg < T::zero() {
                    beta * r / neg
                } else {
                    T::zero()
                };
                if !(sp.is_finite() && sn.is_finite()) {
                    return Err(Error::Numerical(format!(
                        "relevance of unit {k} is not finite"
                    )));
                }
                for &j in &support {
                    let c = lower[j] * row[j];
                    if c > T::zero() {
                        r_lower[j] = r_lower[j] + c * sp;
                    } else if c < T::zero() {
                        r_lower[j] = r_lower[j] - c * sn;
                    }
                }
                bias_total = bias_total + b.max(T::zero()) * sp - b.min(T::zero()) * sn;
            }
            Ok((r_lower, bias_total))
        }
    }
}

/// Decomposes the scalar output of `net` at the cached input.
pub fn lrp_backward<T: Scalar>(
    net: &Mlp<T>,
    cache: &ActivationCache<T>,
    rule: LrpRule,
) -> Result<RelevanceReport> {
    let q = scalar_output(net, cache)?;
    propagate(net, cache, q, rule, 0.0)
}

/// As [`lrp_backward`] but injects `seed` instead of the network output.
pub fn lrp_backward_seeded<T: Scalar>(
    net: &Mlp<T>,
    cache: &ActivationCache<T>,
    seed: T,
    rule: LrpRule,
) -> Result<RelevanceReport> {
    scalar_output(net, cache)?;
    propagate(net, cache, seed, rule, 0.0)
}

/// ε-rule propagation with a constant added to every denominator. Exists only
/// so the invariant suite can prove it detects a broken rule.
#[doc(hidden)]
pub fn lrp_backward_with_denominator_shift<T: Scalar>(
    net: &Mlp<T>,
    cache: &ActivationCache<T>,
    rule: LrpRule,
    shift: f64,
) -> Result<RelevanceReport> {
    let q = scalar_output(net, cache)?;
    propagate(net, cache, q, rule, shift)
}

fn scalar_output<T: Scalar>(net: &Mlp<T>, cache: &ActivationCache<T>) -> Result<T> {
    if net.output_len() != 1 {
        return Err(Error::Usage(format!(
            "relevance propagation needs a scalar output, network has {}",
            net.output_len()
        )));
    }
    if cache.len() != net.layers().len() + 1 || cache.input().len() != net.input_len() {
        return Err(Error::Usage(
            "activation cache does not match network".into(),
        ));
    }
    Ok(cache.output()[0])
}

fn propagate<T: Scalar>(
    net: &Mlp<T>,
    cache: &ActivationCache<T>,
    seed: T,
    rule: LrpRule,
    shift: f64,
) -> Result<RelevanceReport> {
    rule.validate()?;
    let q_tot = cache.output()[0];
    let mut relevance = vec![seed];
    let mut bias_absorbed = vec![0.0; net.layers().len()];
    for (l, layer) in net.layers().iter().enumerate().rev() {
        let (lower, bias) =
            lrp_layer_shifted(cache.layer_input(l), layer, &relevance, rule, shift)?;
        bias_absorbed[l] = bias.as_f64();
        relevance = lower;
    }
    let r_in: Vec<f64> = relevance.iter().map(|r| r.as_f64()).collect();
    let distributed = r_in.iter().sum::<f64>() + bias_absorbed.iter().sum::<f64>();
    Ok(RelevanceReport {
        q_tot: q_tot.as_f64(),
        seed: seed.as_f64(),
        conservation_residual: seed.as_f64() - distributed,
        r_in,
        per_agent: Vec::new(),
        unattributed: 0.0,
        bias_absorbed,
    })
}
