//! Fast self-test suite behind `rdn check`.

use std::time::{Duration, Instant};

use crate::envs::{enumerate_oracle, EnvSpec, SignalLevers};
use crate::error::Result;
use crate::lrp::{lrp_backward, lrp_backward_with_denominator_shift, LrpRule};
use crate::marl::vdn_mix;
use crate::tensor_net::{finite_diff_grad, max_relative_error, Mlp, Rng};

#[derive(Debug, Clone)]
pub struct CheckOptions {
    pub seed: u64,
    /// Fault injection: added to every LRP denominator. Zero in normal use.
    pub lrp_denominator_shift: f64,
}

impl Default for CheckOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            lrp_denominator_shift: 0.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
}

pub const CONSERVATION_NETS: usize = 100;
pub const GRADCHECK_NETS: usize = 50;
pub const CONSERVATION_TOL: f64 = 1e-9;
pub const GRADCHECK_TOL: f64 = 1e-5;
pub const GRADCHECK_H: f64 = 1e-6;
/// Components smaller than this compare absolutely in the gradient check.
pub const GRADCHECK_FLOOR: f64 = 1e-3;

/// Random ReLU net with scalar output: 1 to 3 layers, widths up to 16.
pub fn random_scalar_net(rng: &mut Rng, with_bias: bool) -> Mlp<f64> {
    let depth = 1 + rng.below(3);
    let mut sizes = vec![1 + rng.below(16)];
    for _ in 1..depth {
        sizes.push(1 + rng.below(16));
    }
    sizes.push(1);
    let mut net = Mlp::new(&sizes, rng).expect("valid sizes");
    if with_bias {
        for l in 0..net.layers().len() {
            let (_, b) = net.params_mut(l);
            for v in b.iter_mut() {
                *v = 0.5 * rng.normal();
            }
        }
    }
    net
}

pub fn random_input(rng: &mut Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.normal()).collect()
}

/// Largest `|Q - (Σ R_in + Σ bias)| / max(1, |Q|)` over random nets at ε = 0,
/// half of them bias-free.
pub fn conservation_error(opts: &CheckOptions, nets: usize) -> Result<f64> {
    let mut rng = Rng::new(opts.seed).child("check/conservation");
    let mut worst = 0.0f64;
    for n in 0..nets {
        let net = random_scalar_net(&mut rng, n % 2 == 1);
        let x = random_input(&mut rng, net.input_len());
        let (_, cache) = net.forward(&x)?;
        let rule = LrpRule::epsilon(0.0);
        let rep = if opts.lrp_denominator_shift != 0.0 {
            lrp_backward_with_denominator_shift(&net, &cache, rule, opts.lrp_denominator_shift)?
        } else {
            lrp_backward(&net, &cache, rule)?
        };
        let explained = rep.r_in.iter().sum::<f64>() + rep.total_bias_absorbed();
        worst = worst.max((rep.q_tot - explained).abs() / rep.q_tot.abs().max(1.0));
    }
    Ok(worst)
}

/// Largest relative error between `backward` and central differences for a
/// random linear loss on the output.
pub fn gradient_check_error(opts: &CheckOptions, nets: usize) -> Result<f64> {
    let mut rng = Rng::new(opts.seed).child("check/gradient");
    let mut worst = 0.0f64;
    for _ in 0..nets {
        let depth = 1 + rng.below(3);
        let mut sizes = vec![1 + rng.below(16)];
        for _ in 0..depth {
            sizes.push(1 + rng.below(16));
        }
        let mut net = Mlp::<f64>::new(&sizes, &mut rng)?;
        for l in 0..net.layers().len() {
            let (_, b) = net.params_mut(l);
            for v in b.iter_mut() {
                *v = 0.1 * rng.normal();
            }
        }
        let x = random_input(&mut rng, net.input_len());
        let c = random_input(&mut rng, net.output_len());
        let (_, cache) = net.forward(&x)?;
        let analytic = net.backward(&cache, &c)?;
        let numeric = finite_diff_grad(
            &net,
            &x,
            |y| y.iter().zip(&c).map(|(a, b)| a * b).sum(),
            GRADCHECK_H,
        );
        worst = worst.max(max_relative_error(&analytic, &numeric, GRADCHECK_FLOOR));
    }
    Ok(worst)
}

/// (exact-sum mismatch count, worst |d mix / d q_i - 1|) over random vectors.
pub fn vdn_identity(opts: &CheckOptions, trials: usize) -> (usize, f64) {
    let mut rng = Rng::new(opts.seed).child("check/vdn");
    let h = 1e-6;
    let mut mismatches = 0;
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let m = 1 + rng.below(24);
        let q: Vec<f64> = (0..m).map(|_| rng.normal()).collect();
        let mut expected = 0.0;
        for v in &q {
            expected += v;
        }
        if vdn_mix(&q).to_bits() != expected.to_bits() {
            mismatches += 1;
        }
        for i in 0..m {
            let mut up = q.clone();
            let mut down = q.clone();
            up[i] += h;
            down[i] -= h;
            let g = (vdn_mix(&up) - vdn_mix(&down)) / (up[i] - down[i]);
            worst = worst.max((g - 1.0).abs());
        }
    }
    (mismatches, worst)
}

/// Enumerated optimum and the constructive policy (essentials pull the target,
/// redundants pull any other lever) on a few small lever games.
pub fn lever_oracle_spot_check() -> Result<Vec<String>> {
    let mut problems = Vec::new();
    for (ne, nr, k) in [(2, 0, 2), (2, 1, 2), (1, 2, 3), (3, 1, 3)] {
        let spec = EnvSpec::levers(ne, nr, k);
        let oracle = enumerate_oracle(&spec)?;
        if oracle.optimal_value != 1.0 {
            problems.push(format!(
                "n_e={ne} n_r={nr} K={k}: optimum {}",
                oracle.optimal_value
            ));
        }
        for target in 0..k {
            let actions: Vec<usize> = (0..spec.n_agents())
                .map(|i| {
                    if spec.is_essential(i) {
                        target
                    } else {
                        (target + 1) % k
                    }
                })
                .collect();
            if SignalLevers::payoff(&spec, target, &actions) != 1.0 {
                problems.push(format!(
                    "n_e={ne} n_r={nr} K={k}: constructive policy loses"
                ));
            }
        }
    }
    Ok(problems)
}

fn timed(name: &'static str, f: impl FnOnce() -> Result<(bool, String)>) -> CheckOutcome {
    let start = Instant::now();
    let (passed, detail) = f().unwrap_or_else(|e| (false, format!("error: {e}")));
    CheckOutcome {
        name,
        passed,
        detail,
        elapsed: start.elapsed(),
    }
}

pub fn run_checks(opts: &CheckOptions) -> Vec<CheckOutcome> {
    vec![
        timed("lrp_conservation", || {
            let err = conservation_error(opts, CONSERVATION_NETS)?;
            Ok((
                err <= CONSERVATION_TOL,
                format!("{CONSERVATION_NETS} nets, max relative residual {err:.3e} (tol {CONSERVATION_TOL:e})"),
            ))
        }),
        timed("gradient_check", || {
            let err = gradient_check_error(opts, GRADCHECK_NETS)?;
            Ok((
                err <= GRADCHECK_TOL,
                format!(
                    "{GRADCHECK_NETS} nets, max relative error {err:.3e} (tol {GRADCHECK_TOL:e})"
                ),
            ))
        }),
        timed("vdn_sum_identity", || {
            let (mismatches, worst) = vdn_identity(opts, 200);
            Ok((
                mismatches == 0 && worst <= 1e-6,
                format!("{mismatches} inexact sums, max |dQ_tot/dQ_i - 1| = {worst:.3e}"),
            ))
        }),
        timed("lever_oracle", || {
            let problems = lever_oracle_spot_check()?;
            Ok((
                problems.is_empty(),
                if problems.is_empty() {
                    "optimum 1.0 on all instances".into()
                } else {
                    problems.join("; ")
                },
            ))
        }),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_passes() {
        for c in run_checks(&CheckOptions::default()) {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }

    #[test]
    fn denominator_fault_is_caught() {
        let opts = CheckOptions {
            lrp_denominator_shift: 1e-2,
            ..Default::default()
        };
        assert!(conservation_error(&opts, CONSERVATION_NETS).unwrap() > CONSERVATION_TOL);
    }
}
