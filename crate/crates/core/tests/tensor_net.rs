use proptest::prelude::*;

use rdn_core::tensor_net::{
    finite_diff_grad, max_relative_error, Activation, Mlp, MlpSnapshot, OptimizerKind,
    OptimizerState, Rng,
};

fn random_sizes(rng: &mut Rng, hidden_layers: usize) -> Vec<usize> {
    (0..hidden_layers + 2).map(|_| 1 + rng.below(16)).collect()
}

fn randomise_biases(net: &mut Mlp<f64>, rng: &mut Rng) {
    for l in 0..net.layers().len() {
        let (_, b) = net.params_mut(l);
        for v in b.iter_mut() {
            *v = 0.3 * rng.normal();
        }
    }
}

/// Straight-line evaluation straight from the stored parameters.
fn reference_forward(net: &Mlp<f64>, x: &[f64]) -> Vec<f64> {
    let mut cur = x.to_vec();
    for layer in net.layers() {
        let mut next = Vec::with_capacity(layer.fan_out());
        for k in 0..layer.fan_out() {
            let mut z = layer.bias()[k];
            for (j, &xj) in cur.iter().enumerate() {
                z += layer.weights()[k * layer.fan_in() + j] * xj;
            }
            next.push(match layer.activation() {
                Activation::Relu => z.max(0.0),
                Activation::Identity => z,
            });
        }
        cur = next;
    }
    cur
}

#[test]
fn forward_matches_straight_line_evaluation() {
    let mut rng = Rng::new(11);
    for _ in 0..50 {
        let sizes = random_sizes(&mut rng, 2);
        let mut net = Mlp::<f64>::new(&sizes, &mut rng).unwrap();
        randomise_biases(&mut net, &mut rng);
        let x: Vec<f64> = (0..sizes[0]).map(|_| rng.normal()).collect();
        let (y, _) = net.forward(&x).unwrap();
        let r = reference_forward(&net, &x);
        for (a, b) in y.iter().zip(&r) {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0), "{a} vs {b}");
        }
    }
}

#[test]
fn wide_sparse_input_matches_straight_line_evaluation() {
    // Mostly-zero inputs wider than 128 take the sparse path.
    let mut rng = Rng::new(12);
    let mut net = Mlp::<f64>::new(&[300, 8, 3], &mut rng).unwrap();
    randomise_biases(&mut net, &mut rng);
    let mut x = vec![0.0; 300];
    for j in (0..300).step_by(17) {
        x[j] = rng.normal();
    }
    let (y, cache) = net.forward(&x).unwrap();
    let r = reference_forward(&net, &x);
    for (a, b) in y.iter().zip(&r) {
        assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
    }
    let c = [0.5, -1.0, 2.0];
    let analytic = net.backward(&cache, &c).unwrap();
    let numeric = finite_diff_grad(
        &net,
        &x,
        |y| y.iter().zip(&c).map(|(a, b)| a * b).sum(),
        1e-6,
    );
    assert!(max_relative_error(&analytic, &numeric, 1e-3) <= 1e-5);
}

#[test]
fn same_seed_same_initialisation() {
    let a = Mlp::<f64>::new(&[5, 7, 3], &mut Rng::new(3)).unwrap();
    let b = Mlp::<f64>::new(&[5, 7, 3], &mut Rng::new(3)).unwrap();
    let c = Mlp::<f64>::new(&[5, 7, 3], &mut Rng::new(4)).unwrap();
    assert_eq!(MlpSnapshot::capture(&a), MlpSnapshot::capture(&b));
    assert_ne!(MlpSnapshot::capture(&a), MlpSnapshot::capture(&c));
}

#[test]
fn copied_network_agrees_on_random_probes() {
    let mut rng = Rng::new(5);
    let src = Mlp::<f64>::new(&[6, 12, 12, 2], &mut rng).unwrap();
    let mut dst = Mlp::<f64>::new(&[6, 12, 12, 2], &mut rng).unwrap();
    dst.copy_parameters_from(&src).unwrap();
    let mut max_diff = 0.0f64;
    for _ in 0..100 {
        let x: Vec<f64> = (0..6).map(|_| 3.0 * rng.normal()).collect();
        let a = src.predict(&x).unwrap();
        let b = dst.predict(&x).unwrap();
        for (u, v) in a.iter().zip(&b) {
            max_diff = max_diff.max((u - v).abs());
        }
    }
    assert_eq!(max_diff, 0.0);
}

#[test]
fn identical_seeds_give_identical_training_trajectories() {
    let train = || {
        let mut rng = Rng::new(9);
        let mut net = Mlp::<f64>::new(&[4, 8, 2], &mut rng).unwrap();
        let mut opt = OptimizerState::new(OptimizerKind::Adam, 1e-2, &net);
        for _ in 0..20 {
            let x: Vec<f64> = (0..4).map(|_| rng.normal()).collect();
            let (y, cache) = net.forward(&x).unwrap();
            let d: Vec<f64> = y.iter().map(|v| 2.0 * (v - 1.0)).collect();
            let g = net.backward(&cache, &d).unwrap();
            opt.step(&mut net, &g).unwrap();
        }
        MlpSnapshot::capture(&net)
    };
    assert_eq!(train(), train());
}

#[test]
fn f32_networks_track_f64() {
    let mut rng = Rng::new(21);
    let net = Mlp::<f64>::new(&[5, 10, 2], &mut rng).unwrap();
    let small: Mlp<f32> = net.cast();
    let x = [0.1, -0.4, 0.9, 0.0, 1.5];
    let a = net.predict(&x).unwrap();
    let b = small.predict(&x.map(|v| v as f32)).unwrap();
    for (u, v) in a.iter().zip(&b) {
        assert!((u - *v as f64).abs() < 1e-5);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn backward_matches_central_differences(seed in any::<u64>(), depth in 0usize..3) {
        let mut rng = Rng::new(seed);
        let sizes = random_sizes(&mut rng, depth);
        let mut net = Mlp::<f64>::new(&sizes, &mut rng).unwrap();
        randomise_biases(&mut net, &mut rng);
        let x: Vec<f64> = (0..sizes[0]).map(|_| rng.normal()).collect();
        let c: Vec<f64> = (0..*sizes.last().unwrap()).map(|_| rng.normal()).collect();
        let (_, cache) = net.forward(&x).unwrap();
        let analytic = net.backward(&cache, &c).unwrap();
        let numeric = finite_diff_grad(
            &net,
            &x,
            |y| y.iter().zip(&c).map(|(a, b)| a * b).sum(),
            1e-6,
        );
        let err = max_relative_error(&analytic, &numeric, 1e-3);
        prop_assert!(err <= 1e-5, "relative error {}", err);
    }

    #[test]
    fn relu_cache_is_exact_max_of_preactivation(seed in any::<u64>()) {
        let mut rng = Rng::new(seed);
        let sizes = random_sizes(&mut rng, 2);
        let mut net = Mlp::<f64>::new(&sizes, &mut rng).unwrap();
        randomise_biases(&mut net, &mut rng);
        let x: Vec<f64> = (0..sizes[0]).map(|_| rng.normal()).collect();
        let (_, cache) = net.forward(&x).unwrap();
        for (l, layer) in net.layers().iter().enumerate() {
            let z = layer.pre_activation(cache.layer_input(l));
            let out = cache.layer_output(l);
            for (zk, ok) in z.iter().zip(out) {
                let expected = match layer.activation() {
                    Activation::Relu => zk.max(0.0),
                    Activation::Identity => *zk,
                };
                prop_assert_eq!(expected.to_bits(), ok.to_bits());
            }
        }
    }

    #[test]
    fn snapshot_json_round_trip_is_bit_exact(seed in any::<u64>()) {
        let mut rng = Rng::new(seed);
        let sizes = random_sizes(&mut rng, 1);
        let mut net = Mlp::<f64>::new(&sizes, &mut rng).unwrap();
        randomise_biases(&mut net, &mut rng);
        let snap = MlpSnapshot::capture(&net);
        let text = serde_json::to_string(&snap).unwrap();
        let back: MlpSnapshot = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(&back, &snap);
        let restored: Mlp<f64> = back.restore().unwrap();
        let x: Vec<f64> = (0..sizes[0]).map(|_| rng.normal()).collect();
        prop_assert_eq!(restored.predict(&x).unwrap(), net.predict(&x).unwrap());
    }
}
