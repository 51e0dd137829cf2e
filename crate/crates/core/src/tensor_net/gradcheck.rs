use super::mlp::{GradientSet, Mlp};
use super::scalar::Scalar;

/// Central-difference estimate of d loss(net(x)) / dθ for every parameter.
/// Used as an oracle for [`Mlp::backward`].
pub fn finite_diff_grad<T, F>(net: &Mlp<T>, x: &[T], loss: F, h: f64) -> GradientSet<T>
where
    T: Scalar,
    F: Fn(&[T]) -> T,
{
    let mut probe = net.clone();
    let mut grads = GradientSet::zeros_like(net);
    let eval = |n: &Mlp<T>| loss(&n.predict(x).expect("input length checked by caller"));
    let h_t = T::of(h);
    let two_h = T::of(2.0 * h);
    for l in 0..net.layers().len() {
        let n_w = net.layers()[l].weights().len();
        let n_b = net.layers()[l].bias().len();
        for i in 0..n_w + n_b {
            let original = {
                let (w, b) = probe.params_mut(l);
                if i < n_w {
                    w[i]
                } else {
                    b[i - n_w]
                }
            };
            let set = |p: &mut Mlp<T>, v: T| {
                let (w, b) = p.params_mut(l);
                if i < n_w {
                    w[i] = v;
                } else {
                    b[i - n_w] = v;
                }
            };
            set(&mut probe, original + h_t);
            let plus = eval(&probe);
            set(&mut probe, original - h_t);
            let minus = eval(&probe);
            set(&mut probe, original);
            let g = (plus - minus) / two_h;
            if i < n_w {
                grads.layers[l].weights[i] = g;
            } else {
                grads.layers[l].bias[i - n_w] = g;
            }
        }
    }
    grads
}

/// Largest relative error between two gradient sets, with the denominator
/// floored at `floor` so that near-zero components compare absolutely.
pub fn max_relative_error<T: Scalar>(a: &GradientSet<T>, b: &GradientSet<T>, floor: f64) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| {
            let (x, y) = (x.as_f64(), y.as_f64());
            (x - y).abs() / x.abs().max(y.abs()).max(floor)
        })
        .fold(0.0, f64::max)
}
