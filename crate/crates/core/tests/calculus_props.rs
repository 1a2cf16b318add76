use mnl::calculus::oracle::random_instance;
use mnl::calculus::{
    assemble_p, input_jacobian, jacobian_bundle, loss_gradient, psi_chain, weight_jacobian,
};
use mnl::linalg::{norm2, numerical_rank, spectral_norm, Matrix};
use mnl::network::{forward, output, Activation, Architecture, WeightSet};
use mnl::training::LossKind;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Straight loop implementation of `σ(Wᵀφ + b)` layer by layer.
fn naive_forward(arch: &Architecture, ws: &WeightSet, x: &[f64]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let mut phis = vec![x.to_vec()];
    let mut sprimes = Vec::new();
    for l in 1..=arch.depth() {
        let w = ws.w(l);
        let prev = phis.last().unwrap().clone();
        let mut next = Vec::new();
        let mut sp = Vec::new();
        for i in 0..w.cols() {
            let mut z = ws.bias(l)[i];
            for (k, p) in prev.iter().enumerate() {
                z += w[(k, i)] * p;
            }
            let v = arch.activation(l).eval(z);
            next.push(v.value);
            sp.push(v.first);
        }
        phis.push(next);
        sprimes.push(sp);
    }
    (phis, sprimes)
}

/// Classical backpropagation of `(1/T) Σ E(F(x_i), y_i)` in the crate's flat order.
fn backprop_gradient(arch: &Architecture, ws: &WeightSet, inputs: &[Vec<f64>], targets: &[Vec<f64>], loss: LossKind) -> Vec<f64> {
    let mut g = vec![0.0; arch.param_count()];
    for (x, y) in inputs.iter().zip(targets) {
        let (phis, sprimes) = naive_forward(arch, ws, x);
        let (_, de) = loss.eval(phis.last().unwrap(), y).unwrap();
        let mut delta: Vec<f64> = de.iter().zip(&sprimes[arch.depth() - 1]).map(|(a, b)| a * b).collect();
        for l in (1..=arch.depth()).rev() {
            let w = ws.w(l);
            for k in 0..w.rows() {
                for i in 0..w.cols() {
                    g[arch.param_index(l, k, i)] += phis[l - 1][k] * delta[i];
                }
            }
            if l > 1 {
                delta = (0..w.rows())
                    .map(|k| (0..w.cols()).map(|i| w[(k, i)] * delta[i]).sum::<f64>() * sprimes[l - 2][k])
                    .collect();
            }
        }
    }
    g.iter_mut().for_each(|v| *v /= inputs.len() as f64);
    g
}

#[test]
fn forward_matches_naive_reimplementation() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for _ in 0..200 {
        let inst = random_instance(&mut rng, 5, 4, 5).unwrap();
        for x in &inst.data.inputs {
            let (phis, _) = naive_forward(&inst.arch, &inst.weights, x);
            let y = output(&inst.arch, &inst.weights, x).unwrap();
            for (a, b) in y.iter().zip(phis.last().unwrap()) {
                assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
            }
            assert_eq!(y, output(&inst.arch, &inst.weights, x).unwrap());
        }
    }
}

#[test]
fn weight_jacobian_reproduces_backprop() {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    for _ in 0..200 {
        let inst = random_instance(&mut rng, 5, 4, 5).unwrap();
        let lg = loss_gradient(&inst.arch, &inst.weights, &inst.data, inst.loss).unwrap();
        let bp = backprop_gradient(&inst.arch, &inst.weights, &inst.data.inputs, &inst.data.targets, inst.loss);
        for (a, b) in lg.gradient.iter().zip(&bp) {
            assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()), "{a} vs {b}");
        }
        let bundle = jacobian_bundle(&inst.arch, &inst.weights, &inst.data, inst.loss).unwrap();
        for (a, b) in bundle.gradient.iter().zip(&bp) {
            assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
        }
    }
}

#[test]
fn p_matrix_stacks_per_sample_jacobians() {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    for _ in 0..50 {
        let inst = random_instance(&mut rng, 4, 3, 4).unwrap();
        let p = assemble_p(&inst.arch, &inst.weights, &inst.data.inputs).unwrap();
        let n_l = inst.arch.output_dim();
        assert_eq!(p.shape(), (inst.arch.param_count(), inst.data.len() * n_l));
        for (s, x) in inst.data.inputs.iter().enumerate() {
            let trace = forward(&inst.arch, &inst.weights, x).unwrap();
            let j = weight_jacobian(&trace, &psi_chain(&trace, &inst.weights).unwrap()).unwrap();
            for r in 0..p.rows() {
                for c in 0..n_l {
                    assert_eq!(p[(r, s * n_l + c)], j[(r, c)]);
                }
            }
        }
    }
}

#[test]
fn mean_value_bound_on_segments() {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    for _ in 0..100 {
        let inst = random_instance(&mut rng, 5, 4, 2).unwrap();
        let x0 = &inst.data.inputs[0];
        let x1: Vec<f64> = x0.iter().map(|v| v + rng.random_range(-2.0..2.0)).collect();
        let mut c: f64 = 0.0;
        for k in 0..64 {
            let t = k as f64 / 63.0;
            let xt: Vec<f64> = x0.iter().zip(&x1).map(|(a, b)| a + t * (b - a)).collect();
            let trace = forward(&inst.arch, &inst.weights, &xt).unwrap();
            c = c.max(spectral_norm(&input_jacobian(&trace, &inst.weights).unwrap()).unwrap());
        }
        let y0 = output(&inst.arch, &inst.weights, x0).unwrap();
        let y1 = output(&inst.arch, &inst.weights, &x1).unwrap();
        let dy: Vec<f64> = y0.iter().zip(&y1).map(|(a, b)| a - b).collect();
        let dx: Vec<f64> = x0.iter().zip(&x1).map(|(a, b)| a - b).collect();
        assert!(norm2(&dy) <= (c + 1e-6) * norm2(&dx));
    }
}

#[test]
fn activation_monotone_and_slope_bounded() {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    for act in [Activation::sigmoid(0.3), Activation::sigmoid(7.0), Activation::Softplus, Activation::Tanh] {
        for _ in 0..2000 {
            let x: f64 = rng.random_range(-15.0..15.0);
            let v = act.eval(x);
            assert!(v.first > 0.0, "{act:?} at {x}");
            assert!(v.first <= act.max_slope());
        }
    }
    for a in [0.5, 1.0, 5.0, 10.0] {
        let act = Activation::sigmoid(a);
        let peak = (-20_000..=20_000)
            .map(|i| act.eval(i as f64 * 1e-4).first)
            .fold(0.0, f64::max);
        assert!((peak - a / 4.0).abs() < 1e-9);
    }
}

#[test]
fn rank_of_p_is_bounded_by_its_shape() {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    for _ in 0..100 {
        let inst = random_instance(&mut rng, 4, 3, 5).unwrap();
        let p = assemble_p(&inst.arch, &inst.weights, &inst.data.inputs).unwrap();
        let r = numerical_rank(&p, 1.0).unwrap();
        assert!(r <= inst.arch.param_count().min(inst.data.len() * inst.arch.output_dim()));
    }
}

#[test]
fn input_jacobian_of_linear_net_is_weight_product() {
    let arch = Architecture::linear(vec![3, 4, 2]).unwrap();
    let ws = mnl::network::init_weights(&arch, 1, 1.0).unwrap();
    let want: Matrix = ws.w(2).transpose().matmul(&ws.w(1).transpose()).unwrap();
    let trace = forward(&arch, &ws, &[0.2, -1.0, 0.4]).unwrap();
    assert!(input_jacobian(&trace, &ws).unwrap().sub(&want).unwrap().max_abs() < 1e-14);
}
