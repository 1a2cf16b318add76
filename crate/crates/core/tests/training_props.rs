use std::f64::consts::PI;

use mnl::calculus::oracle::random_instance;
use mnl::diagnostics::{certify_theorem1, classify_layers, CertificateOptions, Verdict};
use mnl::experiments::{figure_eight_point, gen_figure_eight, gen_four_region, gen_swiss_roll, LabelTable};
use mnl::network::{init_weights, output, Activation, Architecture};
use mnl::training::{train_gauss_newton, train_gd, LossKind, TrainConfig};
use mnl::Dataset;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn every_loss_has_vanishing_gradient_only_at_the_target() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let losses = [LossKind::Squared, LossKind::smoothed_l1(), LossKind::Cauchy { scale: 0.7 }];
    for loss in losses {
        for _ in 0..500 {
            let n = rng.random_range(1..5);
            let y: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
            let (_, g) = loss.eval(&y, &y).unwrap();
            assert!(g.iter().all(|&v| v == 0.0));
            let mut o = y.clone();
            o[rng.random_range(0..n)] += rng.random_range(0.01..2.0);
            let (_, g) = loss.eval(&o, &y).unwrap();
            assert!(g.iter().any(|&v| v != 0.0), "{loss:?}");
        }
    }
}

#[test]
fn small_step_gradient_descent_mostly_descends() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut steps = 0usize;
    let mut descents = 0usize;
    for _ in 0..20 {
        let inst = random_instance(&mut rng, 4, 3, 4).unwrap();
        let cfg = TrainConfig {
            max_iters: 100,
            step_size: 0.01,
            log_every: 1,
            ..TrainConfig::default()
        };
        let (_, log) = train_gd(&inst.arch, &inst.weights, &inst.data, LossKind::Squared, &cfg).unwrap();
        for w in log.records.windows(2) {
            steps += 1;
            if w[1].loss <= w[0].loss {
                descents += 1;
            }
        }
    }
    assert!(descents as f64 >= 0.95 * steps as f64, "{descents}/{steps}");
}

#[test]
fn full_rank_small_gradient_implies_small_residuals() {
    // Widths (2,8,8,1) have 88 weights against T·n_L = 4 residuals.
    let arch = Architecture::with_hidden(vec![2, 8, 8, 1], Activation::Tanh).unwrap();
    let data = Dataset::new(
        vec![vec![0.1, 0.9], vec![-0.7, 0.3], vec![0.8, -0.5], vec![-0.2, -0.6]],
        vec![vec![0.5], vec![-1.0], vec![1.5], vec![0.2]],
    )
    .unwrap();
    let ws0 = init_weights(&arch, 5, 1.0).unwrap();
    let cfg = TrainConfig {
        max_iters: 200,
        gradient_tol: 1e-10,
        log_every: 1,
        track_rank: true,
        ..TrainConfig::default()
    };
    let (ws, log) = train_gauss_newton(&arch, &ws0, &data, LossKind::Squared, &cfg).unwrap();
    assert!(log.records.iter().all(|r| r.rank_p == Some(4)));
    assert!(log.last().grad_norm < 1e-10);
    for (x, y) in data.inputs.iter().zip(&data.targets) {
        assert!((output(&arch, &ws, x).unwrap()[0] - y[0]).abs() < 1e-4);
    }
    let cert = certify_theorem1(&arch, &ws, &data, LossKind::Squared, CertificateOptions::default()).unwrap();
    assert_eq!(cert.verdict, Verdict::CertifiedExactRegime);
    assert!(cert.rank_p <= cert.required);
}

#[test]
fn certified_verdicts_are_sound() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let opts = CertificateOptions::default();
    let mut certified = 0;
    for _ in 0..30 {
        let inst = random_instance(&mut rng, 5, 3, 3).unwrap();
        let cfg = TrainConfig {
            max_iters: 60,
            ..TrainConfig::default()
        };
        let Ok((ws, _)) = train_gauss_newton(&inst.arch, &inst.weights, &inst.data, inst.loss, &cfg) else {
            continue;
        };
        let cert = certify_theorem1(&inst.arch, &ws, &inst.data, inst.loss, opts).unwrap();
        assert!(cert.rank_p <= inst.arch.param_count().min(cert.required));
        if cert.verdict == Verdict::CertifiedExactRegime {
            certified += 1;
            assert_eq!(cert.rank_p, cert.required);
            for (x, y) in inst.data.inputs.iter().zip(&inst.data.targets) {
                let o = output(&inst.arch, &ws, x).unwrap();
                let r: f64 = o.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
                assert!(r <= opts.exactness_tol);
            }
        }
    }
    assert!(certified > 0);
}

#[test]
fn layer_classes_do_not_depend_on_the_probe() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for widths in [vec![4, 3, 3, 2], vec![2, 5, 5, 6], vec![3, 6, 2, 4]] {
        let arch = Architecture::with_hidden(widths, Activation::sigmoid(2.0)).unwrap();
        let ws = init_weights(&arch, rng.random(), 1.0).unwrap();
        let reference = classify_layers(&arch, &ws, &vec![0.0; arch.input_dim()]).unwrap();
        for _ in 0..50 {
            let x: Vec<f64> = (0..arch.input_dim()).map(|_| rng.random_range(-3.0..3.0)).collect();
            let r = classify_layers(&arch, &ws, &x).unwrap();
            assert_eq!(r.chain, reference.chain);
            for (a, b) in r.layers.iter().zip(&reference.layers) {
                assert_eq!((a.classification, a.jacobian_rank), (b.classification, b.jacobian_rank));
            }
        }
    }
}

#[test]
fn generators_are_deterministic_finite_and_in_range() {
    let table = LabelTable::default();
    for seed in 0..5 {
        let a = gen_four_region(300, seed, &table).unwrap();
        assert_eq!(a, gen_four_region(300, seed, &table).unwrap());
        for (x, y) in a.inputs.iter().zip(&a.targets) {
            assert!(x.iter().all(|v| v.is_finite() && v.abs() < 4.0));
            assert_eq!(y.iter().sum::<f64>(), 1.0);
        }
        let f = gen_figure_eight(51, 0.05, seed).unwrap();
        assert_eq!(f, gen_figure_eight(51, 0.05, seed).unwrap());
        assert!(f.inputs.iter().flatten().all(|v| v.is_finite() && v.abs() <= 1.05));
        let s = gen_swiss_roll(200, seed, seed + 10).unwrap();
        assert_eq!(s, gen_swiss_roll(200, seed, seed + 10).unwrap());
        for x in &s.inputs {
            let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(r <= (4.0 * PI * PI + 1.0f64).sqrt() + 1e-9);
        }
    }
}

#[test]
fn four_region_labels_partition_the_square() {
    let table = LabelTable::default();
    let mut seen = [false; 4];
    for i in 0..200 {
        for j in 0..200 {
            let p = [-4.0 + 0.04 * i as f64 + 0.02, -4.0 + 0.04 * j as f64 + 0.02];
            let c = table.class_of(p);
            assert!((1..=4).contains(&c));
            assert_eq!(c, table.class_of(p));
            seen[c as usize - 1] = true;
        }
    }
    assert!(seen.iter().all(|&s| s));
}

#[test]
fn figure_eight_is_injective_off_the_crossing() {
    let n = 720;
    let pts: Vec<(usize, [f64; 2])> = (0..n)
        .filter(|&i| i != n / 4 && i != 3 * n / 4)
        .map(|i| (i, figure_eight_point(2.0 * PI * i as f64 / n as f64)))
        .collect();
    for (a, pa) in &pts {
        for (b, pb) in &pts {
            if a < b {
                assert!((pa[0] - pb[0]).hypot(pa[1] - pb[1]) > 1e-6, "{a} {b}");
            }
        }
    }
    for t in [PI / 2.0, 3.0 * PI / 2.0] {
        let p = figure_eight_point(t);
        assert!(p[0].abs() < 1e-15 && p[1].abs() < 1e-15);
    }
}
