mod common;

use common::*;
use proptest::prelude::*;
use unlearn::metrics::{fim_diagonal, loss_grad_norm_sq};
use unlearn::{Architecture, Model, Sample};

#[test]
fn forward_matches_scalar_loops_on_mnist_architecture() {
    let arch = Architecture::default_mlp(784, 10).unwrap();
    let model = Model::init(&arch, 42);
    let params = params_f64(&model);
    for s in toy_data(3, 784, 10, 7) {
        let got = model.forward(&s.features).unwrap();
        let want = probabilities(arch.layer_sizes(), &params, &features_f64(&s));
        assert_eq!(got.len(), 10);
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 1e-5, "{g} vs {w}");
        }
        assert!((got.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
}

#[test]
fn per_sample_gradient_matches_finite_differences() {
    let sizes = [2, 4, 3];
    let arch = Architecture::new(sizes.to_vec()).unwrap();
    assert!(arch.param_count() <= 50);
    let mut worst = 0.0f64;
    for seed in 0..20 {
        let model = Model::init(&arch, seed);
        let params = params_f64(&model);
        for s in toy_data(4, 2, 3, seed + 100) {
            let g = model.per_sample_grad(&s).unwrap();
            let fd = fd_grad_log_prob(&sizes, &params, &features_f64(&s), s.label, 1e-4);
            for (a, b) in g.values.iter().zip(&fd) {
                worst = worst.max(rel_err(*a as f64, *b, 1e-3));
            }
        }
    }
    assert!(worst < 1e-4, "max relative error {worst}");
}

#[test]
fn fim_diagonal_matches_brute_force() {
    let sizes = [2, 4, 3];
    let arch = Architecture::new(sizes.to_vec()).unwrap();
    let model = Model::init(&arch, 3);
    let params = params_f64(&model);
    let data = toy_data(5, 2, 3, 11);
    let mut brute = vec![0.0f64; arch.param_count()];
    for s in &data {
        let g = fd_grad_log_prob(&sizes, &params, &features_f64(s), s.label, 1e-5);
        for (b, v) in brute.iter_mut().zip(g) {
            *b += v * v / data.len() as f64;
        }
    }
    let fim = fim_diagonal(&model, &data).unwrap();
    let scale = brute.iter().cloned().fold(0.0, f64::max);
    for (f, b) in fim.values.iter().zip(&brute) {
        assert!(rel_err(*f, *b, 1e-3 * scale) < 1e-3, "{f} vs {b}");
    }
}

#[test]
fn batched_loss_gradient_matches_finite_differences() {
    let sizes = [3, 5, 4];
    let arch = Architecture::new(sizes.to_vec()).unwrap();
    let model = Model::init(&arch, 9);
    let params = params_f64(&model);
    let data = toy_data(7, 3, 4, 2);
    let mut fd = vec![0.0f64; arch.param_count()];
    for s in &data {
        let g = fd_grad_log_prob(&sizes, &params, &features_f64(s), s.label, 1e-5);
        for (a, v) in fd.iter_mut().zip(g) {
            *a -= v / data.len() as f64;
        }
    }
    let want: f64 = fd.iter().map(|v| v * v).sum();
    let got = loss_grad_norm_sq(&model, &data).unwrap();
    assert!(rel_err(got, want, 1e-12) < 1e-4, "{got} vs {want}");
}

proptest! {
    #[test]
    fn probabilities_sum_to_one(
        seed in 0u64..1000,
        x in prop::collection::vec(-5.0f32..5.0, 6),
        hidden in 1usize..9,
    ) {
        let arch = Architecture::new(vec![6, hidden, 5]).unwrap();
        let model = Model::init(&arch, seed);
        let p = model.forward(&x).unwrap();
        prop_assert_eq!(p.len(), 5);
        prop_assert!(p.iter().all(|&v| v > 0.0 && v <= 1.0));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn single_sample_information_equals_squared_gradient_norm(
        seed in 0u64..1000,
        x in prop::collection::vec(0.0f32..1.0, 3),
        y in 0usize..3,
    ) {
        let arch = Architecture::new(vec![3, 4, 3]).unwrap();
        let model = Model::init(&arch, seed);
        let s = Sample::new(x, y);
        let info = fim_diagonal(&model, std::slice::from_ref(&s)).unwrap().trace();
        let norm = model.per_sample_grad(&s).unwrap().squared_norm();
        prop_assert!((info - norm).abs() <= 1e-12 * norm.max(1e-300));
    }
}
