mod common;

use common::{random_net, random_points, rng, worst_param_gradient_error};
use deltapinn::autodiff::{forward_with_derivatives, Expr};
use deltapinn::geometry::{sample, BatchSizes};
use deltapinn::kernel::KernelFamily;
use deltapinn::loss::{compute_terms, terms_with_gradient};
use deltapinn::net::{Activation, MsSirenNet, NetConfig};
use deltapinn::problems::{barry_mercer, maxwell, poisson, BarryMercerConstants, MaxwellConstants, ProblemSpec};
use deltapinn::tensor::Tensor;
use deltapinn::Error;
use proptest::prelude::*;

const ACTIVATIONS: [Activation; 3] = [Activation::Sine, Activation::Tanh, Activation::ReLU];

#[test]
fn parameter_gradients_two_inputs() {
    let loss = Expr::parse(
        "add(mean(square(add(hess[0,0,0], hess[0,1,1]))), add(mean(mul(value[0], sin(grad[0,1]))), mean(square(grad[0,0]))))",
    )
    .unwrap();
    let mut r = rng(11);
    for act in ACTIVATIONS {
        for _ in 0..5 {
            let net = random_net(&mut r, act, 2, 1);
            let pts = random_points(&mut r, 5, 2);
            let worst = worst_param_gradient_error(&net, &pts, &loss);
            assert!(worst <= 1e-5, "{act:?}: {worst:e}");
        }
    }
}

#[test]
fn parameter_gradients_three_inputs_three_outputs() {
    let loss = Expr::parse(
        "add(mean(square(add(grad[0,2], mul(-1, grad[2,1])))), \
         add(mean(square(add(hess[1,0,2], mul(0.5, hess[2,1,1])))), mean(mul(value[1], cos(value[2])))))",
    )
    .unwrap();
    let mut r = rng(12);
    for act in ACTIVATIONS {
        for _ in 0..3 {
            let net = random_net(&mut r, act, 3, 3);
            let pts = random_points(&mut r, 4, 3);
            let worst = worst_param_gradient_error(&net, &pts, &loss);
            assert!(worst <= 1e-5, "{act:?}: {worst:e}");
        }
    }
}

#[test]
fn single_layer_sine_net_gradient_energy() {
    let cfg = NetConfig::new(2, 1).with_shape(1, 2, 6);
    let mut r = rng(5);
    let net = MsSirenNet::init(cfg, 9).unwrap();
    let pts = random_points(&mut r, 8, 2);
    let loss = Expr::parse("add(mean(square(grad[0,0])), mean(square(grad[0,1])))").unwrap();
    assert!(worst_param_gradient_error(&net, &pts, &loss) <= 1e-5);
}

#[test]
fn input_derivatives_match_differences() {
    let mut r = rng(21);
    for act in [Activation::Sine, Activation::Tanh] {
        for in_dim in [2, 3] {
            let net = random_net(&mut r, act, in_dim, 2);
            let pts = random_points(&mut r, 3, in_dim);
            let d = forward_with_derivatives(&net, &pts).unwrap();
            let h = 1e-5;
            for i in 0..in_dim {
                let shift = |s: f64| {
                    let mut p = pts.clone();
                    for b in 0..p.rows() {
                        let v = p.get(&[b, i]);
                        p.set(&[b, i], v + s);
                    }
                    forward_with_derivatives(&net, &p).unwrap()
                };
                let (dp, dm) = (shift(h), shift(-h));
                for b in 0..pts.rows() {
                    for o in 0..2 {
                        let fd = (dp.value.get(&[b, o]) - dm.value.get(&[b, o])) / (2.0 * h);
                        let a = d.grad_input.get(&[b, o, i]);
                        assert!((a - fd).abs() <= 1e-6 * a.abs().max(1e-3), "grad {a} vs {fd}");
                        for j in 0..in_dim {
                            let fd = (dp.grad_input.get(&[b, o, j]) - dm.grad_input.get(&[b, o, j])) / (2.0 * h);
                            let a = d.hess_input.get(&[b, o, i, j]);
                            assert!((a - fd).abs() <= 1e-4 * a.abs().max(1e-2), "hess {a} vs {fd}");
                        }
                    }
                }
            }
        }
    }
}

fn check_fast_path(problem: &ProblemSpec, net: &MsSirenNet, sizes: BatchSizes) {
    let batch = sample(&problem.domain, &problem.source, sizes, 3, 0).unwrap();
    let coefs = [0.7, 1.3, 0.4, 2.1];
    let (terms, grad) = terms_with_gradient(net, problem, &batch, coefs).unwrap();
    assert_eq!(terms, compute_terms(net, problem, &batch).unwrap());
    let weighted = |n: &MsSirenNet| {
        let t = compute_terms(n, problem, &batch).unwrap().slots();
        t.iter().zip(coefs).map(|(v, c)| v.unwrap_or(0.0) * c).sum::<f64>()
    };
    let h = 1e-6;
    let mut p = net.clone();
    for k in 0..net.param_count() {
        let orig = p.params()[k];
        p.params_mut()[k] = orig + h;
        let lp = weighted(&p);
        p.params_mut()[k] = orig - h;
        let lm = weighted(&p);
        p.params_mut()[k] = orig;
        let fd = (lp - lm) / (2.0 * h);
        let rel = (grad[k] - fd).abs() / (grad[k].abs() + 1e-8 * lp.abs().max(1.0));
        assert!(rel <= 1e-5, "{} param {k}: {} vs {fd}", problem.name(), grad[k]);
    }
}

#[test]
fn training_loss_gradient_matches_differences() {
    let sizes = BatchSizes {
        r0: 6,
        r1: 6,
        bc: 8,
        ic: 5,
    };
    let mut r = rng(31);
    let p = poisson::problem(KernelFamily::Gaussian, 0.2).unwrap();
    check_fast_path(&p, &random_net(&mut r, Activation::Sine, 2, 1), sizes);
    let m = maxwell::problem(
        KernelFamily::Cauchy,
        0.2,
        MaxwellConstants {
            t_end: 1.0,
            tau: 0.3,
            delay: 0.5,
        },
    )
    .unwrap();
    check_fast_path(&m, &random_net(&mut r, Activation::Sine, 3, 3), sizes);
    let b = barry_mercer::problem(KernelFamily::Laplace, 0.1, BarryMercerConstants::default()).unwrap();
    check_fast_path(&b, &random_net(&mut r, Activation::Tanh, 3, 3), sizes);
}

#[test]
fn non_finite_points_are_rejected() {
    let net = MsSirenNet::init(NetConfig::new(2, 1).with_shape(1, 2, 4), 0).unwrap();
    let pts = Tensor::new(vec![1, 2], vec![f64::NAN, 0.0]).unwrap();
    assert!(matches!(forward_with_derivatives(&net, &pts), Err(Error::Contract(_))));
    let wrong = Tensor::new(vec![1, 3], vec![0.0; 3]).unwrap();
    assert!(forward_with_derivatives(&net, &wrong).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn sine_derivatives_finite_and_symmetric(
        seed in 0u64..1000,
        x in -10.0f64..10.0,
        y in -10.0f64..10.0,
        t in -10.0f64..10.0,
    ) {
        let mut cfg = NetConfig::new(3, 3).with_shape(2, 3, 8);
        cfg.skip_connections = false;
        let net = MsSirenNet::init(cfg, seed).unwrap();
        let pts = Tensor::new(vec![1, 3], vec![x, y, t]).unwrap();
        let d = forward_with_derivatives(&net, &pts).unwrap();
        prop_assert!(d.value.is_finite() && d.grad_input.is_finite() && d.hess_input.is_finite());
        for o in 0..3 {
            for i in 0..3 {
                for j in 0..3 {
                    prop_assert_eq!(d.hess_input.get(&[0, o, i, j]), d.hess_input.get(&[0, o, j, i]));
                }
            }
        }
    }
}
