//! Central finite-difference verification of every backward rule.
//!
//! For each differentiable operation we build a scalar probe loss, run the
//! analytic backward pass, then perturb each leaf entry by ±h and compare.
//! The numeric side never touches the backward implementation.

use rand::Rng;
use vcl_core::nn::{Activation, DenseLayer, Mlp, MlpSpec, Normalizer};
use vcl_core::stats::seeded_rng;
use vcl_core::tensor::Tensor;
use vcl_core::vcl::vcl_unit_loss;

const H: f64 = 1e-5;
const TOL: f64 = 1e-5;

fn numeric_grad(f: &dyn Fn() -> Tensor, param: &Tensor) -> Vec<f64> {
    let base = param.values();
    let mut grad = vec![0.0; base.len()];
    for i in 0..base.len() {
        let mut bumped = base.clone();
        bumped[i] += H;
        param.set_data(&bumped).unwrap();
        let up = f().item();
        bumped[i] = base[i] - H;
        param.set_data(&bumped).unwrap();
        let down = f().item();
        bumped[i] = base[i];
        grad[i] = (up - down) / (2.0 * H);
    }
    param.set_data(&base).unwrap();
    grad
}

fn check(label: &str, f: impl Fn() -> Tensor, params: &[&Tensor]) {
    for p in params {
        p.zero_grad();
    }
    let loss = f();
    loss.backward().unwrap();
    for (pi, p) in params.iter().enumerate() {
        let analytic = p
            .grad()
            .unwrap_or_else(|| panic!("{label}: no gradient on param {pi}"));
        let numeric = numeric_grad(&f, p);
        for (i, (a, n)) in analytic.iter().zip(&numeric).enumerate() {
            let scale = a.abs().max(n.abs());
            let err = if scale < 1e-8 {
                (a - n).abs()
            } else {
                (a - n).abs() / scale
            };
            assert!(
                err < TOL,
                "{label}: param {pi} entry {i}: analytic {a} vs numeric {n} (err {err:.3e})"
            );
        }
    }
}

/// Random values in [−2, 2], pushed away from the origin so kinked
/// activations stay differentiable at the probe.
fn rand_values<R: Rng>(rng: &mut R, len: usize) -> Vec<f64> {
    (0..len)
        .map(|_| {
            let v: f64 = rng.gen_range(-2.0..2.0);
            if v.abs() < 0.05 {
                v + 0.1f64.copysign(v + 1e-12)
            } else {
                v
            }
        })
        .collect()
}

fn rand_param<R: Rng>(rng: &mut R, shape: &[usize]) -> Tensor {
    let len = shape.iter().product();
    Tensor::param(shape, rand_values(rng, len)).unwrap()
}

#[test]
fn elementwise_binary_ops() {
    let mut rng = seeded_rng(100);
    for _ in 0..5 {
        let a = rand_param(&mut rng, &[6]);
        let b = rand_param(&mut rng, &[6]);
        let w = Tensor::from_vec(&[6], rand_values(&mut rng, 6)).unwrap();
        check("add", || a.add(&b).unwrap().mul(&w).unwrap().sum().unwrap(), &[&a, &b]);
        check("sub", || a.sub(&b).unwrap().mul(&w).unwrap().sum().unwrap(), &[&a, &b]);
        check("mul", || a.mul(&b).unwrap().mul(&w).unwrap().sum().unwrap(), &[&a, &b]);
        check("div", || a.div(&b).unwrap().mul(&w).unwrap().sum().unwrap(), &[&a, &b]);
    }
}

#[test]
fn scalar_and_broadcast_ops() {
    let mut rng = seeded_rng(101);
    for _ in 0..5 {
        let a = rand_param(&mut rng, &[2, 3]);
        let row = rand_param(&mut rng, &[3]);
        let w = Tensor::from_vec(&[2, 3], rand_values(&mut rng, 6)).unwrap();
        check("add_scalar", || a.add_scalar(0.7).mul(&w).unwrap().sum().unwrap(), &[&a]);
        check("mul_scalar", || a.mul_scalar(-1.3).mul(&w).unwrap().sum().unwrap(), &[&a]);
        check("rsub_scalar", || a.rsub_scalar(2.0).mul(&w).unwrap().sum().unwrap(), &[&a]);
        check(
            "add_row",
            || a.add_row(&row).unwrap().mul(&w).unwrap().sum().unwrap(),
            &[&a, &row],
        );
        check(
            "sub_row",
            || a.sub_row(&row).unwrap().mul(&w).unwrap().sum().unwrap(),
            &[&a, &row],
        );
        check(
            "mul_row",
            || a.mul_row(&row).unwrap().mul(&w).unwrap().sum().unwrap(),
            &[&a, &row],
        );
    }
}

#[test]
fn activations_and_pointwise() {
    let mut rng = seeded_rng(102);
    for _ in 0..5 {
        let a = rand_param(&mut rng, &[8]);
        let w = Tensor::from_vec(&[8], rand_values(&mut rng, 8)).unwrap();
        check("relu", || a.relu().mul(&w).unwrap().sum().unwrap(), &[&a]);
        check(
            "leaky_relu",
            || a.leaky_relu(0.2).mul(&w).unwrap().sum().unwrap(),
            &[&a],
        );
        check("elu", || a.elu().mul(&w).unwrap().sum().unwrap(), &[&a]);
        check("selu", || a.selu().mul(&w).unwrap().sum().unwrap(), &[&a]);
        check("square", || a.square().unwrap().mul(&w).unwrap().sum().unwrap(), &[&a]);
        check("mean", || a.mean().unwrap(), &[&a]);
        check("sum", || a.sum().unwrap(), &[&a]);
    }
}

#[test]
fn elu_gradient_at_negative_point() {
    let a = Tensor::param(&[1], vec![-0.5]).unwrap();
    check("elu@-0.5", || a.elu().sum().unwrap(), &[&a]);
}

#[test]
fn matmul_and_slicing() {
    let mut rng = seeded_rng(103);
    for _ in 0..5 {
        let a = rand_param(&mut rng, &[3, 4]);
        let b = rand_param(&mut rng, &[4, 2]);
        let w = Tensor::from_vec(&[3, 2], rand_values(&mut rng, 6)).unwrap();
        check(
            "matmul",
            || a.matmul(&b).unwrap().mul(&w).unwrap().sum().unwrap(),
            &[&a, &b],
        );
        let ws = Tensor::from_vec(&[2, 4], rand_values(&mut rng, 8)).unwrap();
        check(
            "row_slice",
            || a.row_slice(1, 2).unwrap().mul(&ws).unwrap().sum().unwrap(),
            &[&a],
        );
    }
}

#[test]
fn batch_variance_both_divisors() {
    let mut rng = seeded_rng(104);
    for unbiased in [true, false] {
        let x = rand_param(&mut rng, &[8, 3]);
        let w = Tensor::from_vec(&[3], rand_values(&mut rng, 3)).unwrap();
        check(
            "batch_variance",
            || {
                x.batch_variance(unbiased)
                    .unwrap()
                    .mul(&w)
                    .unwrap()
                    .sum()
                    .unwrap()
            },
            &[&x],
        );
    }
}

#[test]
fn softmax_cross_entropy_gradient() {
    let mut rng = seeded_rng(105);
    for _ in 0..4 {
        let logits = rand_param(&mut rng, &[5, 4]);
        let labels: Vec<usize> = (0..5).map(|_| rng.gen_range(0..4)).collect();
        check(
            "softmax_ce",
            || logits.softmax_cross_entropy(&labels).unwrap(),
            &[&logits],
        );
    }
}

#[test]
fn batchnorm_gradients_all_inputs() {
    let mut rng = seeded_rng(106);
    for _ in 0..3 {
        let x = rand_param(&mut rng, &[6, 3]);
        let gamma = rand_param(&mut rng, &[3]);
        let shift = rand_param(&mut rng, &[3]);
        let w = Tensor::from_vec(&[6, 3], rand_values(&mut rng, 18)).unwrap();
        check(
            "batchnorm",
            || {
                let (out, _, _) = x.batchnorm_train(&gamma, &shift, 1e-3).unwrap();
                out.mul(&w).unwrap().sum().unwrap()
            },
            &[&x, &gamma, &shift],
        );
    }
}

#[test]
fn layernorm_gradients_all_inputs() {
    let mut rng = seeded_rng(107);
    for _ in 0..3 {
        let x = rand_param(&mut rng, &[4, 5]);
        let gamma = rand_param(&mut rng, &[5]);
        let shift = rand_param(&mut rng, &[5]);
        let w = Tensor::from_vec(&[4, 5], rand_values(&mut rng, 20)).unwrap();
        check(
            "layernorm",
            || {
                x.layernorm(&gamma, &shift, 1e-3)
                    .unwrap()
                    .mul(&w)
                    .unwrap()
                    .sum()
                    .unwrap()
            },
            &[&x, &gamma, &shift],
        );
    }
}

#[test]
fn dropout_mask_gradient() {
    let mut rng = seeded_rng(108);
    let x = rand_param(&mut rng, &[10]);
    let scale: Vec<f64> = (0..10).map(|i| if i % 3 == 0 { 0.0 } else { 2.0 }).collect();
    let offset = vec![0.1; 10];
    check(
        "elementwise_affine",
        || x.elementwise_affine(&scale, &offset).unwrap().sum().unwrap(),
        &[&x],
    );
}

#[test]
fn vcl_unit_loss_gradients() {
    let mut rng = seeded_rng(109);
    for _ in 0..3 {
        let s1 = rand_param(&mut rng, &[2, 3]);
        let s2 = rand_param(&mut rng, &[2, 3]);
        let beta = Tensor::param(&[3], vec![1.0, 0.8, 1.3]).unwrap();
        check(
            "vcl_unit_loss",
            || vcl_unit_loss(&s1, &s2, &beta).unwrap().sum().unwrap(),
            &[&s1, &s2, &beta],
        );
    }
}

#[test]
fn vcl_unit_loss_matches_scalar_recomputation() {
    let mut rng = seeded_rng(113);
    let s1 = rand_param(&mut rng, &[2, 3]);
    let s2 = rand_param(&mut rng, &[2, 3]);
    let beta = Tensor::param(&[3], vec![1.0; 3]).unwrap();
    let loss = vcl_unit_loss(&s1, &s2, &beta).unwrap();
    let v1 = s1.values();
    let v2 = s2.values();
    for j in 0..3 {
        // Unbiased variance of a two-row column is (x0−x1)²/2.
        let var1 = (v1[j] - v1[3 + j]).powi(2) / 2.0;
        let var2 = (v2[j] - v2[3 + j]).powi(2) / 2.0;
        let want = (1.0 - var1 / (var2 + 1.0)).powi(2);
        let got = loss.values()[j];
        assert!((got - want).abs() < 1e-12, "unit {j}: {got} vs {want}");
    }
}

#[test]
fn full_mlp_parameter_gradients() {
    let mut rng = seeded_rng(110);
    let spec = MlpSpec {
        input_dim: 3,
        hidden: vec![4, 4, 3],
        classes: 3,
        activation: Activation::Elu,
        normalizer: Normalizer::None,
        dropout: None,
    };
    let mlp = Mlp::new(&spec, &mut rng).unwrap();
    let x = Tensor::matrix(6, 3, rand_values(&mut rng, 18)).unwrap();
    let labels: Vec<usize> = (0..6).map(|_| rng.gen_range(0..3)).collect();
    let params = mlp.all_params();
    let refs: Vec<&Tensor> = params.iter().collect();
    check(
        "mlp",
        || {
            mlp.forward_eval(&x)
                .unwrap()
                .softmax_cross_entropy(&labels)
                .unwrap()
        },
        &refs,
    );
}

#[test]
fn dense_layer_gradients() {
    let mut rng = seeded_rng(111);
    let layer = DenseLayer::new(3, 2, Activation::Selu, &mut rng).unwrap();
    let x = Tensor::matrix(4, 3, rand_values(&mut rng, 12)).unwrap();
    let w = Tensor::from_vec(&[4, 2], rand_values(&mut rng, 8)).unwrap();
    check(
        "dense",
        || layer.forward(&x).unwrap().mul(&w).unwrap().sum().unwrap(),
        &[&layer.weight, &layer.bias],
    );
}

#[test]
fn backward_is_linear_in_the_loss() {
    let mut rng = seeded_rng(112);
    let p = rand_param(&mut rng, &[5]);
    let build_l1 = || p.square().unwrap().sum().unwrap();
    let build_l2 = || p.elu().mean().unwrap();

    p.zero_grad();
    build_l1().backward().unwrap();
    let g1 = p.grad().unwrap();
    p.zero_grad();
    build_l2().backward().unwrap();
    let g2 = p.grad().unwrap();

    let (a, b) = (1.7, -0.4);
    p.zero_grad();
    build_l1()
        .mul_scalar(a)
        .add(&build_l2().mul_scalar(b))
        .unwrap()
        .backward()
        .unwrap();
    let combined = p.grad().unwrap();
    for i in 0..5 {
        let want = a * g1[i] + b * g2[i];
        assert!((combined[i] - want).abs() < 1e-12);
    }
}

#[test]
fn forward_backward_deterministic_per_seed() {
    let run = || {
        let mut rng = seeded_rng(999);
        let spec = MlpSpec {
            input_dim: 4,
            hidden: vec![6, 5],
            classes: 3,
            activation: Activation::LeakyRelu,
            normalizer: Normalizer::None,
            dropout: None,
        };
        let mlp = Mlp::new(&spec, &mut rng).unwrap();
        let x = Tensor::matrix(5, 4, rand_values(&mut rng, 20)).unwrap();
        let labels = vec![0, 1, 2, 1, 0];
        let loss = mlp
            .forward_eval(&x)
            .unwrap()
            .softmax_cross_entropy(&labels)
            .unwrap();
        loss.backward().unwrap();
        let mut bits: Vec<u64> = vec![loss.item().to_bits()];
        for p in mlp.all_params() {
            bits.extend(p.grad().unwrap().iter().map(|v| v.to_bits()));
        }
        bits
    };
    assert_eq!(run(), run());
}
