mod common;

use common::{grad_check, small_arch, toy_batch};
use disentangle::losses::{total_loss, Ablation, LossBatch, LossConfig};
use disentangle::model::{ArchConfig, GoyaModel, OutputGrads};
use disentangle::tensor::Matrix;

const STEP: f64 = 1e-5;
const FLOOR: f64 = 1e-4;
const TOL: f64 = 1e-5;

fn check(arch: ArchConfig, cfg: LossConfig, seed: u64, n: usize) {
    let batch = toy_batch(seed, n, arch.input_dim, 16, arch.n_styles);
    let mut model = GoyaModel::<f64>::new(arch, seed + 100).unwrap();
    let r = grad_check(&mut model, &batch, &cfg, STEP, FLOOR);
    eprintln!("seed {seed}: {} params, max rel {:e} at {}", r.checked, r.max_rel_error, r.worst);
    assert!(r.max_rel_error < TOL, "max rel error {:e} at {}", r.max_rel_error, r.worst);
}

#[test]
fn total_loss_gradient_default_objective() {
    for seed in 0..3 {
        check(small_arch(12, 4), LossConfig::default(), seed, 8);
    }
}

#[test]
fn total_loss_gradient_rectangular_widths() {
    let arch = ArchConfig {
        input_dim: 10,
        content_hidden: 7,
        embed_dim: 9,
        projector_hidden: 11,
        n_styles: 3,
        single_layer: false,
    };
    check(arch, LossConfig::default(), 11, 6);
}

#[test]
fn total_loss_gradient_single_layer_encoders() {
    let arch = ArchConfig {
        single_layer: true,
        ..small_arch(8, 3)
    };
    check(arch, LossConfig::default(), 5, 7);
}

#[test]
fn total_loss_gradient_ntxent_and_triplet() {
    for ablation in [Ablation::Ntxent, Ablation::Triplet] {
        let cfg = LossConfig {
            ablation,
            ..LossConfig::default()
        };
        check(small_arch(8, 3), cfg, 21, 8);
    }
}

#[test]
fn total_loss_gradient_weighted_terms() {
    let cfg = LossConfig {
        lambda_c: 0.3,
        lambda_s: 2.0,
        lambda_sc: 0.7,
        ..LossConfig::default()
    };
    check(small_arch(12, 4), cfg, 3, 8);
}

#[test]
fn zero_output_gradient_gives_zero_input_gradient() {
    let batch = toy_batch(9, 6, 8, 16, 3);
    let mut model = GoyaModel::<f64>::new(small_arch(8, 3), 4).unwrap();
    let outs = model.forward_train(&batch.images).unwrap();
    let zero = OutputGrads {
        proj_content: Matrix::zeros(outs.proj_content.rows(), outs.proj_content.cols()),
        proj_style: Matrix::zeros(outs.proj_style.rows(), outs.proj_style.cols()),
        logits: Matrix::zeros(outs.logits.rows(), outs.logits.cols()),
    };
    let dx = model.backward(&zero).unwrap();
    assert!(dx.data().iter().all(|&v| v == 0.0));
    assert!(model.named_layers().iter().all(|(_, l)| l.grad_weight.data().iter().all(|&g| g == 0.0)));
}

#[test]
fn gradient_is_zeroed_between_calls() {
    let batch = toy_batch(2, 6, 8, 16, 3);
    let mut model = GoyaModel::<f64>::new(small_arch(8, 3), 1).unwrap();
    let lb = LossBatch {
        images: &batch.images,
        text: Some(&batch.text),
        style_ids: &batch.styles,
    };
    let cfg = LossConfig::default();
    total_loss(&mut model, &lb, &cfg).unwrap();
    let first: Vec<f64> = model.named_layers()[0].1.grad_weight.data().to_vec();
    total_loss(&mut model, &lb, &cfg).unwrap();
    assert_eq!(model.named_layers()[0].1.grad_weight.data(), first.as_slice());
}
