#![allow(dead_code)]

use disentangle::losses::{evaluate_loss, total_loss, LossBatch, LossConfig};
use disentangle::model::{ArchConfig, GoyaModel};
use disentangle::tensor::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

pub fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix<f64> {
    Matrix::from_fn(rows, cols, |_, _| gaussian(rng))
}

/// Distance correlation straight from the definition, with explicit loops.
pub fn brute_force_dc(a: &Matrix<f64>, b: &Matrix<f64>) -> f64 {
    let n = a.rows();
    let dist = |m: &Matrix<f64>| -> Vec<Vec<f64>> {
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        (0..m.cols())
                            .map(|k| (m.get(i, k) - m.get(j, k)).powi(2))
                            .sum::<f64>()
                            .sqrt()
                    })
                    .collect()
            })
            .collect()
    };
    let center = |d: Vec<Vec<f64>>| -> Vec<Vec<f64>> {
        let row: Vec<f64> = d.iter().map(|r| r.iter().sum::<f64>() / n as f64).collect();
        let col: Vec<f64> = (0..n).map(|j| d.iter().map(|r| r[j]).sum::<f64>() / n as f64).collect();
        let all: f64 = row.iter().sum::<f64>() / n as f64;
        (0..n)
            .map(|i| (0..n).map(|j| d[i][j] - row[i] - col[j] + all).collect())
            .collect()
    };
    let qa = center(dist(a));
    let qb = center(dist(b));
    let dcov = |x: &Vec<Vec<f64>>, y: &Vec<Vec<f64>>| -> f64 {
        let s: f64 = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| x[i][j] * y[i][j]).sum();
        s.max(0.0).sqrt() / n as f64
    };
    dcov(&qa, &qb) / (dcov(&qa, &qa) * dcov(&qb, &qb)).sqrt()
}

/// A batch with clustered text embeddings so that both positive and
/// negative content pairs occur.
pub struct ToyBatch {
    pub images: Matrix<f64>,
    pub text: Matrix<f64>,
    pub styles: Vec<usize>,
}

pub fn toy_batch(seed: u64, n: usize, d_img: usize, d_txt: usize, n_styles: usize) -> ToyBatch {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let protos = random_matrix(3, d_txt, &mut rng);
    let images = random_matrix(n, d_img, &mut rng);
    let text = Matrix::from_fn(n, d_txt, |i, j| protos.get(i % 3, j) + 0.05 * gaussian(&mut rng));
    let styles = (0..n).map(|i| if i < 2 { 0 } else { rng.random_range(0..n_styles) }).collect();
    ToyBatch { images, text, styles }
}

pub fn small_arch(width: usize, n_styles: usize) -> ArchConfig {
    ArchConfig {
        input_dim: width,
        content_hidden: width,
        embed_dim: width,
        projector_hidden: width,
        n_styles,
        single_layer: false,
    }
}

pub struct GradCheck {
    pub max_rel_error: f64,
    pub worst: String,
    pub checked: usize,
}

/// Compares analytic parameter gradients of the total loss with central
/// differences. Relative error is `|a - n| / max(|a|, |n|, floor)`.
pub fn grad_check(model: &mut GoyaModel<f64>, batch: &ToyBatch, cfg: &LossConfig, step: f64, floor: f64) -> GradCheck {
    let lb = LossBatch {
        images: &batch.images,
        text: Some(&batch.text),
        style_ids: &batch.styles,
    };
    total_loss(model, &lb, cfg).unwrap_or_else(|e| panic!("{e}"));
    let analytic: Vec<(String, Vec<f64>, Vec<f64>)> = model
        .named_layers()
        .into_iter()
        .map(|(n, l)| (n, l.grad_weight.data().to_vec(), l.grad_bias.clone()))
        .collect();
    let mut out = GradCheck {
        max_rel_error: 0.0,
        worst: String::new(),
        checked: 0,
    };
    let eval = |m: &GoyaModel<f64>| evaluate_loss(m, &lb, cfg).expect("loss").total;
    for (li, (name, gw, gb)) in analytic.iter().enumerate() {
        for (is_bias, grads) in [(false, gw), (true, gb)] {
            for (k, &a) in grads.iter().enumerate() {
                let read = |m: &mut GoyaModel<f64>| -> f64 {
                    let mut layers = m.named_layers_mut();
                    let l = &mut layers[li].1;
                    if is_bias { l.bias[k] } else { l.weight.data()[k] }
                };
                let write = |m: &mut GoyaModel<f64>, v: f64| {
                    let mut layers = m.named_layers_mut();
                    let l = &mut layers[li].1;
                    if is_bias {
                        l.bias[k] = v;
                    } else {
                        l.weight.data_mut()[k] = v;
                    }
                };
                let orig = read(model);
                write(model, orig + step);
                let up = eval(model);
                write(model, orig - step);
                let down = eval(model);
                write(model, orig);
                let num = (up - down) / (2.0 * step);
                let rel = (a - num).abs() / a.abs().max(num.abs()).max(floor);
                out.checked += 1;
                if rel > out.max_rel_error {
                    out.max_rel_error = rel;
                    out.worst = format!("{name}.{}[{k}] analytic {a:e} numeric {num:e}", if is_bias { "bias" } else { "weight" });
                }
            }
        }
    }
    out
}
