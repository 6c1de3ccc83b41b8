//! Linear factor-model generator for embeddings with known content and
//! style factors.

use super::record::{Dataset, EmbeddingRecord};
use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    pub n: usize,
    pub content_clusters: usize,
    pub styles: usize,
    pub d_img: usize,
    /// 0 omits text embeddings.
    pub d_txt: usize,
    pub latent_dim: usize,
    /// Per-coordinate standard deviation of the image noise.
    pub noise: f64,
    /// Per-coordinate standard deviation of the text noise.
    pub text_noise: f64,
    pub rng_seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            n: 10_000,
            content_clusters: 8,
            styles: 4,
            d_img: 512,
            d_txt: 64,
            latent_dim: 16,
            noise: 0.3,
            text_noise: 0.03,
            rng_seed: 7,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        if self.content_clusters == 0 || self.styles == 0 || self.d_img == 0 || self.latent_dim == 0 {
            return Err(Error::InvalidArgument(
                "clusters, styles, d_img and latent_dim must be positive".into(),
            ));
        }
        if self.styles > i32::MAX as usize || self.content_clusters > i32::MAX as usize {
            return Err(Error::InvalidArgument("too many classes".into()));
        }
        for (name, v) in [("noise", self.noise), ("text_noise", self.text_noise)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidArgument(format!("{name} must be >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

fn normalize(v: &mut [f64]) {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}

fn gaussian_vec(rng: &mut ChaCha8Rng, len: usize, std: f64) -> Vec<f64> {
    (0..len)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            std * z
        })
        .collect()
}

/// Unit vectors; mutually orthogonal while `count <= dim`.
fn factor_means(rng: &mut ChaCha8Rng, count: usize, dim: usize) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(count);
    while out.len() < count {
        let mut v = gaussian_vec(rng, dim, 1.0);
        if out.len() < dim {
            for u in &out {
                let d: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(u).for_each(|(a, b)| *a -= d * b);
            }
        }
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-8 {
            normalize(&mut v);
            out.push(v);
        }
    }
    out
}

/// Row-major `rows x cols` with N(0, 1/rows) entries.
fn loading(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Vec<f64> {
    gaussian_vec(rng, rows * cols, (1.0 / rows as f64).sqrt())
}

fn apply(m: &[f64], rows: usize, x: &[f64]) -> Vec<f64> {
    let cols = x.len();
    (0..rows)
        .map(|r| m[r * cols..(r + 1) * cols].iter().zip(x).map(|(a, b)| a * b).sum())
        .collect()
}

/// `image = normalize(A mu_c + B nu_s + noise * eta)` and
/// `text = normalize(C mu_c + text_noise * eta_t)` with standard normal `eta`.
pub fn gen_synthetic_dataset(cfg: &SyntheticConfig) -> Result<Dataset> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let k = cfg.latent_dim;
    let mu = factor_means(&mut rng, cfg.content_clusters, k);
    let nu = factor_means(&mut rng, cfg.styles, k);
    let a = loading(&mut rng, cfg.d_img, k);
    let b = loading(&mut rng, cfg.d_img, k);
    let c = loading(&mut rng, cfg.d_txt, k);
    let content_img: Vec<Vec<f64>> = mu.iter().map(|m| apply(&a, cfg.d_img, m)).collect();
    let style_img: Vec<Vec<f64>> = nu.iter().map(|v| apply(&b, cfg.d_img, v)).collect();
    let content_txt: Vec<Vec<f64>> = mu.iter().map(|m| apply(&c, cfg.d_txt, m)).collect();
    let img_noise = Normal::new(0.0, cfg.noise).expect("finite std");
    let txt_noise = Normal::new(0.0, cfg.text_noise).expect("finite std");

    let mut records = Vec::with_capacity(cfg.n);
    for i in 0..cfg.n {
        let cl = rng.random_range(0..cfg.content_clusters);
        let st = rng.random_range(0..cfg.styles);
        let mut img: Vec<f64> = content_img[cl]
            .iter()
            .zip(&style_img[st])
            .map(|(x, y)| x + y + img_noise.sample(&mut rng))
            .collect();
        normalize(&mut img);
        let text = (cfg.d_txt > 0).then(|| {
            let mut t: Vec<f64> = content_txt[cl]
                .iter()
                .map(|x| x + txt_noise.sample(&mut rng))
                .collect();
            normalize(&mut t);
            t.into_iter().map(|x| x as f32).collect()
        });
        records.push(EmbeddingRecord {
            record_id: i as u64,
            image_embedding: img.into_iter().map(|x| x as f32).collect(),
            text_embedding: text,
            style_id: st as i32,
            content_id: i as u64,
            genre_id: -1,
            content_cluster: cl as i32,
        });
    }
    Dataset::new(cfg.styles as u32, cfg.d_img, cfg.d_txt, records)
}
