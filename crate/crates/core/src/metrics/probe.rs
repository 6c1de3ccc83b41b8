//! Linear probes on frozen embeddings.

use super::confusion::ConfusionMatrix;
use crate::error::{Error, Result};
use crate::losses::softmax_ce_sum_grad;
use crate::scalar::Scalar;
use crate::tensor::{cosine_lr, LinearLayer, Matrix, OptimizerState, ParamMut};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LrSchedule {
    Cosine,
    Constant,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeConfig {
    pub lr: f64,
    pub momentum: f64,
    pub schedule: LrSchedule,
    pub epochs: usize,
    /// Capped at the training-set size.
    pub batch_size: usize,
    /// Standardise each feature with training-set statistics before the linear layer.
    pub standardize: bool,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            lr: 0.02,
            momentum: 0.9,
            schedule: LrSchedule::Cosine,
            epochs: 90,
            batch_size: 4096,
            standardize: true,
        }
    }
}

impl ProbeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("probe lr must be positive, got {}", self.lr)));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("probe epochs and batch_size must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config(format!("probe momentum must lie in [0, 1), got {}", self.momentum)));
        }
        Ok(())
    }
}

/// A trained single linear layer plus the feature standardisation it expects.
#[derive(Clone, Debug)]
pub struct LinearProbe<T> {
    pub layer: LinearLayer<T>,
    pub mean: Vec<T>,
    pub scale: Vec<T>,
}

impl<T: Scalar> LinearProbe<T> {
    pub fn n_classes(&self) -> usize {
        self.layer.outputs()
    }

    fn standardize(&self, x: &Matrix<T>) -> Matrix<T> {
        let mut out = x.clone();
        for r in 0..out.rows() {
            for ((v, &m), &s) in out.row_mut(r).iter_mut().zip(&self.mean).zip(&self.scale) {
                *v = (*v - m) / s;
            }
        }
        out
    }

    pub fn logits(&self, x: &Matrix<T>) -> Result<Matrix<T>> {
        self.layer.forward(&self.standardize(x))
    }

    /// Arg-max class per row, lowest index on ties.
    pub fn predict(&self, x: &Matrix<T>) -> Result<Vec<usize>> {
        let z = self.logits(x)?;
        Ok(z.row_iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .fold((0, T::neg_infinity()), |best, (i, &v)| if v > best.1 { (i, v) } else { best })
                    .0
            })
            .collect())
    }
}

/// Trains a softmax linear classifier with momentum SGD. The embedding
/// matrix is only read.
pub fn train_probe<T: Scalar>(
    train: &Matrix<T>,
    labels: &[usize],
    n_classes: usize,
    cfg: &ProbeConfig,
    rng_seed: u64,
) -> Result<LinearProbe<T>> {
    cfg.validate()?;
    let (n, d) = train.shape();
    if labels.len() != n {
        return Err(Error::shape("train_probe", format!("{n} labels"), labels.len()));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y >= n_classes) {
        return Err(Error::InvalidArgument(format!(
            "label {bad} out of range for {n_classes} classes"
        )));
    }
    let first = labels.first().copied();
    if first.is_none() || labels.iter().all(|&y| Some(y) == first) {
        return Err(Error::InvalidArgument(
            "probe training needs at least two distinct classes".into(),
        ));
    }
    if !train.is_finite() {
        return Err(Error::NonFinite("probe training embeddings".into()));
    }

    let nf = T::from_usize_lossy(n);
    let (mean, scale) = if cfg.standardize {
        let mut mean = vec![T::zero(); d];
        for row in train.row_iter() {
            mean.iter_mut().zip(row).for_each(|(m, &v)| *m += v);
        }
        mean.iter_mut().for_each(|m| *m /= nf);
        let mut var = vec![T::zero(); d];
        for row in train.row_iter() {
            for ((s, &v), &m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let scale = var
            .into_iter()
            .map(|s| {
                let sd = (s / nf).sqrt();
                if sd > T::lit(1e-12) {
                    sd
                } else {
                    T::one()
                }
            })
            .collect();
        (mean, scale)
    } else {
        (vec![T::zero(); d], vec![T::one(); d])
    };
    let mut probe = LinearProbe {
        layer: LinearLayer::zeros(d, n_classes),
        mean,
        scale,
    };
    let x = probe.standardize(train);

    let batch = cfg.batch_size.min(n);
    let steps_per_epoch = n.div_ceil(batch);
    let total_steps = steps_per_epoch * cfg.epochs;
    let mut opt = OptimizerState::<T>::sgd_momentum(cfg.lr, cfg.momentum)?;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut step = 0;
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(batch) {
            let lr = match cfg.schedule {
                LrSchedule::Cosine => cosine_lr(cfg.lr, step, total_steps),
                LrSchedule::Constant => cfg.lr,
            };
            step += 1;
            // the final cosine step has lr 0; nothing to apply
            if lr <= 0.0 {
                continue;
            }
            opt.set_lr(lr)?;
            let xb = x.select_rows(chunk);
            let yb: Vec<usize> = chunk.iter().map(|&i| labels[i]).collect();
            let z = probe.layer.forward(&xb)?;
            let mut g = softmax_ce_sum_grad(&z, &yb)?.grad;
            g.scale(T::one() / T::from_usize_lossy(chunk.len()));
            probe.layer.zero_grad();
            probe.layer.backward(&xb, &g)?;
            let LinearLayer {
                weight,
                bias,
                grad_weight,
                grad_bias,
            } = &mut probe.layer;
            opt.step(&mut [
                ParamMut {
                    name: "probe.weight".into(),
                    value: weight.data_mut(),
                    grad: grad_weight.data(),
                },
                ParamMut {
                    name: "probe.bias".into(),
                    value: bias.as_mut_slice(),
                    grad: grad_bias.as_slice(),
                },
            ])?;
        }
    }
    Ok(probe)
}

#[derive(Clone, Debug)]
pub struct ProbeEvaluation {
    pub accuracy: f64,
    pub confusion: ConfusionMatrix,
}

impl ProbeEvaluation {
    pub fn per_class_accuracy(&self) -> Vec<Option<f64>> {
        self.confusion.per_class_accuracy()
    }
}

pub fn evaluate_probe<T: Scalar>(probe: &LinearProbe<T>, test: &Matrix<T>, labels: &[usize]) -> Result<ProbeEvaluation> {
    if labels.len() != test.rows() {
        return Err(Error::shape("evaluate_probe", format!("{} labels", test.rows()), labels.len()));
    }
    let predicted = probe.predict(test)?;
    let confusion = ConfusionMatrix::from_predictions(probe.n_classes(), labels, &predicted)?;
    Ok(ProbeEvaluation {
        accuracy: confusion.accuracy(),
        confusion,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn blobs(n: usize, seed: u64) -> (Matrix<f64>, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let labels: Vec<usize> = (0..n).map(|i| i % 2).collect();
        let x = Matrix::from_fn(n, 2, |i, j| {
            let centre = if labels[i] == 0 { -3.0 } else { 3.0 };
            let noise: f64 = StandardNormal.sample(&mut rng);
            if j == 0 {
                centre + 0.5 * noise
            } else {
                noise
            }
        });
        (x, labels)
    }

    #[test]
    fn separable_blobs_fit_perfectly() {
        let (x, y) = blobs(200, 1);
        let cfg = ProbeConfig {
            epochs: 50,
            batch_size: 32,
            ..ProbeConfig::default()
        };
        let before = x.clone();
        let probe = train_probe(&x, &y, 2, &cfg, 0).unwrap();
        assert_eq!(x, before, "embeddings must stay frozen");
        assert_eq!(evaluate_probe(&probe, &x, &y).unwrap().accuracy, 1.0);
    }

    #[test]
    fn shuffled_labels_stay_near_chance() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let k = 4;
        let x: Matrix<f64> = Matrix::from_fn(4000, 8, |_, _| StandardNormal.sample(&mut rng));
        let y: Vec<usize> = (0..4000).map(|_| rng.random_range(0..k)).collect();
        let cfg = ProbeConfig {
            epochs: 20,
            batch_size: 256,
            ..ProbeConfig::default()
        };
        let probe = train_probe(&x.select_rows(&(0..3000).collect::<Vec<_>>()), &y[..3000], k, &cfg, 1).unwrap();
        let test = x.select_rows(&(3000..4000).collect::<Vec<_>>());
        let acc = evaluate_probe(&probe, &test, &y[3000..]).unwrap().accuracy;
        assert!((acc - 0.25).abs() < 0.05, "{acc}");
    }

    #[test]
    fn single_class_rejected() {
        let x = Matrix::from_fn(5, 2, |i, j| (i + j) as f64);
        assert!(train_probe(&x, &[1; 5], 3, &ProbeConfig::default(), 0).is_err());
    }

    #[test]
    fn deterministic_given_seed() {
        let (x, y) = blobs(64, 4);
        let cfg = ProbeConfig {
            epochs: 3,
            batch_size: 16,
            ..ProbeConfig::default()
        };
        let a = train_probe(&x, &y, 2, &cfg, 5).unwrap();
        let b = train_probe(&x, &y, 2, &cfg, 5).unwrap();
        assert_eq!(a.layer, b.layer);
    }
}
