//! Mini-batch training of the disentanglement model.

use crate::data::{Dataset, LabelKind};
use crate::error::{Error, Result};
use crate::losses::{evaluate_loss, total_loss, LossBatch, LossBreakdown, LossConfig};
use crate::metrics::ProbeConfig;
use crate::model::{ArchConfig, GoyaModel};
use crate::scalar::Scalar;
use crate::tensor::{decayed_lr, Matrix, OptimizerState};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Offset separating the shuffle stream from the initialisation stream.
const SHUFFLE_STREAM: u64 = 0x5348_5546_4c45;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimConfig {
    pub lr: f64,
    /// Multiplicative learning-rate decay applied once per epoch.
    pub lr_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub epochs: usize,
    pub batch_size: usize,
}

impl Default for OptimConfig {
    fn default() -> Self {
        Self {
            lr: 0.0005,
            lr_decay: 0.9,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            epochs: 30,
            batch_size: 512,
        }
    }
}

impl OptimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("lr must be positive, got {}", self.lr)));
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return Err(Error::Config(format!("lr_decay must lie in (0, 1], got {}", self.lr_decay)));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::Config("Adam betas must lie in [0, 1)".into()));
        }
        if !(self.eps > 0.0) {
            return Err(Error::Config("Adam eps must be positive".into()));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.batch_size < 2 {
            return Err(Error::Config("batch_size must be at least 2".into()));
        }
        Ok(())
    }
}

/// Output locations used by the command-line driver.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    pub out_dir: Option<String>,
}

/// Everything that determines a run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub arch: ArchConfig,
    pub loss: LossConfig,
    pub optimizer: OptimConfig,
    pub probe: ProbeConfig,
    pub rng_seed: u64,
    pub paths: PathsConfig,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.arch.validate()?;
        self.loss.validate()?;
        self.optimizer.validate()?;
        self.probe.validate()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Dense matrices for a split, ready for batching.
#[derive(Clone, Debug)]
pub struct TrainData<T> {
    pub images: Matrix<T>,
    pub text: Option<Matrix<T>>,
    pub style_ids: Vec<usize>,
}

impl<T: Scalar> TrainData<T> {
    pub fn from_dataset(ds: &Dataset) -> Result<Self> {
        Ok(Self {
            images: ds.image_matrix(),
            text: ds.text_matrix(),
            style_ids: ds.labels(LabelKind::Style)?,
        })
    }

    pub fn len(&self) -> usize {
        self.images.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn batch_loss(&self, idx: &[usize], model: &GoyaModel<T>, cfg: &LossConfig) -> Result<LossBreakdown> {
        let (images, text, ids) = self.gather(idx);
        evaluate_loss(
            model,
            &LossBatch {
                images: &images,
                text: text.as_ref(),
                style_ids: &ids,
            },
            cfg,
        )
    }

    fn gather(&self, idx: &[usize]) -> (Matrix<T>, Option<Matrix<T>>, Vec<usize>) {
        (
            self.images.select_rows(idx),
            self.text.as_ref().map(|t| t.select_rows(idx)),
            idx.iter().map(|&i| self.style_ids[i]).collect(),
        )
    }
}

/// Splits `order` into batches of `batch_size`, keeping the last partial
/// batch. A trailing singleton joins the batch before it.
pub fn make_batches(order: &[usize], batch_size: usize) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = order.chunks(batch_size.max(1)).map(<[usize]>::to_vec).collect();
    if out.len() > 1 && out.last().is_some_and(|b| b.len() == 1) {
        let last = out.pop().expect("non-empty");
        out.last_mut().expect("non-empty").extend(last);
    }
    out
}

/// One line of the training log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub lr: f64,
    /// Mean over batches of the per-batch objective.
    pub train: LossBreakdown,
    pub val: Option<LossBreakdown>,
}

/// Per-epoch hook: the log line, the current model and whether it is the
/// best so far.
pub trait EpochSink<T> {
    fn epoch_end(&mut self, log: &EpochLog, model: &GoyaModel<T>, is_best: bool) -> Result<()>;
}

impl<T, F> EpochSink<T> for F
where
    F: FnMut(&EpochLog, &GoyaModel<T>, bool) -> Result<()>,
{
    fn epoch_end(&mut self, log: &EpochLog, model: &GoyaModel<T>, is_best: bool) -> Result<()> {
        self(log, model, is_best)
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome<T> {
    pub model: GoyaModel<T>,
    pub history: Vec<EpochLog>,
    /// Epoch with the lowest validation total, or training total without validation data.
    pub best_epoch: usize,
}

fn mean(acc: &[LossBreakdown]) -> LossBreakdown {
    let n = acc.len().max(1) as f64;
    let mut m = LossBreakdown::default();
    for b in acc {
        m.total += b.total / n;
        m.content += b.content / n;
        m.style += b.style / n;
        m.ce += b.ce / n;
    }
    m
}

/// Loss averaged over sequential batches, without touching the model.
pub fn evaluate_dataset<T: Scalar>(
    model: &GoyaModel<T>,
    data: &TrainData<T>,
    cfg: &LossConfig,
    batch_size: usize,
) -> Result<LossBreakdown> {
    let order: Vec<usize> = (0..data.len()).collect();
    let parts = make_batches(&order, batch_size)
        .iter()
        .filter(|b| b.len() >= 2)
        .map(|b| data.batch_loss(b, model, cfg))
        .collect::<Result<Vec<_>>>()?;
    Ok(mean(&parts))
}

fn check_data<T: Scalar>(arch: &ArchConfig, data: &TrainData<T>, what: &str) -> Result<()> {
    if data.images.cols() != arch.input_dim {
        return Err(Error::shape(
            "train",
            format!("{}-d {what} embeddings", arch.input_dim),
            data.images.cols(),
        ));
    }
    if let Some(&bad) = data.style_ids.iter().find(|&&s| s >= arch.n_styles) {
        return Err(Error::InvalidArgument(format!(
            "{what} style id {bad} outside the {} classifier outputs",
            arch.n_styles
        )));
    }
    Ok(())
}

/// Trains from a fresh He initialisation seeded by `cfg.rng_seed`.
pub fn train_model<T: Scalar>(
    cfg: &RunConfig,
    train: &TrainData<T>,
    val: Option<&TrainData<T>>,
    sink: &mut dyn EpochSink<T>,
) -> Result<TrainOutcome<T>> {
    cfg.validate()?;
    check_data(&cfg.arch, train, "training")?;
    if let Some(v) = val {
        check_data(&cfg.arch, v, "validation")?;
    }
    if train.len() < 2 {
        return Err(Error::DegenerateInput("training needs at least two records".into()));
    }
    let val = val.filter(|v| v.len() >= 2);
    let oc = &cfg.optimizer;
    let mut model = GoyaModel::<T>::new(cfg.arch.clone(), cfg.rng_seed)?;
    let mut opt = OptimizerState::<T>::adam(oc.lr, oc.beta1, oc.beta2, oc.eps)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed.wrapping_add(SHUFFLE_STREAM));
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut history = Vec::with_capacity(oc.epochs);
    let mut best: Option<(f64, usize)> = None;

    for epoch in 0..oc.epochs {
        let lr = decayed_lr(oc.lr, oc.lr_decay, epoch);
        opt.set_lr(lr)?;
        order.shuffle(&mut rng);
        let mut parts = Vec::new();
        for (b, idx) in make_batches(&order, oc.batch_size).iter().enumerate() {
            let (images, text, ids) = train.gather(idx);
            let batch = LossBatch {
                images: &images,
                text: text.as_ref(),
                style_ids: &ids,
            };
            let br = total_loss(&mut model, &batch, &cfg.loss)?;
            if !br.total.is_finite() {
                return Err(Error::Diverged { epoch, batch: b });
            }
            opt.step(&mut model.params_mut()).map_err(|e| match e {
                Error::NonFinite(_) => Error::Diverged { epoch, batch: b },
                other => other,
            })?;
            parts.push(br);
        }
        let train_mean = mean(&parts);
        let val_mean = val
            .map(|v| evaluate_dataset(&model, v, &cfg.loss, oc.batch_size))
            .transpose()?;
        if let Some(v) = &val_mean {
            if !v.total.is_finite() {
                return Err(Error::Diverged { epoch, batch: 0 });
            }
        }
        let score = val_mean.as_ref().map_or(train_mean.total, |v| v.total);
        let is_best = best.is_none_or(|(s, _)| score < s);
        if is_best {
            best = Some((score, epoch));
        }
        let log = EpochLog {
            epoch,
            lr,
            train: train_mean,
            val: val_mean,
        };
        log::info!(
            "epoch {epoch}: train {:.6} val {}",
            log.train.total,
            log.val.map_or("-".to_string(), |v| format!("{:.6}", v.total))
        );
        sink.epoch_end(&log, &model, is_best)?;
        history.push(log);
    }
    Ok(TrainOutcome {
        model,
        history,
        best_epoch: best.map_or(0, |(_, e)| e),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn batches_keep_partial_and_merge_singleton() {
        let order: Vec<usize> = (0..10).collect();
        let b = make_batches(&order, 4);
        assert_eq!(b.iter().map(Vec::len).collect::<Vec<_>>(), vec![4, 4, 2]);
        let b = make_batches(&order, 3);
        assert_eq!(b.iter().map(Vec::len).collect::<Vec<_>>(), vec![3, 3, 4]);
        assert_eq!(make_batches(&order, 512).len(), 1);
    }

    #[test]
    fn unknown_config_key_rejected() {
        assert!(RunConfig::from_json(r#"{"optimizer": {"lr": 0.001, "momentum": 0.9}}"#).is_err());
        let cfg = RunConfig::from_json(r#"{"optimizer": {"epochs": 3}}"#).unwrap();
        assert_eq!(cfg.optimizer.epochs, 3);
        assert_eq!(cfg.optimizer.batch_size, 512);
    }
}
