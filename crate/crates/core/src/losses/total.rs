use super::ce::softmax_ce_sum_grad;
use super::config::{Ablation, LossConfig};
use super::contrastive::contrastive_loss_grad;
use super::ntxent::ntxent_loss_grad;
use super::pairs::{select_content_pairs, select_style_pairs, PairMask};
use super::triplet::triplet_loss_grad;
use super::LossGrad;
use crate::error::{Error, Result};
use crate::model::{GoyaModel, OutputGrads, TrainOutputs};
use crate::scalar::Scalar;
use crate::tensor::Matrix;
use serde::{Deserialize, Serialize};

/// One mini-batch as seen by the objectives.
#[derive(Clone, Copy, Debug)]
pub struct LossBatch<'a, T> {
    pub images: &'a Matrix<T>,
    /// Content-description embeddings; required whenever the content term is active.
    pub text: Option<&'a Matrix<T>>,
    pub style_ids: &'a [usize],
}

/// Unweighted component sums and the weighted total.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub total: f64,
    pub content: f64,
    pub style: f64,
    pub ce: f64,
}

fn pair_objective<T: Scalar>(
    proj: &Matrix<T>,
    mask: &PairMask,
    margin: f64,
    cfg: &LossConfig,
) -> Result<LossGrad<T>> {
    match cfg.ablation {
        Ablation::GoyaContrastive => contrastive_loss_grad(proj, mask, margin),
        Ablation::Triplet => triplet_loss_grad(proj, mask, cfg.triplet_margin),
        Ablation::Ntxent => ntxent_loss_grad(proj, mask, cfg.ntxent_temperature),
    }
}

fn components<T: Scalar>(
    out: &TrainOutputs<T>,
    batch: &LossBatch<'_, T>,
    cfg: &LossConfig,
) -> Result<(LossBreakdown, OutputGrads<T>)> {
    cfg.validate()?;
    let n = batch.images.rows();
    if batch.style_ids.len() != n {
        return Err(Error::shape("total_loss", format!("{n} style ids"), batch.style_ids.len()));
    }
    let mut grads = OutputGrads {
        proj_content: Matrix::zeros(n, out.proj_content.cols()),
        proj_style: Matrix::zeros(n, out.proj_style.cols()),
        logits: Matrix::zeros(n, out.logits.cols()),
    };
    let mut br = LossBreakdown::default();
    let mut total = T::zero();

    if cfg.lambda_c > 0.0 {
        let text = batch.text.ok_or_else(|| {
            Error::Config("the content loss requires text embeddings for every record".into())
        })?;
        if text.rows() != n {
            return Err(Error::shape("total_loss", format!("{n} text rows"), text.rows()));
        }
        let mask = select_content_pairs(text, cfg.eps_t)?;
        let LossGrad { value, mut grad } = pair_objective(&out.proj_content, &mask, cfg.eps_c, cfg)?;
        let w = T::lit(cfg.lambda_c);
        grad.scale(w);
        grads.proj_content = grad;
        total += w * value;
        br.content = value.to_f64().unwrap_or(f64::NAN);
    }
    if cfg.lambda_s > 0.0 {
        let mask = select_style_pairs(batch.style_ids);
        let LossGrad { value, mut grad } = pair_objective(&out.proj_style, &mask, cfg.eps_s, cfg)?;
        let w = T::lit(cfg.lambda_s);
        grad.scale(w);
        grads.proj_style = grad;
        total += w * value;
        br.style = value.to_f64().unwrap_or(f64::NAN);
    }
    let lambda_sc = cfg.classifier_weight();
    if lambda_sc > 0.0 {
        let LossGrad { value, mut grad } = softmax_ce_sum_grad(&out.logits, batch.style_ids)?;
        let w = T::lit(lambda_sc);
        grad.scale(w);
        grads.logits = grad;
        total += w * value;
        br.ce = value.to_f64().unwrap_or(f64::NAN);
    }
    br.total = total.to_f64().unwrap_or(f64::NAN);
    Ok((br, grads))
}

/// Weighted objective with a full backward pass. Parameter gradients are
/// zeroed first, so after the call they hold exactly this loss's gradient.
pub fn total_loss<T: Scalar>(
    model: &mut GoyaModel<T>,
    batch: &LossBatch<'_, T>,
    cfg: &LossConfig,
) -> Result<LossBreakdown> {
    model.zero_grad();
    let out = model.forward_train(batch.images)?;
    match components(&out, batch, cfg) {
        Ok((br, grads)) => {
            model.backward(&grads)?;
            Ok(br)
        }
        Err(e) => {
            model.clear_caches();
            Err(e)
        }
    }
}

/// Objective value only; parameters and gradients are left untouched.
pub fn evaluate_loss<T: Scalar>(
    model: &GoyaModel<T>,
    batch: &LossBatch<'_, T>,
    cfg: &LossConfig,
) -> Result<LossBreakdown> {
    let content = model.content_forward(batch.images)?;
    let style = model.style_forward(batch.images)?;
    let out = TrainOutputs {
        proj_content: model.project(crate::model::Branch::Content, &content)?,
        proj_style: model.project(crate::model::Branch::Style, &style)?,
        logits: model.classify_style(&style)?,
        content,
        style,
    };
    Ok(components(&out, batch, cfg)?.0)
}
