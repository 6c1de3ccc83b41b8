//! Pair selection and training objectives.

pub mod ce;
pub mod config;
pub mod contrastive;
pub mod ntxent;
pub mod pairs;
pub mod total;
pub mod triplet;

use crate::tensor::Matrix;

/// A scalar loss together with its gradient with respect to the loss input.
#[derive(Clone, Debug)]
pub struct LossGrad<T> {
    pub value: T,
    pub grad: Matrix<T>,
}

pub use ce::{softmax_ce_sum_grad, style_ce_loss};
pub use config::{Ablation, LossConfig};
pub use contrastive::{content_loss, contrastive_loss_grad, style_loss};
pub use ntxent::{ntxent_loss, ntxent_loss_grad};
pub use pairs::{cosine_similarity, select_content_pairs, select_style_pairs, PairLabels, PairMask, UnitRows};
pub use total::{evaluate_loss, total_loss, LossBatch, LossBreakdown};
pub use triplet::{triplet_loss, triplet_loss_grad};
