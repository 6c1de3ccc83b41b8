//! Pairwise contrastive objective over projected embeddings.
//!
//! For every unordered pair `i < j` with cosine similarity `s`:
//! positives contribute `1 - s`, negatives contribute `max(0, s - margin)`.

use super::pairs::{PairMask, UnitRows};
use super::LossGrad;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Matrix;

/// Single pair term and its derivative with respect to the similarity.
#[inline]
pub fn contrastive_term<T: Scalar>(similarity: T, positive: bool, margin: T) -> (T, T) {
    if positive {
        (T::one() - similarity, -T::one())
    } else if similarity > margin {
        (similarity - margin, T::one())
    } else {
        (T::zero(), T::zero())
    }
}

pub fn contrastive_loss_grad<T: Scalar>(proj: &Matrix<T>, positive: &PairMask, margin: f64) -> Result<LossGrad<T>> {
    let n = proj.rows();
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "contrastive loss needs at least 2 samples, got {n}"
        )));
    }
    if positive.len() != n {
        return Err(Error::shape("contrastive_loss", format!("{n}x{n} mask"), positive.len()));
    }
    let unit = UnitRows::new(proj)?;
    let sims = unit.similarities();
    let margin = T::lit(margin);
    let mut value = T::zero();
    let mut w = Matrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let (v, d) = contrastive_term(sims.get(i, j), positive.get(i, j), margin);
            value += v;
            w.set(i, j, d);
        }
    }
    Ok(LossGrad {
        value,
        grad: unit.backprop(&w),
    })
}

/// Content contrastive loss with text-derived positives and margin `eps_c`.
pub fn content_loss<T: Scalar>(proj_c: &Matrix<T>, content_positive: &PairMask, eps_c: f64) -> Result<T> {
    Ok(contrastive_loss_grad(proj_c, content_positive, eps_c)?.value)
}

/// Style contrastive loss with tag-derived positives and margin `eps_s`.
pub fn style_loss<T: Scalar>(proj_s: &Matrix<T>, style_positive: &PairMask, eps_s: f64) -> Result<T> {
    Ok(contrastive_loss_grad(proj_s, style_positive, eps_s)?.value)
}
