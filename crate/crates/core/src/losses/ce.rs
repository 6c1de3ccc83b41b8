use super::LossGrad;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Matrix;

/// Summed softmax cross-entropy and its gradient with respect to the logits.
pub fn softmax_ce_sum_grad<T: Scalar>(logits: &Matrix<T>, labels: &[usize]) -> Result<LossGrad<T>> {
    let (n, k) = logits.shape();
    if labels.len() != n {
        return Err(Error::shape("style_ce_loss", format!("{n} labels"), labels.len()));
    }
    let mut grad = Matrix::zeros(n, k);
    let mut value = T::zero();
    for (i, &y) in labels.iter().enumerate() {
        if y >= k {
            return Err(Error::InvalidArgument(format!(
                "label {y} out of range for {k} classes"
            )));
        }
        let row = logits.row(i);
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let sum: T = row.iter().map(|&z| (z - max).exp()).sum();
        let lse = max + sum.ln();
        value += lse - row[y];
        for (g, &z) in grad.row_mut(i).iter_mut().zip(row) {
            *g = (z - lse).exp();
        }
        grad.row_mut(i)[y] -= T::one();
    }
    Ok(LossGrad { value, grad })
}

/// Mean softmax cross-entropy over the batch.
pub fn style_ce_loss<T: Scalar>(logits: &Matrix<T>, labels: &[usize]) -> Result<T> {
    let n = logits.rows();
    if n == 0 {
        return Ok(T::zero());
    }
    Ok(softmax_ce_sum_grad(logits, labels)?.value / T::from_usize_lossy(n))
}
