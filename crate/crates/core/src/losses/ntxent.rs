//! NT-Xent with multiple in-batch positives.
//!
//! Each ordered positive pair `(i, j)` contributes
//! `-log(exp(s_ij / t) / sum_{k != i} exp(s_ik / t))`; the loss is the mean
//! over all ordered positive pairs. Anchors without positives are skipped.

use super::pairs::{PairMask, UnitRows};
use super::LossGrad;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Matrix;

pub fn ntxent_loss_grad<T: Scalar>(proj: &Matrix<T>, positive: &PairMask, temperature: f64) -> Result<LossGrad<T>> {
    let n = proj.rows();
    if positive.len() != n {
        return Err(Error::shape("ntxent_loss", format!("{n}x{n} mask"), positive.len()));
    }
    let unit = UnitRows::new(proj)?;
    let sims = unit.similarities();
    let inv_t = T::lit(1.0 / temperature);

    let positives: Vec<Vec<usize>> = (0..n)
        .map(|i| (0..n).filter(|&j| j != i && positive.get(i, j)).collect())
        .collect();
    let total: usize = positives.iter().map(Vec::len).sum();
    let mut w = Matrix::zeros(n, n);
    if total == 0 {
        return Ok(LossGrad {
            value: T::zero(),
            grad: Matrix::zeros(n, proj.cols()),
        });
    }
    let scale = T::one() / T::from_usize_lossy(total);
    let mut value = T::zero();
    for i in 0..n {
        if positives[i].is_empty() {
            continue;
        }
        let logits: Vec<(usize, T)> = (0..n)
            .filter(|&k| k != i)
            .map(|k| (k, sims.get(i, k) * inv_t))
            .collect();
        let max = logits.iter().map(|&(_, z)| z).fold(T::neg_infinity(), T::max);
        let lse = max + logits.iter().map(|&(_, z)| (z - max).exp()).sum::<T>().ln();
        let count = T::from_usize_lossy(positives[i].len());
        for &j in &positives[i] {
            value += lse - sims.get(i, j) * inv_t;
        }
        for &(k, z) in &logits {
            let softmax = (z - lse).exp();
            let hit = if positive.get(i, k) { T::one() } else { T::zero() };
            w.set(i, k, inv_t * scale * (count * softmax - hit));
        }
    }
    Ok(LossGrad {
        value: value * scale,
        grad: unit.backprop(&w),
    })
}

pub fn ntxent_loss<T: Scalar>(proj: &Matrix<T>, positive: &PairMask, temperature: f64) -> Result<T> {
    Ok(ntxent_loss_grad(proj, positive, temperature)?.value)
}
