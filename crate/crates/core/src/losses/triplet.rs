//! Batch-hard triplet loss with cosine distance `d = 1 - s`.

use super::pairs::{PairMask, UnitRows};
use super::LossGrad;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Matrix;

/// `max(0, d_ap - d_an + margin)`
#[inline]
pub fn triplet_term<T: Scalar>(d_ap: T, d_an: T, margin: T) -> T {
    (d_ap - d_an + margin).max(T::zero())
}

/// For each anchor, the farthest positive and the closest negative in the
/// batch (lowest index on ties). Anchors lacking either are skipped.
pub fn triplet_loss_grad<T: Scalar>(proj: &Matrix<T>, positive: &PairMask, margin: f64) -> Result<LossGrad<T>> {
    let n = proj.rows();
    if positive.len() != n {
        return Err(Error::shape("triplet_loss", format!("{n}x{n} mask"), positive.len()));
    }
    let unit = UnitRows::new(proj)?;
    let sims = unit.similarities();
    let margin = T::lit(margin);
    let mut value = T::zero();
    let mut w = Matrix::zeros(n, n);
    for a in 0..n {
        let mut hardest_pos: Option<usize> = None;
        let mut hardest_neg: Option<usize> = None;
        for j in (0..n).filter(|&j| j != a) {
            let s = sims.get(a, j);
            if positive.get(a, j) {
                if hardest_pos.is_none_or(|p| s < sims.get(a, p)) {
                    hardest_pos = Some(j);
                }
            } else if hardest_neg.is_none_or(|q| s > sims.get(a, q)) {
                hardest_neg = Some(j);
            }
        }
        let (Some(p), Some(q)) = (hardest_pos, hardest_neg) else {
            continue;
        };
        let d_ap = T::one() - sims.get(a, p);
        let d_an = T::one() - sims.get(a, q);
        let term = triplet_term(d_ap, d_an, margin);
        if term > T::zero() {
            value += term;
            // d(term)/ds_ap = -1, d(term)/ds_an = +1
            w.set(a, p, w.get(a, p) - T::one());
            w.set(a, q, w.get(a, q) + T::one());
        }
    }
    Ok(LossGrad {
        value,
        grad: unit.backprop(&w),
    })
}

pub fn triplet_loss<T: Scalar>(proj: &Matrix<T>, positive: &PairMask, margin: f64) -> Result<T> {
    Ok(triplet_loss_grad(proj, positive, margin)?.value)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit2(s: f64) -> Vec<f64> {
        vec![s, (1.0 - s * s).sqrt()]
    }

    /// anchor, positive at similarity `sp`, negative at similarity `sn`;
    /// the positive/negative sit on opposite sides of the anchor.
    fn batch(sp: f64, sn: f64) -> (Matrix<f64>, PairMask) {
        let n = unit2(sn);
        let p = Matrix::from_rows(&[vec![1.0, 0.0], unit2(sp), vec![n[0], -n[1]]]).unwrap();
        let mask = PairMask::from_fn(3, |i, j| i == j || (i.min(j) == 0 && i.max(j) == 1));
        (p, mask)
    }

    #[test]
    fn terms() {
        assert_eq!(triplet_term(0.0, 1.0, 0.5), 0.0);
        assert_eq!(triplet_term(0.4, 0.4, 0.5), 0.5);
        assert!((triplet_term(0.9, 0.2, 0.5) - 1.2f64).abs() < 1e-12);
    }

    #[test]
    fn anchor_hand_value() {
        // anchor 0: d_ap = 0.9, d_an = 0.2 -> 1.2
        let (p, mask) = batch(0.1, 0.8);
        let sims = UnitRows::new(&p).unwrap().similarities();
        let l = triplet_loss(&p, &mask, 0.5).unwrap();
        // anchor 1: only positive 0, negative 2
        let a1 = triplet_term(1.0 - sims.get(1, 0), 1.0 - sims.get(1, 2), 0.5);
        // anchor 2 has no positive and is skipped
        assert!((l - (1.2 + a1)).abs() < 1e-9);
    }

    #[test]
    fn satisfied_triplet_is_free() {
        let p: Matrix<f64> = Matrix::from_rows(&[vec![1.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let mask = PairMask::from_fn(3, |i, j| (i < 2) == (j < 2));
        assert!(triplet_loss(&p, &mask, 0.5).unwrap().abs() < 1e-12);
    }
}
