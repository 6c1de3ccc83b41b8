//! Distance correlation between two paired samples.
//!
//! `dCov(A, B) = (1/N) * sqrt(sum_ij qa_ij * qb_ij)` over doubly centred
//! Euclidean distance matrices, and
//! `DC(A, B) = dCov(A, B) / sqrt(dCov(A, A) * dCov(B, B))`.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Matrix;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Above this many rows the distance matrices are never materialised.
pub const DENSE_LIMIT: usize = 4096;

/// Default cap on the number of rows used by [`distance_correlation_report`].
pub const DEFAULT_MAX_ROWS: usize = 20_000;

#[inline]
fn euclid<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (x - y) * (x - y))
        .sum::<T>()
        .sqrt()
}

/// `p_ij = ||g_i - g_j||`
pub fn pairwise_euclidean<T: Scalar>(g: &Matrix<T>) -> Matrix<T> {
    let n = g.rows();
    let mut p = Matrix::zeros(n, n);
    p.data_mut()
        .par_chunks_mut(n.max(1))
        .enumerate()
        .for_each(|(i, row)| {
            for (j, v) in row.iter_mut().enumerate() {
                if i != j {
                    *v = euclid(g.row(i), g.row(j));
                }
            }
        });
    p
}

/// `q_ij = p_ij - mean_i. - mean_.j + mean_..`
pub fn double_center<T: Scalar>(p: &Matrix<T>) -> Matrix<T> {
    let (n, m) = p.shape();
    if n == 0 || m == 0 {
        return p.clone();
    }
    let row_means: Vec<T> = (0..n)
        .map(|i| p.row(i).iter().copied().sum::<T>() / T::from_usize_lossy(m))
        .collect();
    let col_means: Vec<T> = (0..m)
        .map(|j| (0..n).map(|i| p.get(i, j)).sum::<T>() / T::from_usize_lossy(n))
        .collect();
    let grand = row_means.iter().copied().sum::<T>() / T::from_usize_lossy(n);
    Matrix::from_fn(n, m, |i, j| p.get(i, j) - row_means[i] - col_means[j] + grand)
}

/// Sums `sum q_a q_b`, `sum q_a q_a`, `sum q_b q_b`.
#[derive(Clone, Copy, Debug)]
struct CrossSums<T> {
    ab: T,
    aa: T,
    bb: T,
}

fn check_pair<T: Scalar>(a: &Matrix<T>, b: &Matrix<T>) -> Result<()> {
    if a.rows() != b.rows() {
        return Err(Error::shape("distance_correlation", format!("{} rows", a.rows()), b.rows()));
    }
    if a.rows() < 2 {
        return Err(Error::UndefinedDc(format!("need at least 2 samples, got {}", a.rows())));
    }
    if !a.is_finite() || !b.is_finite() {
        return Err(Error::NonFinite("distance correlation input".into()));
    }
    Ok(())
}

fn dense_sums<T: Scalar>(a: &Matrix<T>, b: &Matrix<T>) -> CrossSums<T> {
    let qa = double_center(&pairwise_euclidean(a));
    let qb = double_center(&pairwise_euclidean(b));
    let mut s = CrossSums {
        ab: T::zero(),
        aa: T::zero(),
        bb: T::zero(),
    };
    for (&x, &y) in qa.data().iter().zip(qb.data()) {
        s.ab += x * y;
        s.aa += x * x;
        s.bb += y * y;
    }
    s
}

fn row_means<T: Scalar>(g: &Matrix<T>) -> Vec<T> {
    let n = g.rows();
    (0..n)
        .into_par_iter()
        .map(|i| (0..n).map(|j| euclid(g.row(i), g.row(j))).sum::<T>() / T::from_usize_lossy(n))
        .collect()
}

/// Same sums as the dense route with O(N) memory: distances are recomputed
/// in a second pass instead of being stored.
fn streamed_sums<T: Scalar>(a: &Matrix<T>, b: &Matrix<T>) -> CrossSums<T> {
    let n = a.rows();
    let ra = row_means(a);
    let rb = row_means(b);
    let ga = ra.iter().copied().sum::<T>() / T::from_usize_lossy(n);
    let gb = rb.iter().copied().sum::<T>() / T::from_usize_lossy(n);
    let partial: Vec<CrossSums<T>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut s = CrossSums {
                ab: T::zero(),
                aa: T::zero(),
                bb: T::zero(),
            };
            for j in 0..n {
                let qa = euclid(a.row(i), a.row(j)) - ra[i] - ra[j] + ga;
                let qb = euclid(b.row(i), b.row(j)) - rb[i] - rb[j] + gb;
                s.ab += qa * qb;
                s.aa += qa * qa;
                s.bb += qb * qb;
            }
            s
        })
        .collect();
    partial.into_iter().fold(
        CrossSums {
            ab: T::zero(),
            aa: T::zero(),
            bb: T::zero(),
        },
        |acc, s| CrossSums {
            ab: acc.ab + s.ab,
            aa: acc.aa + s.aa,
            bb: acc.bb + s.bb,
        },
    )
}

fn finish<T: Scalar>(s: CrossSums<T>, n: usize) -> Result<T> {
    if !(s.aa > T::zero()) || !(s.bb > T::zero()) {
        return Err(Error::UndefinedDc(
            "an argument has zero distance variance (all rows identical)".into(),
        ));
    }
    let mut ab = s.ab;
    if ab < T::zero() {
        log::warn!("negative distance covariance sum {ab} clamped to 0");
        ab = T::zero();
    }
    let inv_n = T::one() / T::from_usize_lossy(n);
    let dcov_ab = inv_n * ab.sqrt();
    let dcov_aa = inv_n * s.aa.sqrt();
    let dcov_bb = inv_n * s.bb.sqrt();
    Ok(dcov_ab / (dcov_aa * dcov_bb).sqrt())
}

/// Distance covariance `dCov(A, B)`.
pub fn distance_covariance<T: Scalar>(a: &Matrix<T>, b: &Matrix<T>) -> Result<T> {
    check_pair(a, b)?;
    let s = if a.rows() <= DENSE_LIMIT {
        dense_sums(a, b)
    } else {
        streamed_sums(a, b)
    };
    Ok(s.ab.max(T::zero()).sqrt() / T::from_usize_lossy(a.rows()))
}

/// Distance correlation; dense below [`DENSE_LIMIT`] rows, streamed above.
pub fn distance_correlation<T: Scalar>(a: &Matrix<T>, b: &Matrix<T>) -> Result<T> {
    if a.rows() <= DENSE_LIMIT {
        distance_correlation_dense(a, b)
    } else {
        distance_correlation_streamed(a, b)
    }
}

pub fn distance_correlation_dense<T: Scalar>(a: &Matrix<T>, b: &Matrix<T>) -> Result<T> {
    check_pair(a, b)?;
    finish(dense_sums(a, b), a.rows())
}

pub fn distance_correlation_streamed<T: Scalar>(a: &Matrix<T>, b: &Matrix<T>) -> Result<T> {
    check_pair(a, b)?;
    finish(streamed_sums(a, b), a.rows())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DcReport {
    pub dc: f64,
    pub n: usize,
    pub n_used: usize,
    pub dims: [usize; 2],
    pub subsampled: bool,
}

/// DC over at most `max_rows` rows; larger inputs use a seeded subsample of
/// aligned rows.
pub fn distance_correlation_report<T: Scalar>(
    a: &Matrix<T>,
    b: &Matrix<T>,
    max_rows: usize,
    rng_seed: u64,
) -> Result<DcReport> {
    check_pair(a, b)?;
    let n = a.rows();
    let (dc, n_used) = if n > max_rows.max(2) {
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        let mut idx = sample(&mut rng, n, max_rows.max(2)).into_vec();
        idx.sort_unstable();
        (
            distance_correlation(&a.select_rows(&idx), &b.select_rows(&idx))?,
            idx.len(),
        )
    } else {
        (distance_correlation(a, b)?, n)
    };
    Ok(DcReport {
        dc: dc.to_f64().unwrap_or(f64::NAN),
        n,
        n_used,
        dims: [a.cols(), b.cols()],
        subsampled: n_used < n,
    })
}
