//! Exhaustive cosine top-k retrieval.

use crate::error::{Error, Result};
use crate::losses::pairs::{UnitRows, MIN_NORM};
use crate::scalar::Scalar;
use crate::tensor::Matrix;
use std::cmp::Ordering;

/// Ranked neighbours of one query.
#[derive(Clone, Debug, PartialEq)]
pub struct Ranking<T> {
    pub query: usize,
    /// `(row id, cosine similarity)`, most similar first.
    pub results: Vec<(usize, T)>,
}

fn by_score_then_id<T: Scalar>(a: &(usize, T), b: &(usize, T)) -> Ordering {
    b.1.partial_cmp(&a.1)
        .unwrap_or(Ordering::Equal)
        .then(a.0.cmp(&b.0))
}

fn top_k<T: Scalar>(scores: impl Iterator<Item = (usize, T)>, k: usize) -> Vec<(usize, T)> {
    let mut all: Vec<(usize, T)> = scores.collect();
    if k < all.len() {
        all.select_nth_unstable_by(k, by_score_then_id);
        all.truncate(k);
    }
    all.sort_by(by_score_then_id);
    all
}

/// The `k` rows of `db` most cosine-similar to `query`, descending, ties by ascending id.
pub fn retrieve_topk<T: Scalar>(query: &[T], db: &Matrix<T>, k: usize) -> Result<Vec<(usize, T)>> {
    if query.len() != db.cols() {
        return Err(Error::shape("retrieve_topk", format!("{}-d query", db.cols()), query.len()));
    }
    if k > db.rows() {
        return Err(Error::InvalidArgument(format!(
            "k = {k} exceeds database size {}",
            db.rows()
        )));
    }
    let qn = crate::losses::pairs::norm(query);
    if !(qn > T::lit(MIN_NORM)) {
        return Err(Error::DegenerateInput("zero-norm query".into()));
    }
    let unit = UnitRows::new(db)?;
    let scores = (0..db.rows()).map(|i| {
        let dot: T = unit.unit.row(i).iter().zip(query).map(|(&a, &b)| a * b).sum();
        (i, dot / qn)
    });
    Ok(top_k(scores, k))
}

/// For every row, its `k` nearest other rows (the row itself excluded).
pub fn self_excluded_rankings<T: Scalar>(db: &Matrix<T>, k: usize) -> Result<Vec<Ranking<T>>> {
    let n = db.rows();
    if k >= n {
        return Err(Error::InvalidArgument(format!(
            "k = {k} needs at least {} rows, got {n}",
            k + 1
        )));
    }
    let unit = UnitRows::new(db)?;
    let sims = unit.similarities();
    Ok((0..n)
        .map(|q| Ranking {
            query: q,
            results: top_k(
                sims.row(q).iter().copied().enumerate().filter(|&(j, _)| j != q),
                k,
            ),
        })
        .collect())
}

/// Mean fraction of each query's top `k` results (query excluded) that share
/// its group label.
pub fn precision_at_k<T>(rankings: &[Ranking<T>], labels: &[usize], k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    if rankings.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for r in rankings {
        let hits = r
            .results
            .iter()
            .filter(|(id, _)| *id != r.query)
            .take(k)
            .filter(|(id, _)| labels[*id] == labels[r.query])
            .count();
        total += hits as f64 / k as f64;
    }
    Ok(total / rankings.len() as f64)
}
