//! Cosine geometry and positive-pair selection.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Matrix;

/// Norms at or below this are treated as zero vectors.
pub const MIN_NORM: f64 = 1e-12;

pub fn cosine_similarity<T: Scalar>(u: &[T], v: &[T]) -> Result<T> {
    if u.len() != v.len() {
        return Err(Error::shape("cosine_similarity", u.len(), v.len()));
    }
    let nu = norm(u);
    let nv = norm(v);
    if nu <= T::lit(MIN_NORM) || nv <= T::lit(MIN_NORM) {
        return Err(Error::DegenerateInput("cosine similarity of a zero-norm vector".into()));
    }
    let dot: T = u.iter().zip(v).map(|(&a, &b)| a * b).sum();
    Ok(clamp_unit(dot / (nu * nv)))
}

pub(crate) fn norm<T: Scalar>(v: &[T]) -> T {
    v.iter().map(|&x| x * x).sum::<T>().sqrt()
}

fn clamp_unit<T: Scalar>(s: T) -> T {
    s.max(-T::one()).min(T::one())
}

/// Row-normalised copy of a matrix together with the original row norms.
#[derive(Clone, Debug)]
pub struct UnitRows<T> {
    pub unit: Matrix<T>,
    pub norms: Vec<T>,
}

impl<T: Scalar> UnitRows<T> {
    pub fn new(p: &Matrix<T>) -> Result<Self> {
        let mut unit = p.clone();
        let mut norms = Vec::with_capacity(p.rows());
        for i in 0..p.rows() {
            let n = norm(p.row(i));
            if !(n > T::lit(MIN_NORM)) {
                return Err(Error::DegenerateInput(format!("row {i} has zero norm")));
            }
            unit.row_mut(i).iter_mut().for_each(|v| *v /= n);
            norms.push(n);
        }
        Ok(Self { unit, norms })
    }

    pub fn len(&self) -> usize {
        self.norms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.norms.is_empty()
    }

    /// Cosine similarity matrix `U U^T`.
    pub fn similarities(&self) -> Matrix<T> {
        self.unit.matmul_nt(&self.unit).expect("square product")
    }

    /// Gradient with respect to the unnormalised rows, given `w[i][j] = dL/ds_ij`
    /// for the ordered entries that enter the loss.
    pub fn backprop(&self, w: &Matrix<T>) -> Matrix<T> {
        let sym = Matrix::from_fn(w.rows(), w.cols(), |i, j| w.get(i, j) + w.get(j, i));
        let mut du = sym.matmul(&self.unit).expect("square times unit rows");
        for i in 0..du.rows() {
            let u = self.unit.row(i);
            let proj: T = du.row(i).iter().zip(u).map(|(&a, &b)| a * b).sum();
            let inv = T::one() / self.norms[i];
            for (d, &uv) in du.row_mut(i).iter_mut().zip(u) {
                *d = (*d - proj * uv) * inv;
            }
        }
        du
    }
}

/// Symmetric N x N boolean relation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PairMask {
    n: usize,
    data: Vec<bool>,
}

impl PairMask {
    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let mut data = vec![false; n * n];
        for i in 0..n {
            for j in 0..n {
                data[i * n + j] = f(i, j);
            }
        }
        Self { n, data }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> bool {
        self.data[i * self.n + j]
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| (0..self.n).all(|j| self.get(i, j) == self.get(j, i)))
    }
}

/// Content positives: cosine distance of text embeddings `<= eps_t`
/// (inclusive). The diagonal is always positive.
pub fn select_content_pairs<T: Scalar>(text: &Matrix<T>, eps_t: f64) -> Result<PairMask> {
    let unit = UnitRows::new(text)?;
    let sims = unit.similarities();
    let n = text.rows();
    let eps = T::lit(eps_t);
    let mut data = vec![false; n * n];
    for i in 0..n {
        data[i * n + i] = true;
        for j in (i + 1)..n {
            let positive = T::one() - clamp_unit(sims.get(i, j)) <= eps;
            data[i * n + j] = positive;
            data[j * n + i] = positive;
        }
    }
    Ok(PairMask { n, data })
}

/// Style positives: identical style tags.
pub fn select_style_pairs(style_ids: &[usize]) -> PairMask {
    PairMask::from_fn(style_ids.len(), |i, j| style_ids[i] == style_ids[j])
}

/// Both relations for one batch.
#[derive(Clone, Debug)]
pub struct PairLabels {
    pub content_positive: Option<PairMask>,
    pub style_positive: PairMask,
}
