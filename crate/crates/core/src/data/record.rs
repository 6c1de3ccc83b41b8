use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Matrix;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;

/// One sample: a frozen joint image embedding plus its identifiers.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingRecord {
    pub record_id: u64,
    pub image_embedding: Vec<f32>,
    /// Embedding of the content description, when available.
    pub text_embedding: Option<Vec<f32>>,
    /// Style tag, `-1` when unknown.
    pub style_id: i32,
    pub content_id: u64,
    /// Evaluation-only genre label, `-1` when unknown.
    pub genre_id: i32,
    /// Ground-truth content cluster of synthetic data, `-1` otherwise.
    pub content_cluster: i32,
}

/// Which label a probe or retrieval metric reads.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelKind {
    Style,
    Genre,
    ContentCluster,
}

impl std::str::FromStr for LabelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "style" => Ok(LabelKind::Style),
            "genre" => Ok(LabelKind::Genre),
            "content_cluster" | "content-cluster" => Ok(LabelKind::ContentCluster),
            other => Err(Error::InvalidArgument(format!("unknown label kind {other:?}"))),
        }
    }
}

impl EmbeddingRecord {
    pub fn label(&self, kind: LabelKind) -> i32 {
        match kind {
            LabelKind::Style => self.style_id,
            LabelKind::Genre => self.genre_id,
            LabelKind::ContentCluster => self.content_cluster,
        }
    }
}

/// Records with homogeneous dimensions and a style vocabulary size.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub n_styles: u32,
    pub d_img: usize,
    /// 0 when records carry no text embedding.
    pub d_txt: usize,
    pub records: Vec<EmbeddingRecord>,
}

fn check_vector(v: &[f32], what: &str, id: u64) -> Result<()> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite(format!("{what} of record {id}")));
    }
    if v.iter().all(|&x| x == 0.0) {
        return Err(Error::DegenerateInput(format!("{what} of record {id} is zero")));
    }
    Ok(())
}

impl Dataset {
    pub fn new(n_styles: u32, d_img: usize, d_txt: usize, records: Vec<EmbeddingRecord>) -> Result<Self> {
        let ds = Self {
            n_styles,
            d_img,
            d_txt,
            records,
        };
        ds.validate()?;
        Ok(ds)
    }

    /// Infers dimensions from the first record.
    pub fn from_records(n_styles: u32, records: Vec<EmbeddingRecord>) -> Result<Self> {
        let d_img = records.first().map_or(0, |r| r.image_embedding.len());
        let d_txt = records
            .first()
            .and_then(|r| r.text_embedding.as_ref())
            .map_or(0, Vec::len);
        Self::new(n_styles, d_img, d_txt, records)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.d_img == 0 {
            return Err(Error::InvalidArgument("image embedding dimension must be positive".into()));
        }
        let mut ids = HashSet::with_capacity(self.records.len());
        for r in &self.records {
            if !ids.insert(r.record_id) {
                return Err(Error::InvalidArgument(format!("duplicate record id {}", r.record_id)));
            }
            if r.image_embedding.len() != self.d_img {
                return Err(Error::shape(
                    "dataset record",
                    format!("{}-d image embedding", self.d_img),
                    r.image_embedding.len(),
                ));
            }
            check_vector(&r.image_embedding, "image embedding", r.record_id)?;
            match (&r.text_embedding, self.d_txt) {
                (None, 0) => {}
                (Some(t), d) if t.len() == d && d > 0 => check_vector(t, "text embedding", r.record_id)?,
                (t, d) => {
                    return Err(Error::shape(
                        "dataset record",
                        format!("{d}-d text embedding"),
                        t.as_ref().map_or(0, Vec::len),
                    ))
                }
            }
            if r.style_id < -1 || r.style_id >= self.n_styles as i32 {
                return Err(Error::InvalidArgument(format!(
                    "record {} has style id {} outside [-1, {})",
                    r.record_id, r.style_id, self.n_styles
                )));
            }
            if r.genre_id < -1 || r.content_cluster < -1 {
                return Err(Error::InvalidArgument(format!(
                    "record {} has a negative label other than -1",
                    r.record_id
                )));
            }
        }
        Ok(())
    }

    pub fn image_matrix<T: Scalar>(&self) -> Matrix<T> {
        Matrix::from_fn(self.len(), self.d_img, |i, j| {
            T::from_stored(self.records[i].image_embedding[j])
        })
    }

    pub fn text_matrix<T: Scalar>(&self) -> Option<Matrix<T>> {
        (self.d_txt > 0).then(|| {
            Matrix::from_fn(self.len(), self.d_txt, |i, j| {
                T::from_stored(self.records[i].text_embedding.as_ref().expect("validated")[j])
            })
        })
    }

    /// Labels as class indices; errors if any record lacks the label.
    pub fn labels(&self, kind: LabelKind) -> Result<Vec<usize>> {
        self.records
            .iter()
            .map(|r| {
                let y = r.label(kind);
                usize::try_from(y).map_err(|_| {
                    Error::Config(format!("record {} has no {kind:?} label", r.record_id))
                })
            })
            .collect()
    }

    pub fn record_ids(&self) -> Vec<u64> {
        self.records.iter().map(|r| r.record_id).collect()
    }

    pub fn subset(&self, idx: &[usize]) -> Self {
        Self {
            n_styles: self.n_styles,
            d_img: self.d_img,
            d_txt: self.d_txt,
            records: idx.iter().map(|&i| self.records[i].clone()).collect(),
        }
    }
}
