use super::manifest::PromptEntry;
use super::record::Dataset;
use crate::error::{Error, Result};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;
use std::hash::Hash;

/// Train and validation indices into the original sequence.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
}

/// Assigns whole groups to one side. `round(fraction * groups)` groups go
/// to train; indices keep their original order.
pub fn split_by_group<I, K, F>(items: &[I], key: F, train_fraction: f64, seed: u64) -> Result<SplitIndices>
where
    K: Eq + Hash + Clone,
    F: Fn(&I) -> K,
{
    if !(0.0..=1.0).contains(&train_fraction) {
        return Err(Error::InvalidArgument(format!(
            "train fraction must be in [0, 1], got {train_fraction}"
        )));
    }
    let mut group_of = Vec::with_capacity(items.len());
    let mut ids: HashMap<K, usize> = HashMap::new();
    for it in items {
        let k = key(it);
        let next = ids.len();
        group_of.push(*ids.entry(k).or_insert(next));
    }
    let n_groups = ids.len();
    let mut order: Vec<usize> = (0..n_groups).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = (train_fraction * n_groups as f64).round() as usize;
    let mut in_train = vec![false; n_groups];
    for &g in &order[..n_train] {
        in_train[g] = true;
    }
    let (mut train, mut val) = (Vec::new(), Vec::new());
    for (i, &g) in group_of.iter().enumerate() {
        if in_train[g] {
            train.push(i);
        } else {
            val.push(i);
        }
    }
    Ok(SplitIndices { train, val })
}

/// Splits records by prompt group, the (content, style) pair.
pub fn split_dataset(ds: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    let s = split_by_group(&ds.records, |r| (r.content_id, r.style_id), train_fraction, seed)?;
    Ok((ds.subset(&s.train), ds.subset(&s.val)))
}

/// Splits a manifest; each entry is one prompt group.
pub fn split_manifest(
    entries: &[PromptEntry],
    train_fraction: f64,
    seed: u64,
) -> Result<(Vec<PromptEntry>, Vec<PromptEntry>)> {
    let s = split_by_group(entries, |e| (e.content_id, e.style_id), train_fraction, seed)?;
    let pick = |idx: &[usize]| idx.iter().map(|&i| entries[i].clone()).collect();
    Ok((pick(&s.train), pick(&s.val)))
}
