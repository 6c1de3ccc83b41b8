use crate::error::{Error, Result};
use std::io::Write;

/// K x K counts; rows are true labels, columns predictions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfusionMatrix {
    k: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            counts: vec![0; k * k],
        }
    }

    pub fn from_predictions(k: usize, truth: &[usize], predicted: &[usize]) -> Result<Self> {
        if truth.len() != predicted.len() {
            return Err(Error::shape("confusion matrix", truth.len(), predicted.len()));
        }
        let mut m = Self::new(k);
        for (&t, &p) in truth.iter().zip(predicted) {
            if t >= k || p >= k {
                return Err(Error::InvalidArgument(format!(
                    "label pair ({t}, {p}) out of range for {k} classes"
                )));
            }
            m.counts[t * k + p] += 1;
        }
        Ok(m)
    }

    pub fn classes(&self) -> usize {
        self.k
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth * self.k + predicted]
    }

    pub fn row(&self, truth: usize) -> &[u64] {
        &self.counts[truth * self.k..(truth + 1) * self.k]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.k).map(|i| self.get(i, i)).sum()
    }

    pub fn accuracy(&self) -> f64 {
        let n = self.total();
        if n == 0 {
            0.0
        } else {
            self.trace() as f64 / n as f64
        }
    }

    /// Recall per true class; `None` for classes absent from the evaluation set.
    pub fn per_class_accuracy(&self) -> Vec<Option<f64>> {
        (0..self.k)
            .map(|i| {
                let n: u64 = self.row(i).iter().sum();
                (n > 0).then(|| self.get(i, i) as f64 / n as f64)
            })
            .collect()
    }

    /// Rows divided by their sums; empty rows stay zero.
    pub fn row_normalized(&self) -> Vec<Vec<f64>> {
        (0..self.k)
            .map(|i| {
                let n: u64 = self.row(i).iter().sum();
                self.row(i)
                    .iter()
                    .map(|&c| if n == 0 { 0.0 } else { c as f64 / n as f64 })
                    .collect()
            })
            .collect()
    }

    /// CSV with a header `true\predicted,<labels...>` and one row per true class.
    pub fn write_csv<W: Write>(&self, out: W, names: Option<&[String]>) -> Result<()> {
        let label = |i: usize| -> String {
            names
                .and_then(|n| n.get(i).cloned())
                .unwrap_or_else(|| i.to_string())
        };
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["true\\predicted".to_string()];
        header.extend((0..self.k).map(label));
        w.write_record(&header)?;
        for i in 0..self.k {
            let mut rec = vec![label(i)];
            rec.extend(self.row(i).iter().map(u64::to_string));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}
