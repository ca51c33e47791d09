//! Embedding datasets: storage, file formats, synthetic generators, pollution
//! mixing and label-stratified batching.

mod batching;
mod benchmark;
mod io;
mod pollution;
mod synthetic;

use std::collections::HashSet;

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{Result, SvddError};

pub use batching::{stratified_batches, stratified_label_batches};
pub use benchmark::{generate_benchmark, Benchmark, BenchmarkSpec};
pub use io::{
    load_dataset, load_embeddings, load_labels, save_dataset, write_embeddings, write_labels,
    EmbeddingFormat,
};
pub use pollution::{mix_pollution, pollution_count, PollutionSpec};
pub use synthetic::{
    generate_case_study, generate_center_illustration, CaseStudyData, CaseStudySpec,
    CENTER_ANOMALY_PREFIX, CENTER_INLIER_PREFIX, CENTER_MISLABELED_PREFIX,
};

/// Label of a normal sample.
pub const NORMAL: i8 = 1;
/// Label of an anomalous sample.
pub const ANOMALY: i8 = -1;

/// `n` labelled embedding rows of dimension `D`.
///
/// Vectors are held as `f64`; the on-disk format is `f32`, so a dataset that
/// was loaded from a file round-trips bit for bit, while one generated in
/// memory is rounded once when written.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingDataset {
    vectors: Array2<f64>,
    labels: Vec<i8>,
    ids: Vec<String>,
}

impl EmbeddingDataset {
    pub fn new(vectors: Array2<f64>, labels: Vec<i8>, ids: Vec<String>) -> Result<Self> {
        let (n, dim) = vectors.dim();
        if n == 0 {
            return Err(SvddError::EmptyDataset);
        }
        if dim == 0 {
            return Err(SvddError::InvalidDataset("dimension must be at least 1".into()));
        }
        if labels.len() != n || ids.len() != n {
            return Err(SvddError::InvalidDataset(format!(
                "{n} rows but {} labels and {} ids",
                labels.len(),
                ids.len()
            )));
        }
        if let Some((row, &value)) = labels
            .iter()
            .enumerate()
            .find(|(_, &l)| l != NORMAL && l != ANOMALY)
        {
            return Err(SvddError::InvalidLabel {
                row,
                value: value as i64,
            });
        }
        let mut seen = HashSet::with_capacity(n);
        if let Some(dup) = ids.iter().find(|id| !seen.insert(id.as_str())) {
            return Err(SvddError::InvalidDataset(format!("duplicate id {dup:?}")));
        }
        Ok(Self {
            vectors,
            labels,
            ids,
        })
    }

    /// All rows labelled normal, ids `0..n`.
    pub fn unlabeled(vectors: Array2<f64>) -> Result<Self> {
        let n = vectors.nrows();
        Self::new(vectors, vec![NORMAL; n], default_ids(n))
    }

    pub fn with_labels(vectors: Array2<f64>, labels: Vec<i8>) -> Result<Self> {
        let n = vectors.nrows();
        Self::new(vectors, labels, default_ids(n))
    }

    pub fn from_rows(rows: &[Vec<f64>], labels: Vec<i8>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(SvddError::EmptyDataset);
        }
        let dim = rows[0].len();
        let mut flat = Vec::with_capacity(n * dim);
        for (row, r) in rows.iter().enumerate() {
            if r.len() != dim {
                return Err(SvddError::RowWidth {
                    row,
                    expected: dim,
                    found: r.len(),
                });
            }
            flat.extend_from_slice(r);
        }
        let vectors = Array2::from_shape_vec((n, dim), flat).expect("shape checked");
        Self::with_labels(vectors, labels)
    }

    pub fn len(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn vectors(&self) -> ArrayView2<'_, f64> {
        self.vectors.view()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.vectors.row(i)
    }

    pub fn labels(&self) -> &[i8] {
        &self.labels
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn label_sum(&self) -> i64 {
        self.labels.iter().map(|&l| l as i64).sum()
    }

    pub fn n_normal(&self) -> usize {
        self.labels.iter().filter(|&&l| l == NORMAL).count()
    }

    pub fn n_anomaly(&self) -> usize {
        self.len() - self.n_normal()
    }

    /// Same rows, every label replaced by +1.
    pub fn relabeled_normal(&self) -> Self {
        Self {
            vectors: self.vectors.clone(),
            labels: vec![NORMAL; self.len()],
            ids: self.ids.clone(),
        }
    }

    pub fn replace_labels(&self, labels: Vec<i8>) -> Result<Self> {
        Self::new(self.vectors.clone(), labels, self.ids.clone())
    }

    /// Rows at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let vectors = self.vectors.select(Axis(0), indices);
        let labels = indices.iter().map(|&i| self.labels[i]).collect();
        let ids = indices.iter().map(|&i| self.ids[i].clone()).collect();
        Self::new(vectors, labels, ids)
    }

    /// Rows whose label equals `label`.
    pub fn filter_label(&self, label: i8) -> Result<Self> {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| self.labels[i] == label).collect();
        self.select(&idx)
    }

    /// Row-wise concatenation; ids must stay unique.
    pub fn concat(&self, other: &Self) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(SvddError::DimensionMismatch(format!(
                "cannot concatenate D={} with D={}",
                self.dim(),
                other.dim()
            )));
        }
        let vectors = ndarray::concatenate(Axis(0), &[self.vectors.view(), other.vectors.view()])
            .expect("column counts checked");
        let mut labels = self.labels.clone();
        labels.extend_from_slice(&other.labels);
        let mut ids = self.ids.clone();
        ids.extend(other.ids.iter().cloned());
        Self::new(vectors, labels, ids)
    }

    pub fn with_id_prefix(&self, prefix: &str) -> Self {
        Self {
            vectors: self.vectors.clone(),
            labels: self.labels.clone(),
            ids: self.ids.iter().map(|id| format!("{prefix}{id}")).collect(),
        }
    }
}

pub(crate) fn default_ids(n: usize) -> Vec<String> {
    (0..n).map(|i| i.to_string()).collect()
}
