//! Hypersphere losses, centers and the inference score.
//!
//! The joint losses are evaluated through their centered forms, which cost
//! O(n) instead of the O(n^2) pairwise double sums; the pairwise forms are
//! kept here as reference implementations.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::dataset::EmbeddingDataset;
use crate::error::{Result, SvddError};
use crate::network::EncoderNetwork;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CenterKind {
    /// Chosen before training and held fixed.
    Fixed,
    /// Unweighted mean of latent points.
    PlainMean,
    /// Label-weighted mean `sum(y_i phi_i) / sum(y_i)`.
    SignedMean,
}

impl CenterKind {
    pub fn code(self) -> u8 {
        match self {
            CenterKind::Fixed => 0,
            CenterKind::PlainMean => 1,
            CenterKind::SignedMean => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(CenterKind::Fixed),
            1 => Some(CenterKind::PlainMean),
            2 => Some(CenterKind::SignedMean),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CenterKind::Fixed => "fixed",
            CenterKind::PlainMean => "plain_mean",
            CenterKind::SignedMean => "signed_mean",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Center {
    pub vector: Array1<f64>,
    pub kind: CenterKind,
}

impl Center {
    pub fn new(vector: Array1<f64>, kind: CenterKind) -> Self {
        Self { vector, kind }
    }

    pub fn fixed(vector: Array1<f64>) -> Self {
        Self::new(vector, CenterKind::Fixed)
    }

    pub fn dim(&self) -> usize {
        self.vector.len()
    }
}

/// A loss split into its data and regularization parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossValue {
    pub total: f64,
    pub data_term: f64,
    pub reg_term: f64,
}

impl LossValue {
    pub fn new(data_term: f64, reg_term: f64) -> Self {
        Self {
            total: data_term + reg_term,
            data_term,
            reg_term,
        }
    }
}

fn check_center(latent: &ArrayView2<'_, f64>, c: &Center) -> Result<()> {
    if latent.ncols() != c.dim() {
        return Err(SvddError::DimensionMismatch(format!(
            "latent dimension {} but center dimension {}",
            latent.ncols(),
            c.dim()
        )));
    }
    Ok(())
}

fn check_labels(latent: &ArrayView2<'_, f64>, labels: &[i8]) -> Result<i64> {
    if labels.len() != latent.nrows() {
        return Err(SvddError::DimensionMismatch(format!(
            "{} latent rows but {} labels",
            latent.nrows(),
            labels.len()
        )));
    }
    let sum: i64 = labels.iter().map(|&y| y as i64).sum();
    if sum <= 0 {
        return Err(SvddError::DegenerateCenter(sum));
    }
    Ok(sum)
}

fn sq_dist(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Fixed-center one-class loss: `(1/n) sum ||phi_i - c||^2 + (lambda/2) sum_l ||W^l||_F^2`.
pub fn oc_loss(
    latent: ArrayView2<'_, f64>,
    c: &Center,
    net: Option<&EncoderNetwork>,
    lambda: f64,
) -> Result<LossValue> {
    if latent.nrows() == 0 {
        return Err(SvddError::EmptyDataset);
    }
    check_center(&latent, c)?;
    let n = latent.nrows() as f64;
    let data = latent
        .rows()
        .into_iter()
        .map(|r| sq_dist(r, c.vector.view()))
        .sum::<f64>()
        / n;
    let reg = match net {
        Some(net) if lambda != 0.0 => 0.5 * lambda * net.weight_sq_norm(),
        _ => 0.0,
    };
    Ok(LossValue::new(data, reg))
}

/// Gradient of the data term of [`oc_loss`] with respect to each latent row: `(2/n)(phi_i - c)`.
pub fn oc_loss_grad(latent: ArrayView2<'_, f64>, c: &Center) -> Result<Array2<f64>> {
    check_center(&latent, c)?;
    let n = latent.nrows() as f64;
    Ok((&latent - &c.vector) * (2.0 / n))
}

pub fn plain_center(latent: ArrayView2<'_, f64>) -> Result<Center> {
    let mean = latent.mean_axis(Axis(0)).ok_or(SvddError::EmptyDataset)?;
    Ok(Center::new(mean, CenterKind::PlainMean))
}

/// `sum(y_i phi_i) / sum(y_i)`; requires a strictly positive label sum.
pub fn signed_center(latent: ArrayView2<'_, f64>, labels: &[i8]) -> Result<Center> {
    let sum = check_labels(&latent, labels)?;
    let mut acc = Array1::<f64>::zeros(latent.ncols());
    for (row, &y) in latent.rows().into_iter().zip(labels) {
        if y > 0 {
            acc += &row;
        } else {
            acc -= &row;
        }
    }
    acc /= sum as f64;
    Ok(Center::new(acc, CenterKind::SignedMean))
}

/// `(1/(2n^2)) sum_{i,j} ||phi_i - phi_j||^2` by explicit double sum.
pub fn pairwise_oc_loss(latent: ArrayView2<'_, f64>) -> Result<f64> {
    let n = latent.nrows();
    if n == 0 {
        return Err(SvddError::EmptyDataset);
    }
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += sq_dist(latent.row(i), latent.row(j));
        }
    }
    Ok(s / (2.0 * (n * n) as f64))
}

/// `(1/(2n sum_k y_k)) sum_{i,j} y_i y_j ||phi_i - phi_j||^2` by explicit double sum.
pub fn pairwise_bc_loss(latent: ArrayView2<'_, f64>, labels: &[i8]) -> Result<f64> {
    let sum = check_labels(&latent, labels)?;
    let n = latent.nrows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            let w = (labels[i] as i64 * labels[j] as i64) as f64;
            s += w * sq_dist(latent.row(i), latent.row(j));
        }
    }
    Ok(s / (2.0 * n as f64 * sum as f64))
}

/// BC-loss via the centered form `(1/n) sum y_i ||phi_i - c*||^2` with the signed center.
/// Negative values are legitimate.
pub fn bc_loss(latent: ArrayView2<'_, f64>, labels: &[i8]) -> Result<f64> {
    let c = signed_center(latent, labels)?;
    let n = latent.nrows() as f64;
    Ok(latent
        .rows()
        .into_iter()
        .zip(labels)
        .map(|(r, &y)| y as f64 * sq_dist(r, c.vector.view()))
        .sum::<f64>()
        / n)
}

/// `d bc_loss / d phi_i = (2/n) y_i (phi_i - c*)`. The signed center is a
/// stationary point of the centered loss in `c`, so holding it constant gives
/// the same gradient as differentiating through it.
pub fn bc_loss_grad(latent: ArrayView2<'_, f64>, labels: &[i8]) -> Result<Array2<f64>> {
    let c = signed_center(latent, labels)?;
    let n = latent.nrows() as f64;
    let mut g = &latent - &c.vector;
    for (mut row, &y) in g.rows_mut().into_iter().zip(labels) {
        row *= 2.0 * y as f64 / n;
    }
    Ok(g)
}

/// Both values from one center computation, for the training loop.
pub fn bc_loss_and_grad(latent: ArrayView2<'_, f64>, labels: &[i8]) -> Result<(f64, Array2<f64>)> {
    let c = signed_center(latent, labels)?;
    let n = latent.nrows() as f64;
    let mut g = &latent - &c.vector;
    let mut loss = 0.0;
    for (mut row, &y) in g.rows_mut().into_iter().zip(labels) {
        let y = y as f64;
        loss += y * row.iter().map(|v| v * v).sum::<f64>();
        row *= 2.0 * y / n;
    }
    Ok((loss / n, g))
}

/// Anomaly score: Euclidean (unsquared) distance of each row to the center.
pub fn score(latent: ArrayView2<'_, f64>, c: &Center) -> Result<Vec<f64>> {
    check_center(&latent, c)?;
    Ok(latent
        .rows()
        .into_iter()
        .map(|r| sq_dist(r, c.vector.view()).sqrt())
        .collect())
}

/// Mean of all raw training embeddings, labels ignored.
pub fn rank_baseline_center(train: &EmbeddingDataset) -> Result<Center> {
    plain_center(train.vectors())
}
