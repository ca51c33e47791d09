//! Fixtures shared by the benchmarks.

use ndarray::Array2;
use svdd_core::{EmbeddingDataset, SeededRng};

/// `n` rows of standard normal noise in `dim` dimensions, one in ten labelled anomalous.
pub fn noise_dataset(n: usize, dim: usize, seed: u64) -> EmbeddingDataset {
    let mut rng = SeededRng::new(seed);
    let x = Array2::from_shape_simple_fn((n, dim), || rng.normal());
    let labels = (0..n).map(|i| if i % 10 == 9 { -1 } else { 1 }).collect();
    EmbeddingDataset::with_labels(x, labels).expect("valid fixture")
}

/// Symmetric positive semi-definite `dim x dim` matrix.
pub fn spd_matrix(dim: usize, seed: u64) -> Array2<f64> {
    let mut rng = SeededRng::new(seed);
    let m = Array2::from_shape_simple_fn((dim, dim), || rng.normal());
    m.t().dot(&m) / dim as f64
}
