use super::{EmbeddingDataset, NORMAL};
use crate::error::{Result, SvddError};
use crate::rng::SeededRng;

/// Partition row indices into batches of at most `batch_size` rows, each with
/// a strictly positive label sum.
///
/// Batch sizes are `batch_size, batch_size, ..., remainder`. Anomalies are
/// shared out in proportion to batch size (largest remainder first), capped
/// so that a batch of size `s` holds at most `(s - 1) / 2` of them.
pub fn stratified_batches(
    ds: &EmbeddingDataset,
    batch_size: usize,
    seed: u64,
) -> Result<Vec<Vec<usize>>> {
    stratified_label_batches(ds.labels(), batch_size, seed)
}

pub fn stratified_label_batches(
    labels: &[i8],
    batch_size: usize,
    seed: u64,
) -> Result<Vec<Vec<usize>>> {
    if batch_size == 0 {
        return Err(SvddError::InvalidConfig("batch size must be positive".into()));
    }
    let n = labels.len();
    if n == 0 {
        return Err(SvddError::EmptyDataset);
    }
    let mut normals: Vec<usize> = (0..n).filter(|&i| labels[i] == NORMAL).collect();
    let mut anomalies: Vec<usize> = (0..n).filter(|&i| labels[i] != NORMAL).collect();
    let m = anomalies.len();
    if 2 * m >= n {
        return Err(SvddError::Stratification(format!(
            "{m} anomalies among {n} rows; need strictly more normals than anomalies"
        )));
    }

    let sizes: Vec<usize> = (0..n.div_ceil(batch_size))
        .map(|b| batch_size.min(n - b * batch_size))
        .collect();
    let caps: Vec<usize> = sizes.iter().map(|&s| (s - 1) / 2).collect();

    // Proportional share with integer arithmetic: floor(m * s / n), then the
    // leftovers go to the largest remainders that still have room.
    let mut counts: Vec<usize> = sizes
        .iter()
        .zip(&caps)
        .map(|(&s, &cap)| (m * s / n).min(cap))
        .collect();
    let mut leftover = m - counts.iter().sum::<usize>();
    let mut by_remainder: Vec<usize> = (0..sizes.len()).collect();
    by_remainder.sort_by_key(|&b| std::cmp::Reverse((m * sizes[b]) % n));
    while leftover > 0 {
        let before = leftover;
        for &b in &by_remainder {
            if leftover == 0 {
                break;
            }
            if counts[b] < caps[b] {
                counts[b] += 1;
                leftover -= 1;
            }
        }
        if leftover == before {
            return Err(SvddError::Stratification(format!(
                "batch size {batch_size} leaves no room for {leftover} of {m} anomalies"
            )));
        }
    }

    let mut rng = SeededRng::new(seed);
    rng.shuffle(&mut normals);
    rng.shuffle(&mut anomalies);
    let (mut next_a, mut next_n) = (0, 0);
    let mut batches = Vec::with_capacity(sizes.len());
    for (&s, &a) in sizes.iter().zip(&counts) {
        let mut batch = Vec::with_capacity(s);
        batch.extend_from_slice(&anomalies[next_a..next_a + a]);
        batch.extend_from_slice(&normals[next_n..next_n + (s - a)]);
        next_a += a;
        next_n += s - a;
        rng.shuffle(&mut batch);
        batches.push(batch);
    }
    rng.shuffle(&mut batches);
    Ok(batches)
}
