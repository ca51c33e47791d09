use super::{EmbeddingDataset, ANOMALY, NORMAL};
use crate::error::{Result, SvddError};
use crate::rng::SeededRng;

/// Recipe for a polluted training set: every normal row plus
/// `floor(p * n_normal)` anomaly rows drawn without replacement.
#[derive(Debug, Clone, Copy)]
pub struct PollutionSpec<'a> {
    pub proportion: f64,
    pub normal_source: &'a EmbeddingDataset,
    pub anomaly_source: &'a EmbeddingDataset,
    pub seed: u64,
}

/// `floor(p * n)`, tolerant of representation error such as `0.29 * 100`.
pub fn pollution_count(proportion: f64, n_normal: usize) -> usize {
    (proportion * n_normal as f64 + 1e-9).floor() as usize
}

pub fn mix_pollution(spec: &PollutionSpec<'_>) -> Result<EmbeddingDataset> {
    let p = spec.proportion;
    if !(0.0..0.5).contains(&p) {
        return Err(SvddError::InvalidConfig(format!(
            "pollution proportion {p} must lie in [0, 0.5)"
        )));
    }
    let normals = spec.normal_source;
    let pool = spec.anomaly_source;
    if normals.dim() != pool.dim() {
        return Err(SvddError::DimensionMismatch(format!(
            "normal rows have D={}, anomaly rows D={}",
            normals.dim(),
            pool.dim()
        )));
    }
    let k = pollution_count(p, normals.len());
    if k > pool.len() {
        return Err(SvddError::InsufficientAnomalies {
            needed: k,
            available: pool.len(),
        });
    }
    let mut rng = SeededRng::new(spec.seed);
    let picked = rng.sample_indices(pool.len(), k);

    let base = normals.replace_labels(vec![NORMAL; normals.len()])?;
    let mixed = if k == 0 {
        base
    } else {
        let anomalies = pool.select(&picked)?;
        let anomalies = anomalies
            .replace_labels(vec![ANOMALY; k])?
            .with_id_prefix("anomaly/");
        base.concat(&anomalies)?
    };
    let mut order: Vec<usize> = (0..mixed.len()).collect();
    rng.shuffle(&mut order);
    mixed.select(&order)
}
