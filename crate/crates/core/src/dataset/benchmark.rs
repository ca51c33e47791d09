//! Synthetic pollution benchmark: one anisotropic Gaussian of normals and a
//! mixture of displaced anomaly clusters.

use ndarray::{Array1, Array2};

use super::{EmbeddingDataset, ANOMALY, NORMAL};
use crate::error::{Result, SvddError};
use crate::rng::{derive_seed, SeededRng};

/// Normal coordinate `j` has standard deviation
/// `std_max * (std_min / std_max)^(j / (dim - 1))`. Anomaly cluster `k` is
/// centered at `shift * u_k` for a random unit vector `u_k` and has the
/// normal covariance scaled by `cluster_scale`.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkSpec {
    pub dim: usize,
    pub n_normal: usize,
    pub n_test_normal: usize,
    pub n_anomaly_pool: usize,
    pub n_test_anomaly: usize,
    pub clusters: usize,
    pub std_max: f64,
    pub std_min: f64,
    pub shift: f64,
    pub cluster_scale: f64,
    pub seed: u64,
}

impl BenchmarkSpec {
    pub fn new(seed: u64) -> Self {
        Self {
            dim: 32,
            n_normal: 2000,
            n_test_normal: 1000,
            n_anomaly_pool: 200,
            n_test_anomaly: 50,
            clusters: 4,
            std_max: 2.0,
            std_min: 0.25,
            shift: 6.0,
            cluster_scale: 0.5,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        let counts = [
            self.dim,
            self.n_normal,
            self.n_test_normal,
            self.n_anomaly_pool,
            self.n_test_anomaly,
            self.clusters,
        ];
        if counts.contains(&0) {
            return Err(SvddError::InvalidConfig("benchmark counts and dimension must be positive".into()));
        }
        if !(self.std_max > 0.0 && self.std_min > 0.0 && self.cluster_scale > 0.0 && self.shift >= 0.0) {
            return Err(SvddError::InvalidConfig(
                "benchmark scales must be positive and the shift non-negative".into(),
            ));
        }
        Ok(())
    }

    pub fn normal_std(&self) -> Array1<f64> {
        let d = self.dim;
        Array1::from_shape_fn(d, |j| {
            if d == 1 {
                self.std_max
            } else {
                self.std_max * (self.std_min / self.std_max).powf(j as f64 / (d - 1) as f64)
            }
        })
    }
}

#[derive(Debug, Clone)]
pub struct Benchmark {
    pub train_normals: EmbeddingDataset,
    /// Anomalies available for polluting the training set.
    pub anomaly_pool: EmbeddingDataset,
    /// Held-out normals and anomalies, disjoint from the training material.
    pub test: EmbeddingDataset,
}

pub fn generate_benchmark(spec: &BenchmarkSpec) -> Result<Benchmark> {
    spec.validate()?;
    let std = spec.normal_std();
    let d = spec.dim;

    let mut geo = SeededRng::new(derive_seed(spec.seed, 0));
    let means: Vec<Array1<f64>> = (0..spec.clusters)
        .map(|_| {
            let u = Array1::from_shape_simple_fn(d, || geo.normal());
            let norm = u.dot(&u).sqrt();
            u * (spec.shift / norm)
        })
        .collect();

    let normals = |n: usize, rng: &mut SeededRng| Array2::from_shape_fn((n, d), |(_, j)| std[j] * rng.normal());
    let anomalies = |n: usize, rng: &mut SeededRng| {
        let mut m = Array2::zeros((n, d));
        for mut row in m.rows_mut() {
            let k = rng.below(spec.clusters);
            for j in 0..d {
                row[j] = means[k][j] + spec.cluster_scale * std[j] * rng.normal();
            }
        }
        m
    };

    let mut rng = SeededRng::new(derive_seed(spec.seed, 1));
    let train = normals(spec.n_normal, &mut rng);
    let pool = anomalies(spec.n_anomaly_pool, &mut rng);
    let test_n = normals(spec.n_test_normal, &mut rng);
    let test_a = anomalies(spec.n_test_anomaly, &mut rng);

    let ids = |prefix: &str, n: usize| (0..n).map(|i| format!("{prefix}{i}")).collect::<Vec<_>>();
    let train_normals = EmbeddingDataset::new(train, vec![NORMAL; spec.n_normal], ids("normal-", spec.n_normal))?;
    let anomaly_pool = EmbeddingDataset::new(pool, vec![ANOMALY; spec.n_anomaly_pool], ids("pool-", spec.n_anomaly_pool))?;
    let test = EmbeddingDataset::new(test_n, vec![NORMAL; spec.n_test_normal], ids("test-normal-", spec.n_test_normal))?
        .concat(&EmbeddingDataset::new(
            test_a,
            vec![ANOMALY; spec.n_test_anomaly],
            ids("test-anomaly-", spec.n_test_anomaly),
        )?)?;
    Ok(Benchmark {
        train_normals,
        anomaly_pool,
        test,
    })
}
