//! Pollution sweep: train each method on training sets polluted with labeled
//! anomalies at several proportions and evaluate on a fixed test set.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use rayon::prelude::*;

use crate::dataset::{mix_pollution, pollution_count, Benchmark, EmbeddingDataset, PollutionSpec, ANOMALY, NORMAL};
use crate::error::{Result, SvddError};
use crate::metrics::{evaluate, MetricSummary, ScoreReport};
use crate::objectives::{rank_baseline_center, score};
use crate::optimizer::{infer, train, Objective, TrainConfig};
use crate::rng::{derive_seed, SeededRng};

use super::stats::{mean_std, spearman};

const STREAM_TRAIN_SET: u64 = 1;
const STREAM_RUN: u64 = 2;
const STREAM_SPLIT: u64 = 3;

pub const SCHEMA_LINE: &str = "# schema: svdd-sweep v1";
pub const SWEEP_HEADER: &str = "method,p,metric,mean,std,runs";
pub const DEFAULT_PROPORTIONS: [f64; 5] = [0.0, 0.01, 0.02, 0.04, 0.08];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SweepMethod {
    Train(Objective),
    /// Distance to the mean of the raw training embeddings.
    RankBaseline,
}

impl SweepMethod {
    pub fn name(self) -> &'static str {
        match self {
            SweepMethod::Train(o) => o.name(),
            SweepMethod::RankBaseline => "rank_baseline",
        }
    }
}

impl fmt::Display for SweepMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepMethod {
    type Err = SvddError;

    fn from_str(s: &str) -> Result<Self> {
        if s == "rank_baseline" {
            Ok(SweepMethod::RankBaseline)
        } else {
            s.parse().map(SweepMethod::Train)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub proportions: Vec<f64>,
    pub runs: usize,
    pub methods: Vec<SweepMethod>,
    /// Used for `oc_fixed_center` and `oc_joint_regularized`.
    pub oc_config: TrainConfig,
    /// Used for `ai_svdd` and `oc_joint`.
    pub ai_config: TrainConfig,
    pub recall_k: Vec<u32>,
    pub seed: u64,
    pub threads: usize,
}

impl SweepConfig {
    /// Settings for the synthetic benchmark.
    pub fn benchmark(seed: u64) -> Self {
        let base = TrainConfig {
            hidden_size: 64,
            latent_size: 16,
            hidden_layers: 1,
            batch_size: 64,
            ..TrainConfig::default()
        };
        Self {
            proportions: DEFAULT_PROPORTIONS.to_vec(),
            runs: 5,
            methods: vec![
                SweepMethod::Train(Objective::OcFixedCenter),
                SweepMethod::Train(Objective::AiSvdd),
                SweepMethod::RankBaseline,
            ],
            oc_config: TrainConfig {
                objective: Objective::OcFixedCenter,
                lambda: 1e-4,
                learning_rate: 0.01,
                epochs: 10,
                pretrain_epochs: 10,
                pretrain_lr: 0.01,
                ..base.clone()
            },
            ai_config: TrainConfig {
                objective: Objective::AiSvdd,
                learning_rate: 0.01,
                epochs: 10,
                ..base
            },
            recall_k: vec![5],
            seed,
            threads: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(SvddError::InvalidConfig("runs must be at least 1".into()));
        }
        if self.threads == 0 {
            return Err(SvddError::InvalidConfig("threads must be at least 1".into()));
        }
        if let Some(p) = self.proportions.iter().find(|p| !(0.0..0.5).contains(*p)) {
            return Err(SvddError::InvalidConfig(format!("pollution proportion {p} must lie in [0, 0.5)")));
        }
        self.oc_config.validate()?;
        self.ai_config.validate()
    }

    pub fn train_config(&self, objective: Objective, seed: u64) -> TrainConfig {
        let base = match objective {
            Objective::OcFixedCenter | Objective::OcJointRegularized => &self.oc_config,
            Objective::AiSvdd | Objective::OcJoint => &self.ai_config,
        };
        TrainConfig {
            objective,
            seed,
            ..base.clone()
        }
    }
}

/// Splits user-supplied pools into training normals, a training anomaly pool,
/// and a test set of `test_fraction` of the normals plus
/// `floor(test_pollution * n_test_normals)` held-out anomalies.
pub fn split_pools(
    normals: &EmbeddingDataset,
    anomalies: &EmbeddingDataset,
    test_fraction: f64,
    test_pollution: f64,
    seed: u64,
) -> Result<Benchmark> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(SvddError::InvalidConfig(format!("test fraction {test_fraction} must lie in (0, 1)")));
    }
    let mut rng = SeededRng::new(derive_seed(seed, STREAM_SPLIT));
    let mut n_idx: Vec<usize> = (0..normals.len()).collect();
    rng.shuffle(&mut n_idx);
    let n_test = ((normals.len() as f64 * test_fraction).round() as usize).clamp(1, normals.len().saturating_sub(1));
    if n_test == 0 || n_test >= normals.len() {
        return Err(SvddError::InvalidDataset("too few normals to split into train and test".into()));
    }
    let test_normals = normals.select(&n_idx[..n_test])?;
    let train_normals = normals.select(&n_idx[n_test..])?;
    let k = pollution_count(test_pollution, n_test).max(1);
    if k >= anomalies.len() {
        return Err(SvddError::InsufficientAnomalies {
            needed: k + 1,
            available: anomalies.len(),
        });
    }
    let mut a_idx: Vec<usize> = (0..anomalies.len()).collect();
    rng.shuffle(&mut a_idx);
    let test_anoms = anomalies.select(&a_idx[..k])?;
    let pool = anomalies.select(&a_idx[k..])?;
    // the two pools may carry the same row-index ids, so tag them
    let test = test_normals
        .replace_labels(vec![NORMAL; test_normals.len()])?
        .with_id_prefix("normal/")
        .concat(&test_anoms.replace_labels(vec![ANOMALY; k])?.with_id_prefix("anomaly/"))?;
    Ok(Benchmark {
        train_normals: train_normals.replace_labels(vec![NORMAL; train_normals.len()])?,
        anomaly_pool: pool.replace_labels(vec![ANOMALY; pool.len()])?,
        test,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub method: SweepMethod,
    pub p: f64,
    pub run: usize,
    pub result: std::result::Result<MetricSummary, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub method: String,
    pub p: f64,
    pub metric: String,
    pub mean: f64,
    pub std: f64,
    pub runs: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub outcomes: Vec<RunOutcome>,
}

impl SweepReport {
    pub fn failures(&self) -> impl Iterator<Item = &RunOutcome> {
        self.outcomes.iter().filter(|o| o.result.is_err())
    }

    pub fn row(&self, method: &str, p: f64, metric: &str) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.method == method && r.p == p && r.metric == metric)
    }

    /// Mean of `metric` for `method` at each proportion, in sweep order.
    pub fn series(&self, method: &str, metric: &str) -> Vec<(f64, f64)> {
        self.rows
            .iter()
            .filter(|r| r.method == method && r.metric == metric)
            .map(|r| (r.p, r.mean))
            .collect()
    }

    pub fn spearman(&self, method: &str, metric: &str) -> Option<f64> {
        let s = self.series(method, metric);
        let (p, m): (Vec<f64>, Vec<f64>) = s.into_iter().unzip();
        spearman(&p, &m)
    }

    pub fn to_csv(&self) -> String {
        let mut s = format!("{SCHEMA_LINE}\n{SWEEP_HEADER}\n");
        for r in &self.rows {
            let _ = writeln!(s, "{},{},{},{},{},{}", r.method, r.p, r.metric, r.mean, r.std, r.runs);
        }
        s
    }

    /// Per-run values: `method,p,run,metric,value`; failed runs carry `error` as metric and no value.
    pub fn runs_csv(&self) -> String {
        let mut s = String::from("method,p,run,metric,value\n");
        for o in &self.outcomes {
            match &o.result {
                Ok(m) => {
                    for (k, v) in m.entries() {
                        let _ = writeln!(s, "{},{},{},{k},{v}", o.method, o.p, o.run);
                    }
                }
                Err(e) => {
                    let _ = writeln!(s, "{},{},{},error,\"{}\"", o.method, o.p, o.run, e.replace('"', "'"));
                }
            }
        }
        s
    }

    /// One block per metric: methods as rows, proportions as columns, `mean +- std`.
    pub fn to_table(&self) -> String {
        let mut metrics: Vec<&str> = Vec::new();
        let mut methods: Vec<&str> = Vec::new();
        let mut ps: Vec<f64> = Vec::new();
        for r in &self.rows {
            if !metrics.contains(&r.metric.as_str()) {
                metrics.push(&r.metric);
            }
            if !methods.contains(&r.method.as_str()) {
                methods.push(&r.method);
            }
            if !ps.contains(&r.p) {
                ps.push(r.p);
            }
        }
        let mut s = String::new();
        for metric in metrics {
            let _ = write!(s, "{metric:<18}");
            for p in &ps {
                let _ = write!(s, " {:>17}", format!("p={p}"));
            }
            s.push('\n');
            for method in &methods {
                let _ = write!(s, "{method:<18}");
                for p in &ps {
                    match self.row(method, *p, metric) {
                        Some(r) => {
                            let _ = write!(s, " {:>17}", format!("{:.4} +- {:.4}", r.mean, r.std));
                        }
                        None => {
                            let _ = write!(s, " {:>17}", "-");
                        }
                    }
                }
                s.push('\n');
            }
            s.push('\n');
        }
        s
    }
}

pub fn parse_sweep_csv(text: &str) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::new();
    let mut seen_header = false;
    for (i, line) in text.lines().enumerate() {
        let err = |reason: String| SvddError::Parse {
            what: "sweep report",
            line: i + 1,
            reason,
        };
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        if !seen_header {
            if line != SWEEP_HEADER {
                return Err(err(format!("expected header {SWEEP_HEADER}")));
            }
            seen_header = true;
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 6 {
            return Err(err(format!("expected 6 fields, found {}", f.len())));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|e| err(format!("'{s}': {e}")));
        rows.push(SweepRow {
            method: f[0].to_string(),
            p: num(f[1])?,
            metric: f[2].to_string(),
            mean: num(f[3])?,
            std: num(f[4])?,
            runs: f[5].parse().map_err(|e| err(format!("runs: {e}")))?,
        });
    }
    if !seen_header {
        return Err(SvddError::Parse {
            what: "sweep report",
            line: 1,
            reason: "missing header".into(),
        });
    }
    Ok(rows)
}

fn evaluate_method(
    method: SweepMethod,
    train_set: &EmbeddingDataset,
    test: &EmbeddingDataset,
    cfg: &SweepConfig,
    run_seed: u64,
) -> Result<MetricSummary> {
    let report: ScoreReport = match method {
        SweepMethod::RankBaseline => {
            let c = rank_baseline_center(train_set)?;
            let scores = score(test.vectors(), &c)?;
            ScoreReport::new(test.ids().to_vec(), test.labels().to_vec(), scores)?
        }
        SweepMethod::Train(objective) => {
            let trace = train(train_set, &cfg.train_config(objective, run_seed))?;
            infer(&trace.network, &trace.center, test)?
        }
    };
    evaluate(&report, &cfg.recall_k)
}

/// Runs every (proportion, run, method) cell and aggregates mean and sample
/// standard deviation over runs. The polluted training set depends only on the
/// proportion; the training seed only on the run index.
pub fn run_pollution_sweep(data: &Benchmark, cfg: &SweepConfig) -> Result<SweepReport> {
    cfg.validate()?;
    let train_sets: Vec<EmbeddingDataset> = cfg
        .proportions
        .iter()
        .enumerate()
        .map(|(pi, &p)| {
            mix_pollution(&PollutionSpec {
                proportion: p,
                normal_source: &data.train_normals,
                anomaly_source: &data.anomaly_pool,
                seed: derive_seed(derive_seed(cfg.seed, STREAM_TRAIN_SET), pi as u64),
            })
        })
        .collect::<Result<_>>()?;

    let mut cells = Vec::new();
    for pi in 0..cfg.proportions.len() {
        for run in 0..cfg.runs {
            for &method in &cfg.methods {
                cells.push((pi, run, method));
            }
        }
    }
    let run_cell = |&(pi, run, method): &(usize, usize, SweepMethod)| {
        let seed = derive_seed(derive_seed(cfg.seed, STREAM_RUN), run as u64);
        let result = evaluate_method(method, &train_sets[pi], &data.test, cfg, seed).map_err(|e| e.to_string());
        if let Err(e) = &result {
            log::warn!("{method} p={} run {run} failed: {e}", cfg.proportions[pi]);
        }
        RunOutcome {
            method,
            p: cfg.proportions[pi],
            run,
            result,
        }
    };
    let outcomes: Vec<RunOutcome> = if cfg.threads == 1 {
        cells.iter().map(run_cell).collect()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads)
            .build()
            .map_err(|e| SvddError::InvalidConfig(format!("thread pool: {e}")))?
            .install(|| cells.par_iter().map(run_cell).collect())
    };
    Ok(SweepReport {
        rows: aggregate(&outcomes, cfg),
        outcomes,
    })
}

fn aggregate(outcomes: &[RunOutcome], cfg: &SweepConfig) -> Vec<SweepRow> {
    let mut rows = Vec::new();
    for &method in &cfg.methods {
        for &p in &cfg.proportions {
            let ok: Vec<&MetricSummary> = outcomes
                .iter()
                .filter(|o| o.method == method && o.p == p)
                .filter_map(|o| o.result.as_ref().ok())
                .collect();
            let Some(first) = ok.first() else { continue };
            for (k, (metric, _)) in first.entries().into_iter().enumerate() {
                let vals: Vec<f64> = ok.iter().map(|m| m.entries()[k].1).collect();
                let (mean, std) = mean_std(&vals);
                rows.push(SweepRow {
                    method: method.name().to_string(),
                    p,
                    metric,
                    mean,
                    std,
                    runs: vals.len(),
                });
            }
        }
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate_benchmark, BenchmarkSpec};

    fn tiny_data() -> Benchmark {
        generate_benchmark(&BenchmarkSpec {
            dim: 6,
            n_normal: 120,
            n_test_normal: 60,
            n_anomaly_pool: 20,
            n_test_anomaly: 6,
            ..BenchmarkSpec::new(1)
        })
        .unwrap()
    }

    fn tiny_cfg(threads: usize) -> SweepConfig {
        let mut cfg = SweepConfig::benchmark(3);
        cfg.runs = 2;
        cfg.proportions = vec![0.0, 0.08];
        cfg.threads = threads;
        for c in [&mut cfg.oc_config, &mut cfg.ai_config] {
            c.hidden_size = 5;
            c.latent_size = 3;
            c.epochs = 2;
            c.pretrain_epochs = 2;
            c.batch_size = 32;
        }
        cfg
    }

    #[test]
    fn cells_and_determinism() {
        let data = tiny_data();
        let r = run_pollution_sweep(&data, &tiny_cfg(1)).unwrap();
        assert_eq!(r.outcomes.len(), 2 * 2 * 3);
        assert_eq!(r.failures().count(), 0);
        assert!(r.rows.iter().all(|row| row.runs == 2 && row.mean.is_finite() && row.std.is_finite()));
        assert_eq!(r.rows.len(), 3 * 2 * 3);
        for p in [0.0, 0.08] {
            assert_eq!(r.row("rank_baseline", p, "auc").unwrap().std, 0.0);
        }
        let parallel = run_pollution_sweep(&data, &tiny_cfg(3)).unwrap();
        assert_eq!(r.to_csv(), parallel.to_csv());
        assert!(r.to_table().contains("ai_svdd"));
    }

    #[test]
    fn csv_round_trip_and_empty() {
        let empty = SweepReport::default();
        assert_eq!(empty.to_csv(), format!("{SCHEMA_LINE}\n{SWEEP_HEADER}\n"));
        assert!(parse_sweep_csv(&empty.to_csv()).unwrap().is_empty());
        let r = run_pollution_sweep(&tiny_data(), &tiny_cfg(1)).unwrap();
        assert_eq!(parse_sweep_csv(&r.to_csv()).unwrap(), r.rows);
        assert!(parse_sweep_csv("method,p\n").is_err());
    }

    #[test]
    fn method_names() {
        for m in ["oc_fixed_center", "ai_svdd", "rank_baseline", "oc_joint"] {
            assert_eq!(m.parse::<SweepMethod>().unwrap().name(), m);
        }
        assert!("bert".parse::<SweepMethod>().is_err());
    }

    #[test]
    fn split_pools_partitions() {
        let data = tiny_data();
        let b = split_pools(&data.train_normals, &data.anomaly_pool, 0.25, 0.05, 9).unwrap();
        assert_eq!(b.train_normals.len() + b.test.n_normal(), 120);
        assert_eq!(b.test.n_anomaly(), 1);
        assert_eq!(b.anomaly_pool.len(), 19);
        assert!(split_pools(&data.train_normals, &data.anomaly_pool, 1.5, 0.05, 9).is_err());
    }

    #[test]
    fn split_pools_accepts_overlapping_ids() {
        let data = tiny_data();
        let plain = |d: &EmbeddingDataset| EmbeddingDataset::unlabeled(d.vectors().to_owned()).unwrap();
        let (normals, anomalies) = (plain(&data.train_normals), plain(&data.anomaly_pool));
        assert_eq!(normals.ids()[0], anomalies.ids()[0]);
        let b = split_pools(&normals, &anomalies, 0.25, 0.05, 9).unwrap();
        assert_eq!(b.test.len(), 31);
    }

    #[test]
    fn invalid_configs() {
        let mut c = tiny_cfg(1);
        c.proportions = vec![0.6];
        assert!(c.validate().is_err());
        let mut c = tiny_cfg(1);
        c.runs = 0;
        assert!(c.validate().is_err());
    }
}
