//! Linear 2-D comparison of three objectives: ridge-regularized fixed center,
//! norm-constrained one-class, and norm-constrained anomaly-injected.

use std::fmt::Write as _;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::dataset::{generate_case_study, CaseStudySpec, EmbeddingDataset, ANOMALY};
use crate::error::Result;
use crate::optimizer::{train, Objective, TrainConfig};
use crate::oracle::{
    constrained_linear_optimum, pairwise_scatter, ridge_objective_grad, ridge_solution, trace_quadratic,
};
use crate::rng::derive_seed;

/// Single-draw reference values: volumes (reg, constrained, ai) and ratios (reg, constrained, ai).
pub const REFERENCE_VOLUMES: [f64; 3] = [3.35, 0.94, 0.96];
pub const REFERENCE_RATIOS: [f64; 3] = [2.0, 2.8, 3.48];

#[derive(Debug, Clone, PartialEq)]
pub struct CaseStudyConfig {
    pub seed: u64,
    pub steps: usize,
    pub learning_rate: f64,
    pub lambda: f64,
}

impl CaseStudyConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            steps: 500,
            learning_rate: 0.01,
            lambda: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaseStudyReport {
    pub config: CaseStudyConfig,
    pub volume_reg: f64,
    pub volume_constrained: f64,
    pub volume_ai: f64,
    pub ratio_reg: f64,
    pub ratio_constrained: f64,
    pub ratio_ai: f64,
    /// Norm of the ridge objective gradient at the closed-form solution.
    pub ridge_grad_norm: f64,
    pub lambda_min_plain: f64,
    pub objective_constrained: f64,
    pub lambda_min_signed: f64,
    pub objective_ai: f64,
    pub w_reg: Array2<f64>,
    pub w_constrained: Array2<f64>,
    pub w_ai: Array2<f64>,
    pub points: Vec<CloudPoint>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CloudPoint {
    pub method: &'static str,
    pub kind: &'static str,
    pub id: String,
    pub z: [f64; 2],
}

impl CaseStudyReport {
    /// Relative gap between the trained constrained objective and the eigen optimum.
    pub fn gap_constrained(&self) -> f64 {
        rel_gap(self.objective_constrained, self.lambda_min_plain)
    }

    pub fn gap_ai(&self) -> f64 {
        rel_gap(self.objective_ai, self.lambda_min_signed)
    }

    pub fn volumes(&self) -> [f64; 3] {
        [self.volume_reg, self.volume_constrained, self.volume_ai]
    }

    pub fn ratios(&self) -> [f64; 3] {
        [self.ratio_reg, self.ratio_constrained, self.ratio_ai]
    }

    pub const CSV_HEADER: &'static str = "seed,steps,learning_rate,lambda,volume_reg,volume_constrained,volume_ai,\
ratio_reg,ratio_constrained,ratio_ai,ridge_grad_norm,lambda_min_plain,objective_constrained,lambda_min_signed,objective_ai";

    pub fn csv_row(&self) -> String {
        let c = &self.config;
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            c.seed,
            c.steps,
            c.learning_rate,
            c.lambda,
            self.volume_reg,
            self.volume_constrained,
            self.volume_ai,
            self.ratio_reg,
            self.ratio_constrained,
            self.ratio_ai,
            self.ridge_grad_norm,
            self.lambda_min_plain,
            self.objective_constrained,
            self.lambda_min_signed,
            self.objective_ai
        )
    }

    pub fn points_csv(&self) -> String {
        case_study_points_csv(std::slice::from_ref(self))
    }
}

pub const CASE_STUDY_POINTS_HEADER: &str = "seed,method,kind,id,z0,z1";

pub fn case_study_points_csv(reports: &[CaseStudyReport]) -> String {
    let mut s = format!("{CASE_STUDY_POINTS_HEADER}\n");
    for r in reports {
        for p in &r.points {
            let _ = writeln!(s, "{},{},{},{},{},{}", r.config.seed, p.method, p.kind, p.id, p.z[0], p.z[1]);
        }
    }
    s
}

pub fn case_study_csv(reports: &[CaseStudyReport]) -> String {
    let mut s = format!("{}\n", CaseStudyReport::CSV_HEADER);
    for r in reports {
        s.push_str(&r.csv_row());
        s.push('\n');
    }
    s
}

/// Aligned text summary with the single-draw reference values and a +-50% band.
pub fn case_study_table(reports: &[CaseStudyReport]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:>6} {:>10} {:>10} {:>10} {:>10} {:>10} {:>10}",
        "seed", "vol_reg", "vol_con", "vol_ai", "ratio_reg", "ratio_con", "ratio_ai"
    );
    for r in reports {
        let _ = writeln!(
            s,
            "{:>6} {:>10.4} {:>10.4} {:>10.4} {:>10.4} {:>10.4} {:>10.4}",
            r.config.seed,
            r.volume_reg,
            r.volume_constrained,
            r.volume_ai,
            r.ratio_reg,
            r.ratio_constrained,
            r.ratio_ai
        );
    }
    let names = ["vol_reg", "vol_con", "vol_ai", "ratio_reg", "ratio_con", "ratio_ai"];
    let refs: Vec<f64> = REFERENCE_VOLUMES.iter().chain(&REFERENCE_RATIOS).copied().collect();
    if !reports.is_empty() {
        let _ = writeln!(s, "reference values (single draw, +-50% band):");
        for (k, (name, reference)) in names.iter().zip(&refs).enumerate() {
            let mut vals: Vec<f64> = reports
                .iter()
                .map(|r| if k < 3 { r.volumes()[k] } else { r.ratios()[k - 3] })
                .collect();
            vals.sort_by(f64::total_cmp);
            let median = vals[vals.len() / 2];
            let inside = (median - reference).abs() <= 0.5 * reference;
            let _ = writeln!(
                s,
                "  {name:<10} median {median:>8.4} reference {reference:>6.2} {}",
                if inside { "within band" } else { "outside band" }
            );
        }
    }
    s
}

fn rel_gap(objective: f64, optimum: f64) -> f64 {
    (objective - optimum) / optimum.abs().max(1e-300)
}

fn mean_sq_dist(z: ArrayView2<'_, f64>, c: ArrayView1<'_, f64>) -> f64 {
    z.rows().into_iter().map(|r| (&r - &c).mapv(|v| v * v).sum()).sum::<f64>() / z.nrows() as f64
}

fn linear_config(cfg: &CaseStudyConfig, objective: Objective, batch: usize, stream: u64) -> TrainConfig {
    TrainConfig {
        objective,
        lambda: 0.0,
        learning_rate: cfg.learning_rate,
        epochs: cfg.steps,
        batch_size: batch,
        hidden_size: 2,
        latent_size: 2,
        hidden_layers: 0,
        seed: derive_seed(cfg.seed, stream),
        ..TrainConfig::default()
    }
}

fn cloud(method: &'static str, kind: &'static str, ds: &EmbeddingDataset, z: ArrayView2<'_, f64>) -> Vec<CloudPoint> {
    ds.ids()
        .iter()
        .zip(z.rows())
        .map(|(id, r)| CloudPoint {
            method,
            kind,
            id: id.clone(),
            z: [r[0], r[1]],
        })
        .collect()
}

/// Runs the three linear objectives on one draw of the 2-D data.
///
/// The ridge baseline uses the fixed center `c = 2 * mean(normals)`; its
/// normals' volume does not depend on any training run. The constrained
/// objectives are trained by full-batch projected gradient descent on one
/// linear 2x2 layer.
pub fn run_case_study(cfg: &CaseStudyConfig) -> Result<CaseStudyReport> {
    let data = generate_case_study(&CaseStudySpec::new(cfg.seed))?;
    let normals = data.normals();
    let train_anomalies = data.train.filter_label(ANOMALY)?;
    let eval = &data.eval_anomalies;

    let c_reg: Array1<f64> = normals.vectors().mean_axis(ndarray::Axis(0)).expect("non-empty") * 2.0;
    let w_reg = ridge_solution(&normals, c_reg.view(), cfg.lambda)?;
    let g = ridge_objective_grad(&normals, w_reg.view(), c_reg.view(), cfg.lambda);
    let ridge_grad_norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();

    let con = train(&normals, &linear_config(cfg, Objective::OcJoint, normals.len(), 1))?;
    let ai = train(&data.train, &linear_config(cfg, Objective::AiSvdd, data.train.len(), 2))?;
    let w_con = con.network.weights()[0].clone();
    let w_ai = ai.network.weights()[0].clone();

    let plain = pairwise_scatter(&normals, None)?;
    let signed = pairwise_scatter(&data.train, Some(data.train.labels()))?;
    let (lambda_min_plain, _) = constrained_linear_optimum(&plain, 2)?;
    let (lambda_min_signed, _) = constrained_linear_optimum(&signed, 2)?;

    let mut points = Vec::new();
    let mut summarize = |method: &'static str, w: &Array2<f64>, c: ArrayView1<'_, f64>| -> (f64, f64) {
        let zn = normals.vectors().dot(w);
        let ze = eval.vectors().dot(w);
        let zt = train_anomalies.vectors().dot(w);
        points.extend(cloud(method, "normal", &normals, zn.view()));
        points.extend(cloud(method, "eval_anomaly", eval, ze.view()));
        points.extend(cloud(method, "train_anomaly", &train_anomalies, zt.view()));
        let volume = mean_sq_dist(zn.view(), c);
        (volume, mean_sq_dist(ze.view(), c) / volume)
    };
    let (volume_reg, ratio_reg) = summarize("reg", &w_reg, c_reg.view());
    let (volume_constrained, ratio_constrained) = summarize("constrained", &w_con, con.center.vector.view());
    let (volume_ai, ratio_ai) = summarize("ai", &w_ai, ai.center.vector.view());
    let identity = Array2::<f64>::eye(2);
    let input_mean = normals.vectors().mean_axis(ndarray::Axis(0)).expect("non-empty");
    summarize("input", &identity, input_mean.view());

    Ok(CaseStudyReport {
        config: cfg.clone(),
        volume_reg,
        volume_constrained,
        volume_ai,
        ratio_reg,
        ratio_constrained,
        ratio_ai,
        ridge_grad_norm,
        lambda_min_plain,
        objective_constrained: trace_quadratic(w_con.view(), plain.matrix.view()),
        lambda_min_signed,
        objective_ai: trace_quadratic(w_ai.view(), signed.matrix.view()),
        w_reg,
        w_constrained: w_con,
        w_ai,
        points,
    })
}
