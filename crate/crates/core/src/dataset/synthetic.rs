//! Small 2-D generators for the linear case study and the center illustration.

use ndarray::Array2;

use super::{EmbeddingDataset, ANOMALY, NORMAL};
use crate::error::{Result, SvddError};
use crate::rng::SeededRng;

/// Normals from `N(center, sigma^2 I)` in 2-D plus anomalies on a ring.
///
/// Anomaly placement: the `edge_candidates` normals farthest from `center` are
/// the edge points. One of them is drawn as the anchor and every anomaly
/// (evaluation and training alike) sits on the ring at the anchor's angle
/// plus `N(0, angle_jitter^2)` radians.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseStudySpec {
    pub center: [f64; 2],
    pub sigma: f64,
    pub n_normal: usize,
    pub n_eval_anomalies: usize,
    pub n_train_anomalies: usize,
    pub ring_radius: f64,
    pub edge_candidates: usize,
    pub angle_jitter: f64,
    pub seed: u64,
}

impl CaseStudySpec {
    pub fn new(seed: u64) -> Self {
        Self {
            center: [2.0, 2.0],
            sigma: 1.0,
            n_normal: 100,
            n_eval_anomalies: 5,
            n_train_anomalies: 5,
            ring_radius: 2.0,
            edge_candidates: 10,
            angle_jitter: 0.3,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_normal == 0 || self.n_eval_anomalies == 0 {
            return Err(SvddError::InvalidConfig("point counts must be positive".into()));
        }
        // written so that NaN fails every check
        let ok = self.sigma > 0.0 && self.ring_radius > 0.0 && self.angle_jitter >= 0.0;
        if !ok {
            return Err(SvddError::InvalidConfig(
                "sigma and ring radius must be positive, jitter non-negative".into(),
            ));
        }
        if self.edge_candidates == 0 || self.edge_candidates > self.n_normal {
            return Err(SvddError::InvalidConfig(format!(
                "edge candidates must be in 1..={}",
                self.n_normal
            )));
        }
        if self.n_train_anomalies >= self.n_normal {
            return Err(SvddError::InvalidConfig(
                "training anomalies must be outnumbered by normals".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct CaseStudyData {
    /// Normals (+1) followed by the training anomalies (-1), if any.
    pub train: EmbeddingDataset,
    /// Held-out anomalies used for the distance ratios.
    pub eval_anomalies: EmbeddingDataset,
}

impl CaseStudyData {
    pub fn normals(&self) -> EmbeddingDataset {
        self.train.filter_label(NORMAL).expect("case study always has normals")
    }
}

pub fn generate_case_study(spec: &CaseStudySpec) -> Result<CaseStudyData> {
    spec.validate()?;
    let mut rng = SeededRng::new(spec.seed);
    let [cx, cy] = spec.center;
    let normals: Vec<[f64; 2]> = (0..spec.n_normal)
        .map(|_| {
            let x = cx + spec.sigma * rng.normal();
            let y = cy + spec.sigma * rng.normal();
            [x, y]
        })
        .collect();

    let mut by_distance: Vec<usize> = (0..normals.len()).collect();
    let dist2 = |p: &[f64; 2]| (p[0] - cx).powi(2) + (p[1] - cy).powi(2);
    by_distance.sort_by(|&a, &b| dist2(&normals[b]).total_cmp(&dist2(&normals[a])).then(a.cmp(&b)));
    let anchor = normals[by_distance[rng.below(spec.edge_candidates)]];
    let anchor_angle = (anchor[1] - cy).atan2(anchor[0] - cx);

    let ring_point = |rng: &mut SeededRng| {
        let theta = anchor_angle + spec.angle_jitter * rng.normal();
        [cx + spec.ring_radius * theta.cos(), cy + spec.ring_radius * theta.sin()]
    };
    let eval: Vec<[f64; 2]> = (0..spec.n_eval_anomalies).map(|_| ring_point(&mut rng)).collect();
    let train_anoms: Vec<[f64; 2]> =
        (0..spec.n_train_anomalies).map(|_| ring_point(&mut rng)).collect();

    let mut ids: Vec<String> = (0..spec.n_normal).map(|i| format!("normal-{i}")).collect();
    ids.extend((0..spec.n_train_anomalies).map(|i| format!("train-anomaly-{i}")));
    let mut labels = vec![NORMAL; spec.n_normal];
    labels.extend(std::iter::repeat_n(ANOMALY, spec.n_train_anomalies));
    let rows: Vec<[f64; 2]> = normals.into_iter().chain(train_anoms).collect();
    let train = EmbeddingDataset::new(to_matrix(&rows), labels, ids)?;

    let eval_ids = (0..eval.len()).map(|i| format!("eval-anomaly-{i}")).collect();
    let eval_anomalies =
        EmbeddingDataset::new(to_matrix(&eval), vec![ANOMALY; eval.len()], eval_ids)?;
    Ok(CaseStudyData {
        train,
        eval_anomalies,
    })
}

fn to_matrix(rows: &[[f64; 2]]) -> Array2<f64> {
    Array2::from_shape_fn((rows.len(), 2), |(i, j)| rows[i][j])
}

pub const CENTER_INLIER_PREFIX: &str = "inlier-";
pub const CENTER_MISLABELED_PREFIX: &str = "mislabeled-";
pub const CENTER_ANOMALY_PREFIX: &str = "anomaly-";

/// 10 inliers from `N(0, 5I)`, 2 far points from `N([45,45], 10I)` wrongly
/// labelled +1, and 7 anomalies: 2 from `N([45,45], 10I)`, 3 from
/// `N([10,5], 3I)`, 1 from `N([-5,-10], 2I)`, 1 from `N([-10,-20], 2I)`.
/// The second argument of each Gaussian is a variance.
pub fn generate_center_illustration(seed: u64) -> Result<EmbeddingDataset> {
    let mut rng = SeededRng::new(seed);
    let mut draw = |mean: [f64; 2], var: f64, count: usize| -> Vec<[f64; 2]> {
        let sd = var.sqrt();
        (0..count)
            .map(|_| {
                let x = mean[0] + sd * rng.normal();
                let y = mean[1] + sd * rng.normal();
                [x, y]
            })
            .collect()
    };
    let inliers = draw([0.0, 0.0], 5.0, 10);
    let mislabeled = draw([45.0, 45.0], 10.0, 2);
    let mut anomalies = draw([45.0, 45.0], 10.0, 2);
    anomalies.extend(draw([10.0, 5.0], 3.0, 3));
    anomalies.extend(draw([-5.0, -10.0], 2.0, 1));
    anomalies.extend(draw([-10.0, -20.0], 2.0, 1));

    let mut ids = Vec::with_capacity(19);
    ids.extend((0..inliers.len()).map(|i| format!("{CENTER_INLIER_PREFIX}{i}")));
    ids.extend((0..mislabeled.len()).map(|i| format!("{CENTER_MISLABELED_PREFIX}{i}")));
    ids.extend((0..anomalies.len()).map(|i| format!("{CENTER_ANOMALY_PREFIX}{i}")));
    let mut labels = vec![NORMAL; inliers.len() + mislabeled.len()];
    labels.extend(vec![ANOMALY; anomalies.len()]);
    let rows: Vec<[f64; 2]> = inliers
        .into_iter()
        .chain(mislabeled)
        .chain(anomalies)
        .collect();
    EmbeddingDataset::new(to_matrix(&rows), labels, ids)
}
