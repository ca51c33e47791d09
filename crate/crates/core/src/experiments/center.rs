//! Robustness of the signed center to mislabeled far points, in raw 2-D space.

use std::fmt::Write as _;

use ndarray::Array1;

use crate::dataset::{generate_center_illustration, EmbeddingDataset, CENTER_INLIER_PREFIX, NORMAL};
use crate::error::Result;
use crate::objectives::{plain_center, signed_center};

#[derive(Debug, Clone, PartialEq)]
pub struct CenterIllustrationReport {
    pub seed: u64,
    /// Mean of all +1-labeled points, mislabeled ones included.
    pub plain_center: Array1<f64>,
    pub signed_center: Array1<f64>,
    /// Mean of the true inliers.
    pub ground_truth_mean: Array1<f64>,
    pub plain_distance: f64,
    pub signed_distance: f64,
    pub data: EmbeddingDataset,
}

fn dist(a: &Array1<f64>, b: &Array1<f64>) -> f64 {
    (a - b).mapv(|v| v * v).sum().sqrt()
}

pub fn center_report(seed: u64, data: EmbeddingDataset) -> Result<CenterIllustrationReport> {
    let inliers: Vec<usize> = (0..data.len())
        .filter(|&i| data.ids()[i].starts_with(CENTER_INLIER_PREFIX))
        .collect();
    let truth = plain_center(data.select(&inliers)?.vectors())?.vector;
    let plain = plain_center(data.filter_label(NORMAL)?.vectors())?.vector;
    let signed = signed_center(data.vectors(), data.labels())?.vector;
    Ok(CenterIllustrationReport {
        seed,
        plain_distance: dist(&plain, &truth),
        signed_distance: dist(&signed, &truth),
        plain_center: plain,
        signed_center: signed,
        ground_truth_mean: truth,
        data,
    })
}

pub fn run_center_illustration(seed: u64) -> Result<CenterIllustrationReport> {
    center_report(seed, generate_center_illustration(seed)?)
}

impl CenterIllustrationReport {
    /// Columns `seed,name,x,y,distance_to_truth`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("seed,name,x,y,distance_to_truth\n");
        self.write_rows(&mut s);
        s
    }

    fn write_rows(&self, s: &mut String) {
        let rows = [
            ("plain_center", &self.plain_center, self.plain_distance),
            ("signed_center", &self.signed_center, self.signed_distance),
            ("ground_truth_mean", &self.ground_truth_mean, 0.0),
        ];
        for (name, v, d) in rows {
            let _ = writeln!(s, "{},{name},{},{},{d}", self.seed, v[0], v[1]);
        }
    }

    pub fn points_csv(&self) -> String {
        let mut s = String::from("seed,id,label,x,y\n");
        self.write_points(&mut s);
        s
    }

    fn write_points(&self, s: &mut String) {
        for ((id, y), r) in self.data.ids().iter().zip(self.data.labels()).zip(self.data.vectors().rows()) {
            let _ = writeln!(s, "{},{id},{y},{},{}", self.seed, r[0], r[1]);
        }
    }
}

pub fn center_csv(reports: &[CenterIllustrationReport]) -> String {
    let mut s = String::from("seed,name,x,y,distance_to_truth\n");
    for r in reports {
        r.write_rows(&mut s);
    }
    s
}

pub fn center_points_csv(reports: &[CenterIllustrationReport]) -> String {
    let mut s = String::from("seed,id,label,x,y\n");
    for r in reports {
        r.write_points(&mut s);
    }
    s
}

pub fn center_table(reports: &[CenterIllustrationReport]) -> String {
    let mut s = format!("{:>6} {:>22} {:>22} {:>10} {:>10}\n", "seed", "plain_center", "signed_center", "d_plain", "d_signed");
    for r in reports {
        let _ = writeln!(
            s,
            "{:>6} ({:>9.3},{:>9.3}) ({:>9.3},{:>9.3}) {:>10.4} {:>10.4}",
            r.seed,
            r.plain_center[0],
            r.plain_center[1],
            r.signed_center[0],
            r.signed_center[1],
            r.plain_distance,
            r.signed_distance
        );
    }
    s
}
