//! Ranking metrics for anomaly scores: MAP, Recall@k and ROC AUC.
//!
//! Higher scores mean more anomalous. For MAP and Recall@k, tied scores are
//! ordered with anomalies after normals, so reported values are lower bounds.
//! AUC gives half credit to ties.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::dataset::ANOMALY;
use crate::error::{Result, SvddError};
use crate::fsutil::{read_text, write_atomic};

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreReport {
    pub ids: Vec<String>,
    pub labels: Vec<i8>,
    pub scores: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricSummary {
    pub map: f64,
    /// Keyed by k in percent.
    pub recall_at: BTreeMap<u32, f64>,
    pub auc: f64,
}

impl ScoreReport {
    pub fn new(ids: Vec<String>, labels: Vec<i8>, scores: Vec<f64>) -> Result<Self> {
        if ids.len() != labels.len() || labels.len() != scores.len() {
            return Err(SvddError::DimensionMismatch(format!(
                "{} ids, {} labels, {} scores",
                ids.len(),
                labels.len(),
                scores.len()
            )));
        }
        if let Some((i, &y)) = labels.iter().enumerate().find(|(_, &y)| y != 1 && y != -1) {
            return Err(SvddError::InvalidLabel { row: i, value: y as i64 });
        }
        Ok(Self { ids, labels, scores })
    }

    /// Report with generated ids `0..n`.
    pub fn from_scores(labels: Vec<i8>, scores: Vec<f64>) -> Result<Self> {
        let ids = (0..labels.len()).map(|i| i.to_string()).collect();
        Self::new(ids, labels, scores)
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn n_anomaly(&self) -> usize {
        self.labels.iter().filter(|&&y| y == ANOMALY).count()
    }

    /// Writes `id,label,score`. Scores use the shortest round-trip decimal form.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("id,label,score\n");
        for ((id, y), v) in self.ids.iter().zip(&self.labels).zip(&self.scores) {
            let _ = writeln!(s, "{id},{y},{v}");
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.trim() == "id,label,score" => {}
            _ => {
                return Err(SvddError::Parse {
                    what: "score report",
                    line: 1,
                    reason: "expected header id,label,score".into(),
                })
            }
        }
        let (mut ids, mut labels, mut scores) = (Vec::new(), Vec::new(), Vec::new());
        for (i, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let err = |reason: String| SvddError::Parse {
                what: "score report",
                line: i + 1,
                reason,
            };
            // ids may contain commas, so split from the right
            let mut parts = line.rsplitn(3, ',');
            let score = parts.next().ok_or_else(|| err("missing score".into()))?;
            let label = parts.next().ok_or_else(|| err("missing label".into()))?;
            let id = parts.next().ok_or_else(|| err("missing id".into()))?;
            scores.push(score.trim().parse::<f64>().map_err(|e| err(format!("score: {e}")))?);
            labels.push(label.trim().parse::<i8>().map_err(|e| err(format!("label: {e}")))?);
            ids.push(id.to_string());
        }
        Self::new(ids, labels, scores)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_csv().as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_csv(&read_text(path)?)
    }
}

fn check_scores(r: &ScoreReport) -> Result<()> {
    if let Some(i) = r.scores.iter().position(|s| !s.is_finite()) {
        return Err(SvddError::MetricUndefined(format!("score {i} is not finite")));
    }
    Ok(())
}

fn require_anomaly(r: &ScoreReport) -> Result<usize> {
    check_scores(r)?;
    let m = r.n_anomaly();
    if m == 0 {
        return Err(SvddError::MetricUndefined("no anomalies in the report".into()));
    }
    Ok(m)
}

fn require_both_classes(r: &ScoreReport) -> Result<(usize, usize)> {
    let m = require_anomaly(r)?;
    let normals = r.len() - m;
    if normals == 0 {
        return Err(SvddError::MetricUndefined("no normal samples in the report".into()));
    }
    Ok((m, normals))
}

/// Anomaly flags in ranking order: descending score, anomalies last among ties.
fn ranked_is_anomaly(r: &ScoreReport) -> Vec<bool> {
    let mut idx: Vec<usize> = (0..r.len()).collect();
    idx.sort_by(|&a, &b| {
        r.scores[b]
            .total_cmp(&r.scores[a])
            .then_with(|| (r.labels[a] == ANOMALY).cmp(&(r.labels[b] == ANOMALY)))
    });
    idx.into_iter().map(|i| r.labels[i] == ANOMALY).collect()
}

/// `(1/m) sum_i i / P(a_i)` where `P(a_i)` is the rank of the i-th anomaly.
pub fn mean_average_precision(r: &ScoreReport) -> Result<f64> {
    let m = require_anomaly(r)?;
    let mut found = 0usize;
    let mut total = 0.0;
    for (pos, is_anomaly) in ranked_is_anomaly(r).into_iter().enumerate() {
        if is_anomaly {
            found += 1;
            total += found as f64 / (pos + 1) as f64;
        }
    }
    Ok(total / m as f64)
}

/// Number of top-ranked samples examined for `k` percent of `n`.
pub fn recall_cutoff(k: f64, n: usize) -> usize {
    (k * n as f64 / 100.0 + 1e-9).floor() as usize
}

/// Fraction of anomalies among the top `floor(k% * n)` scores.
pub fn recall_at_k(r: &ScoreReport, k: f64) -> Result<f64> {
    let m = require_anomaly(r)?;
    if !(k > 0.0 && k <= 100.0) {
        return Err(SvddError::InvalidConfig(format!("recall k={k} must lie in (0, 100]")));
    }
    let cutoff = recall_cutoff(k, r.len());
    let hits = ranked_is_anomaly(r).into_iter().take(cutoff).filter(|&a| a).count();
    Ok(hits as f64 / m as f64)
}

/// Cumulative (false positive, true positive) counts after each distinct score,
/// scanning thresholds from high to low. Starts at (0, 0).
fn roc_counts(r: &ScoreReport) -> Vec<(u64, u64)> {
    let mut idx: Vec<usize> = (0..r.len()).collect();
    idx.sort_by(|&a, &b| r.scores[b].total_cmp(&r.scores[a]));
    let mut out = vec![(0u64, 0u64)];
    let (mut fp, mut tp) = (0u64, 0u64);
    for (pos, &i) in idx.iter().enumerate() {
        if r.labels[i] == ANOMALY {
            tp += 1;
        } else {
            fp += 1;
        }
        let group_ends = idx
            .get(pos + 1)
            .is_none_or(|&j| r.scores[j] != r.scores[i]);
        if group_ends {
            out.push((fp, tp));
        }
    }
    out
}

/// Trapezoidal area under the ROC curve, computed in integer arithmetic and
/// divided once, so it equals the tie-aware Mann-Whitney statistic.
pub fn auc(r: &ScoreReport) -> Result<f64> {
    let (m, normals) = require_both_classes(r)?;
    let counts = roc_counts(r);
    let twice_area: u128 = counts
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) as u128 * (w[1].1 + w[0].1) as u128)
        .sum();
    Ok(twice_area as f64 / (2 * m as u128 * normals as u128) as f64)
}

/// ROC staircase `(fpr, tpr)`, one point per distinct score plus the origin.
pub fn roc_points(r: &ScoreReport) -> Result<Vec<(f64, f64)>> {
    let (m, normals) = require_both_classes(r)?;
    Ok(roc_counts(r)
        .into_iter()
        .map(|(fp, tp)| (fp as f64 / normals as f64, tp as f64 / m as f64))
        .collect())
}

pub fn roc_csv(points: &[(f64, f64)]) -> String {
    let mut s = String::from("fpr,tpr\n");
    for (f, t) in points {
        let _ = writeln!(s, "{f},{t}");
    }
    s
}

pub const DEFAULT_RECALL_K: &[u32] = &[5];

pub fn evaluate(r: &ScoreReport, recall_ks: &[u32]) -> Result<MetricSummary> {
    let mut recall_at = BTreeMap::new();
    for &k in recall_ks {
        recall_at.insert(k, recall_at_k(r, k as f64)?);
    }
    Ok(MetricSummary {
        map: mean_average_precision(r)?,
        recall_at,
        auc: auc(r)?,
    })
}

impl MetricSummary {
    /// `(name, value)` pairs in output order.
    pub fn entries(&self) -> Vec<(String, f64)> {
        let mut out = vec![("map".to_string(), self.map)];
        out.extend(self.recall_at.iter().map(|(k, v)| (format!("recall_at_{k}"), *v)));
        out.push(("auc".to_string(), self.auc));
        out
    }

    /// Header line plus one data row.
    pub fn to_csv(&self) -> String {
        let e = self.entries();
        let header: Vec<&str> = e.iter().map(|(k, _)| k.as_str()).collect();
        let row: Vec<String> = e.iter().map(|(_, v)| v.to_string()).collect();
        format!("{}\n{}\n", header.join(","), row.join(","))
    }

    pub fn to_table(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.entries() {
            let _ = writeln!(s, "{k:<14} {:>8.4}", v);
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;
    use proptest::prelude::*;

    fn report(labels: &[i8], scores: &[f64]) -> ScoreReport {
        ScoreReport::from_scores(labels.to_vec(), scores.to_vec()).unwrap()
    }

    /// Positions (1-based) under the pessimistic tie rule, by pairwise counting.
    fn brute_positions(r: &ScoreReport) -> Vec<(usize, bool)> {
        (0..r.len())
            .map(|i| {
                let a = r.labels[i] == ANOMALY;
                let ahead = (0..r.len())
                    .filter(|&j| {
                        j != i
                            && (r.scores[j] > r.scores[i]
                                || (r.scores[j] == r.scores[i]
                                    && ((!a && r.labels[j] != ANOMALY && j < i)
                                        || (a && (r.labels[j] != ANOMALY || j < i)))))
                    })
                    .count();
                (ahead + 1, a)
            })
            .collect()
    }

    fn brute_map(r: &ScoreReport) -> f64 {
        let pos = brute_positions(r);
        let anomalies: Vec<usize> = pos.iter().filter(|p| p.1).map(|p| p.0).collect();
        let m = anomalies.len() as f64;
        anomalies
            .iter()
            .map(|&p| anomalies.iter().filter(|&&q| q <= p).count() as f64 / p as f64)
            .sum::<f64>()
            / m
    }

    fn brute_recall(r: &ScoreReport, k: f64) -> f64 {
        let cutoff = (k * r.len() as f64 / 100.0 + 1e-9).floor() as usize;
        let pos = brute_positions(r);
        let m = pos.iter().filter(|p| p.1).count() as f64;
        pos.iter().filter(|p| p.1 && p.0 <= cutoff).count() as f64 / m
    }

    fn brute_auc(r: &ScoreReport) -> f64 {
        let mut u = 0.0;
        let (mut m, mut nn) = (0.0, 0.0);
        for i in 0..r.len() {
            if r.labels[i] != ANOMALY {
                nn += 1.0;
                continue;
            }
            m += 1.0;
            for j in 0..r.len() {
                if r.labels[j] == ANOMALY {
                    continue;
                }
                if r.scores[i] > r.scores[j] {
                    u += 1.0;
                } else if r.scores[i] == r.scores[j] {
                    u += 0.5;
                }
            }
        }
        u / (m * nn)
    }

    fn random_report(seed: u64, n: usize, levels: usize) -> ScoreReport {
        let mut rng = SeededRng::new(seed);
        let mut labels: Vec<i8> = (0..n).map(|_| if rng.uniform() < 0.3 { -1 } else { 1 }).collect();
        labels[0] = -1;
        labels[n - 1] = 1;
        let scores: Vec<f64> = (0..n).map(|_| rng.below(levels) as f64 * 0.25).collect();
        report(&labels, &scores)
    }

    #[test]
    fn map_hand_cases() {
        let r = report(&[-1, -1, 1, -1, 1], &[5.0, 4.0, 3.0, 2.0, 1.0]);
        assert!((mean_average_precision(&r).unwrap() - 0.9166666666666666).abs() < 1e-9);
        let last = report(&[1, 1, 1, 1, -1], &[5.0, 4.0, 3.0, 2.0, 1.0]);
        assert_eq!(mean_average_precision(&last).unwrap(), 0.2);
        let top = report(&[-1, -1, 1, 1], &[9.0, 8.0, 1.0, 0.0]);
        assert_eq!(mean_average_precision(&top).unwrap(), 1.0);
        assert!(mean_average_precision(&report(&[1, 1], &[1.0, 2.0])).is_err());
    }

    #[test]
    fn recall_hand_cases() {
        let mut labels = vec![1i8; 100];
        for p in (0..5).chain(95..100) {
            labels[p] = -1;
        }
        let scores: Vec<f64> = (0..100).map(|i| 100.0 - i as f64).collect();
        let r = report(&labels, &scores);
        assert_eq!(recall_at_k(&r, 5.0).unwrap(), 0.5);
        assert_eq!(recall_at_k(&r, 100.0).unwrap(), 1.0);
        let low = report(&[1, 1, 1, -1], &[4.0, 3.0, 2.0, 1.0]);
        assert_eq!(recall_at_k(&low, 25.0).unwrap(), 0.0);
        assert!(recall_at_k(&r, 0.0).is_err());
        assert!(recall_at_k(&r, 100.5).is_err());
    }

    #[test]
    fn auc_degenerate_cases() {
        assert_eq!(auc(&report(&[-1, -1, 1], &[3.0, 2.0, 1.0])).unwrap(), 1.0);
        assert_eq!(auc(&report(&[-1, -1, 1], &[1.0, 2.0, 3.0])).unwrap(), 0.0);
        assert_eq!(auc(&report(&[-1, 1, 1, -1], &[7.0; 4])).unwrap(), 0.5);
        assert!(auc(&report(&[-1, -1], &[1.0, 2.0])).is_err());
        assert!(auc(&report(&[1, 1], &[1.0, 2.0])).is_err());
        assert!(auc(&report(&[-1, 1], &[f64::NAN, 2.0])).is_err());
    }

    #[test]
    fn roc_hand_cases() {
        let sep = roc_points(&report(&[-1, -1, 1], &[3.0, 2.0, 1.0])).unwrap();
        assert!(sep.contains(&(0.0, 1.0)));
        assert_eq!(sep.first(), Some(&(0.0, 0.0)));
        assert_eq!(sep.last(), Some(&(1.0, 1.0)));
        let flat = roc_points(&report(&[-1, 1, 1], &[2.0; 3])).unwrap();
        assert_eq!(flat, vec![(0.0, 0.0), (1.0, 1.0)]);
    }

    #[test]
    fn brute_force_oracles_500_sets() {
        for seed in 0..500u64 {
            let n = 2 + (seed as usize % 60);
            let r = random_report(seed, n, 1 + seed as usize % 12);
            assert!((mean_average_precision(&r).unwrap() - brute_map(&r)).abs() <= 1e-12, "seed {seed}");
            for k in [1.0, 5.0, 10.0, 33.0, 50.0, 100.0] {
                assert!((recall_at_k(&r, k).unwrap() - brute_recall(&r, k)).abs() <= 1e-12);
            }
            let a = auc(&r).unwrap();
            assert!((a - brute_auc(&r)).abs() <= 1e-12, "seed {seed}");
            let pts = roc_points(&r).unwrap();
            let trap: f64 = pts.windows(2).map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0).sum();
            assert!((trap - a).abs() <= 1e-12);
        }
    }

    #[test]
    fn csv_round_trip() {
        let r = ScoreReport::new(
            vec!["a,b".into(), "x".into()],
            vec![-1, 1],
            vec![0.1 + 0.2, 1e-300],
        )
        .unwrap();
        assert_eq!(ScoreReport::from_csv(&r.to_csv()).unwrap(), r);
        assert!(ScoreReport::from_csv("nope\n").is_err());
    }

    #[test]
    fn summary_export() {
        let r = report(&[-1, -1, 1, -1, 1], &[5.0, 4.0, 3.0, 2.0, 1.0]);
        let s = evaluate(&r, &[5, 40]).unwrap();
        let csv = s.to_csv();
        assert!(csv.starts_with("map,recall_at_5,recall_at_40,auc\n"));
        assert!(s.to_table().contains("auc"));
        assert_eq!(roc_csv(&[(0.0, 0.0), (1.0, 1.0)]), "fpr,tpr\n0,0\n1,1\n");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(128))]

        #[test]
        fn rank_invariance(seed in any::<u64>(), n in 2usize..40) {
            let r = random_report(seed, n, 7);
            let t = ScoreReport::from_scores(r.labels.clone(), r.scores.iter().map(|s| (3.0 * s + 1.0).exp()).collect()).unwrap();
            prop_assert_eq!(mean_average_precision(&r).unwrap(), mean_average_precision(&t).unwrap());
            prop_assert_eq!(recall_at_k(&r, 20.0).unwrap(), recall_at_k(&t, 20.0).unwrap());
            prop_assert_eq!(auc(&r).unwrap(), auc(&t).unwrap());
        }

        #[test]
        fn order_independence(seed in any::<u64>(), n in 2usize..40) {
            let r = random_report(seed, n, 5);
            let mut idx: Vec<usize> = (0..n).collect();
            SeededRng::new(seed ^ 1).shuffle(&mut idx);
            let p = ScoreReport::from_scores(
                idx.iter().map(|&i| r.labels[i]).collect(),
                idx.iter().map(|&i| r.scores[i]).collect(),
            ).unwrap();
            prop_assert_eq!(mean_average_precision(&r).unwrap(), mean_average_precision(&p).unwrap());
            prop_assert_eq!(recall_at_k(&r, 30.0).unwrap(), recall_at_k(&p, 30.0).unwrap());
            prop_assert_eq!(auc(&r).unwrap(), auc(&p).unwrap());
            prop_assert_eq!(roc_points(&r).unwrap(), roc_points(&p).unwrap());
        }

        #[test]
        fn flips(seed in any::<u64>(), n in 2usize..40) {
            // distinct scores
            let base = random_report(seed, n, 1);
            let scores: Vec<f64> = {
                let mut rng = SeededRng::new(seed);
                let mut s: Vec<f64> = (0..n).map(|i| i as f64).collect();
                rng.shuffle(&mut s);
                s
            };
            let r = ScoreReport::from_scores(base.labels.clone(), scores.clone()).unwrap();
            let a = auc(&r).unwrap();
            let flipped = ScoreReport::from_scores(base.labels.iter().map(|y| -y).collect(), scores.clone()).unwrap();
            let reversed = ScoreReport::from_scores(base.labels.clone(), scores.iter().map(|s| -s).collect()).unwrap();
            let both = ScoreReport::from_scores(base.labels.iter().map(|y| -y).collect(), scores.iter().map(|s| -s).collect()).unwrap();
            prop_assert!((a + auc(&flipped).unwrap() - 1.0).abs() < 1e-12);
            prop_assert!((a + auc(&reversed).unwrap() - 1.0).abs() < 1e-12);
            prop_assert!((auc(&both).unwrap() - a).abs() < 1e-12);
        }

        #[test]
        fn roc_is_monotone(seed in any::<u64>(), n in 2usize..50) {
            let r = random_report(seed, n, 6);
            let pts = roc_points(&r).unwrap();
            prop_assert_eq!(pts[0], (0.0, 0.0));
            prop_assert_eq!(*pts.last().unwrap(), (1.0, 1.0));
            for w in pts.windows(2) {
                prop_assert!(w[1].0 >= w[0].0 && w[1].1 >= w[0].1);
            }
        }

        #[test]
        fn metrics_in_unit_interval(seed in any::<u64>(), n in 2usize..50) {
            let r = random_report(seed, n, 4);
            let s = evaluate(&r, &[5, 10]).unwrap();
            for (_, v) in s.entries() {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }
    }
}
