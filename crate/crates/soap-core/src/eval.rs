//! Detection metrics: greedy matching, interpolated average precision,
//! range and speed bucketing, and the min-point level split.
//!
//! Matching is class-aware and greedy in descending score, per frame. AP uses
//! 101-point interpolation over the precision envelope. Buckets are defined
//! by ground-truth attributes: a matched prediction inherits its ground
//! truth's bucket; an unmatched prediction counts against range buckets by
//! its own center range and against every speed bucket.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geom::{iou_3d, Box3d};

/// Level-1 keeps objects with more than this many interior points.
pub const LEVEL1_MIN_POINTS: u64 = 5;

/// Number of recall grid points for interpolated AP.
pub const AP_GRID: usize = 101;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatchMode {
    /// 3D IoU above threshold.
    Iou,
    /// BEV center distance within threshold (meters).
    CenterDistance,
}

/// A ground-truth box with the attributes the metrics bucket on.
#[derive(Debug, Clone)]
pub struct GtBox {
    pub bbox: Box3d,
    pub point_count: u64,
    /// Instantaneous speed, when known.
    pub speed: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatchConfig {
    pub mode: MatchMode,
    /// IoU fractions or meters, ascending.
    pub thresholds: Vec<f64>,
    /// [min, max) range buckets on ground-truth distance from the ego.
    pub range_buckets: Vec<(f64, f64)>,
    /// [min, max) speed buckets on ground-truth speed.
    pub speed_buckets: Vec<(f64, f64)>,
    /// Level 2 keeps all objects; level 1 only those with more than
    /// [`LEVEL1_MIN_POINTS`] interior points.
    pub level2: bool,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self {
            mode: MatchMode::CenterDistance,
            thresholds: vec![0.5, 1.0, 2.0, 4.0],
            range_buckets: vec![(0.0, 30.0), (30.0, 50.0)],
            speed_buckets: vec![(0.0, 0.2), (0.2, f64::INFINITY)],
            level2: true,
        }
    }
}

impl MatchConfig {
    /// IoU-matched configuration in the style of range-based 3D benchmarks.
    pub fn iou_style() -> Self {
        Self { mode: MatchMode::Iou, thresholds: vec![0.7], ..Default::default() }
    }
}

/// AP per threshold plus their mean; `None` marks an absent metric (no
/// ground truth in the slice).
#[derive(Debug, Clone, Serialize)]
pub struct MetricSet {
    pub gt_count: usize,
    pub prediction_count: usize,
    pub ap_per_threshold: Vec<Option<f64>>,
    pub mean_ap: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BucketMetrics {
    pub name: String,
    pub metrics: MetricSet,
}

#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub mode: MatchMode,
    pub thresholds: Vec<f64>,
    pub level2: bool,
    pub overall: MetricSet,
    pub range_buckets: Vec<BucketMetrics>,
    pub speed_buckets: Vec<BucketMetrics>,
}

fn bev_range(b: &Box3d) -> f64 {
    b.center.x.hypot(b.center.y)
}

/// One prediction's outcome at a fixed threshold.
#[derive(Debug, Clone, Copy)]
struct Outcome {
    score: f64,
    /// (frame, gt index) of the matched ground truth, if any.
    matched: Option<(usize, usize)>,
}

/// Greedy per-frame matching at one threshold. Ground truth is the
/// level-filtered set; returns one outcome per prediction.
fn match_frame(preds: &[Box3d], gts: &[GtBox], mode: MatchMode, threshold: f64, frame: usize) -> Vec<Outcome> {
    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&i, &j| {
        preds[j].score.partial_cmp(&preds[i].score).unwrap_or(std::cmp::Ordering::Equal).then(i.cmp(&j))
    });
    let mut taken = vec![false; gts.len()];
    let mut outcomes = vec![Outcome { score: 0.0, matched: None }; preds.len()];
    for &i in &order {
        let p = &preds[i];
        let mut best: Option<(usize, f64)> = None;
        for (k, g) in gts.iter().enumerate() {
            if taken[k] || g.bbox.label != p.label {
                continue;
            }
            match mode {
                MatchMode::Iou => {
                    let iou = iou_3d(p, &g.bbox);
                    if iou > threshold && best.map_or(true, |(_, b)| iou > b) {
                        best = Some((k, iou));
                    }
                }
                MatchMode::CenterDistance => {
                    let d = (p.center.x - g.bbox.center.x).hypot(p.center.y - g.bbox.center.y);
                    if d <= threshold && best.map_or(true, |(_, b)| d < b) {
                        best = Some((k, d));
                    }
                }
            }
        }
        outcomes[i] = Outcome {
            score: p.score,
            matched: best.map(|(k, _)| {
                taken[k] = true;
                (frame, k)
            }),
        };
    }
    outcomes
}

/// Interpolated AP over the precision envelope: mean over the recall grid of
/// the maximum precision at recall at or above each grid point.
fn interpolated_ap(mut scored: Vec<(f64, bool)>, n_gt: usize) -> Option<f64> {
    if n_gt == 0 {
        return None;
    }
    scored.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal));
    let mut curve: Vec<(f64, f64)> = Vec::with_capacity(scored.len());
    let (mut tp, mut fp) = (0usize, 0usize);
    for (_, is_tp) in &scored {
        if *is_tp {
            tp += 1;
        } else {
            fp += 1;
        }
        curve.push((tp as f64 / n_gt as f64, tp as f64 / (tp + fp) as f64));
    }
    let mut ap = 0.0;
    for g in 0..AP_GRID {
        let r = g as f64 / (AP_GRID - 1) as f64;
        let p = curve
            .iter()
            .filter(|(recall, _)| *recall >= r - 1e-12)
            .map(|(_, prec)| *prec)
            .fold(0.0f64, f64::max);
        ap += p;
    }
    Some(ap / AP_GRID as f64)
}

/// Which slice of the report a scored prediction belongs to.
trait Slice {
    fn keeps_gt(&self, gt: &GtBox) -> bool;
    /// Whether an unmatched prediction counts against this slice.
    fn keeps_unmatched(&self, pred: &Box3d) -> bool;
}

struct Everything;
impl Slice for Everything {
    fn keeps_gt(&self, _: &GtBox) -> bool {
        true
    }
    fn keeps_unmatched(&self, _: &Box3d) -> bool {
        true
    }
}

struct RangeSlice(f64, f64);
impl Slice for RangeSlice {
    fn keeps_gt(&self, gt: &GtBox) -> bool {
        let r = bev_range(&gt.bbox);
        r >= self.0 && r < self.1
    }
    fn keeps_unmatched(&self, pred: &Box3d) -> bool {
        let r = bev_range(pred);
        r >= self.0 && r < self.1
    }
}

struct SpeedSlice(f64, f64);
impl Slice for SpeedSlice {
    fn keeps_gt(&self, gt: &GtBox) -> bool {
        gt.speed.is_some_and(|s| s >= self.0 && s < self.1)
    }
    fn keeps_unmatched(&self, _: &Box3d) -> bool {
        true
    }
}

/// Precision/recall and AP over all frames and thresholds, with bucket
/// breakdowns. Predictions and ground truth are local-frame per-frame lists.
pub fn match_and_score(
    predictions: &[Vec<Box3d>],
    ground_truth: &[Vec<GtBox>],
    cfg: &MatchConfig,
) -> EvalReport {
    assert_eq!(predictions.len(), ground_truth.len(), "prediction and ground-truth frames must align");
    assert!(!cfg.thresholds.is_empty(), "thresholds must be non-empty");
    let gts: Vec<Vec<GtBox>> = ground_truth
        .iter()
        .map(|frame| {
            frame
                .iter()
                .filter(|g| cfg.level2 || g.point_count > LEVEL1_MIN_POINTS)
                .cloned()
                .collect()
        })
        .collect();

    // outcomes[threshold][frame][prediction]
    let outcomes: Vec<Vec<Vec<Outcome>>> = cfg
        .thresholds
        .iter()
        .map(|&thr| {
            predictions
                .par_iter()
                .zip(&gts)
                .enumerate()
                .map(|(frame, (preds, gt))| match_frame(preds, gt, cfg.mode, thr, frame))
                .collect()
        })
        .collect();

    let metric_set = |slice: &dyn Slice| -> MetricSet {
        let gt_count: usize =
            gts.iter().flatten().filter(|g| slice.keeps_gt(g)).count();
        let mut prediction_count = 0usize;
        let ap_per_threshold: Vec<Option<f64>> = outcomes
            .iter()
            .map(|per_frame| {
                let mut scored: Vec<(f64, bool)> = Vec::new();
                let mut n_preds = 0usize;
                for (frame, frame_outcomes) in per_frame.iter().enumerate() {
                    for (pi, o) in frame_outcomes.iter().enumerate() {
                        match o.matched {
                            Some((f, k)) => {
                                let gt = &gts[f][k];
                                if slice.keeps_gt(gt) {
                                    scored.push((o.score, true));
                                    n_preds += 1;
                                }
                            }
                            None => {
                                if slice.keeps_unmatched(&predictions[frame][pi]) {
                                    scored.push((o.score, false));
                                    n_preds += 1;
                                }
                            }
                        }
                    }
                }
                prediction_count = prediction_count.max(n_preds);
                interpolated_ap(scored, gt_count)
            })
            .collect();
        let present: Vec<f64> = ap_per_threshold.iter().flatten().copied().collect();
        let mean_ap =
            (!present.is_empty()).then(|| present.iter().sum::<f64>() / present.len() as f64);
        MetricSet { gt_count, prediction_count, ap_per_threshold, mean_ap }
    };

    let overall = metric_set(&Everything);
    let range_buckets = cfg
        .range_buckets
        .iter()
        .map(|&(lo, hi)| BucketMetrics {
            name: format!("{lo:.0}-{hi:.0}m"),
            metrics: metric_set(&RangeSlice(lo, hi)),
        })
        .collect();
    let speed_buckets = cfg
        .speed_buckets
        .iter()
        .map(|&(lo, hi)| BucketMetrics {
            name: if hi.is_finite() {
                format!("{lo}-{hi}m/s")
            } else {
                format!(">={lo}m/s")
            },
            metrics: metric_set(&SpeedSlice(lo, hi)),
        })
        .collect();
    EvalReport {
        mode: cfg.mode,
        thresholds: cfg.thresholds.clone(),
        level2: cfg.level2,
        overall,
        range_buckets,
        speed_buckets,
    }
}

fn fmt_metric(m: &Option<f64>) -> String {
    match m {
        Some(v) => format!("{:.4}", v),
        None => "absent".into(),
    }
}

/// Aligned-column text table of a report. Empty buckets read "absent".
pub fn render_table(report: &EvalReport) -> String {
    let mut rows: Vec<Vec<String>> = Vec::new();
    let mut header = vec!["bucket".to_string(), "gt".to_string()];
    for t in &report.thresholds {
        header.push(format!("AP@{t}"));
    }
    header.push("mAP".into());
    let push_row = |rows: &mut Vec<Vec<String>>, name: &str, m: &MetricSet| {
        let mut row = vec![name.to_string(), m.gt_count.to_string()];
        for ap in &m.ap_per_threshold {
            row.push(fmt_metric(ap));
        }
        row.push(fmt_metric(&m.mean_ap));
        rows.push(row);
    };
    push_row(&mut rows, "overall", &report.overall);
    for b in report.range_buckets.iter().chain(&report.speed_buckets) {
        push_row(&mut rows, &b.name, &b.metrics);
    }
    let mut widths: Vec<usize> = header.iter().map(String::len).collect();
    for row in &rows {
        for (i, cell) in row.iter().enumerate() {
            widths[i] = widths[i].max(cell.len());
        }
    }
    let render = |row: &[String]| {
        row.iter()
            .enumerate()
            .map(|(i, c)| format!("{:>width$}", c, width = widths[i]))
            .collect::<Vec<_>>()
            .join("  ")
    };
    let mut out = render(&header);
    out.push('\n');
    for row in &rows {
        out.push_str(&render(row));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::Vector3;

    fn boxed(x: f64, y: f64, score: f64) -> Box3d {
        Box3d::new(
            Vector3::new(x, y, 0.85),
            Vector3::new(1.9, 4.6, 1.7),
            0.0,
            None,
            score,
            "vehicle",
        )
        .unwrap()
    }

    fn gt(x: f64, y: f64) -> GtBox {
        GtBox { bbox: boxed(x, y, 1.0), point_count: 50, speed: Some(0.0) }
    }

    /// Independent AP oracle: brute-force precision envelope over the grid.
    fn oracle_ap(outcomes: &[(f64, bool)], n_gt: usize) -> f64 {
        let mut by_score: Vec<&(f64, bool)> = outcomes.iter().collect();
        by_score.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
        let mut sum = 0.0;
        for g in 0..101 {
            let r_target = g as f64 / 100.0;
            let mut best_prec = 0.0f64;
            let (mut tp, mut n) = (0usize, 0usize);
            for (_, is_tp) in &by_score {
                n += 1;
                if *is_tp {
                    tp += 1;
                }
                let recall = tp as f64 / n_gt as f64;
                let prec = tp as f64 / n as f64;
                if recall >= r_target - 1e-12 {
                    best_prec = best_prec.max(prec);
                }
            }
            sum += best_prec;
        }
        sum / 101.0
    }

    #[test]
    fn perfect_predictions_score_one() {
        let gts = vec![vec![gt(0.0, 0.0), gt(10.0, 0.0)], vec![gt(5.0, 5.0)]];
        let preds: Vec<Vec<Box3d>> = gts
            .iter()
            .map(|frame| frame.iter().map(|g| g.bbox.with_score(1.0)).collect())
            .collect();
        let report = match_and_score(&preds, &gts, &MatchConfig::default());
        for ap in &report.overall.ap_per_threshold {
            assert_abs_diff_eq!(ap.unwrap(), 1.0, epsilon = 1e-12);
        }
        let report = match_and_score(&preds, &gts, &MatchConfig::iou_style());
        assert_abs_diff_eq!(report.overall.mean_ap.unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn no_predictions_scores_zero() {
        let gts = vec![vec![gt(0.0, 0.0)]];
        let report = match_and_score(&[vec![]], &gts, &MatchConfig::default());
        assert_abs_diff_eq!(report.overall.mean_ap.unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn tp_plus_disjoint_fp_matches_oracle() {
        // One GT, one matching prediction and one far-away false positive at
        // equal scores.
        let gts = vec![vec![gt(0.0, 0.0)]];
        let preds = vec![vec![boxed(0.1, 0.0, 0.8), boxed(40.0, 0.0, 0.8)]];
        let cfg = MatchConfig { thresholds: vec![2.0], ..Default::default() };
        let report = match_and_score(&preds, &gts, &cfg);
        let expected = oracle_ap(&[(0.8, true), (0.8, false)], 1);
        assert_abs_diff_eq!(report.overall.ap_per_threshold[0].unwrap(), expected, epsilon = 1e-12);
        // Final point of the PR curve: precision 0.5 at recall 1.0.
        assert_eq!(report.overall.gt_count, 1);
        assert_eq!(report.overall.prediction_count, 2);
    }

    #[test]
    fn ap_is_invariant_under_monotone_score_maps() {
        let gts = vec![vec![gt(0.0, 0.0), gt(10.0, 0.0), gt(20.0, 5.0)]];
        let preds = vec![vec![
            boxed(0.2, 0.0, 0.9),
            boxed(10.4, 0.0, 0.6),
            boxed(33.0, 0.0, 0.5),
            boxed(20.0, 5.3, 0.3),
        ]];
        let cfg = MatchConfig { thresholds: vec![1.0], ..Default::default() };
        let base = match_and_score(&preds, &gts, &cfg);
        let squashed: Vec<Vec<Box3d>> = preds
            .iter()
            .map(|f| f.iter().map(|b| b.with_score(b.score * b.score)).collect())
            .collect();
        let mapped = match_and_score(&squashed, &gts, &cfg);
        assert_abs_diff_eq!(
            base.overall.mean_ap.unwrap(),
            mapped.overall.mean_ap.unwrap(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn low_score_fp_never_increases_ap() {
        let gts = vec![vec![gt(0.0, 0.0), gt(12.0, 0.0)]];
        let preds = vec![vec![boxed(0.1, 0.0, 0.9), boxed(12.2, 0.0, 0.7)]];
        let cfg = MatchConfig { thresholds: vec![1.0], ..Default::default() };
        let before = match_and_score(&preds, &gts, &cfg).overall.mean_ap.unwrap();
        let mut with_fp = preds.clone();
        with_fp[0].push(boxed(40.0, 0.0, 0.1));
        let after = match_and_score(&with_fp, &gts, &cfg).overall.mean_ap.unwrap();
        assert!(after <= before + 1e-12);
    }

    #[test]
    fn level_one_filters_sparse_ground_truth() {
        let mut sparse = gt(0.0, 0.0);
        sparse.point_count = 3;
        let dense = gt(10.0, 0.0);
        let gts = vec![vec![sparse, dense]];
        let preds = vec![vec![boxed(10.1, 0.0, 0.9)]];
        let level1 = MatchConfig { level2: false, ..Default::default() };
        let report = match_and_score(&preds, &gts, &level1);
        assert_eq!(report.overall.gt_count, 1);
        assert_abs_diff_eq!(report.overall.mean_ap.unwrap(), 1.0, epsilon = 1e-12);
        let level2 = MatchConfig::default();
        let report2 = match_and_score(&preds, &gts, &level2);
        // Level-2 ground truth is a superset of level-1's.
        assert!(report2.overall.gt_count >= report.overall.gt_count);
    }

    #[test]
    fn empty_bucket_is_absent_not_zero() {
        let gts = vec![vec![gt(5.0, 0.0)]];
        let preds = vec![vec![boxed(5.0, 0.0, 0.9)]];
        let report = match_and_score(&preds, &gts, &MatchConfig::default());
        let far = &report.range_buckets[1];
        assert_eq!(far.metrics.gt_count, 0);
        assert!(far.metrics.mean_ap.is_none());
        assert!(render_table(&report).contains("absent"));
    }

    #[test]
    fn single_bucket_covering_everything_equals_overall() {
        let gts = vec![vec![gt(5.0, 0.0), gt(25.0, 3.0)]];
        let preds = vec![vec![boxed(5.2, 0.0, 0.9), boxed(45.0, 0.0, 0.4)]];
        let cfg = MatchConfig {
            range_buckets: vec![(0.0, f64::INFINITY)],
            ..Default::default()
        };
        let report = match_and_score(&preds, &gts, &cfg);
        assert_eq!(
            report.overall.mean_ap.unwrap(),
            report.range_buckets[0].metrics.mean_ap.unwrap()
        );
    }

    #[test]
    fn speed_bucket_separates_populations() {
        let still = GtBox { speed: Some(0.05), ..gt(5.0, 0.0) };
        let mover = GtBox { speed: Some(3.0), ..gt(15.0, 0.0) };
        let gts = vec![vec![still, mover]];
        // Only the stationary object is detected.
        let preds = vec![vec![boxed(5.1, 0.0, 0.9)]];
        let report = match_and_score(&preds, &gts, &MatchConfig::default());
        let stationary = &report.speed_buckets[0];
        let dynamic = &report.speed_buckets[1];
        assert_abs_diff_eq!(stationary.metrics.mean_ap.unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(dynamic.metrics.mean_ap.unwrap(), 0.0, epsilon = 1e-12);
    }
}
