//! Final pseudo-label fusion: per-source beta calibration of confidence
//! scores, then weighted box fusion of the stationary boxes with a per-frame
//! detector's boxes.
//!
//! The calibration map is `p = logistic(a*ln(s) - b*ln(1-s) + c)` with
//! `a, b >= 0`, which is monotone non-decreasing on (0, 1) and reduces to the
//! identity at `(a, b, c) = (1, 1, 0)`. Fitting maximizes the mean binomial
//! log-likelihood by projected gradient ascent with backtracking line search.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{bev_iou, Box3d};
use crate::scp::{cluster_indices, fuse_weighted};

/// Scores are clamped into `[CLAMP, 1 - CLAMP]` before the log transforms.
pub const SCORE_CLAMP: f64 = 1e-6;

/// Convergence threshold on the projected-gradient infinity norm.
pub const GRADIENT_TOL: f64 = 1e-8;

/// Iteration cap for the calibration fit.
pub const MAX_FIT_ITERATIONS: usize = 10_000;

#[derive(Debug, Error)]
pub enum FuseError {
    #[error("degenerate-labels: calibration needs at least one positive and one negative sample")]
    DegenerateLabels,
    #[error("non-finite-likelihood during calibration fitting")]
    NonFiniteLikelihood,
    #[error("calibration coefficients a and b must be non-negative, got a={0}, b={1}")]
    NegativeCoefficient(f64, f64),
    #[error("frame-misalignment: {detector} detector frames vs {scp} stationary frames")]
    FrameMisalignment { detector: usize, scp: usize },
    #[error(transparent)]
    Scp(#[from] crate::scp::ScpError),
}

/// A fitted monotone score-calibration map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationMap {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl CalibrationMap {
    pub fn new(a: f64, b: f64, c: f64) -> Result<Self, FuseError> {
        if !(a >= 0.0 && b >= 0.0 && c.is_finite()) {
            return Err(FuseError::NegativeCoefficient(a, b));
        }
        Ok(Self { a, b, c })
    }

    /// The map that leaves scores unchanged.
    pub fn identity() -> Self {
        Self { a: 1.0, b: 1.0, c: 0.0 }
    }

    pub fn apply(&self, score: f64) -> f64 {
        let s = score.clamp(SCORE_CLAMP, 1.0 - SCORE_CLAMP);
        sigmoid(self.a * s.ln() - self.b * (1.0 - s).ln() + self.c)
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// ln(1 + e^u) without overflow.
fn softplus(u: f64) -> f64 {
    if u > 30.0 {
        u
    } else if u < -30.0 {
        u.exp()
    } else {
        u.exp().ln_1p()
    }
}

fn features(score: f64) -> (f64, f64) {
    let s = score.clamp(SCORE_CLAMP, 1.0 - SCORE_CLAMP);
    (s.ln(), -(1.0 - s).ln())
}

/// Mean binomial log-likelihood of the labels under the map `(a, b, c)`.
pub fn beta_log_likelihood(samples: &[(f64, bool)], a: f64, b: f64, c: f64) -> f64 {
    let mut acc = 0.0;
    for &(score, correct) in samples {
        let (x1, x2) = features(score);
        let z = a * x1 + b * x2 + c;
        // y·ln p + (1-y)·ln(1-p) in the numerically stable form.
        acc += -softplus(-z) - if correct { 0.0 } else { z };
    }
    acc / samples.len() as f64
}

/// Analytic gradient of [`beta_log_likelihood`] with respect to (a, b, c).
pub fn beta_gradient(samples: &[(f64, bool)], a: f64, b: f64, c: f64) -> [f64; 3] {
    let mut g = [0.0; 3];
    for &(score, correct) in samples {
        let (x1, x2) = features(score);
        let z = a * x1 + b * x2 + c;
        let resid = (if correct { 1.0 } else { 0.0 }) - sigmoid(z);
        g[0] += resid * x1;
        g[1] += resid * x2;
        g[2] += resid;
    }
    let inv = 1.0 / samples.len() as f64;
    [g[0] * inv, g[1] * inv, g[2] * inv]
}

fn project(theta: [f64; 3]) -> [f64; 3] {
    [theta[0].max(0.0), theta[1].max(0.0), theta[2]]
}

/// Gradient components that can still move the iterate: at an active bound
/// (a or b pinned at zero) an outward gradient counts as zero.
fn projected_gradient(theta: [f64; 3], g: [f64; 3]) -> [f64; 3] {
    let mut pg = g;
    for i in 0..2 {
        if theta[i] <= 0.0 && g[i] < 0.0 {
            pg[i] = 0.0;
        }
    }
    pg
}

/// Fit the calibration map by maximizing the binomial log-likelihood with
/// a and b constrained non-negative. Deterministic batch gradient ascent with
/// backtracking line search; converges when the projected-gradient infinity
/// norm drops below [`GRADIENT_TOL`] or after [`MAX_FIT_ITERATIONS`].
pub fn fit_beta_calibration(samples: &[(f64, bool)]) -> Result<CalibrationMap, FuseError> {
    let positives = samples.iter().filter(|(_, y)| *y).count();
    if positives == 0 || positives == samples.len() {
        return Err(FuseError::DegenerateLabels);
    }
    let mut theta = [1.0, 1.0, 0.0];
    let mut ll = beta_log_likelihood(samples, theta[0], theta[1], theta[2]);
    if !ll.is_finite() {
        return Err(FuseError::NonFiniteLikelihood);
    }
    let mut step: f64 = 1.0;
    for _ in 0..MAX_FIT_ITERATIONS {
        let g = beta_gradient(samples, theta[0], theta[1], theta[2]);
        if g.iter().any(|v| !v.is_finite()) {
            return Err(FuseError::NonFiniteLikelihood);
        }
        let pg = projected_gradient(theta, g);
        let pg_norm = pg.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if pg_norm < GRADIENT_TOL {
            break;
        }
        // Backtracking (Armijo) on the projected step; the last accepted step
        // size seeds the next iteration and is allowed to grow back.
        step = (step * 2.0).min(1e6);
        let mut accepted = false;
        while step > 1e-18 {
            let cand = project([
                theta[0] + step * g[0],
                theta[1] + step * g[1],
                theta[2] + step * g[2],
            ]);
            let delta = [cand[0] - theta[0], cand[1] - theta[1], cand[2] - theta[2]];
            let decrease: f64 = delta.iter().zip(&g).map(|(d, gi)| d * gi).sum();
            let cand_ll = beta_log_likelihood(samples, cand[0], cand[1], cand[2]);
            if !cand_ll.is_finite() {
                return Err(FuseError::NonFiniteLikelihood);
            }
            if cand_ll >= ll + 1e-4 * decrease && decrease > 0.0 {
                theta = cand;
                ll = cand_ll;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    CalibrationMap::new(theta[0], theta[1], theta[2])
}

/// Replace each box score with its calibrated probability. Order of boxes is
/// preserved, and so is the ranking (the map is monotone).
pub fn apply_calibration(map: &CalibrationMap, boxes: &[Box3d]) -> Vec<Box3d> {
    boxes.iter().map(|b| b.with_score(map.apply(b.score))).collect()
}

/// Merge two calibrated box sets: pool, cluster by IoU > `iou_threshold`
/// (same connected-component rule as SCP), and fuse each cluster with the
/// max-confidence-heading rule. Unmatched boxes pass through unchanged.
pub fn wbf_merge(a_boxes: &[Box3d], b_boxes: &[Box3d], iou_threshold: f64) -> Vec<Box3d> {
    let pooled: Vec<Box3d> = a_boxes.iter().chain(b_boxes).cloned().collect();
    cluster_indices(&pooled, iou_threshold)
        .into_iter()
        .map(|members| {
            let refs: Vec<(usize, &Box3d)> = members.iter().map(|&i| (i, &pooled[i])).collect();
            fuse_weighted(&refs).expect("calibrated scores are positive")
        })
        .collect()
}

/// Calibrate each source with its own map, then merge per frame.
pub fn soap_pseudo_labels(
    detector_frames: &[Vec<Box3d>],
    scp_frames: &[Vec<Box3d>],
    maps: (&CalibrationMap, &CalibrationMap),
    iou_threshold: f64,
) -> Result<Vec<Vec<Box3d>>, FuseError> {
    if detector_frames.len() != scp_frames.len() {
        return Err(FuseError::FrameMisalignment {
            detector: detector_frames.len(),
            scp: scp_frames.len(),
        });
    }
    Ok(detector_frames
        .iter()
        .zip(scp_frames)
        .map(|(det, scp)| {
            let det = apply_calibration(maps.0, det);
            let scp = apply_calibration(maps.1, scp);
            wbf_merge(&det, &scp, iou_threshold)
        })
        .collect())
}

/// Correctness labels for calibration fitting: each prediction is matched
/// greedily (descending score) to an unmatched same-class ground-truth box at
/// BEV IoU >= `iou_min`.
pub fn calibration_samples(
    predictions: &[Vec<Box3d>],
    ground_truth: &[Vec<Box3d>],
    iou_min: f64,
) -> Vec<(f64, bool)> {
    let mut samples = Vec::new();
    for (preds, gts) in predictions.iter().zip(ground_truth) {
        let mut order: Vec<usize> = (0..preds.len()).collect();
        order.sort_by(|&i, &j| {
            preds[j].score.partial_cmp(&preds[i].score).unwrap_or(std::cmp::Ordering::Equal).then(i.cmp(&j))
        });
        let mut taken = vec![false; gts.len()];
        for &i in &order {
            let p = &preds[i];
            let mut best: Option<(usize, f64)> = None;
            for (k, g) in gts.iter().enumerate() {
                if taken[k] || g.label != p.label {
                    continue;
                }
                let iou = bev_iou(p, g);
                if iou >= iou_min && best.map_or(true, |(_, b)| iou > b) {
                    best = Some((k, iou));
                }
            }
            if let Some((k, _)) = best {
                taken[k] = true;
                samples.push((p.score, true));
            } else {
                samples.push((p.score, false));
            }
        }
    }
    samples
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::Vector3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn boxed(x: f64, score: f64) -> Box3d {
        Box3d::new(
            Vector3::new(x, 0.0, 0.85),
            Vector3::new(1.9, 4.6, 1.7),
            0.0,
            None,
            score,
            "vehicle",
        )
        .unwrap()
    }

    #[test]
    fn identity_map_is_identity() {
        let map = CalibrationMap::identity();
        for s in [0.01, 0.2, 0.5, 0.77, 0.999] {
            assert_abs_diff_eq!(map.apply(s), s, epsilon = 1e-12);
        }
    }

    #[test]
    fn apply_calibration_preserves_order_and_ranking() {
        let map = CalibrationMap { a: 2.0, b: 0.5, c: 0.3 };
        let boxes = vec![boxed(0.0, 0.9), boxed(1.0, 0.2), boxed(2.0, 0.6)];
        let out = apply_calibration(&map, &boxes);
        assert!(apply_calibration(&map, &[]).is_empty());
        assert_eq!(out.len(), 3);
        assert_eq!(out[1].center.x, 1.0);
        let rank = |v: &[Box3d]| {
            let mut idx: Vec<usize> = (0..v.len()).collect();
            idx.sort_by(|&i, &j| v[j].score.partial_cmp(&v[i].score).unwrap());
            idx
        };
        assert_eq!(rank(&boxes), rank(&out));
    }

    fn identity_consistent_samples(n: usize, seed: u64) -> Vec<(f64, bool)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let s: f64 = rng.random_range(0.02..0.98);
                (s, rng.random::<f64>() < s)
            })
            .collect()
    }

    #[test]
    fn fit_recovers_identity_on_consistent_data() {
        let samples = identity_consistent_samples(4000, 5);
        let map = fit_beta_calibration(&samples).unwrap();
        assert!((map.a - 1.0).abs() < 0.15, "a = {}", map.a);
        assert!((map.b - 1.0).abs() < 0.15, "b = {}", map.b);
        assert!(map.c.abs() < 0.15, "c = {}", map.c);
    }

    #[test]
    fn fit_beats_identity_likelihood() {
        let samples = identity_consistent_samples(1000, 9);
        let map = fit_beta_calibration(&samples).unwrap();
        let fitted = beta_log_likelihood(&samples, map.a, map.b, map.c);
        let identity = beta_log_likelihood(&samples, 1.0, 1.0, 0.0);
        assert!(fitted >= identity - 1e-12, "fitted {fitted} < identity {identity}");
    }

    #[test]
    fn fit_separated_data_steepens_and_beats_grid_oracle() {
        let mut samples = Vec::new();
        for _ in 0..200 {
            samples.push((0.9, true));
            samples.push((0.1, false));
        }
        let map = fit_beta_calibration(&samples).unwrap();
        assert!(map.apply(0.9) > 0.99, "map(0.9) = {}", map.apply(0.9));
        assert!(map.apply(0.1) < 0.01, "map(0.1) = {}", map.apply(0.1));
        // Coarse grid-search oracle over (a, b, c).
        let fitted_ll = beta_log_likelihood(&samples, map.a, map.b, map.c);
        let mut best = f64::NEG_INFINITY;
        for ai in 0..20 {
            for bi in 0..20 {
                for ci in -10..=10 {
                    let ll = beta_log_likelihood(
                        &samples,
                        ai as f64 * 0.5,
                        bi as f64 * 0.5,
                        ci as f64 * 0.5,
                    );
                    best = best.max(ll);
                }
            }
        }
        assert!(fitted_ll >= best - 1e-6, "fit {fitted_ll} below grid best {best}");
    }

    #[test]
    fn analytic_gradient_matches_finite_differences() {
        let samples = identity_consistent_samples(300, 13);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..10 {
            let (a, b, c) = (
                rng.random_range(0.1..3.0),
                rng.random_range(0.1..3.0),
                rng.random_range(-1.0..1.0),
            );
            let g = beta_gradient(&samples, a, b, c);
            let h = 1e-6;
            let fd = [
                (beta_log_likelihood(&samples, a + h, b, c)
                    - beta_log_likelihood(&samples, a - h, b, c))
                    / (2.0 * h),
                (beta_log_likelihood(&samples, a, b + h, c)
                    - beta_log_likelihood(&samples, a, b - h, c))
                    / (2.0 * h),
                (beta_log_likelihood(&samples, a, b, c + h)
                    - beta_log_likelihood(&samples, a, b, c - h))
                    / (2.0 * h),
            ];
            for k in 0..3 {
                let denom = fd[k].abs().max(1e-8);
                assert!(
                    ((g[k] - fd[k]).abs() / denom) < 1e-5,
                    "component {k}: analytic {} vs fd {}",
                    g[k],
                    fd[k]
                );
            }
        }
    }

    #[test]
    fn degenerate_labels_error() {
        assert!(matches!(
            fit_beta_calibration(&[(0.5, true), (0.6, true)]),
            Err(FuseError::DegenerateLabels)
        ));
        assert!(matches!(fit_beta_calibration(&[]), Err(FuseError::DegenerateLabels)));
    }

    #[test]
    fn fit_is_order_invariant() {
        let samples = identity_consistent_samples(500, 21);
        let mut shuffled = samples.clone();
        shuffled.reverse();
        shuffled.swap(0, 250);
        let m1 = fit_beta_calibration(&samples).unwrap();
        let m2 = fit_beta_calibration(&shuffled).unwrap();
        assert!((m1.a - m2.a).abs() < 1e-6);
        assert!((m1.b - m2.b).abs() < 1e-6);
        assert!((m1.c - m2.c).abs() < 1e-6);
    }

    #[test]
    fn wbf_passthrough_when_one_side_empty() {
        let a = vec![boxed(0.0, 0.7), boxed(10.0, 0.4)];
        assert_eq!(wbf_merge(&a, &[], 0.5), a);
        assert_eq!(wbf_merge(&[], &a, 0.5), a);
    }

    #[test]
    fn wbf_fuses_identical_boxes() {
        let a = vec![boxed(0.0, 0.6)];
        let b = vec![boxed(0.0, 0.8)];
        let out = wbf_merge(&a, &b, 0.5);
        assert_eq!(out.len(), 1);
        assert_abs_diff_eq!(out[0].score, 0.7, epsilon = 1e-12);
        assert_abs_diff_eq!(out[0].center.x, 0.0, epsilon = 1e-12);
        assert!(out[0].same_geometry(&a[0], 1e-12));
    }

    #[test]
    fn wbf_keeps_disjoint_populations() {
        let stationary = vec![boxed(0.0, 0.9)];
        let moving = vec![boxed(50.0, 0.8)];
        let out = wbf_merge(&stationary, &moving, 0.5);
        assert_eq!(out.len(), 2);
    }

    #[test]
    fn wbf_threshold_one_disables_merging() {
        let a = vec![boxed(0.0, 0.6)];
        let b = vec![boxed(0.0, 0.8)];
        let out = wbf_merge(&a, &b, 1.0);
        assert_eq!(out.len(), 2);
    }

    #[test]
    fn soap_labels_fall_back_to_single_source() {
        let det = vec![vec![boxed(0.0, 0.9)], vec![]];
        let scp: Vec<Vec<Box3d>> = vec![vec![], vec![]];
        let id = CalibrationMap::identity();
        let out = soap_pseudo_labels(&det, &scp, (&id, &id), 0.5).unwrap();
        assert_eq!(out[0].len(), 1);
        assert_abs_diff_eq!(out[0][0].score, 0.9, epsilon = 1e-9);
        assert!(out[1].is_empty());
        // Swapped: detector empty everywhere.
        let out = soap_pseudo_labels(&scp, &det, (&id, &id), 0.5).unwrap();
        assert_eq!(out[0].len(), 1);
    }

    #[test]
    fn soap_labels_require_alignment() {
        let id = CalibrationMap::identity();
        assert!(matches!(
            soap_pseudo_labels(&[vec![]], &[], (&id, &id), 0.5),
            Err(FuseError::FrameMisalignment { .. })
        ));
    }

    #[test]
    fn calibration_samples_label_matches() {
        let preds = vec![vec![boxed(0.0, 0.9), boxed(20.0, 0.8)]];
        let gts = vec![vec![boxed(0.1, 1.0)]];
        let samples = calibration_samples(&preds, &gts, 0.5);
        assert_eq!(samples.len(), 2);
        assert_eq!(samples[0], (0.9, true));
        assert_eq!(samples[1], (0.8, false));
    }
}
