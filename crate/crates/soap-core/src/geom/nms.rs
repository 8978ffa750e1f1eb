//! Greedy non-maximum suppression over BEV IoU.

use super::{bev_iou, Box3d};

/// Greedy descending-score suppression using [`bev_iou`].
///
/// Output is sorted by descending score and truncated to `limit`; score ties
/// are broken by lower insertion index. A candidate is suppressed when its IoU
/// with an already-kept box exceeds `iou_threshold`.
pub fn nms(boxes: &[Box3d], iou_threshold: f64, limit: usize) -> Vec<Box3d> {
    let mut order: Vec<usize> = (0..boxes.len()).collect();
    order.sort_by(|&i, &j| {
        boxes[j].score.partial_cmp(&boxes[i].score).unwrap_or(std::cmp::Ordering::Equal).then(i.cmp(&j))
    });
    let mut kept: Vec<usize> = Vec::new();
    for &i in &order {
        if kept.len() >= limit {
            break;
        }
        if kept.iter().all(|&k| bev_iou(&boxes[k], &boxes[i]) <= iou_threshold) {
            kept.push(i);
        }
    }
    kept.into_iter().map(|i| boxes[i].clone()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector3;

    fn scored(center_x: f64, score: f64) -> Box3d {
        Box3d::new(
            Vector3::new(center_x, 0.0, 0.0),
            Vector3::new(1.0, 1.0, 1.0),
            0.0,
            None,
            score,
            "vehicle",
        )
        .unwrap()
    }

    #[test]
    fn single_box_passes_through() {
        let b = scored(0.0, 0.4);
        let out = nms(&[b.clone()], 0.5, usize::MAX);
        assert_eq!(out, vec![b]);
    }

    #[test]
    fn duplicate_keeps_higher_score() {
        let out = nms(&[scored(0.0, 0.9), scored(0.0, 0.8)], 0.5, usize::MAX);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].score, 0.9);
    }

    #[test]
    fn overlapping_pair_with_disjoint_third() {
        // A overlaps B (IoU 0.8 via 8/9... offset chosen for IoU > 0.5), C disjoint.
        let a = scored(0.0, 0.9);
        let b = scored(0.1, 0.7); // IoU = 0.9/1.1 ≈ 0.818
        let c = scored(10.0, 0.5);
        let out = nms(&[a.clone(), b, c.clone()], 0.5, usize::MAX);
        assert_eq!(out, vec![a, c]);
    }

    #[test]
    fn score_tie_breaks_by_insertion_index() {
        let first = scored(0.0, 0.8);
        let second = scored(0.05, 0.8);
        let out = nms(&[first.clone(), second], 0.5, usize::MAX);
        assert_eq!(out, vec![first]);
    }

    #[test]
    fn limit_truncates_output() {
        let boxes: Vec<_> = (0..5).map(|i| scored(i as f64 * 10.0, 1.0 - 0.1 * i as f64)).collect();
        let out = nms(&boxes, 0.5, 3);
        assert_eq!(out.len(), 3);
        assert_eq!(out[0].score, 1.0);
    }
}
