//! Spatial Consistency Post-processing.
//!
//! Per-frame predictions of stationary objects should agree in the global
//! frame across the whole sequence. SCP exploits that: gather all predictions
//! globally, cluster them by footprint overlap, drop clusters with too little
//! support, fuse each surviving cluster into a single box, suppress overlaps,
//! back-project per frame, and prune boxes that contain no points in that
//! frame's sparse cloud.

use thiserror::Error;

use crate::aggregate::FrameRecord;
use crate::geom::{bev_iou, nms, points_in_box, transform_box, Box3d, PointCloud, YawMode};

use serde::{Deserialize, Serialize};

#[derive(Debug, Error)]
pub enum ScpError {
    #[error("misaligned inputs: {frames} frames, {boxes} box lists, {clouds} clouds")]
    MisalignedInputs { frames: usize, boxes: usize, clouds: usize },
    #[error("zero-total-score: cluster has no confidence mass")]
    ZeroTotalScore,
    #[error("{stage} stage failed on cluster {cluster}: {source}")]
    Stage {
        stage: &'static str,
        cluster: usize,
        #[source]
        source: Box<ScpError>,
    },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ScpConfig {
    /// IoU threshold joining boxes into one cluster.
    pub mu: f64,
    /// Minimum number of detections a cluster needs to survive.
    pub eta: usize,
    /// IoU threshold for the global-frame NMS after fusion.
    pub nms_iou: f64,
    /// IoU threshold used later when merging with a detector's boxes.
    pub wbf_iou: f64,
}

impl Default for ScpConfig {
    fn default() -> Self {
        Self { mu: 0.5, eta: 10, nms_iou: 0.5, wbf_iou: 0.5 }
    }
}

/// A prediction lifted into the global frame, with its frame of origin.
#[derive(Debug, Clone)]
pub struct GlobalBox {
    pub frame_index: usize,
    pub bbox: Box3d,
}

/// A connected component of the IoU > mu relation.
#[derive(Debug, Clone)]
pub struct Cluster {
    pub members: Vec<GlobalBox>,
}

/// Transform per-frame predictions into the global frame, preserving frame
/// provenance and scores.
pub fn gather_global(frames: &[FrameRecord], per_frame: &[Vec<Box3d>]) -> Vec<GlobalBox> {
    assert_eq!(frames.len(), per_frame.len(), "frames and box lists must align");
    let mut out = Vec::new();
    for (frame, boxes) in frames.iter().zip(per_frame) {
        for b in boxes {
            let global = transform_box(&frame.pose, b, YawMode::General)
                .expect("general-mode box transform is infallible");
            out.push(GlobalBox { frame_index: frame.index, bbox: global });
        }
    }
    out
}

/// Connected components of the graph whose edges join box pairs with
/// `bev_iou > mu`. Clusters are ordered by minimum member insertion index and
/// members keep ascending insertion order.
pub fn cluster_indices(boxes: &[Box3d], mu: f64) -> Vec<Vec<usize>> {
    let n = boxes.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    // Sweep over footprints sorted by their minimum possible x to skip pairs
    // that cannot overlap.
    let mut span: Vec<(f64, f64)> = Vec::with_capacity(n);
    for b in boxes {
        let r = b.size.x.hypot(b.size.y) / 2.0;
        span.push((b.center.x - r, b.center.x + r));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| span[i].0.total_cmp(&span[j].0).then(i.cmp(&j)));
    for (pos, &i) in order.iter().enumerate() {
        for &j in &order[pos + 1..] {
            if span[j].0 > span[i].1 {
                break;
            }
            if bev_iou(&boxes[i], &boxes[j]) > mu {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri.max(rj)] = ri.min(rj);
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut group_of_root: std::collections::HashMap<usize, usize> = Default::default();
    for i in 0..n {
        let root = find(&mut parent, i);
        let g = *group_of_root.entry(root).or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[g].push(i);
    }
    groups
}

/// Cluster global boxes with the IoU > mu relation.
pub fn cluster_boxes(global: &[GlobalBox], mu: f64) -> Vec<Cluster> {
    let boxes: Vec<Box3d> = global.iter().map(|g| g.bbox.clone()).collect();
    cluster_indices(&boxes, mu)
        .into_iter()
        .map(|members| Cluster { members: members.into_iter().map(|i| global[i].clone()).collect() })
        .collect()
}

/// Keep clusters with at least `eta` members ("fewer than" eliminates).
pub fn filter_clusters(clusters: Vec<Cluster>, eta: usize) -> Vec<Cluster> {
    clusters.into_iter().filter(|c| c.members.len() >= eta).collect()
}

/// Confidence-weighted fusion of a set of boxes. `tie_key` orders equal-score
/// candidates for the heading rule (frame index for SCP, insertion index for
/// box-set merging).
pub(crate) fn fuse_weighted(members: &[(usize, &Box3d)]) -> Result<Box3d, ScpError> {
    assert!(!members.is_empty(), "cannot fuse an empty cluster");
    let total: f64 = members.iter().map(|(_, b)| b.score).sum();
    if total <= 0.0 {
        return Err(ScpError::ZeroTotalScore);
    }
    // Heading of the most confident member; ties go to the lowest tie key.
    let mut best = &members[0];
    for m in &members[1..] {
        if m.1.score > best.1.score || (m.1.score == best.1.score && m.0 < best.0) {
            best = m;
        }
    }
    let inv_total = 1.0 / total;
    let mut center = nalgebra::Vector3::zeros();
    let mut size = nalgebra::Vector3::zeros();
    let mut vel = nalgebra::Vector2::zeros();
    let mut vel_weight = 0.0;
    for (_, b) in members {
        let w = b.score * inv_total;
        center += w * b.center;
        size += w * b.size;
        if let Some(v) = b.velocity {
            vel += b.score * v;
            vel_weight += b.score;
        }
    }
    let velocity = (vel_weight > 0.0).then(|| vel / vel_weight);
    let score = members.iter().map(|(_, b)| b.score).sum::<f64>() / members.len() as f64;
    // Majority label; ties by heavier confidence mass, then lexicographic.
    let mut tally: std::collections::BTreeMap<&str, (usize, f64)> = Default::default();
    for (_, b) in members {
        let e = tally.entry(b.label.as_str()).or_insert((0, 0.0));
        e.0 += 1;
        e.1 += b.score;
    }
    let label = tally
        .iter()
        .fold(None::<(&str, (usize, f64))>, |acc, (&l, &st)| match acc {
            Some((_, best_st)) if st.0 < best_st.0 || (st.0 == best_st.0 && st.1 <= best_st.1) => acc,
            _ => Some((l, st)),
        })
        .expect("non-empty tally")
        .0;
    Ok(Box3d::new(center, size, best.1.yaw, velocity, score, label)
        .expect("weighted means preserve box invariants"))
}

/// Fuse one cluster: heading of the most confident member (ties by earliest
/// frame index), score-weighted means for center, size, and velocity, mean
/// score, majority label.
pub fn fuse_cluster(cluster: &Cluster) -> Result<Box3d, ScpError> {
    let members: Vec<(usize, &Box3d)> =
        cluster.members.iter().map(|m| (m.frame_index, &m.bbox)).collect();
    fuse_weighted(&members)
}

/// The full post-processing chain: gather, cluster, filter, fuse, NMS in the
/// global frame, back-project per frame, and drop boxes containing no points.
pub fn scp_pipeline(
    frames: &[FrameRecord],
    per_frame_boxes: &[Vec<Box3d>],
    per_frame_clouds: &[PointCloud],
    cfg: &ScpConfig,
) -> Result<Vec<Vec<Box3d>>, ScpError> {
    if frames.len() != per_frame_boxes.len() || frames.len() != per_frame_clouds.len() {
        return Err(ScpError::MisalignedInputs {
            frames: frames.len(),
            boxes: per_frame_boxes.len(),
            clouds: per_frame_clouds.len(),
        });
    }
    let global = gather_global(frames, per_frame_boxes);
    let clusters = filter_clusters(cluster_boxes(&global, cfg.mu), cfg.eta);
    let fused: Vec<Box3d> = clusters
        .iter()
        .enumerate()
        .map(|(i, c)| {
            fuse_cluster(c).map_err(|e| ScpError::Stage {
                stage: "fuse",
                cluster: i,
                source: Box::new(e),
            })
        })
        .collect::<Result<_, _>>()?;
    let survivors = nms(&fused, cfg.nms_iou, usize::MAX);
    let mut out = Vec::with_capacity(frames.len());
    for (frame, cloud) in frames.iter().zip(per_frame_clouds) {
        let inv = frame.pose.inverse();
        let mut frame_boxes = Vec::new();
        for b in &survivors {
            let local = transform_box(&inv, b, YawMode::General)
                .expect("general-mode box transform is infallible");
            if points_in_box(cloud, &local) > 0 {
                frame_boxes.push(local);
            }
        }
        out.push(frame_boxes);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aggregate::CloudRef;
    use crate::geom::{Point, Pose};
    use approx::assert_abs_diff_eq;
    use nalgebra::Vector3;

    fn boxed(x: f64, y: f64, score: f64) -> Box3d {
        Box3d::new(
            Vector3::new(x, y, 0.85),
            Vector3::new(1.0, 1.0, 1.7),
            0.0,
            None,
            score,
            "vehicle",
        )
        .unwrap()
    }

    fn frame(index: usize, x: f64) -> FrameRecord {
        FrameRecord {
            sequence: "seq".into(),
            index,
            timestamp: index as f64 * 0.1,
            pose: Pose::from_yaw_translation(0.0, Vector3::new(x, 0.0, 0.0)),
            cloud_ref: CloudRef::Inline(index),
        }
    }

    /// Brute-force connected components over the IoU > mu relation.
    fn cc_oracle(boxes: &[Box3d], mu: f64) -> Vec<Vec<usize>> {
        let n = boxes.len();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            let mut component = vec![start];
            seen[start] = true;
            let mut stack = vec![start];
            while let Some(i) = stack.pop() {
                for j in 0..n {
                    if !seen[j] && bev_iou(&boxes[i], &boxes[j]) > mu {
                        seen[j] = true;
                        component.push(j);
                        stack.push(j);
                    }
                }
            }
            component.sort_unstable();
            out.push(component);
        }
        out
    }

    #[test]
    fn gather_preserves_provenance() {
        let frames = vec![frame(0, 0.0), frame(1, 5.0)];
        let per_frame = vec![vec![boxed(0.0, 0.0, 0.9)], vec![boxed(0.0, 0.0, 0.8)]];
        let global = gather_global(&frames, &per_frame);
        assert_eq!(global.len(), 2);
        assert_eq!(global[1].frame_index, 1);
        assert_abs_diff_eq!(global[1].bbox.center.x, 5.0, epsilon = 1e-12);
        assert_eq!(global[1].bbox.score, 0.8);
    }

    #[test]
    fn gather_round_trips_through_scatter() {
        let frames = vec![frame(0, 3.0)];
        let original = boxed(1.25, -0.5, 0.7);
        let global = gather_global(&frames, &[vec![original.clone()]]);
        let back =
            transform_box(&frames[0].pose.inverse(), &global[0].bbox, YawMode::General).unwrap();
        assert!(back.same_geometry(&original, 1e-9));
    }

    #[test]
    fn identical_boxes_form_one_cluster() {
        let boxes = vec![boxed(0.0, 0.0, 0.5); 4];
        let clusters = cluster_indices(&boxes, 0.5);
        assert_eq!(clusters, vec![vec![0, 1, 2, 3]]);
    }

    #[test]
    fn disjoint_boxes_stay_singletons() {
        let boxes: Vec<Box3d> = (0..3).map(|i| boxed(i as f64 * 10.0, 0.0, 0.5)).collect();
        let clusters = cluster_indices(&boxes, 0.5);
        assert_eq!(clusters, vec![vec![0], vec![1], vec![2]]);
    }

    #[test]
    fn chain_merges_transitively() {
        // IoU(A,B) = IoU(B,C) = 0.6 > mu, IoU(A,C) = 1/3 < mu, yet one cluster.
        let a = boxed(0.0, 0.0, 0.5);
        let b = boxed(0.25, 0.0, 0.5);
        let c = boxed(0.5, 0.0, 0.5);
        assert_abs_diff_eq!(bev_iou(&a, &b), 0.6, epsilon = 1e-12);
        assert_abs_diff_eq!(bev_iou(&b, &c), 0.6, epsilon = 1e-12);
        assert!(bev_iou(&a, &c) < 0.5);
        let boxes = vec![a, b, c];
        let clusters = cluster_indices(&boxes, 0.5);
        assert_eq!(clusters, cc_oracle(&boxes, 0.5));
        assert_eq!(clusters, vec![vec![0, 1, 2]]);
    }

    #[test]
    fn clustering_matches_oracle_on_random_layout() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let boxes: Vec<Box3d> = (0..60)
            .map(|_| boxed(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), 0.5))
            .collect();
        for mu in [0.1, 0.3, 0.5, 0.8] {
            assert_eq!(cluster_indices(&boxes, mu), cc_oracle(&boxes, mu), "mu = {mu}");
        }
    }

    #[test]
    fn raising_mu_never_merges_more() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let boxes: Vec<Box3d> = (0..40)
            .map(|_| boxed(rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0), 0.5))
            .collect();
        let mut last = 0;
        for mu in [0.0, 0.2, 0.4, 0.6, 0.8, 1.0] {
            let n = cluster_indices(&boxes, mu).len();
            assert!(n >= last, "clusters must not merge as mu rises");
            last = n;
        }
    }

    #[test]
    fn eta_filter_boundary_is_inclusive() {
        let make = |n: usize| Cluster {
            members: (0..n).map(|i| GlobalBox { frame_index: i, bbox: boxed(0.0, 0.0, 0.5) }).collect(),
        };
        let kept = filter_clusters(vec![make(1), make(10), make(9)], 10);
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].members.len(), 10);
        let kept = filter_clusters(vec![make(1)], 2);
        assert!(kept.is_empty());
    }

    #[test]
    fn fuse_single_member_is_identity() {
        let cluster =
            Cluster { members: vec![GlobalBox { frame_index: 3, bbox: boxed(1.0, 2.0, 0.35) }] };
        let fused = fuse_cluster(&cluster).unwrap();
        assert_eq!(fused, boxed(1.0, 2.0, 0.35));
    }

    #[test]
    fn fuse_weighted_mean_center() {
        let cluster = Cluster {
            members: vec![
                GlobalBox { frame_index: 0, bbox: boxed(0.0, 0.0, 0.8) },
                GlobalBox { frame_index: 1, bbox: boxed(1.0, 0.0, 0.2) },
            ],
        };
        let fused = fuse_cluster(&cluster).unwrap();
        assert_abs_diff_eq!(fused.center.x, 0.2, epsilon = 1e-12);
        assert_abs_diff_eq!(fused.score, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn fuse_takes_heading_of_most_confident() {
        let mut high = boxed(0.0, 0.0, 0.9);
        high.yaw = std::f64::consts::FRAC_PI_4;
        let low = boxed(0.0, 0.0, 0.5);
        let cluster = Cluster {
            members: vec![
                GlobalBox { frame_index: 0, bbox: high },
                GlobalBox { frame_index: 1, bbox: low },
            ],
        };
        let fused = fuse_cluster(&cluster).unwrap();
        assert_abs_diff_eq!(fused.yaw, std::f64::consts::FRAC_PI_4, epsilon = 1e-12);
    }

    #[test]
    fn fuse_rejects_zero_confidence_mass() {
        let cluster = Cluster {
            members: vec![
                GlobalBox { frame_index: 0, bbox: boxed(0.0, 0.0, 0.0) },
                GlobalBox { frame_index: 1, bbox: boxed(0.0, 0.0, 0.0) },
            ],
        };
        assert!(matches!(fuse_cluster(&cluster), Err(ScpError::ZeroTotalScore)));
    }

    #[test]
    fn pipeline_empty_predictions_give_empty_outputs() {
        let frames = vec![frame(0, 0.0), frame(1, 1.0)];
        let clouds = vec![PointCloud::default(), PointCloud::default()];
        let boxes = vec![Vec::new(), Vec::new()];
        let out = scp_pipeline(&frames, &boxes, &clouds, &ScpConfig::default()).unwrap();
        assert_eq!(out, vec![Vec::<Box3d>::new(); 2]);
    }

    #[test]
    fn pipeline_prunes_empty_boxes_per_frame() {
        // Two frames see a stationary object; the second frame's cloud has no
        // points inside it, so only the first frame keeps the label.
        let frames = vec![frame(0, 0.0), frame(1, 0.0)];
        let object = boxed(2.0, 0.0, 0.9);
        let boxes = vec![vec![object.clone()], vec![object.clone()]];
        let clouds = vec![
            PointCloud::new(vec![Point::xyz(2.0, 0.0, 0.85)]),
            PointCloud::new(vec![Point::xyz(50.0, 0.0, 0.85)]),
        ];
        let cfg = ScpConfig { eta: 2, ..Default::default() };
        let out = scp_pipeline(&frames, &boxes, &clouds, &cfg).unwrap();
        assert_eq!(out[0].len(), 1);
        assert!(out[1].is_empty());
    }

    #[test]
    fn pipeline_eta_removes_flickers() {
        let frames: Vec<FrameRecord> = (0..4).map(|i| frame(i, 0.0)).collect();
        let stable = boxed(2.0, 0.0, 0.9);
        let flicker = boxed(8.0, 0.0, 0.95);
        let boxes = vec![
            vec![stable.clone(), flicker.clone()],
            vec![stable.clone()],
            vec![stable.clone()],
            vec![stable.clone()],
        ];
        let cloud = PointCloud::new(vec![
            Point::xyz(2.0, 0.0, 0.85),
            Point::xyz(8.0, 0.0, 0.85),
        ]);
        let clouds = vec![cloud.clone(), cloud.clone(), cloud.clone(), cloud];
        let cfg = ScpConfig { eta: 3, ..Default::default() };
        let out = scp_pipeline(&frames, &boxes, &clouds, &cfg).unwrap();
        for frame_boxes in &out {
            assert_eq!(frame_boxes.len(), 1);
            assert_abs_diff_eq!(frame_boxes[0].center.x, 2.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn pipeline_misalignment_is_an_error() {
        let frames = vec![frame(0, 0.0)];
        assert!(matches!(
            scp_pipeline(&frames, &[], &[], &ScpConfig::default()),
            Err(ScpError::MisalignedInputs { .. })
        ));
    }
}
