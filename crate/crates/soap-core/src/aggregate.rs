//! Scene-level full-sequence aggregation: project all frames into the global
//! frame, concatenate, voxel-downsample, budget-subsample, and re-localize
//! per frame.
//!
//! Voxelization is sort-based: points are bucketed by `floor(coord / voxel)`
//! per axis and reduced to one centroid per occupied voxel. Sorting by voxel
//! key and then by full coordinate tuple makes the reduction order canonical,
//! so the result is bit-identical under any permutation of the input frames
//! and independent of worker scheduling.

use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{Point, PointCloud, Pose};

#[derive(Debug, Error)]
pub enum AggregateError {
    #[error("empty-sequence: no frames to aggregate")]
    EmptySequence,
    #[error("invalid parameter: {0}")]
    InvalidParams(&'static str),
    #[error("missing-cloud for frame {frame}: {detail}")]
    MissingCloud { frame: usize, detail: String },
    #[error("frame-sequence-mismatch: frame belongs to {frame_seq:?}, aggregate to {agg_seq:?}")]
    FrameSequenceMismatch { frame_seq: String, agg_seq: String },
}

/// Locator for a frame's point cloud.
#[derive(Debug, Clone)]
pub enum CloudRef {
    /// On-disk cloud in the binary cloud format.
    File(PathBuf),
    /// Index into an in-memory cloud list (simulator output, tests).
    Inline(usize),
}

/// One frame of a sequence: its pose maps local coordinates to the global frame.
#[derive(Debug, Clone)]
pub struct FrameRecord {
    pub sequence: String,
    pub index: usize,
    pub timestamp: f64,
    pub pose: Pose,
    pub cloud_ref: CloudRef,
}

/// Resolves a frame's `cloud_ref` to points. File-backed loading lives in the
/// io module; this module never touches files directly.
pub trait CloudSource: Sync {
    fn load(&self, frame: &FrameRecord) -> Result<PointCloud, AggregateError>;
}

/// Serves [`CloudRef::Inline`] refs from a slice of clouds.
pub struct InlineClouds<'a>(pub &'a [PointCloud]);

impl CloudSource for InlineClouds<'_> {
    fn load(&self, frame: &FrameRecord) -> Result<PointCloud, AggregateError> {
        match &frame.cloud_ref {
            CloudRef::Inline(i) => self.0.get(*i).cloned().ok_or(AggregateError::MissingCloud {
                frame: frame.index,
                detail: format!("inline index {i} out of range"),
            }),
            CloudRef::File(p) => Err(AggregateError::MissingCloud {
                frame: frame.index,
                detail: format!("file ref {} given to the inline source", p.display()),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AggregateParams {
    /// Cubic voxel edge length in meters.
    pub voxel_size: f64,
    /// Maximum number of points retained after downsampling.
    pub point_budget: usize,
    /// Per-sequence vertical shim applied in the local frame before the pose.
    pub z_offset: f64,
    /// Seed for the budget subsampler.
    pub seed: u64,
}

impl Default for AggregateParams {
    fn default() -> Self {
        Self { voxel_size: 0.0325, point_budget: 1_000_000, z_offset: 0.0, seed: 0 }
    }
}

/// A full sequence aggregated into the global frame.
#[derive(Debug, Clone)]
pub struct AggregatedCloud {
    /// Global-frame points with zeroed timestamps.
    pub points: PointCloud,
    pub source_sequence: String,
    pub voxel_size: f64,
    pub point_budget: usize,
}

/// Axis-aligned crop region in local coordinates, bounds inclusive.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct RangeCrop {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl RangeCrop {
    pub fn contains(&self, p: &Point) -> bool {
        p.x >= self.min[0]
            && p.x <= self.max[0]
            && p.y >= self.min[1]
            && p.y <= self.max[1]
            && p.z >= self.min[2]
            && p.z <= self.max[2]
    }
}

type VoxelKey = (i64, i64, i64);

fn voxel_key(p: &Point, inv_voxel: f64) -> VoxelKey {
    (
        (p.x * inv_voxel).floor() as i64,
        (p.y * inv_voxel).floor() as i64,
        (p.z * inv_voxel).floor() as i64,
    )
}

/// Canonical order: voxel key, then full coordinate tuple. Sorting with this
/// comparator makes within-voxel accumulation order independent of input order.
fn canonical_cmp(a: &(VoxelKey, Point), b: &(VoxelKey, Point)) -> std::cmp::Ordering {
    a.0.cmp(&b.0)
        .then_with(|| a.1.x.total_cmp(&b.1.x))
        .then_with(|| a.1.y.total_cmp(&b.1.y))
        .then_with(|| a.1.z.total_cmp(&b.1.z))
        .then_with(|| a.1.t.total_cmp(&b.1.t))
}

/// Reduce keyed points to one centroid per voxel, emitted in ascending
/// lexicographic key order.
fn reduce_voxels(mut pairs: Vec<(VoxelKey, Point)>) -> Vec<Point> {
    pairs.sort_unstable_by(canonical_cmp);
    let mut out = Vec::new();
    let mut i = 0;
    while i < pairs.len() {
        let key = pairs[i].0;
        let (mut sx, mut sy, mut sz, mut st) = (0.0, 0.0, 0.0, 0.0);
        let mut n = 0u64;
        while i < pairs.len() && pairs[i].0 == key {
            let p = pairs[i].1;
            sx += p.x;
            sy += p.y;
            sz += p.z;
            st += p.t;
            n += 1;
            i += 1;
        }
        let inv = 1.0 / n as f64;
        out.push(Point { x: sx * inv, y: sy * inv, z: sz * inv, t: st * inv });
    }
    out
}

/// One centroid per occupied voxel, output ordered by ascending voxel key.
pub fn voxel_downsample(cloud: &PointCloud, voxel_size: f64) -> PointCloud {
    assert!(voxel_size > 0.0, "voxel_size must be positive");
    let inv = 1.0 / voxel_size;
    let pairs = cloud.points.iter().map(|p| (voxel_key(p, inv), *p)).collect();
    PointCloud::new(reduce_voxels(pairs))
}

/// Uniform without-replacement subsample to `budget` points, preserving the
/// input order of the survivors. Identity when the cloud fits the budget.
fn budget_subsample(points: Vec<Point>, budget: usize, seed: u64) -> Vec<Point> {
    if points.len() <= budget {
        return points;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keep = rand::seq::index::sample(&mut rng, points.len(), budget).into_vec();
    keep.sort_unstable();
    keep.into_iter().map(|i| points[i]).collect()
}

/// Aggregate a sequence: shift each local point by `(0, 0, z_offset)`,
/// transform by its frame's pose, concatenate, voxel-downsample, and
/// subsample to the point budget with a seeded sampler.
pub fn aggregate_sequence(
    frames: &[FrameRecord],
    source: &dyn CloudSource,
    params: &AggregateParams,
) -> Result<AggregatedCloud, AggregateError> {
    if frames.is_empty() {
        return Err(AggregateError::EmptySequence);
    }
    if !(params.voxel_size > 0.0) {
        return Err(AggregateError::InvalidParams("voxel_size must be > 0"));
    }
    if params.point_budget == 0 {
        return Err(AggregateError::InvalidParams("point_budget must be > 0"));
    }
    let inv = 1.0 / params.voxel_size;
    // Per-frame transform+bucket runs in parallel; the frame-ordered flatten
    // plus the canonical sort in reduce_voxels keep the result schedule-free.
    let per_frame: Vec<Vec<(VoxelKey, Point)>> = frames
        .par_iter()
        .map(|frame| {
            let cloud = source.load(frame)?;
            Ok(cloud
                .points
                .iter()
                .map(|p| {
                    let shifted = Point { z: p.z + params.z_offset, ..*p };
                    let v = frame.pose.apply(&shifted.coords());
                    let q = Point { x: v.x, y: v.y, z: v.z, t: 0.0 };
                    (voxel_key(&q, inv), q)
                })
                .collect())
        })
        .collect::<Result<_, AggregateError>>()?;
    let mut pairs = Vec::with_capacity(per_frame.iter().map(Vec::len).sum());
    for chunk in per_frame {
        pairs.extend(chunk);
    }
    let centroids = reduce_voxels(pairs);
    let points = budget_subsample(centroids, params.point_budget, params.seed);
    Ok(AggregatedCloud {
        points: PointCloud::new(points),
        source_sequence: frames[0].sequence.clone(),
        voxel_size: params.voxel_size,
        point_budget: params.point_budget,
    })
}

/// Transform the aggregated cloud back into a frame's local coordinates,
/// optionally cropping to an axis-aligned region of the local frame.
pub fn localize(
    agg: &AggregatedCloud,
    frame: &FrameRecord,
    crop: Option<&RangeCrop>,
) -> Result<PointCloud, AggregateError> {
    if frame.sequence != agg.source_sequence {
        return Err(AggregateError::FrameSequenceMismatch {
            frame_seq: frame.sequence.clone(),
            agg_seq: agg.source_sequence.clone(),
        });
    }
    let inv = frame.pose.inverse();
    let mut points: Vec<Point> = agg
        .points
        .points
        .iter()
        .map(|p| {
            let v = inv.apply(&p.coords());
            Point { x: v.x, y: v.y, z: v.z, t: p.t }
        })
        .collect();
    if let Some(region) = crop {
        points.retain(|p| region.contains(p));
    }
    Ok(PointCloud::new(points))
}
