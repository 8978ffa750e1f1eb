//! Quasi-stationary scoring and training-label construction.
//!
//! An object observed at boxes `b_1..b_N` with per-frame interior point
//! counts `C(b_i)` gets, per observation, the point-weighted average footprint
//! overlap against the whole track:
//!
//! ```text
//! QSS(b_i) = sum_j [ C(b_j) / sum_k C(b_k) ] * IoU(b_i, b_j)
//! ```
//!
//! The observation maximizing QSS is the most likely undistorted location of
//! the object in the aggregated cloud. Tracks whose best score exceeds a
//! threshold epsilon are treated as quasi-stationary and their best box is
//! projected into every frame of the sequence, including frames where the
//! object was never observed.

use std::collections::{BTreeMap, HashMap, HashSet};

use thiserror::Error;

use crate::aggregate::FrameRecord;
use crate::geom::{bev_iou, points_in_box, transform_box, Box3d, PointCloud, YawMode};
use crate::io::BoxRecord;

#[derive(Debug, Error)]
pub enum QstError {
    #[error("track {0:?} has no observations")]
    EmptyTrack(String),
    #[error("track {object:?} has duplicate observations for frame {frame}")]
    DuplicateFrame { object: String, frame: usize },
    #[error("zero-total-points: track {0:?} has no interior points anywhere")]
    ZeroTotalPoints(String),
    #[error("track {object:?} references frame {frame} which is not in the sequence")]
    UnknownFrame { object: String, frame: usize },
    #[error("annotation record at frame {0} has no object id")]
    MissingObjectId(usize),
    #[error("frame {frame}: {source}")]
    Geometry {
        frame: usize,
        #[source]
        source: crate::geom::GeomError,
    },
}

/// One observation of a tracked object, in the global frame.
#[derive(Debug, Clone)]
pub struct Observation {
    pub frame_index: usize,
    pub bbox: Box3d,
    pub point_count: u64,
}

/// One object's per-frame box observations with interior point counts.
#[derive(Debug, Clone)]
pub struct TrackedObject {
    pub object_id: String,
    observations: Vec<Observation>,
}

impl TrackedObject {
    /// Observations are kept sorted by frame index; indices must be unique.
    pub fn new(object_id: impl Into<String>, mut observations: Vec<Observation>) -> Result<Self, QstError> {
        let object_id = object_id.into();
        if observations.is_empty() {
            return Err(QstError::EmptyTrack(object_id));
        }
        observations.sort_by_key(|o| o.frame_index);
        for pair in observations.windows(2) {
            if pair[0].frame_index == pair[1].frame_index {
                return Err(QstError::DuplicateFrame { object: object_id, frame: pair[0].frame_index });
            }
        }
        Ok(Self { object_id, observations })
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn total_points(&self) -> u64 {
        self.observations.iter().map(|o| o.point_count).sum()
    }

    pub fn label(&self) -> &str {
        &self.observations[0].bbox.label
    }
}

/// The selected quasi-stationary box `b*` and its score `s*`.
#[derive(Debug, Clone)]
pub struct QuasiStationaryLabel {
    pub object_id: String,
    /// Frame index of the winning observation.
    pub frame_index: usize,
    /// Winning box in the global frame.
    pub box_star: Box3d,
    /// Maximum QSS over the track's observations.
    pub score_star: f64,
}

/// Point-weighted average IoU of observation `i` against the whole track.
pub fn qss(track: &TrackedObject, i: usize) -> Result<f64, QstError> {
    let obs = track.observations();
    assert!(i < obs.len(), "observation index out of range");
    let total = track.total_points();
    if total == 0 {
        return Err(QstError::ZeroTotalPoints(track.object_id.clone()));
    }
    let inv_total = 1.0 / total as f64;
    let mut score = 0.0;
    for other in obs {
        if other.point_count == 0 {
            continue;
        }
        score += other.point_count as f64 * inv_total * bev_iou(&obs[i].bbox, &other.bbox);
    }
    Ok(score)
}

/// Pick the observation maximizing QSS; ties go to the earliest frame index.
pub fn select_quasi_stationary(track: &TrackedObject) -> Result<QuasiStationaryLabel, QstError> {
    let mut best: Option<(f64, usize)> = None;
    for i in 0..track.observations().len() {
        let s = qss(track, i)?;
        let better = match best {
            None => true,
            Some((bs, bi)) => {
                s > bs
                    || (s == bs
                        && track.observations()[i].frame_index < track.observations()[bi].frame_index)
            }
        };
        if better {
            best = Some((s, i));
        }
    }
    let (score_star, idx) = best.expect("non-empty track");
    let chosen = &track.observations()[idx];
    Ok(QuasiStationaryLabel {
        object_id: track.object_id.clone(),
        frame_index: chosen.frame_index,
        box_star: chosen.bbox.clone(),
        score_star,
    })
}

/// A track excluded from the label set, with the reason.
#[derive(Debug)]
pub struct SkippedTrack {
    pub object_id: String,
    pub reason: QstError,
}

/// Quasi-stationary training labels: local-frame records covering every frame.
#[derive(Debug, Default)]
pub struct QstLabels {
    /// One record per accepted track per frame, ordered by frame then track.
    pub records: Vec<BoxRecord>,
    /// Accepted tracks' selections, in input order.
    pub accepted: Vec<QuasiStationaryLabel>,
    /// Tracks skipped due to per-track errors.
    pub skipped: Vec<SkippedTrack>,
}

/// For each track with `s* > epsilon`, project `b*` into every frame of the
/// sequence (out-of-sight frames included). Tracks at or below epsilon emit
/// nothing; per-track errors mark the track skipped.
pub fn build_qst_labels(tracks: &[TrackedObject], frames: &[FrameRecord], epsilon: f64) -> QstLabels {
    let mut out = QstLabels::default();
    for track in tracks {
        match select_quasi_stationary(track) {
            Ok(sel) => {
                if sel.score_star > epsilon {
                    out.accepted.push(sel);
                }
            }
            Err(reason) => {
                out.skipped.push(SkippedTrack { object_id: track.object_id.clone(), reason })
            }
        }
    }
    for frame in frames {
        let inv = frame.pose.inverse();
        for sel in &out.accepted {
            match transform_box(&inv, &sel.box_star, YawMode::General) {
                Ok(local) => out.records.push(BoxRecord {
                    frame_index: frame.index,
                    object_id: Some(sel.object_id.clone()),
                    bbox: local,
                }),
                Err(source) => out.skipped.push(SkippedTrack {
                    object_id: sel.object_id.clone(),
                    reason: QstError::Geometry { frame: frame.index, source },
                }),
            }
        }
    }
    out
}

fn timestamps_by_index(frames: &[FrameRecord]) -> HashMap<usize, f64> {
    frames.iter().map(|f| (f.index, f.timestamp)).collect()
}

fn consecutive_speeds(
    track: &TrackedObject,
    times: &HashMap<usize, f64>,
) -> Result<Vec<f64>, QstError> {
    let obs = track.observations();
    let mut speeds = Vec::with_capacity(obs.len().saturating_sub(1));
    for pair in obs.windows(2) {
        let t0 = *times.get(&pair[0].frame_index).ok_or(QstError::UnknownFrame {
            object: track.object_id.clone(),
            frame: pair[0].frame_index,
        })?;
        let t1 = *times.get(&pair[1].frame_index).ok_or(QstError::UnknownFrame {
            object: track.object_id.clone(),
            frame: pair[1].frame_index,
        })?;
        let dt = t1 - t0;
        if dt <= 0.0 {
            continue;
        }
        let d = (pair[1].bbox.center - pair[0].bbox.center).norm();
        speeds.push(d / dt);
    }
    Ok(speeds)
}

/// Labels from the naive max-speed filter: kept tracks contribute their
/// per-frame observed boxes only (no out-of-sight projection). Provided as
/// the ablation baseline.
#[derive(Debug, Default)]
pub struct NaiveLabels {
    pub records: Vec<BoxRecord>,
    pub kept: Vec<String>,
    pub removed: Vec<String>,
    pub skipped: Vec<SkippedTrack>,
}

/// Keep a track iff its maximum inter-observation speed is below
/// `speed_threshold`. Single-observation tracks have undefined speed and are
/// treated as stationary.
pub fn naive_speed_filter_labels(
    tracks: &[TrackedObject],
    frames: &[FrameRecord],
    speed_threshold: f64,
) -> NaiveLabels {
    let times = timestamps_by_index(frames);
    let poses: HashMap<usize, &FrameRecord> = frames.iter().map(|f| (f.index, f)).collect();
    let mut out = NaiveLabels::default();
    for track in tracks {
        let speeds = match consecutive_speeds(track, &times) {
            Ok(s) => s,
            Err(reason) => {
                out.skipped.push(SkippedTrack { object_id: track.object_id.clone(), reason });
                continue;
            }
        };
        let max_speed = speeds.iter().copied().fold(0.0f64, f64::max);
        if max_speed >= speed_threshold && !speeds.is_empty() {
            out.removed.push(track.object_id.clone());
            continue;
        }
        out.kept.push(track.object_id.clone());
        for obs in track.observations() {
            let Some(frame) = poses.get(&obs.frame_index) else {
                continue;
            };
            match transform_box(&frame.pose.inverse(), &obs.bbox, YawMode::General) {
                Ok(local) => out.records.push(BoxRecord {
                    frame_index: obs.frame_index,
                    object_id: Some(track.object_id.clone()),
                    bbox: local,
                }),
                Err(source) => out.skipped.push(SkippedTrack {
                    object_id: track.object_id.clone(),
                    reason: QstError::Geometry { frame: obs.frame_index, source },
                }),
            }
        }
    }
    out.records.sort_by_key(|r| r.frame_index);
    out
}

/// Per-class cumulative distribution of minimum instantaneous track speeds.
#[derive(Debug, Clone, serde::Serialize)]
pub struct SpeedStatistics {
    pub bins: Vec<f64>,
    pub rows: Vec<SpeedRow>,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct SpeedRow {
    pub label: String,
    pub objects: usize,
    /// Fraction of objects whose minimum speed is at or below each bin.
    pub fractions: Vec<f64>,
}

/// Fraction of objects per class that are at or below each speed bin at some
/// point in the sequence. Tracks with fewer than two observations count as
/// zero-speed.
pub fn speed_statistics(
    tracks: &[TrackedObject],
    frames: &[FrameRecord],
    bins: &[f64],
) -> Result<SpeedStatistics, QstError> {
    let times = timestamps_by_index(frames);
    let mut per_class: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for track in tracks {
        let speeds = consecutive_speeds(track, &times)?;
        let min_speed = speeds.iter().copied().fold(f64::INFINITY, f64::min);
        let min_speed = if min_speed.is_finite() { min_speed } else { 0.0 };
        per_class.entry(track.label().to_string()).or_default().push(min_speed);
    }
    let rows = per_class
        .into_iter()
        .map(|(label, mins)| {
            let n = mins.len();
            let fractions = bins
                .iter()
                .map(|&b| mins.iter().filter(|&&m| m <= b).count() as f64 / n as f64)
                .collect();
            SpeedRow { label, objects: n, fractions }
        })
        .collect();
    Ok(SpeedStatistics { bins: bins.to_vec(), rows })
}

/// Group local-frame annotation records into global-frame tracks, recomputing
/// interior point counts against the per-frame clouds.
pub fn tracks_from_records(
    records: &[BoxRecord],
    frames: &[FrameRecord],
    clouds: &[PointCloud],
) -> Result<Vec<TrackedObject>, QstError> {
    assert_eq!(frames.len(), clouds.len(), "frames and clouds must align");
    let position: HashMap<usize, usize> =
        frames.iter().enumerate().map(|(pos, f)| (f.index, pos)).collect();
    let mut order: Vec<String> = Vec::new();
    let mut grouped: HashMap<String, Vec<Observation>> = HashMap::new();
    let mut seen: HashSet<(String, usize)> = HashSet::new();
    for rec in records {
        let id = rec
            .object_id
            .clone()
            .ok_or(QstError::MissingObjectId(rec.frame_index))?;
        let pos = *position.get(&rec.frame_index).ok_or(QstError::UnknownFrame {
            object: id.clone(),
            frame: rec.frame_index,
        })?;
        if !seen.insert((id.clone(), rec.frame_index)) {
            return Err(QstError::DuplicateFrame { object: id, frame: rec.frame_index });
        }
        let frame = &frames[pos];
        let point_count = points_in_box(&clouds[pos], &rec.bbox) as u64;
        let global = transform_box(&frame.pose, &rec.bbox, YawMode::General)
            .map_err(|source| QstError::Geometry { frame: rec.frame_index, source })?;
        if !grouped.contains_key(&id) {
            order.push(id.clone());
        }
        grouped
            .entry(id)
            .or_default()
            .push(Observation { frame_index: rec.frame_index, bbox: global, point_count });
    }
    order
        .into_iter()
        .map(|id| {
            let obs = grouped.remove(&id).expect("grouped by construction");
            TrackedObject::new(id, obs)
        })
        .collect()
}
