//! Persistence: sequence manifests, point clouds, boxes, and configs.
//!
//! Formats are versioned and bit-exact; readers reject anything the writers
//! cannot produce. The byte-level layout is documented in `docs/FORMATS.md`
//! at the repository root.

mod boxes;
mod cloud;

pub use boxes::{group_by_frame, read_boxes, read_boxes_from_str, write_boxes, write_boxes_to_string, BoxRecord};
pub use cloud::{read_cloud, write_cloud, CLOUD_MAGIC, CLOUD_VERSION};

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aggregate::{CloudRef, CloudSource, FrameRecord};
use crate::geom::{GeomError, Pose, PointCloud, ROTATION_TOL};

/// Manifest schema version understood by this build.
pub const MANIFEST_VERSION: u32 = 1;

/// Orthonormality tolerance accepted when loading poses from disk. Rotations
/// within this bound (but outside the strict pose invariant) are repaired by
/// polar decomposition with a warning.
pub const POSE_LOAD_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("bad-magic: not a recognized cloud file")]
    BadMagic,
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u32),
    #[error("truncated-file: {0}")]
    Truncated(&'static str),
    #[error("trailing bytes after the declared record count")]
    TrailingBytes,
    #[error("non-finite-values: record {index}")]
    NonFiniteValue { index: usize },
    #[error("value at record {index} is not representable in 32-bit floats")]
    Unrepresentable { index: usize },
    #[error("parse-error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid box at line {line}: {source}")]
    InvalidBox {
        line: usize,
        #[source]
        source: GeomError,
    },
    #[error("manifest frames must be sorted by index without duplicates (index {0})")]
    UnsortedFrames(usize),
    #[error("pose of frame {index} is not orthonormal within {POSE_LOAD_TOL:e} (deviation {max_dev:.3e})")]
    PoseNotOrthonormal { index: usize, max_dev: f64 },
    #[error("pose of frame {index}: {source}")]
    PoseInvalid {
        index: usize,
        #[source]
        source: GeomError,
    },
    #[error("referenced file does not exist: {0}")]
    MissingFile(PathBuf),
    #[error("frame index {0} outside the sequence")]
    FrameOutOfRange(usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ManifestFrameFile {
    index: usize,
    timestamp: f64,
    /// Row-major 3x4 pose: three rows of [r r r t].
    pose: [f64; 12],
    cloud: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ManifestFile {
    version: u32,
    sequence_id: String,
    frame_rate: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    z_offset: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    annotations: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    detections: Option<String>,
    frames: Vec<ManifestFrameFile>,
}

/// One frame's entry in a loaded manifest.
#[derive(Debug, Clone)]
pub struct ManifestFrame {
    pub index: usize,
    pub timestamp: f64,
    pub pose: Pose,
    /// Cloud path relative to the manifest directory.
    pub cloud: String,
}

/// A sequence's frames, poses, label file locations, and sensor frame rate.
#[derive(Debug, Clone)]
pub struct SequenceManifest {
    pub sequence_id: String,
    pub frame_rate: f64,
    pub z_offset: Option<f64>,
    pub annotations: Option<String>,
    pub detections: Option<String>,
    pub frames: Vec<ManifestFrame>,
    /// Directory all relative paths resolve against.
    pub root: PathBuf,
}

fn pose_to_rows(pose: &Pose) -> [f64; 12] {
    let r = pose.rotation();
    let t = pose.translation();
    [
        r[(0, 0)], r[(0, 1)], r[(0, 2)], t.x,
        r[(1, 0)], r[(1, 1)], r[(1, 2)], t.y,
        r[(2, 0)], r[(2, 1)], r[(2, 2)], t.z,
    ]
}

/// Nearest rotation matrix in the Frobenius sense, via SVD (polar decomposition).
fn nearest_rotation(m: &Matrix3<f64>) -> Option<Matrix3<f64>> {
    let svd = m.svd(true, true);
    let u = svd.u?;
    let vt = svd.v_t?;
    let mut r = u * vt;
    if r.determinant() < 0.0 {
        // Flip the axis of least significance to restore a proper rotation.
        let mut u2 = u;
        u2.column_mut(2).neg_mut();
        r = u2 * vt;
    }
    Some(r)
}

fn pose_from_rows(index: usize, rows: &[f64; 12]) -> Result<Pose, FormatError> {
    let rot = Matrix3::new(
        rows[0], rows[1], rows[2],
        rows[4], rows[5], rows[6],
        rows[8], rows[9], rows[10],
    );
    let trans = Vector3::new(rows[3], rows[7], rows[11]);
    let dev = (rot.transpose() * rot - Matrix3::identity())
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()));
    if dev <= ROTATION_TOL {
        return Pose::new(rot, trans).map_err(|source| FormatError::PoseInvalid { index, source });
    }
    if dev > POSE_LOAD_TOL {
        return Err(FormatError::PoseNotOrthonormal { index, max_dev: dev });
    }
    let fixed = nearest_rotation(&rot).ok_or(FormatError::PoseNotOrthonormal { index, max_dev: dev })?;
    log::warn!(
        "frame {index}: pose rotation deviates from orthonormal by {dev:.3e}; re-orthonormalized"
    );
    Pose::new(fixed, trans).map_err(|source| FormatError::PoseInvalid { index, source })
}

/// Read and validate a sequence manifest. All referenced files must resolve.
pub fn read_manifest(path: impl AsRef<Path>) -> Result<SequenceManifest, FormatError> {
    let path = path.as_ref();
    let raw: ManifestFile = serde_json::from_str(&fs::read_to_string(path)?)?;
    if raw.version != MANIFEST_VERSION {
        return Err(FormatError::UnsupportedVersion(raw.version));
    }
    let root = path.parent().unwrap_or_else(|| Path::new(".")).to_path_buf();
    let mut frames = Vec::with_capacity(raw.frames.len());
    let mut last_index: Option<usize> = None;
    for f in &raw.frames {
        if let Some(prev) = last_index {
            if f.index <= prev {
                return Err(FormatError::UnsortedFrames(f.index));
            }
        }
        last_index = Some(f.index);
        let cloud_path = root.join(&f.cloud);
        if !cloud_path.is_file() {
            return Err(FormatError::MissingFile(cloud_path));
        }
        frames.push(ManifestFrame {
            index: f.index,
            timestamp: f.timestamp,
            pose: pose_from_rows(f.index, &f.pose)?,
            cloud: f.cloud.clone(),
        });
    }
    for opt in [&raw.annotations, &raw.detections] {
        if let Some(rel) = opt {
            let p = root.join(rel);
            if !p.is_file() {
                return Err(FormatError::MissingFile(p));
            }
        }
    }
    Ok(SequenceManifest {
        sequence_id: raw.sequence_id,
        frame_rate: raw.frame_rate,
        z_offset: raw.z_offset,
        annotations: raw.annotations,
        detections: raw.detections,
        frames,
        root,
    })
}

/// Write a manifest next to its referenced files.
pub fn write_manifest(path: impl AsRef<Path>, manifest: &SequenceManifest) -> Result<(), FormatError> {
    let raw = ManifestFile {
        version: MANIFEST_VERSION,
        sequence_id: manifest.sequence_id.clone(),
        frame_rate: manifest.frame_rate,
        z_offset: manifest.z_offset,
        annotations: manifest.annotations.clone(),
        detections: manifest.detections.clone(),
        frames: manifest
            .frames
            .iter()
            .map(|f| ManifestFrameFile {
                index: f.index,
                timestamp: f.timestamp,
                pose: pose_to_rows(&f.pose),
                cloud: f.cloud.clone(),
            })
            .collect(),
    };
    let mut text = serde_json::to_string_pretty(&raw)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

impl SequenceManifest {
    /// Frame records for the aggregation stage, with file-backed cloud refs.
    pub fn frame_records(&self) -> Vec<FrameRecord> {
        self.frames
            .iter()
            .map(|f| FrameRecord {
                sequence: self.sequence_id.clone(),
                index: f.index,
                timestamp: f.timestamp,
                pose: f.pose.clone(),
                cloud_ref: CloudRef::File(self.root.join(&f.cloud)),
            })
            .collect()
    }

    /// Resolve a path relative to the manifest directory.
    pub fn resolve(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    /// Load every frame's point cloud, in frame order.
    pub fn load_clouds(&self) -> Result<Vec<PointCloud>, FormatError> {
        self.frames.iter().map(|f| read_cloud(self.root.join(&f.cloud))).collect()
    }
}

/// File-backed cloud source reading through [`read_cloud`].
pub struct FileClouds;

impl CloudSource for FileClouds {
    fn load(&self, frame: &FrameRecord) -> Result<PointCloud, crate::aggregate::AggregateError> {
        match &frame.cloud_ref {
            CloudRef::File(path) => read_cloud(path).map_err(|e| {
                crate::aggregate::AggregateError::MissingCloud {
                    frame: frame.index,
                    detail: e.to_string(),
                }
            }),
            CloudRef::Inline(_) => Err(crate::aggregate::AggregateError::MissingCloud {
                frame: frame.index,
                detail: "inline cloud ref given to the file-backed source".into(),
            }),
        }
    }
}

/// Read a JSON value of any serde-decodable config type.
pub fn read_json<T: serde::de::DeserializeOwned>(path: impl AsRef<Path>) -> Result<T, FormatError> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

/// Write a config or report as pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<(), FormatError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}
