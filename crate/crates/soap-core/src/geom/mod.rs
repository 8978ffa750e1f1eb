//! Core geometric types and kernels: SE(3) poses, timestamped points,
//! 7-DOF oriented boxes, rotated-footprint IoU, point-in-box tests, and NMS.
//!
//! All types are immutable values and all operations are pure functions, so
//! everything here is safe to share across threads.

mod grid;
mod iou;
mod nms;

pub use grid::PointGrid;
pub use iou::{bev_iou, footprint_area, footprint_corners, iou_3d};
pub use nms::nms;

use nalgebra::{Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance for the orthonormality check on pose rotations.
pub const ROTATION_TOL: f64 = 1e-9;

/// Tolerance below which a pose counts as a pure z-rotation plus translation.
pub const PLANAR_TOL: f64 = 1e-9;

/// Clipped footprints with area below this are treated as empty.
pub const DEGENERATE_AREA: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum GeomError {
    #[error("rotation is not orthonormal (max |R'R - I| entry = {max_dev:.3e})")]
    NonOrthonormalRotation { max_dev: f64 },
    #[error("rotation determinant is {det:.6}, expected +1")]
    ImproperRotation { det: f64 },
    #[error("non-planar-pose: rotation is not a pure z-rotation (deviation {max_dev:.3e})")]
    NonPlanarPose { max_dev: f64 },
    #[error("box size must be strictly positive, got ({0}, {1}, {2})")]
    NonPositiveSize(f64, f64, f64),
    #[error("score must lie in [0, 1], got {0}")]
    ScoreOutOfRange(f64),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
}

/// Normalize an angle into `(-pi, pi]`.
pub fn normalize_yaw(yaw: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let r = yaw.rem_euclid(two_pi);
    if r > std::f64::consts::PI {
        r - two_pi
    } else {
        r
    }
}

/// An SE(3) rigid transform (rotation + translation) tying one frame to another.
#[derive(Debug, Clone, PartialEq)]
pub struct Pose {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl Pose {
    /// Build a pose from an explicit rotation and translation, validating that
    /// the rotation is orthonormal with determinant +1 to within [`ROTATION_TOL`].
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self, GeomError> {
        if !rotation.iter().all(|v| v.is_finite()) || !translation.iter().all(|v| v.is_finite()) {
            return Err(GeomError::NonFinite("pose"));
        }
        let dev = (rotation.transpose() * rotation - Matrix3::identity())
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()));
        if dev > ROTATION_TOL {
            return Err(GeomError::NonOrthonormalRotation { max_dev: dev });
        }
        let det = rotation.determinant();
        if det <= 0.0 {
            return Err(GeomError::ImproperRotation { det });
        }
        Ok(Self { rotation, translation })
    }

    pub fn identity() -> Self {
        Self { rotation: Matrix3::identity(), translation: Vector3::zeros() }
    }

    /// Pure z-rotation by `yaw` plus a translation.
    pub fn from_yaw_translation(yaw: f64, translation: Vector3<f64>) -> Self {
        let (s, c) = yaw.sin_cos();
        let rotation = Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0);
        Self { rotation, translation }
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    /// `self ∘ other`: the pose that applies `other` first, then `self`.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> Pose {
        let rt = self.rotation.transpose();
        Pose { rotation: rt, translation: -(rt * self.translation) }
    }

    /// z-Euler (heading) component of the rotation.
    pub fn yaw(&self) -> f64 {
        self.rotation[(1, 0)].atan2(self.rotation[(0, 0)])
    }

    /// Whether the rotation is a pure z-rotation to within `tol`.
    pub fn is_planar(&self, tol: f64) -> bool {
        self.planar_deviation() <= tol
    }

    fn planar_deviation(&self) -> f64 {
        let r = &self.rotation;
        [r[(0, 2)], r[(1, 2)], r[(2, 0)], r[(2, 1)], r[(2, 2)] - 1.0]
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn apply(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * v + self.translation
    }
}

/// A 3D point with a per-point timestamp offset (seconds, relative to its
/// frame's reference time; 0 for aggregated clouds).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub t: f64,
}

impl Point {
    pub fn new(x: f64, y: f64, z: f64, t: f64) -> Self {
        debug_assert!(
            x.is_finite() && y.is_finite() && z.is_finite() && t.is_finite(),
            "point components must be finite"
        );
        Self { x, y, z, t }
    }

    pub fn xyz(x: f64, y: f64, z: f64) -> Self {
        Self::new(x, y, z, 0.0)
    }

    pub fn coords(&self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite() && self.t.is_finite()
    }
}

/// An ordered set of points. Frames and aggregated clouds share this type.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Point>,
}

impl PointCloud {
    pub fn new(points: Vec<Point>) -> Self {
        Self { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Apply a pose to a point. The timestamp is unchanged.
pub fn transform_point(pose: &Pose, p: &Point) -> Point {
    let v = pose.apply(&p.coords());
    Point { x: v.x, y: v.y, z: v.z, t: p.t }
}

/// Apply a pose to every point of a cloud.
pub fn transform_cloud(pose: &Pose, cloud: &PointCloud) -> PointCloud {
    PointCloud::new(cloud.points.iter().map(|p| transform_point(pose, p)).collect())
}

/// A 7-DOF oriented box (center, size, yaw) with optional planar velocity,
/// confidence score, and class label.
///
/// In the box frame (translate by `-center`, rotate by `-yaw`) the interior is
/// `[-w/2, w/2] x [-l/2, l/2] x [-h/2, h/2]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Box3d {
    pub center: Vector3<f64>,
    /// (w, l, h): extents along the box x, y, z axes. All strictly positive.
    pub size: Vector3<f64>,
    /// Heading in radians, normalized to `(-pi, pi]`.
    pub yaw: f64,
    pub velocity: Option<Vector2<f64>>,
    /// Confidence in `[0, 1]`.
    pub score: f64,
    pub label: String,
}

impl Box3d {
    pub fn new(
        center: Vector3<f64>,
        size: Vector3<f64>,
        yaw: f64,
        velocity: Option<Vector2<f64>>,
        score: f64,
        label: impl Into<String>,
    ) -> Result<Self, GeomError> {
        if !center.iter().all(|v| v.is_finite()) || !yaw.is_finite() {
            return Err(GeomError::NonFinite("box"));
        }
        if let Some(v) = &velocity {
            if !v.iter().all(|c| c.is_finite()) {
                return Err(GeomError::NonFinite("box velocity"));
            }
        }
        if !(size.x > 0.0 && size.y > 0.0 && size.z > 0.0) || !size.iter().all(|v| v.is_finite()) {
            return Err(GeomError::NonPositiveSize(size.x, size.y, size.z));
        }
        if !(0.0..=1.0).contains(&score) {
            return Err(GeomError::ScoreOutOfRange(score));
        }
        Ok(Self { center, size, yaw: normalize_yaw(yaw), velocity, score, label: label.into() })
    }

    pub fn volume(&self) -> f64 {
        self.size.x * self.size.y * self.size.z
    }

    pub fn z_range(&self) -> (f64, f64) {
        (self.center.z - self.size.z / 2.0, self.center.z + self.size.z / 2.0)
    }

    /// Same geometry with a replaced score.
    pub fn with_score(&self, score: f64) -> Box3d {
        Box3d { score, ..self.clone() }
    }

    /// Whether two boxes describe the same geometry up to the yaw period.
    pub fn same_geometry(&self, other: &Box3d, tol: f64) -> bool {
        (self.center - other.center).amax() <= tol
            && (self.size - other.size).amax() <= tol
            && normalize_yaw(self.yaw - other.yaw).abs() <= tol
    }
}

/// Yaw-composition policy for [`transform_box`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum YawMode {
    /// Reject poses whose rotation is not a pure z-rotation: yaw composition
    /// is exact only then.
    StrictPlanar,
    /// Compose yaw with the rotation's z-Euler extraction and log the decision.
    General,
}

/// Apply a pose to a box: the center transforms as a point, the yaw is
/// incremented by the pose heading and renormalized, and the velocity is
/// rotated by the planar part of the rotation. Size, score, and label are
/// unchanged.
pub fn transform_box(pose: &Pose, b: &Box3d, mode: YawMode) -> Result<Box3d, GeomError> {
    if !pose.is_planar(PLANAR_TOL) {
        match mode {
            YawMode::StrictPlanar => {
                return Err(GeomError::NonPlanarPose { max_dev: pose.planar_deviation() })
            }
            YawMode::General => log::debug!(
                "composing yaw through z-Euler extraction of a non-planar pose (deviation {:.3e})",
                pose.planar_deviation()
            ),
        }
    }
    let heading = pose.yaw();
    let velocity = b.velocity.map(|v| {
        let (s, c) = heading.sin_cos();
        Vector2::new(c * v.x - s * v.y, s * v.x + c * v.y)
    });
    Ok(Box3d {
        center: pose.apply(&b.center),
        size: b.size,
        yaw: normalize_yaw(b.yaw + heading),
        velocity,
        score: b.score,
        label: b.label.clone(),
    })
}

/// Number of cloud points inside the box (boundary-inclusive).
pub fn points_in_box(cloud: &PointCloud, b: &Box3d) -> usize {
    let (s, c) = b.yaw.sin_cos();
    let (hw, hl, hh) = (b.size.x / 2.0, b.size.y / 2.0, b.size.z / 2.0);
    cloud
        .points
        .iter()
        .filter(|p| {
            let dx = p.x - b.center.x;
            let dy = p.y - b.center.y;
            let dz = p.z - b.center.z;
            // Rotate into the box frame (by -yaw).
            let u = c * dx + s * dy;
            let v = -s * dx + c * dy;
            u.abs() <= hw && v.abs() <= hl && dz.abs() <= hh
        })
        .count()
}
