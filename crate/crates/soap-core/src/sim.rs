//! Synthetic sequence and detector simulator.
//!
//! Scenes are ray-cast: a grid of azimuth/elevation rays per frame hits
//! object boxes or the ground plane, nearest surface wins (so occlusion falls
//! out of the shadowing), then Gaussian noise and dropout are applied.
//! Everything is a pure function of (spec, seed); per-frame RNG streams keep
//! results independent of scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aggregate::{CloudRef, FrameRecord};
use crate::geom::{normalize_yaw, points_in_box, transform_box, Box3d, Point, PointCloud, Pose, YawMode};
use crate::io::BoxRecord;
use crate::qst::{Observation, TrackedObject};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid-spec: {0}")]
    InvalidSpec(String),
}

/// A trajectory waypoint: pose on the ground plane at a given time.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Waypoint {
    pub time: f64,
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MotionProfile {
    Stationary,
    QuasiStationary,
    Dynamic,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ObjectSpec {
    pub id: String,
    pub label: String,
    /// (w, l, h) in meters.
    pub size: [f64; 3],
    /// Piecewise-linear (position, yaw, time) trajectory; clamped outside its span.
    pub trajectory: Vec<Waypoint>,
    pub motion: MotionProfile,
}

impl ObjectSpec {
    /// A parked vehicle.
    pub fn stationary(id: &str, x: f64, y: f64, yaw: f64) -> Self {
        Self {
            id: id.into(),
            label: "vehicle".into(),
            size: [1.9, 4.6, 1.7],
            trajectory: vec![Waypoint { time: 0.0, x, y, yaw }],
            motion: MotionProfile::Stationary,
        }
    }

    /// A vehicle that dwells at (x, y) until `dwell_until`, then departs along
    /// its heading at `speed` for `displacement` meters and parks again.
    pub fn dweller(
        id: &str,
        x: f64,
        y: f64,
        yaw: f64,
        dwell_until: f64,
        speed: f64,
        displacement: f64,
    ) -> Self {
        let travel = displacement / speed;
        let (s, c) = yaw.sin_cos();
        Self {
            id: id.into(),
            label: "vehicle".into(),
            size: [1.9, 4.6, 1.7],
            trajectory: vec![
                Waypoint { time: 0.0, x, y, yaw },
                Waypoint { time: dwell_until, x, y, yaw },
                Waypoint {
                    time: dwell_until + travel,
                    x: x + displacement * c,
                    y: y + displacement * s,
                    yaw,
                },
            ],
            motion: MotionProfile::QuasiStationary,
        }
    }

    /// A vehicle driving a straight segment at constant speed.
    pub fn driving(id: &str, from: (f64, f64), to: (f64, f64), t0: f64, t1: f64) -> Self {
        let yaw = (to.1 - from.1).atan2(to.0 - from.0);
        Self {
            id: id.into(),
            label: "vehicle".into(),
            size: [1.9, 4.6, 1.7],
            trajectory: vec![
                Waypoint { time: t0, x: from.0, y: from.1, yaw },
                Waypoint { time: t1, x: to.0, y: to.1, yaw },
            ],
            motion: MotionProfile::Dynamic,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SensorSpec {
    pub max_range: f64,
    pub azimuth_steps: usize,
    pub elevation_steps: usize,
    /// Elevation span in radians, low to high.
    pub elevation_min: f64,
    pub elevation_max: f64,
    /// Sensor height above the vehicle origin (which sits on the ground).
    pub mount_height: f64,
    /// Per-point Gaussian noise, per axis.
    pub noise_sigma: f64,
    /// Probability of dropping a return.
    pub dropout: f64,
}

impl Default for SensorSpec {
    fn default() -> Self {
        Self {
            max_range: 60.0,
            azimuth_steps: 600,
            elevation_steps: 10,
            elevation_min: -0.35,
            elevation_max: 0.03,
            mount_height: 1.8,
            noise_sigma: 0.02,
            dropout: 0.02,
        }
    }
}

impl SensorSpec {
    pub fn rays_per_frame(&self) -> usize {
        self.azimuth_steps * self.elevation_steps
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub seed: u64,
    pub sequence_id: String,
    pub n_frames: usize,
    pub frame_rate: f64,
    /// Ego trajectory waypoints; the pose is planar (z-rotation + translation).
    pub ego_path: Vec<Waypoint>,
    pub objects: Vec<ObjectSpec>,
    pub sensor: SensorSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DetectorSpec {
    /// Piecewise-linear recall vs in-box point count, clamped at the ends.
    pub recall_curve: Vec<(f64, f64)>,
    /// Center localization noise per axis (meters).
    pub center_sigma: f64,
    /// Relative size noise per dimension.
    pub size_frac_sigma: f64,
    /// Heading noise (radians).
    pub yaw_sigma: f64,
    /// Additive noise on the confidence score.
    pub score_noise_sigma: f64,
    /// Poisson mean of false positives per frame.
    pub fp_rate: f64,
    /// False positives fall uniformly in a disc of this radius.
    pub fp_region_radius: f64,
    /// Uniform score range for false positives.
    pub fp_score_range: (f64, f64),
    /// When set, the same clutter boxes recur every frame (fixed in the world)
    /// instead of being independent per frame.
    pub persistent_clutter: bool,
}

impl DetectorSpec {
    /// Profile for a detector reading dense aggregated clouds.
    pub fn dense_branch() -> Self {
        Self {
            recall_curve: vec![(0.0, 0.0), (3.0, 0.0), (10.0, 0.4), (30.0, 0.9), (200.0, 0.99)],
            center_sigma: 0.3,
            size_frac_sigma: 0.04,
            yaw_sigma: 0.04,
            score_noise_sigma: 0.08,
            fp_rate: 1.0,
            fp_region_radius: 55.0,
            fp_score_range: (0.3, 0.9),
            persistent_clutter: false,
        }
    }

    /// Profile for a detector reading sparse per-frame clouds.
    pub fn sparse_branch() -> Self {
        Self {
            recall_curve: vec![(0.0, 0.0), (5.0, 0.05), (20.0, 0.5), (60.0, 0.85), (150.0, 0.95)],
            center_sigma: 0.25,
            size_frac_sigma: 0.05,
            yaw_sigma: 0.05,
            score_noise_sigma: 0.08,
            fp_rate: 0.5,
            fp_region_radius: 55.0,
            fp_score_range: (0.2, 0.8),
            persistent_clutter: false,
        }
    }
}

/// A generated sequence with exact ground truth.
#[derive(Debug, Clone)]
pub struct SimulatedSequence {
    pub frames: Vec<FrameRecord>,
    pub clouds: Vec<PointCloud>,
    /// Global-frame tracks with exact per-frame interior point counts.
    pub tracks: Vec<TrackedObject>,
    /// Local-frame ground-truth records with object ids and velocities.
    pub annotations: Vec<BoxRecord>,
}

const DOMAIN_SENSOR: u64 = 1;
const DOMAIN_DETECTOR: u64 = 2;
const DOMAIN_CLUTTER: u64 = 3;

/// Per-frame counter-derived RNG stream.
fn stream_rng(seed: u64, domain: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((domain << 40) ^ index);
    rng
}

/// Position, heading, and velocity interpolated on a waypoint polyline,
/// clamped outside the span.
fn interpolate(path: &[Waypoint], t: f64) -> (f64, f64, f64, f64, f64) {
    let first = path.first().expect("non-empty path");
    let last = path.last().expect("non-empty path");
    if t <= first.time || path.len() == 1 {
        return (first.x, first.y, first.yaw, 0.0, 0.0);
    }
    if t >= last.time {
        return (last.x, last.y, last.yaw, 0.0, 0.0);
    }
    let seg = path.windows(2).find(|w| t <= w[1].time).expect("t within span");
    let (w0, w1) = (&seg[0], &seg[1]);
    let dt = w1.time - w0.time;
    let alpha = (t - w0.time) / dt;
    let x = w0.x + alpha * (w1.x - w0.x);
    let y = w0.y + alpha * (w1.y - w0.y);
    let yaw = normalize_yaw(w0.yaw + alpha * normalize_yaw(w1.yaw - w0.yaw));
    ((x), (y), yaw, (w1.x - w0.x) / dt, (w1.y - w0.y) / dt)
}

fn validate(spec: &ScenarioSpec) -> Result<(), SimError> {
    if spec.n_frames == 0 {
        return Err(SimError::InvalidSpec("n_frames must be >= 1".into()));
    }
    if !(spec.frame_rate > 0.0) {
        return Err(SimError::InvalidSpec("frame_rate must be > 0".into()));
    }
    if spec.ego_path.is_empty() {
        return Err(SimError::InvalidSpec("ego_path must not be empty".into()));
    }
    let span = spec.n_frames as f64 / spec.frame_rate;
    for path in std::iter::once(&spec.ego_path).chain(spec.objects.iter().map(|o| &o.trajectory)) {
        if path.is_empty() {
            return Err(SimError::InvalidSpec("trajectory must not be empty".into()));
        }
        for w in path.windows(2) {
            if w[1].time <= w[0].time {
                return Err(SimError::InvalidSpec("waypoint times must strictly increase".into()));
            }
        }
        if path.first().unwrap().time < 0.0 || path.last().unwrap().time > span {
            return Err(SimError::InvalidSpec("waypoint times must lie within the sequence span".into()));
        }
    }
    for o in &spec.objects {
        if o.size.iter().any(|&s| !(s > 0.0)) {
            return Err(SimError::InvalidSpec(format!("object {} has non-positive size", o.id)));
        }
    }
    let s = &spec.sensor;
    if !(s.max_range > 0.0)
        || s.azimuth_steps == 0
        || s.elevation_steps == 0
        || s.elevation_min > s.elevation_max
        || s.noise_sigma < 0.0
        || !(0.0..1.0).contains(&s.dropout)
    {
        return Err(SimError::InvalidSpec("sensor parameters out of range".into()));
    }
    Ok(())
}

/// Ray vs box-frame AABB slab test; returns the entry distance if the ray
/// hits in front of the origin.
fn ray_obb(origin: &[f64; 3], dir: &[f64; 3], bbox: &Box3d) -> Option<f64> {
    let (s, c) = bbox.yaw.sin_cos();
    let rel = [origin[0] - bbox.center.x, origin[1] - bbox.center.y, origin[2] - bbox.center.z];
    let o = [c * rel[0] + s * rel[1], -s * rel[0] + c * rel[1], rel[2]];
    let d = [c * dir[0] + s * dir[1], -s * dir[0] + c * dir[1], dir[2]];
    let half = [bbox.size.x / 2.0, bbox.size.y / 2.0, bbox.size.z / 2.0];
    let mut t_enter = f64::NEG_INFINITY;
    let mut t_exit = f64::INFINITY;
    for i in 0..3 {
        if d[i].abs() < 1e-12 {
            if o[i].abs() > half[i] {
                return None;
            }
            continue;
        }
        let t0 = (-half[i] - o[i]) / d[i];
        let t1 = (half[i] - o[i]) / d[i];
        let (lo, hi) = if t0 <= t1 { (t0, t1) } else { (t1, t0) };
        t_enter = t_enter.max(lo);
        t_exit = t_exit.min(hi);
        if t_enter > t_exit {
            return None;
        }
    }
    (t_enter > 1e-3).then_some(t_enter)
}

/// Object boxes in the global frame at time `t`.
fn object_boxes_at(spec: &ScenarioSpec, t: f64) -> Vec<Box3d> {
    spec.objects
        .iter()
        .map(|o| {
            let (x, y, yaw, vx, vy) = interpolate(&o.trajectory, t);
            Box3d::new(
                nalgebra::Vector3::new(x, y, o.size[2] / 2.0),
                nalgebra::Vector3::new(o.size[0], o.size[1], o.size[2]),
                yaw,
                Some(nalgebra::Vector2::new(vx, vy)),
                1.0,
                o.label.clone(),
            )
            .expect("validated object spec")
        })
        .collect()
}

fn ego_pose_at(spec: &ScenarioSpec, t: f64) -> Pose {
    let (x, y, yaw, _, _) = interpolate(&spec.ego_path, t);
    Pose::from_yaw_translation(yaw, nalgebra::Vector3::new(x, y, 0.0))
}

/// Deterministic scene generation: per frame, the ego pose comes from the ego
/// path, rays sample object surfaces and the ground plane within range, and
/// ground-truth tracks carry exact in-box point counts.
pub fn generate_sequence(spec: &ScenarioSpec) -> Result<SimulatedSequence, SimError> {
    validate(spec)?;
    let sensor = &spec.sensor;
    let frame_period = 1.0 / spec.frame_rate;
    let per_frame: Vec<(FrameRecord, PointCloud, Vec<Box3d>)> = (0..spec.n_frames)
        .into_par_iter()
        .map(|i| {
            let t = i as f64 * frame_period;
            let pose = ego_pose_at(spec, t);
            let inv = pose.inverse();
            let globals = object_boxes_at(spec, t);
            let locals: Vec<Box3d> = globals
                .iter()
                .map(|b| transform_box(&inv, b, YawMode::General).expect("planar ego pose"))
                .collect();
            let mut rng = stream_rng(spec.seed, DOMAIN_SENSOR, i as u64);
            let noise = Normal::new(0.0, 1.0).expect("unit normal");
            let origin = [0.0, 0.0, sensor.mount_height];
            let mut points = Vec::new();
            for el_step in 0..sensor.elevation_steps {
                let el = if sensor.elevation_steps == 1 {
                    sensor.elevation_min
                } else {
                    sensor.elevation_min
                        + (sensor.elevation_max - sensor.elevation_min) * el_step as f64
                            / (sensor.elevation_steps - 1) as f64
                };
                let (sin_el, cos_el) = el.sin_cos();
                for az_step in 0..sensor.azimuth_steps {
                    let az = -std::f64::consts::PI
                        + 2.0 * std::f64::consts::PI * az_step as f64 / sensor.azimuth_steps as f64;
                    let (sin_az, cos_az) = az.sin_cos();
                    let dir = [cos_el * cos_az, cos_el * sin_az, sin_el];
                    let mut nearest = f64::INFINITY;
                    for b in &locals {
                        if let Some(t_hit) = ray_obb(&origin, &dir, b) {
                            nearest = nearest.min(t_hit);
                        }
                    }
                    if dir[2] < 0.0 {
                        nearest = nearest.min(-origin[2] / dir[2]);
                    }
                    if nearest > sensor.max_range {
                        continue;
                    }
                    // Draw order is pinned: dropout first, then three normals.
                    if rng.random::<f64>() < sensor.dropout {
                        continue;
                    }
                    let (nx, ny, nz) = (
                        noise.sample(&mut rng) * sensor.noise_sigma,
                        noise.sample(&mut rng) * sensor.noise_sigma,
                        noise.sample(&mut rng) * sensor.noise_sigma,
                    );
                    let t_off = (az_step as f64 / sensor.azimuth_steps as f64) * frame_period;
                    points.push(Point::new(
                        origin[0] + nearest * dir[0] + nx,
                        origin[1] + nearest * dir[1] + ny,
                        origin[2] + nearest * dir[2] + nz,
                        t_off,
                    ));
                }
            }
            let frame = FrameRecord {
                sequence: spec.sequence_id.clone(),
                index: i,
                timestamp: t,
                pose,
                cloud_ref: CloudRef::Inline(i),
            };
            (frame, PointCloud::new(points), locals)
        })
        .collect();

    let mut frames = Vec::with_capacity(spec.n_frames);
    let mut clouds = Vec::with_capacity(spec.n_frames);
    let mut annotations = Vec::new();
    let mut per_object: Vec<Vec<Observation>> = vec![Vec::new(); spec.objects.len()];
    for (frame, cloud, locals) in per_frame {
        for (obj_idx, local) in locals.iter().enumerate() {
            let count = points_in_box(&cloud, local) as u64;
            if count == 0 {
                continue;
            }
            let global = transform_box(&frame.pose, local, YawMode::General).expect("planar pose");
            per_object[obj_idx].push(Observation {
                frame_index: frame.index,
                bbox: global,
                point_count: count,
            });
            annotations.push(BoxRecord {
                frame_index: frame.index,
                object_id: Some(spec.objects[obj_idx].id.clone()),
                bbox: local.clone(),
            });
        }
        frames.push(frame);
        clouds.push(cloud);
    }
    let tracks = spec
        .objects
        .iter()
        .zip(per_object)
        .filter(|(_, obs)| !obs.is_empty())
        .map(|(o, obs)| TrackedObject::new(o.id.clone(), obs).expect("unique frame indices"))
        .collect();
    Ok(SimulatedSequence { frames, clouds, tracks, annotations })
}

fn recall_at(curve: &[(f64, f64)], count: f64) -> f64 {
    if curve.is_empty() {
        return 0.0;
    }
    if count <= curve[0].0 {
        return curve[0].1.clamp(0.0, 1.0);
    }
    for w in curve.windows(2) {
        if count <= w[1].0 {
            let alpha = (count - w[0].0) / (w[1].0 - w[0].0);
            return (w[0].1 + alpha * (w[1].1 - w[0].1)).clamp(0.0, 1.0);
        }
    }
    curve.last().unwrap().1.clamp(0.0, 1.0)
}

fn sample_fp(rng: &mut ChaCha8Rng, spec: &DetectorSpec) -> Box3d {
    let r = spec.fp_region_radius * rng.random::<f64>().sqrt();
    let angle = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
    let grow = |rng: &mut ChaCha8Rng| 1.0 + 0.15 * rng.random_range(-1.0..1.0);
    let (w, l, h) = (1.9 * grow(rng), 4.6 * grow(rng), 1.7 * grow(rng));
    let yaw = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
    let score = rng.random_range(spec.fp_score_range.0..spec.fp_score_range.1);
    Box3d::new(
        nalgebra::Vector3::new(r * angle.cos(), r * angle.sin(), h / 2.0),
        nalgebra::Vector3::new(w, l, h),
        yaw,
        None,
        score,
        "vehicle",
    )
    .expect("sampled box is valid")
}

/// Simulate a detector over ground-truth (or label-derived) tracks: each
/// observation is emitted with probability from the recall curve at its point
/// count, perturbed by localization noise, and scored by a decreasing
/// function of the perturbation magnitude plus noise. Poisson-distributed
/// false positives are added uniformly in the sensed region.
///
/// Detections are local-frame records; true positives carry their source
/// object id, false positives carry none.
pub fn simulate_detector(
    tracks: &[TrackedObject],
    clouds: &[PointCloud],
    frames: &[FrameRecord],
    spec: &DetectorSpec,
    seed: u64,
) -> Vec<BoxRecord> {
    assert_eq!(clouds.len(), frames.len(), "clouds and frames must align");
    // (track order, observation) lookup per frame index.
    let mut by_frame: std::collections::HashMap<usize, Vec<(usize, &Observation)>> =
        Default::default();
    for (ti, track) in tracks.iter().enumerate() {
        for obs in track.observations() {
            by_frame.entry(obs.frame_index).or_default().push((ti, obs));
        }
    }
    let clutter: Vec<Box3d> = if spec.persistent_clutter && spec.fp_rate > 0.0 {
        let mut rng = stream_rng(seed, DOMAIN_CLUTTER, 0);
        let n = Poisson::new(spec.fp_rate.max(f64::MIN_POSITIVE))
            .map(|p| p.sample(&mut rng) as usize)
            .unwrap_or(0);
        (0..n).map(|_| sample_fp(&mut rng, spec)).collect()
    } else {
        Vec::new()
    };
    let noise = Normal::new(0.0, 1.0).expect("unit normal");
    let mut out = Vec::new();
    for frame in frames {
        let mut rng = stream_rng(seed, DOMAIN_DETECTOR, frame.index as u64);
        let inv = frame.pose.inverse();
        if let Some(entries) = by_frame.get(&frame.index) {
            let mut entries = entries.clone();
            entries.sort_by_key(|(ti, _)| *ti);
            for (ti, obs) in entries {
                let recall = recall_at(&spec.recall_curve, obs.point_count as f64);
                if rng.random::<f64>() >= recall {
                    continue;
                }
                let local = transform_box(&inv, &obs.bbox, YawMode::General).expect("planar pose");
                let dc = [
                    noise.sample(&mut rng) * spec.center_sigma,
                    noise.sample(&mut rng) * spec.center_sigma,
                    noise.sample(&mut rng) * spec.center_sigma,
                ];
                let ds = [
                    noise.sample(&mut rng) * spec.size_frac_sigma,
                    noise.sample(&mut rng) * spec.size_frac_sigma,
                    noise.sample(&mut rng) * spec.size_frac_sigma,
                ];
                let dyaw = noise.sample(&mut rng) * spec.yaw_sigma;
                let dscore = noise.sample(&mut rng) * spec.score_noise_sigma;
                let center = nalgebra::Vector3::new(
                    local.center.x + dc[0],
                    local.center.y + dc[1],
                    local.center.z + dc[2],
                );
                let size = nalgebra::Vector3::new(
                    (local.size.x * (1.0 + ds[0])).max(0.2),
                    (local.size.y * (1.0 + ds[1])).max(0.2),
                    (local.size.z * (1.0 + ds[2])).max(0.2),
                );
                let center_err = (dc[0] * dc[0] + dc[1] * dc[1] + dc[2] * dc[2]).sqrt();
                let size_err = (ds[0] * ds[0] + ds[1] * ds[1] + ds[2] * ds[2]).sqrt();
                let quality = 1.0 / (1.0 + center_err / 0.5 + dyaw.abs() / 0.25 + size_err / 0.25);
                let score = (quality + dscore).clamp(0.0, 1.0);
                let bbox = Box3d::new(
                    center,
                    size,
                    local.yaw + dyaw,
                    None,
                    score,
                    local.label.clone(),
                )
                .expect("perturbed box is valid");
                out.push(BoxRecord {
                    frame_index: frame.index,
                    object_id: Some(tracks[ti].object_id.clone()),
                    bbox,
                });
            }
        }
        if spec.persistent_clutter {
            for fp in &clutter {
                let local = transform_box(&inv, fp, YawMode::General).expect("planar pose");
                out.push(BoxRecord { frame_index: frame.index, object_id: None, bbox: local });
            }
        } else if spec.fp_rate > 0.0 {
            let n = Poisson::new(spec.fp_rate)
                .map(|p| p.sample(&mut rng) as usize)
                .unwrap_or(0);
            for _ in 0..n {
                out.push(BoxRecord {
                    frame_index: frame.index,
                    object_id: None,
                    bbox: sample_fp(&mut rng, spec),
                });
            }
        }
    }
    out
}

/// Fixed scenario presets used by the benchmark pipeline and its tests.
pub mod presets {
    use super::*;

    /// Name-keyed lookup used by the command line.
    pub fn by_name(name: &str, seed: u64) -> Option<ScenarioSpec> {
        match name {
            "ablation-benchmark" => Some(ablation_benchmark(seed)),
            "fp-elimination" => Some(fp_elimination(seed)),
            _ => None,
        }
    }

    /// Mixed population: parked vehicles at several ranges, two dwellers, two
    /// drive-through vehicles. 200 frames at 10 Hz with a slow ego crawl.
    pub fn ablation_benchmark(seed: u64) -> ScenarioSpec {
        ScenarioSpec {
            seed,
            sequence_id: format!("bench-{seed}"),
            n_frames: 200,
            frame_rate: 10.0,
            ego_path: vec![
                Waypoint { time: 0.0, x: 0.0, y: 0.0, yaw: 0.0 },
                Waypoint { time: 20.0, x: 30.0, y: 0.0, yaw: 0.0 },
            ],
            objects: vec![
                ObjectSpec::stationary("park-near", 10.0, 6.0, 0.3),
                ObjectSpec::stationary("park-mid", 18.0, -7.0, -1.2),
                ObjectSpec::stationary("park-far", 42.0, 10.0, 1.8),
                ObjectSpec::stationary("park-deep", 50.0, -12.0, 0.0),
                ObjectSpec::dweller("dwell-near", 14.0, -4.0, 0.8, 17.0, 1.4, 3.9),
                ObjectSpec::dweller("dwell-far", 38.0, 8.0, -0.5, 16.5, 1.4, 3.9),
                ObjectSpec::driving("cross", (55.0, -18.0), (-5.0, 18.0), 0.0, 20.0),
                ObjectSpec::driving("along", (0.0, 14.0), (56.0, 14.0), 0.0, 20.0),
            ],
            sensor: SensorSpec::default(),
        }
    }

    /// All-stationary scene for the false-positive elimination check.
    pub fn fp_elimination(seed: u64) -> ScenarioSpec {
        ScenarioSpec {
            seed,
            sequence_id: format!("fp-elim-{seed}"),
            n_frames: 200,
            frame_rate: 10.0,
            ego_path: vec![
                Waypoint { time: 0.0, x: 0.0, y: 0.0, yaw: 0.0 },
                Waypoint { time: 20.0, x: 24.0, y: 0.0, yaw: 0.0 },
            ],
            objects: vec![
                ObjectSpec::stationary("s0", 8.0, 5.0, 0.0),
                ObjectSpec::stationary("s1", 15.0, -6.0, 1.1),
                ObjectSpec::stationary("s2", 24.0, 9.0, -0.7),
                ObjectSpec::stationary("s3", 33.0, -10.0, 0.4),
                ObjectSpec::stationary("s4", 44.0, 7.0, 2.2),
            ],
            sensor: SensorSpec::default(),
        }
    }
}
