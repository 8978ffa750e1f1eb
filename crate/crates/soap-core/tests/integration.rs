//! Stage-chaining scenarios on simulated sequences.

use soap_core::geom::{points_in_box, transform_box, YawMode};
use soap_core::scp::{scp_pipeline, ScpConfig};
use soap_core::sim::{
    generate_sequence, simulate_detector, DetectorSpec, MotionProfile, ObjectSpec, ScenarioSpec,
    SensorSpec, Waypoint,
};

/// A parked car watched from a fixed ego, with a tall panel driving through
/// the line of sight. The panel fully shadows the car for a mid-sequence
/// window.
fn occlusion_scenario() -> ScenarioSpec {
    ScenarioSpec {
        seed: 42,
        sequence_id: "occlusion".into(),
        n_frames: 20,
        frame_rate: 10.0,
        ego_path: vec![Waypoint { time: 0.0, x: 0.0, y: 0.0, yaw: 0.0 }],
        objects: vec![
            ObjectSpec::stationary("car", 12.0, 0.0, 0.0),
            ObjectSpec {
                id: "panel".into(),
                label: "panel".into(),
                size: [0.3, 6.0, 4.0],
                trajectory: vec![
                    Waypoint { time: 0.0, x: 6.0, y: 12.6, yaw: 0.0 },
                    Waypoint { time: 0.5, x: 6.0, y: 1.6, yaw: 0.0 },
                    Waypoint { time: 0.8, x: 6.0, y: -1.6, yaw: 0.0 },
                    Waypoint { time: 1.9, x: 6.0, y: -13.0, yaw: 0.0 },
                ],
                motion: MotionProfile::Dynamic,
            },
        ],
        sensor: SensorSpec {
            max_range: 40.0,
            azimuth_steps: 720,
            elevation_steps: 12,
            noise_sigma: 0.0,
            dropout: 0.0,
            ..SensorSpec::default()
        },
    }
}

#[test]
fn scp_prunes_occluded_frames_and_recovers_the_rest() {
    let seq = generate_sequence(&occlusion_scenario()).unwrap();
    // Per-frame interior point counts of the car's (constant) global box.
    let car = seq.tracks.iter().find(|t| t.object_id == "car").expect("car visible");
    let car_global = car.observations()[0].bbox.clone();
    let mut inflated = car_global.clone();
    inflated.size *= 1.0 + 1e-9;
    let counts: Vec<usize> = seq
        .frames
        .iter()
        .zip(&seq.clouds)
        .map(|(f, cloud)| {
            let local = transform_box(&f.pose.inverse(), &inflated, YawMode::General).unwrap();
            points_in_box(cloud, &local)
        })
        .collect();
    // The scripted panel fully shadows the car for frames 5..=8 and leaves it
    // visible at the start and end of the sequence.
    for f in 5..=8 {
        assert_eq!(counts[f], 0, "frame {f} should be fully occluded");
    }
    for f in (0..=3).chain(10..20) {
        assert!(counts[f] > 0, "frame {f} should see the car");
    }

    // Noise-free detector with full recall feeds SCP.
    let det = DetectorSpec {
        recall_curve: vec![(0.0, 1.0)],
        center_sigma: 0.0,
        size_frac_sigma: 0.0,
        yaw_sigma: 0.0,
        score_noise_sigma: 0.0,
        fp_rate: 0.0,
        fp_region_radius: 40.0,
        fp_score_range: (0.1, 0.9),
        persistent_clutter: false,
    };
    let detections = simulate_detector(&seq.tracks, &seq.clouds, &seq.frames, &det, 1);
    let mut per_frame = vec![Vec::new(); seq.frames.len()];
    for d in detections {
        per_frame[d.frame_index].push(d.bbox);
    }
    let cfg = ScpConfig { mu: 0.5, eta: 3, nms_iou: 0.5, wbf_iou: 0.5 };
    let out = scp_pipeline(&seq.frames, &per_frame, &seq.clouds, &cfg).unwrap();

    for (f, frame_boxes) in out.iter().enumerate() {
        let car_present = frame_boxes
            .iter()
            .any(|b| {
                let global = transform_box(&seq.frames[f].pose, b, YawMode::General).unwrap();
                (global.center - car_global.center).norm() < 1.0
            });
        assert_eq!(
            car_present,
            counts[f] > 0,
            "frame {f}: presence must follow the empty-box prune (count {})",
            counts[f]
        );
    }
}

#[test]
fn scp_fuses_noisy_detections_to_subcentimeter_centers() {
    // 100 noisy observations of one parked car, no false positives: the fused
    // center lands far inside the 0.5 m recovery bound.
    let spec = ScenarioSpec {
        seed: 3,
        sequence_id: "noisy".into(),
        n_frames: 100,
        frame_rate: 10.0,
        ego_path: vec![
            Waypoint { time: 0.0, x: 0.0, y: 0.0, yaw: 0.0 },
            Waypoint { time: 10.0, x: 8.0, y: 0.0, yaw: 0.0 },
        ],
        objects: vec![ObjectSpec::stationary("car", 14.0, 3.0, 0.5)],
        sensor: SensorSpec { noise_sigma: 0.01, dropout: 0.0, ..SensorSpec::default() },
    };
    let seq = generate_sequence(&spec).unwrap();
    let det = DetectorSpec {
        recall_curve: vec![(0.0, 0.95)],
        fp_rate: 0.0,
        ..DetectorSpec::dense_branch()
    };
    let detections = simulate_detector(&seq.tracks, &seq.clouds, &seq.frames, &det, 9);
    let mut per_frame = vec![Vec::new(); seq.frames.len()];
    for d in detections {
        per_frame[d.frame_index].push(d.bbox);
    }
    let out = scp_pipeline(&seq.frames, &per_frame, &seq.clouds, &ScpConfig::default()).unwrap();
    let car_global = &seq.tracks[0].observations()[0].bbox;
    let mut seen = 0;
    for (f, frame_boxes) in out.iter().enumerate() {
        for b in frame_boxes {
            let global = transform_box(&seq.frames[f].pose, b, YawMode::General).unwrap();
            let err = (global.center - car_global.center).norm();
            assert!(err < 0.15, "fused center error {err:.3} m at frame {f}");
            seen += 1;
        }
    }
    assert!(seen > 80, "car recovered in only {seen} frames");
}
