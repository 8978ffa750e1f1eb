//! Stage implementations behind the subcommands. Every stage reads and
//! writes only the documented file formats, so any stage output feeds the
//! next stage unchanged.

use std::path::{Path, PathBuf};

use serde::Serialize;

use soap_core::aggregate::{aggregate_sequence, localize, AggregatedCloud, FrameRecord};
use soap_core::eval::{match_and_score, render_table, EvalReport, GtBox, MatchConfig, MatchMode};
use soap_core::fuse::{
    apply_calibration, calibration_samples, fit_beta_calibration, soap_pseudo_labels,
    CalibrationMap,
};
use soap_core::geom::{points_in_box, Box3d, PointCloud};
use soap_core::io::{
    group_by_frame, read_boxes, read_cloud, read_json, read_manifest, write_boxes, write_cloud,
    write_json, write_manifest, BoxRecord, FileClouds, ManifestFrame, SequenceManifest,
};
use soap_core::qst::{
    build_qst_labels, naive_speed_filter_labels, select_quasi_stationary, speed_statistics,
    tracks_from_records, TrackedObject,
};
use soap_core::scp::scp_pipeline;
use soap_core::sim::{generate_sequence, simulate_detector, DetectorSpec, ScenarioSpec};

use crate::config::PipelineConfig;
use crate::{Category, CliError};

pub fn input_error(message: impl Into<String>) -> CliError {
    CliError { category: Category::InputMissing, message: message.into() }
}

pub fn config_error(message: impl Into<String>) -> CliError {
    CliError { category: Category::ConfigInvalid, message: message.into() }
}

pub fn stage_error(stage: &str, err: impl std::fmt::Display) -> CliError {
    CliError { category: Category::StageFailure, message: format!("{stage}: {err}") }
}

fn load_manifest(path: &Path) -> Result<SequenceManifest, CliError> {
    read_manifest(path).map_err(|e| match e {
        soap_core::io::FormatError::MissingFile(p) => {
            input_error(format!("manifest {}: missing {}", path.display(), p.display()))
        }
        soap_core::io::FormatError::Io(ioe) if ioe.kind() == std::io::ErrorKind::NotFound => {
            input_error(format!("manifest not found: {}", path.display()))
        }
        other => stage_error("manifest", other),
    })
}

fn load_boxes(path: &Path) -> Result<Vec<BoxRecord>, CliError> {
    read_boxes(path).map_err(|e| match e {
        soap_core::io::FormatError::Io(ioe) if ioe.kind() == std::io::ErrorKind::NotFound => {
            input_error(format!("box file not found: {}", path.display()))
        }
        other => stage_error(&format!("reading {}", path.display()), other),
    })
}

fn load_sequence(
    manifest_path: &Path,
) -> Result<(SequenceManifest, Vec<FrameRecord>, Vec<PointCloud>), CliError> {
    let manifest = load_manifest(manifest_path)?;
    let frames = manifest.frame_records();
    let clouds = manifest.load_clouds().map_err(|e| stage_error("loading clouds", e))?;
    Ok((manifest, frames, clouds))
}

fn annotations_path(manifest_path: &Path, manifest: &SequenceManifest, explicit: Option<&Path>) -> Result<PathBuf, CliError> {
    match explicit {
        Some(p) => Ok(p.to_path_buf()),
        None => manifest
            .annotations
            .as_ref()
            .map(|rel| manifest.resolve(rel))
            .ok_or_else(|| {
                input_error(format!(
                    "{} names no annotations; pass --annotations",
                    manifest_path.display()
                ))
            }),
    }
}

fn load_tracks(
    records: &[BoxRecord],
    frames: &[FrameRecord],
    clouds: &[PointCloud],
) -> Result<Vec<TrackedObject>, CliError> {
    tracks_from_records(records, frames, clouds).map_err(|e| stage_error("building tracks", e))
}

// ---------------------------------------------------------------------------
// simulate

pub struct SimulateOutput {
    pub manifest_path: PathBuf,
    pub annotations_path: PathBuf,
}

pub fn run_simulate(scenario: &ScenarioSpec, out_dir: &Path) -> Result<SimulateOutput, CliError> {
    let seq = generate_sequence(scenario).map_err(|e| config_error(e.to_string()))?;
    let clouds_dir = out_dir.join("clouds");
    std::fs::create_dir_all(&clouds_dir).map_err(|e| stage_error("simulate", e))?;
    let mut frames = Vec::with_capacity(seq.frames.len());
    for (frame, cloud) in seq.frames.iter().zip(&seq.clouds) {
        let rel = format!("clouds/frame_{:05}.cld", frame.index);
        write_cloud(out_dir.join(&rel), cloud).map_err(|e| stage_error("writing clouds", e))?;
        frames.push(ManifestFrame {
            index: frame.index,
            timestamp: frame.timestamp,
            pose: frame.pose.clone(),
            cloud: rel,
        });
    }
    let annotations_rel = "annotations.sbx".to_string();
    write_boxes(out_dir.join(&annotations_rel), &seq.annotations)
        .map_err(|e| stage_error("writing annotations", e))?;
    let manifest = SequenceManifest {
        sequence_id: scenario.sequence_id.clone(),
        frame_rate: scenario.frame_rate,
        z_offset: None,
        annotations: Some(annotations_rel.clone()),
        detections: None,
        frames,
        root: out_dir.to_path_buf(),
    };
    let manifest_path = out_dir.join("manifest.json");
    write_manifest(&manifest_path, &manifest).map_err(|e| stage_error("writing manifest", e))?;
    Ok(SimulateOutput { manifest_path, annotations_path: out_dir.join(annotations_rel) })
}

// ---------------------------------------------------------------------------
// aggregate

pub fn run_aggregate(
    cfg: &PipelineConfig,
    manifest_path: &Path,
    out: &Path,
) -> Result<(), CliError> {
    let manifest = load_manifest(manifest_path)?;
    let frames = manifest.frame_records();
    let params = cfg.aggregate_params(manifest.z_offset);
    let agg = aggregate_sequence(&frames, &FileClouds, &params)
        .map_err(|e| stage_error("aggregate", e))?;
    write_cloud(out, &agg.points).map_err(|e| stage_error("writing aggregate", e))?;
    log::info!(
        "aggregated {} frames into {} points (voxel {} m, budget {})",
        frames.len(),
        agg.points.len(),
        params.voxel_size,
        params.point_budget
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// qss

#[derive(Debug, Serialize)]
pub struct QssReport {
    pub sequence_id: String,
    pub epsilon: f64,
    pub tracks: Vec<QssRow>,
    pub speed_bins: Vec<f64>,
    pub speed_rows: Vec<soap_core::qst::SpeedRow>,
}

#[derive(Debug, Serialize)]
pub struct QssRow {
    pub object_id: String,
    pub observations: usize,
    pub total_points: u64,
    pub score_star: f64,
    pub best_frame: usize,
    pub quasi_stationary: bool,
}

pub fn run_qss(
    cfg: &PipelineConfig,
    manifest_path: &Path,
    annotations: Option<&Path>,
) -> Result<QssReport, CliError> {
    let (manifest, frames, clouds) = load_sequence(manifest_path)?;
    let ann_path = annotations_path(manifest_path, &manifest, annotations)?;
    let records = load_boxes(&ann_path)?;
    let tracks = load_tracks(&records, &frames, &clouds)?;
    let epsilon = cfg.epsilon_for(manifest.frame_rate);
    let mut rows = Vec::with_capacity(tracks.len());
    for track in &tracks {
        let sel = select_quasi_stationary(track).map_err(|e| stage_error("qss", e))?;
        rows.push(QssRow {
            object_id: track.object_id.clone(),
            observations: track.observations().len(),
            total_points: track.total_points(),
            score_star: sel.score_star,
            best_frame: sel.frame_index,
            quasi_stationary: sel.score_star > epsilon,
        });
    }
    let bins = vec![0.2, 1.0, 3.0, 10.0];
    let stats = speed_statistics(&tracks, &frames, &bins)
        .map_err(|e| stage_error("speed statistics", e))?;
    Ok(QssReport {
        sequence_id: manifest.sequence_id,
        epsilon,
        tracks: rows,
        speed_bins: stats.bins,
        speed_rows: stats.rows,
    })
}

pub fn render_qss_table(report: &QssReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "sequence {}  (epsilon = {})\n{:<14} {:>4} {:>8} {:>8} {:>6}  qs\n",
        report.sequence_id, report.epsilon, "object", "obs", "points", "s*", "frame"
    ));
    for row in &report.tracks {
        out.push_str(&format!(
            "{:<14} {:>4} {:>8} {:>8.4} {:>6}  {}\n",
            row.object_id,
            row.observations,
            row.total_points,
            row.score_star,
            row.best_frame,
            if row.quasi_stationary { "yes" } else { "no" }
        ));
    }
    out.push_str("\nspeed CDF (fraction of objects at or below, by min speed)\n");
    for row in &report.speed_rows {
        out.push_str(&format!("{:<14} n={:<5}", row.label, row.objects));
        for (bin, frac) in report.speed_bins.iter().zip(&row.fractions) {
            out.push_str(&format!("  <={bin}m/s: {frac:.3}"));
        }
        out.push('\n');
    }
    out
}

// ---------------------------------------------------------------------------
// qst-labels

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelFilter {
    Qst,
    NaiveSpeed,
}

pub fn run_qst_labels(
    cfg: &PipelineConfig,
    manifest_path: &Path,
    annotations: Option<&Path>,
    out: &Path,
    filter: LabelFilter,
) -> Result<usize, CliError> {
    let (manifest, frames, clouds) = load_sequence(manifest_path)?;
    let ann_path = annotations_path(manifest_path, &manifest, annotations)?;
    let records = load_boxes(&ann_path)?;
    let tracks = load_tracks(&records, &frames, &clouds)?;
    let records = match filter {
        LabelFilter::Qst => {
            let labels = build_qst_labels(&tracks, &frames, cfg.epsilon_for(manifest.frame_rate));
            for skipped in &labels.skipped {
                log::warn!("track {} skipped: {}", skipped.object_id, skipped.reason);
            }
            log::info!(
                "{} of {} tracks quasi-stationary",
                labels.accepted.len(),
                tracks.len()
            );
            labels.records
        }
        LabelFilter::NaiveSpeed => {
            let labels = naive_speed_filter_labels(&tracks, &frames, cfg.naive_speed_threshold);
            for skipped in &labels.skipped {
                log::warn!("track {} skipped: {}", skipped.object_id, skipped.reason);
            }
            log::info!(
                "naive speed filter kept {} of {} tracks",
                labels.kept.len(),
                labels.kept.len() + labels.removed.len()
            );
            labels.records
        }
    };
    write_boxes(out, &records).map_err(|e| stage_error("writing labels", e))?;
    Ok(records.len())
}

// ---------------------------------------------------------------------------
// detect-sim

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CloudMode {
    Raw,
    Aggregated,
}

pub fn run_detect_sim(
    cfg: &PipelineConfig,
    manifest_path: &Path,
    tracks_from: &Path,
    out: &Path,
    mode: CloudMode,
    aggregated: Option<&Path>,
    detector: &DetectorSpec,
    seed: u64,
) -> Result<usize, CliError> {
    let (manifest, frames, raw_clouds) = load_sequence(manifest_path)?;
    let clouds = match mode {
        CloudMode::Raw => raw_clouds,
        CloudMode::Aggregated => {
            let agg_path = aggregated.ok_or_else(|| {
                config_error("--clouds aggregated requires --aggregated <cloud file>")
            })?;
            let points = read_cloud(agg_path)
                .map_err(|e| stage_error("reading aggregated cloud", e))?;
            let agg = AggregatedCloud {
                points,
                source_sequence: manifest.sequence_id.clone(),
                voxel_size: cfg.voxel_size,
                point_budget: cfg.point_budget,
            };
            frames
                .iter()
                .map(|f| localize(&agg, f, cfg.range_crop.as_ref()))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| stage_error("localizing aggregated cloud", e))?
        }
    };
    let records = load_boxes(tracks_from)?;
    let tracks = load_tracks(&records, &frames, &clouds)?;
    let detections = simulate_detector(&tracks, &clouds, &frames, detector, seed);
    write_boxes(out, &detections).map_err(|e| stage_error("writing detections", e))?;
    Ok(detections.len())
}

pub fn load_detector_spec(name: &str) -> Result<DetectorSpec, CliError> {
    match name {
        "dense" => Ok(DetectorSpec::dense_branch()),
        "sparse" => Ok(DetectorSpec::sparse_branch()),
        path => read_json(Path::new(path)).map_err(|e| {
            config_error(format!("detector spec {path}: {e}"))
        }),
    }
}

// ---------------------------------------------------------------------------
// scp

pub fn run_scp(
    cfg: &PipelineConfig,
    manifest_path: &Path,
    detections_path: &Path,
    out: &Path,
) -> Result<usize, CliError> {
    let (manifest, frames, clouds) = load_sequence(manifest_path)?;
    let records = load_boxes(detections_path)?;
    let per_frame = group_by_frame(&records, frames.len())
        .map_err(|e| stage_error("grouping detections", e))?;
    let scp_cfg = cfg.scp_config(manifest.frame_rate);
    let outputs = scp_pipeline(&frames, &per_frame, &clouds, &scp_cfg)
        .map_err(|e| stage_error("scp", e))?;
    let mut out_records = Vec::new();
    for (frame, boxes) in frames.iter().zip(outputs) {
        for bbox in boxes {
            out_records.push(BoxRecord { frame_index: frame.index, object_id: None, bbox });
        }
    }
    write_boxes(out, &out_records).map_err(|e| stage_error("writing scp output", e))?;
    Ok(out_records.len())
}

// ---------------------------------------------------------------------------
// calibrate

fn grouped_pair(
    predictions: &[BoxRecord],
    ground_truth: &[BoxRecord],
) -> Result<(Vec<Vec<Box3d>>, Vec<Vec<Box3d>>), CliError> {
    let n_frames = predictions
        .iter()
        .chain(ground_truth)
        .map(|r| r.frame_index + 1)
        .max()
        .unwrap_or(0);
    let preds = group_by_frame(predictions, n_frames).map_err(|e| stage_error("grouping", e))?;
    let gts = group_by_frame(ground_truth, n_frames).map_err(|e| stage_error("grouping", e))?;
    Ok((preds, gts))
}

pub fn run_calibrate(
    cfg: &PipelineConfig,
    predictions_path: &Path,
    ground_truth_path: &Path,
    out: &Path,
) -> Result<CalibrationMap, CliError> {
    let predictions = load_boxes(predictions_path)?;
    let ground_truth = load_boxes(ground_truth_path)?;
    let (preds, gts) = grouped_pair(&predictions, &ground_truth)?;
    let samples = calibration_samples(&preds, &gts, cfg.calibration_iou);
    let map = fit_beta_calibration(&samples).map_err(|e| stage_error("calibrate", e))?;
    write_json(out, &map).map_err(|e| stage_error("writing calibration", e))?;
    log::info!(
        "fitted beta calibration on {} samples: a={:.4} b={:.4} c={:.4}",
        samples.len(),
        map.a,
        map.b,
        map.c
    );
    Ok(map)
}

// ---------------------------------------------------------------------------
// fuse

pub fn run_fuse(
    cfg: &PipelineConfig,
    detector_path: &Path,
    detector_cal: &Path,
    stationary_path: &Path,
    stationary_cal: &Path,
    out: &Path,
) -> Result<usize, CliError> {
    let detector = load_boxes(detector_path)?;
    let stationary = load_boxes(stationary_path)?;
    let map_det: CalibrationMap =
        read_json(detector_cal).map_err(|e| stage_error("reading calibration", e))?;
    let map_sta: CalibrationMap =
        read_json(stationary_cal).map_err(|e| stage_error("reading calibration", e))?;
    let n_frames = detector
        .iter()
        .chain(&stationary)
        .map(|r| r.frame_index + 1)
        .max()
        .unwrap_or(0);
    let det_frames = group_by_frame(&detector, n_frames).map_err(|e| stage_error("grouping", e))?;
    let sta_frames =
        group_by_frame(&stationary, n_frames).map_err(|e| stage_error("grouping", e))?;
    let fused = soap_pseudo_labels(&det_frames, &sta_frames, (&map_det, &map_sta), cfg.wbf_iou)
        .map_err(|e| stage_error("fuse", e))?;
    let mut records = Vec::new();
    for (frame_index, boxes) in fused.into_iter().enumerate() {
        for bbox in boxes {
            records.push(BoxRecord { frame_index, object_id: None, bbox });
        }
    }
    write_boxes(out, &records).map_err(|e| stage_error("writing fused labels", e))?;
    Ok(records.len())
}

// ---------------------------------------------------------------------------
// evaluate

/// Ground truth for the metrics: interior point counts recomputed from the
/// frame clouds, speeds taken from annotated velocities.
fn ground_truth_for_eval(
    records: &[BoxRecord],
    frames: &[FrameRecord],
    clouds: &[PointCloud],
) -> Result<Vec<Vec<GtBox>>, CliError> {
    let position: std::collections::HashMap<usize, usize> =
        frames.iter().enumerate().map(|(pos, f)| (f.index, pos)).collect();
    let mut out = vec![Vec::new(); frames.len()];
    for rec in records {
        let pos = *position
            .get(&rec.frame_index)
            .ok_or_else(|| stage_error("evaluate", format!("unknown frame {}", rec.frame_index)))?;
        let point_count = points_in_box(&clouds[pos], &rec.bbox) as u64;
        let speed = rec.bbox.velocity.map(|v| v.norm());
        out[pos].push(GtBox { bbox: rec.bbox.clone(), point_count, speed });
    }
    Ok(out)
}

pub fn run_evaluate(
    eval_cfg: &MatchConfig,
    manifest_path: &Path,
    predictions_path: &Path,
    ground_truth: Option<&Path>,
) -> Result<EvalReport, CliError> {
    let (manifest, frames, clouds) = load_sequence(manifest_path)?;
    let gt_path = annotations_path(manifest_path, &manifest, ground_truth)?;
    let gt_records = load_boxes(&gt_path)?;
    let gts = ground_truth_for_eval(&gt_records, &frames, &clouds)?;
    let pred_records = load_boxes(predictions_path)?;
    let preds = group_by_frame(&pred_records, frames.len())
        .map_err(|e| stage_error("grouping predictions", e))?;
    Ok(match_and_score(&preds, &gts, eval_cfg))
}

// ---------------------------------------------------------------------------
// pipeline

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ablation {
    /// Naive 0.2 m/s speed filtering, no spatial consistency.
    NaiveSpeed,
    /// Quasi-stationary labels, no spatial consistency.
    Qst,
    /// Quasi-stationary labels plus spatial consistency.
    QstScp,
}

impl Ablation {
    pub fn parse(name: &str) -> Result<Self, CliError> {
        match name {
            "naive-speed" => Ok(Self::NaiveSpeed),
            "qst" => Ok(Self::Qst),
            "qst+scp" => Ok(Self::QstScp),
            other => Err(config_error(format!(
                "unknown ablation {other:?}; expected naive-speed, qst, or qst+scp"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::NaiveSpeed => "naive-speed",
            Self::Qst => "qst",
            Self::QstScp => "qst+scp",
        }
    }
}

#[derive(Debug, Serialize)]
pub struct PipelineReport {
    pub ablation: String,
    pub seed: u64,
    pub sequence_id: String,
    pub frames: usize,
    /// Calibrated sparse-detector boxes only.
    pub detector_only: EvalReport,
    /// Stationary branch only (post-SCP when enabled).
    pub stationary_only: EvalReport,
    /// Final fused pseudo-labels.
    pub soap: EvalReport,
}

pub fn render_pipeline_report(report: &PipelineReport) -> String {
    let mut out = format!(
        "pipeline report: sequence {} ({} frames, ablation {}, seed {})\n",
        report.sequence_id, report.frames, report.ablation, report.seed
    );
    for (name, eval) in [
        ("detector only", &report.detector_only),
        ("stationary only", &report.stationary_only),
        ("soap pseudo-labels", &report.soap),
    ] {
        out.push_str(&format!("\n== {name}\n{}", render_table(eval)));
    }
    out
}

pub fn run_pipeline(
    cfg: &PipelineConfig,
    scenario: &ScenarioSpec,
    out_dir: &Path,
    ablation: Ablation,
) -> Result<PipelineReport, CliError> {
    std::fs::create_dir_all(out_dir).map_err(|e| stage_error("pipeline", e))?;

    let sim = run_simulate(scenario, out_dir)?;
    let manifest_path = sim.manifest_path;

    let aggregated = out_dir.join("aggregated.cld");
    run_aggregate(cfg, &manifest_path, &aggregated)?;

    let labels = out_dir.join("labels.sbx");
    let filter = match ablation {
        Ablation::NaiveSpeed => LabelFilter::NaiveSpeed,
        _ => LabelFilter::Qst,
    };
    run_qst_labels(cfg, &manifest_path, None, &labels, filter)?;

    let soap_raw = out_dir.join("soap_raw.sbx");
    run_detect_sim(
        cfg,
        &manifest_path,
        &labels,
        &soap_raw,
        CloudMode::Aggregated,
        Some(&aggregated),
        &cfg.soap_detector,
        cfg.seed.wrapping_add(1),
    )?;

    let stationary = out_dir.join("stationary.sbx");
    match ablation {
        Ablation::QstScp => {
            run_scp(cfg, &manifest_path, &soap_raw, &stationary)?;
        }
        _ => {
            std::fs::copy(&soap_raw, &stationary).map_err(|e| stage_error("pipeline", e))?;
        }
    }

    let detector = out_dir.join("detector.sbx");
    run_detect_sim(
        cfg,
        &manifest_path,
        &sim.annotations_path,
        &detector,
        CloudMode::Raw,
        None,
        &cfg.sparse_detector,
        cfg.seed.wrapping_add(2),
    )?;

    // Both sources are calibrated against the raw branch outputs, before any
    // spatial-consistency refinement.
    let cal_detector = out_dir.join("calibration_detector.json");
    run_calibrate(cfg, &detector, &sim.annotations_path, &cal_detector)?;
    let cal_stationary = out_dir.join("calibration_stationary.json");
    run_calibrate(cfg, &soap_raw, &sim.annotations_path, &cal_stationary)?;

    let soap_labels = out_dir.join("soap_labels.sbx");
    run_fuse(cfg, &detector, &cal_detector, &stationary, &cal_stationary, &soap_labels)?;

    // Per-source evaluations for the report.
    let map_det: CalibrationMap =
        read_json(&cal_detector).map_err(|e| stage_error("reading calibration", e))?;
    let map_sta: CalibrationMap =
        read_json(&cal_stationary).map_err(|e| stage_error("reading calibration", e))?;
    let detector_only_path = out_dir.join("detector_calibrated.sbx");
    calibrate_file(&detector, &map_det, &detector_only_path)?;
    let stationary_only_path = out_dir.join("stationary_calibrated.sbx");
    calibrate_file(&stationary, &map_sta, &stationary_only_path)?;

    let report = PipelineReport {
        ablation: ablation.name().to_string(),
        seed: cfg.seed,
        sequence_id: scenario.sequence_id.clone(),
        frames: scenario.n_frames,
        detector_only: run_evaluate(&cfg.eval, &manifest_path, &detector_only_path, None)?,
        stationary_only: run_evaluate(&cfg.eval, &manifest_path, &stationary_only_path, None)?,
        soap: run_evaluate(&cfg.eval, &manifest_path, &soap_labels, None)?,
    };
    write_json(out_dir.join("report.json"), &report)
        .map_err(|e| stage_error("writing report", e))?;
    Ok(report)
}

fn calibrate_file(path: &Path, map: &CalibrationMap, out: &Path) -> Result<(), CliError> {
    let records = load_boxes(path)?;
    let calibrated: Vec<BoxRecord> = records
        .iter()
        .map(|r| BoxRecord {
            frame_index: r.frame_index,
            object_id: r.object_id.clone(),
            bbox: apply_calibration(map, std::slice::from_ref(&r.bbox)).remove(0),
        })
        .collect();
    write_boxes(out, &calibrated).map_err(|e| stage_error("writing calibrated boxes", e))?;
    Ok(())
}

/// Evaluate overrides shared by the evaluate subcommand flags.
pub fn eval_config(
    base: &MatchConfig,
    mode: Option<&str>,
    thresholds: Option<&[f64]>,
    level1: bool,
) -> Result<MatchConfig, CliError> {
    let mut cfg = base.clone();
    if let Some(m) = mode {
        cfg.mode = match m {
            "iou" => MatchMode::Iou,
            "center-distance" => MatchMode::CenterDistance,
            other => return Err(config_error(format!("unknown match mode {other:?}"))),
        };
        if thresholds.is_none() {
            cfg.thresholds = match cfg.mode {
                MatchMode::Iou => vec![0.7],
                MatchMode::CenterDistance => vec![0.5, 1.0, 2.0, 4.0],
            };
        }
    }
    if let Some(t) = thresholds {
        if t.is_empty() {
            return Err(config_error("thresholds must be non-empty"));
        }
        cfg.thresholds = t.to_vec();
    }
    if level1 {
        cfg.level2 = false;
    }
    Ok(cfg)
}
