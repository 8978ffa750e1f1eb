//! Pipeline configuration: a JSON file with per-stage parameters, every field
//! optional with defaults, plus frame-rate profiles for epsilon and eta.

use std::path::Path;

use serde::{Deserialize, Serialize};

use soap_core::aggregate::{AggregateParams, RangeCrop};
use soap_core::eval::MatchConfig;
use soap_core::scp::ScpConfig;
use soap_core::sim::DetectorSpec;

use crate::{CliError, Category};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Master seed; every stage derives its stream from it.
    pub seed: u64,
    /// Cubic voxel edge (meters) for aggregation downsampling.
    pub voxel_size: f64,
    /// Point budget after aggregation.
    pub point_budget: usize,
    /// Vertical shim applied in the local frame before aggregation. Falls
    /// back to the manifest's value when unset.
    pub z_offset: Option<f64>,
    /// Quasi-stationary threshold; frame-rate profile when unset
    /// (0.7 below 5 Hz, 0.85 at or above).
    pub epsilon: Option<f64>,
    /// Minimum cluster support; frame-rate profile when unset
    /// (2 below 5 Hz, 10 at or above).
    pub eta: Option<usize>,
    /// Clustering IoU threshold for SCP and WBF grouping.
    pub mu: f64,
    /// IoU threshold of the global-frame NMS after cluster fusion.
    pub nms_iou: f64,
    /// IoU threshold when merging stationary and detector boxes.
    pub wbf_iou: f64,
    /// Max-speed threshold of the naive ablation filter (m/s).
    pub naive_speed_threshold: f64,
    /// BEV IoU for matching predictions to ground truth when building
    /// calibration samples.
    pub calibration_iou: f64,
    /// Optional local-frame crop applied when localizing aggregated clouds.
    pub range_crop: Option<RangeCrop>,
    pub eval: MatchConfig,
    /// Detector profile reading localized aggregated clouds.
    pub soap_detector: DetectorSpec,
    /// Detector profile reading raw per-frame clouds.
    pub sparse_detector: DetectorSpec,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            voxel_size: 0.0325,
            point_budget: 1_000_000,
            z_offset: None,
            epsilon: None,
            eta: None,
            mu: 0.5,
            nms_iou: 0.5,
            wbf_iou: 0.5,
            naive_speed_threshold: 0.2,
            calibration_iou: 0.5,
            range_crop: None,
            eval: MatchConfig::default(),
            soap_detector: DetectorSpec::dense_branch(),
            sparse_detector: DetectorSpec::sparse_branch(),
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError {
            category: Category::InputMissing,
            message: format!("cannot read config {}: {e}", path.display()),
        })?;
        let cfg: PipelineConfig = serde_json::from_str(&text).map_err(|e| CliError {
            category: Category::ConfigInvalid,
            message: format!("config {}: {e}", path.display()),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |message: String| Err(CliError { category: Category::ConfigInvalid, message });
        if !(self.voxel_size > 0.0) {
            return bad(format!("voxel_size must be > 0, got {}", self.voxel_size));
        }
        if self.point_budget == 0 {
            return bad("point_budget must be > 0".into());
        }
        for (name, v) in [
            ("mu", self.mu),
            ("nms_iou", self.nms_iou),
            ("wbf_iou", self.wbf_iou),
            ("calibration_iou", self.calibration_iou),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} must lie in [0, 1], got {v}"));
            }
        }
        if let Some(e) = self.epsilon {
            if !(0.0..=1.0).contains(&e) {
                return bad(format!("epsilon must lie in [0, 1], got {e}"));
            }
        }
        if self.eta == Some(0) {
            return bad("eta must be >= 1".into());
        }
        if self.naive_speed_threshold < 0.0 {
            return bad("naive_speed_threshold must be >= 0".into());
        }
        if self.eval.thresholds.is_empty() {
            return bad("eval.thresholds must be non-empty".into());
        }
        if self.eval.thresholds.windows(2).any(|w| w[0] > w[1]) {
            return bad("eval.thresholds must be sorted ascending".into());
        }
        Ok(())
    }

    pub fn epsilon_for(&self, frame_rate: f64) -> f64 {
        self.epsilon.unwrap_or(if frame_rate >= 5.0 { 0.85 } else { 0.7 })
    }

    pub fn eta_for(&self, frame_rate: f64) -> usize {
        self.eta.unwrap_or(if frame_rate >= 5.0 { 10 } else { 2 })
    }

    pub fn scp_config(&self, frame_rate: f64) -> ScpConfig {
        ScpConfig {
            mu: self.mu,
            eta: self.eta_for(frame_rate),
            nms_iou: self.nms_iou,
            wbf_iou: self.wbf_iou,
        }
    }

    pub fn aggregate_params(&self, manifest_z_offset: Option<f64>) -> AggregateParams {
        AggregateParams {
            voxel_size: self.voxel_size,
            point_budget: self.point_budget,
            z_offset: self.z_offset.or(manifest_z_offset).unwrap_or(0.0),
            seed: self.seed,
        }
    }
}
