//! Batch front end for the pseudo-labelling pipeline: one subcommand per
//! stage, files in the documented formats between stages, and a `pipeline`
//! command chaining everything on a simulated sequence.

mod config;
mod stages;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::PipelineConfig;
use soap_core::io::{read_json, write_json};
use soap_core::sim::{presets, ScenarioSpec};
use stages::{
    config_error, eval_config, load_detector_spec, render_pipeline_report, render_qss_table,
    Ablation, CloudMode, LabelFilter,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    ConfigInvalid,
    InputMissing,
    StageFailure,
}

impl Category {
    fn name(self) -> &'static str {
        match self {
            Category::ConfigInvalid => "config-invalid",
            Category::InputMissing => "input-missing",
            Category::StageFailure => "stage-failure",
        }
    }

    fn exit_code(self) -> u8 {
        match self {
            Category::ConfigInvalid => 2,
            Category::InputMissing => 3,
            Category::StageFailure => 4,
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub category: Category,
    pub message: String,
}

#[derive(Parser, Debug)]
#[command(name = "soap", version, about = "Deterministic pseudo-labelling pipeline for LiDAR sequences")]
struct Cli {
    /// Pipeline configuration file (JSON); defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed override; wins over the config file and scenario.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker pool bound; results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Report rendering for commands that print results.
    #[arg(long, global = true, default_value = "table", value_parser = ["json", "table"])]
    output_format: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct ScenarioSource {
    /// Scenario description file (JSON).
    #[arg(long, conflicts_with = "preset")]
    scenario: Option<PathBuf>,
    /// Built-in scenario: ablation-benchmark or fp-elimination.
    #[arg(long)]
    preset: Option<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic sequence: clouds, poses, and annotations.
    Simulate {
        #[command(flatten)]
        source: ScenarioSource,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Aggregate a sequence into one global-frame cloud.
    Aggregate {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        voxel_size: Option<f64>,
        #[arg(long)]
        point_budget: Option<usize>,
        #[arg(long)]
        z_offset: Option<f64>,
    },
    /// Score per-track quasi-stationarity and speed statistics.
    Qss {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        annotations: Option<PathBuf>,
        /// Also write the report as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build training labels: quasi-stationary projection or the naive
    /// speed-filter baseline.
    QstLabels {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        annotations: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "qst", value_parser = ["qst", "naive-speed"])]
        filter: String,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        speed_threshold: Option<f64>,
    },
    /// Run the detector simulator over a track source.
    DetectSim {
        #[arg(long)]
        manifest: PathBuf,
        /// Box records whose object ids define the detectable tracks.
        #[arg(long)]
        tracks_from: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Which clouds the detector reads.
        #[arg(long, default_value = "raw", value_parser = ["raw", "aggregated"])]
        clouds: String,
        /// Aggregated cloud file (required with --clouds aggregated).
        #[arg(long)]
        aggregated: Option<PathBuf>,
        /// dense, sparse, or a DetectorSpec JSON path.
        #[arg(long, default_value = "sparse")]
        detector: String,
        #[arg(long)]
        detector_seed: Option<u64>,
    },
    /// Spatial-consistency post-processing of per-frame detections.
    Scp {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        detections: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        mu: Option<f64>,
        #[arg(long)]
        eta: Option<usize>,
        #[arg(long)]
        nms_iou: Option<f64>,
    },
    /// Fit a beta calibration map from predictions and ground truth.
    Calibrate {
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        ground_truth: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        iou: Option<f64>,
    },
    /// Merge calibrated detector and stationary boxes into pseudo-labels.
    Fuse {
        #[arg(long)]
        detector: PathBuf,
        #[arg(long)]
        detector_calibration: PathBuf,
        #[arg(long)]
        stationary: PathBuf,
        #[arg(long)]
        stationary_calibration: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        iou: Option<f64>,
    },
    /// Match predictions against ground truth and report AP metrics.
    Evaluate {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        ground_truth: Option<PathBuf>,
        #[arg(long, value_parser = ["iou", "center-distance"])]
        mode: Option<String>,
        /// Override matching thresholds (comma separated).
        #[arg(long, value_delimiter = ',')]
        thresholds: Option<Vec<f64>>,
        /// Keep only ground truth with more than 5 interior points.
        #[arg(long)]
        level1: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Chain simulate, aggregate, labels, detector simulation, scp,
    /// calibration, fusion, and evaluation; emit a metrics report.
    Pipeline {
        #[command(flatten)]
        source: ScenarioSource,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value = "qst+scp")]
        ablation: String,
        /// Copy of the report JSON (always also written to out-dir).
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

fn load_scenario(source: &ScenarioSource, seed: u64) -> Result<ScenarioSpec, CliError> {
    let mut scenario: ScenarioSpec = match (&source.scenario, &source.preset) {
        (Some(path), None) => read_json(path).map_err(|e| CliError {
            category: Category::ConfigInvalid,
            message: format!("scenario {}: {e}", path.display()),
        })?,
        (None, Some(name)) => presets::by_name(name, seed).ok_or_else(|| {
            config_error(format!(
                "unknown preset {name:?}; expected ablation-benchmark or fp-elimination"
            ))
        })?,
        _ => return Err(config_error("pass exactly one of --scenario or --preset")),
    };
    scenario.seed = seed;
    Ok(scenario)
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| config_error(format!("--threads: {e}")))?;
    }
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let json_output = cli.output_format == "json";

    match cli.command {
        Command::Simulate { source, out_dir } => {
            let scenario = load_scenario(&source, cfg.seed)?;
            let out = stages::run_simulate(&scenario, &out_dir)?;
            println!("wrote {}", out.manifest_path.display());
        }
        Command::Aggregate { manifest, out, voxel_size, point_budget, z_offset } => {
            if let Some(v) = voxel_size {
                cfg.voxel_size = v;
            }
            if let Some(b) = point_budget {
                cfg.point_budget = b;
            }
            if let Some(z) = z_offset {
                cfg.z_offset = Some(z);
            }
            cfg.validate()?;
            stages::run_aggregate(&cfg, &manifest, &out)?;
            println!("wrote {}", out.display());
        }
        Command::Qss { manifest, annotations, out } => {
            let report = stages::run_qss(&cfg, &manifest, annotations.as_deref())?;
            if let Some(path) = &out {
                write_json(path, &report)
                    .map_err(|e| stages::stage_error("writing report", e))?;
            }
            if json_output {
                println!("{}", serde_json::to_string_pretty(&report).expect("serializable"));
            } else {
                print!("{}", render_qss_table(&report));
            }
        }
        Command::QstLabels { manifest, annotations, out, filter, epsilon, speed_threshold } => {
            if let Some(e) = epsilon {
                cfg.epsilon = Some(e);
            }
            if let Some(s) = speed_threshold {
                cfg.naive_speed_threshold = s;
            }
            cfg.validate()?;
            let filter = match filter.as_str() {
                "qst" => LabelFilter::Qst,
                _ => LabelFilter::NaiveSpeed,
            };
            let n = stages::run_qst_labels(&cfg, &manifest, annotations.as_deref(), &out, filter)?;
            println!("wrote {} label records to {}", n, out.display());
        }
        Command::DetectSim {
            manifest,
            tracks_from,
            out,
            clouds,
            aggregated,
            detector,
            detector_seed,
        } => {
            let mode = if clouds == "aggregated" { CloudMode::Aggregated } else { CloudMode::Raw };
            let spec = load_detector_spec(&detector)?;
            let n = stages::run_detect_sim(
                &cfg,
                &manifest,
                &tracks_from,
                &out,
                mode,
                aggregated.as_deref(),
                &spec,
                detector_seed.unwrap_or(cfg.seed),
            )?;
            println!("wrote {} detections to {}", n, out.display());
        }
        Command::Scp { manifest, detections, out, mu, eta, nms_iou } => {
            if let Some(m) = mu {
                cfg.mu = m;
            }
            if let Some(e) = eta {
                cfg.eta = Some(e);
            }
            if let Some(n) = nms_iou {
                cfg.nms_iou = n;
            }
            cfg.validate()?;
            let n = stages::run_scp(&cfg, &manifest, &detections, &out)?;
            println!("wrote {} boxes to {}", n, out.display());
        }
        Command::Calibrate { predictions, ground_truth, out, iou } => {
            if let Some(i) = iou {
                cfg.calibration_iou = i;
            }
            cfg.validate()?;
            let map = stages::run_calibrate(&cfg, &predictions, &ground_truth, &out)?;
            println!(
                "wrote calibration a={:.6} b={:.6} c={:.6} to {}",
                map.a,
                map.b,
                map.c,
                out.display()
            );
        }
        Command::Fuse { detector, detector_calibration, stationary, stationary_calibration, out, iou } => {
            if let Some(i) = iou {
                cfg.wbf_iou = i;
            }
            cfg.validate()?;
            let n = stages::run_fuse(
                &cfg,
                &detector,
                &detector_calibration,
                &stationary,
                &stationary_calibration,
                &out,
            )?;
            println!("wrote {} fused boxes to {}", n, out.display());
        }
        Command::Evaluate { manifest, predictions, ground_truth, mode, thresholds, level1, out } => {
            let eval = eval_config(&cfg.eval, mode.as_deref(), thresholds.as_deref(), level1)?;
            let report =
                stages::run_evaluate(&eval, &manifest, &predictions, ground_truth.as_deref())?;
            if let Some(path) = &out {
                write_json(path, &report)
                    .map_err(|e| stages::stage_error("writing report", e))?;
            }
            if json_output {
                println!("{}", serde_json::to_string_pretty(&report).expect("serializable"));
            } else {
                print!("{}", soap_core::eval::render_table(&report));
            }
        }
        Command::Pipeline { source, out_dir, ablation, report } => {
            let scenario = load_scenario(&source, cfg.seed)?;
            let ablation = Ablation::parse(&ablation)?;
            let result = stages::run_pipeline(&cfg, &scenario, &out_dir, ablation)?;
            if let Some(path) = &report {
                write_json(path, &result)
                    .map_err(|e| stages::stage_error("writing report", e))?;
            }
            if json_output {
                println!("{}", serde_json::to_string_pretty(&result).expect("serializable"));
            } else {
                print!("{}", render_pipeline_report(&result));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error[{}]: {}", err.category.name(), err.message);
            ExitCode::from(err.category.exit_code())
        }
    }
}
