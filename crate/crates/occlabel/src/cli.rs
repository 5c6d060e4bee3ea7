//! Command-line front end.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use occlabel_core::losses::{gradient_check, pseudo_loss};
use occlabel_core::synth::courtyard;
use occlabel_core::temporal::MAX_HISTORY;
use serde_json::json;

use crate::config::PipelineConfig;
use crate::dataset::{create_dir, labels_path, mask_path};
use crate::error::{Error, Result};
use crate::pipeline::{self, LiftedSample, Reference};
use crate::report;
use crate::scene::{read_scene, scene_to_json};
use crate::tensorio::{read_label_grid, read_logits, read_mask, write_mask};

#[derive(Debug, Parser)]
#[command(name = "occlabel", version, about = "Semantic occupancy pseudo-labels from depth and semantic maps")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Overrides for [`PipelineConfig`]; unset flags keep the config file's value.
#[derive(Debug, Args, Default)]
pub struct ConfigArgs {
    /// TOML configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub threshold: Option<u32>,
    #[arg(long)]
    pub history: Option<usize>,
    #[arg(long)]
    pub outlier_k: Option<usize>,
    #[arg(long)]
    pub outlier_std_ratio: Option<f64>,
    /// Comma-separated class indices.
    #[arg(long, value_delimiter = ',')]
    pub dynamic_set: Option<Vec<u8>>,
    #[arg(long)]
    pub pixel_stride: Option<usize>,
    #[arg(long)]
    pub ray_stride: Option<usize>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub ignore_empty: Option<bool>,
    /// Worker threads; 0 = one per core.
    #[arg(long)]
    pub workers: Option<usize>,
}

impl ConfigArgs {
    pub fn resolve(&self) -> Result<PipelineConfig> {
        let mut c = match &self.config {
            Some(p) => PipelineConfig::load(p)?,
            None => PipelineConfig::default(),
        };
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = &self.$f { c.$f = v.clone(); } )* };
        }
        set!(threshold, history, outlier_k, outlier_std_ratio, dynamic_set, pixel_stride, ray_stride, lambda, ignore_empty, workers);
        c.validate()?;
        Ok(c)
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate one label grid per manifest sample.
    Generate {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Score predicted grids against ground truth.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        mask: Option<PathBuf>,
        /// CSV report path.
        #[arg(long)]
        report: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Camera-visibility masks of label grids.
    Mask {
        #[arg(long)]
        input: PathBuf,
        /// Directory of `<id>.labels.vxt` to cast rays through.
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// mIoU, IoU and occupied voxels for thresholds 1–25.
    SweepThreshold {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        mask: Option<PathBuf>,
        #[arg(long)]
        csv: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// mIoU and IoU for history lengths 0 up to --history.
    SweepTemporal {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        mask: Option<PathBuf>,
        #[arg(long)]
        csv: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Evaluate the pseudo-loss on a logits tensor [C, X, Y, Z] and a target grid.
    LossCheck {
        #[arg(long)]
        logits: PathBuf,
        #[arg(long)]
        target: PathBuf,
        /// Also compare the analytic gradient with central differences.
        #[arg(long)]
        grad: bool,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Render a synthetic sequence with ground truth and masks.
    Synth {
        #[arg(long)]
        output: PathBuf,
        /// JSON scene; the built-in courtyard when omitted.
        #[arg(long)]
        scene: Option<PathBuf>,
        #[arg(long, default_value_t = 14)]
        timesteps: usize,
        #[arg(long, default_value_t = 320)]
        width: u32,
        #[arg(long, default_value_t = 180)]
        height: u32,
        /// Add a car driving through the courtyard.
        #[arg(long)]
        moving_car: bool,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
}

fn reference_grids(
    lifted: &[LiftedSample],
    gt_dir: &Path,
    mask_dir: Option<&Path>,
    cfg: &PipelineConfig,
) -> Result<(Vec<occlabel_core::LabelGrid>, Option<Vec<occlabel_core::visibility::CameraMask>>)> {
    let spec = cfg.grid_spec();
    let mut gts = Vec::with_capacity(lifted.len());
    let mut masks = mask_dir.map(|_| Vec::with_capacity(lifted.len()));
    for s in lifted {
        let id = &s.sample_id;
        gts.push(read_label_grid(labels_path(gt_dir, id), &spec).map_err(|e| e.in_sample(id))?);
        if let (Some(d), Some(m)) = (mask_dir, masks.as_mut()) {
            m.push(read_mask(mask_path(d, id), &spec).map_err(|e| e.in_sample(id))?);
        }
    }
    Ok((gts, masks))
}

fn print_json(v: serde_json::Value) {
    println!("{v}");
}

fn report_json(r: &occlabel_core::metrics::EvalReport) -> serde_json::Value {
    json!({
        "iou": r.iou,
        "miou": r.miou,
        "miou_15": r.miou_15,
        "per_class_iou": r.per_class_iou,
        "evaluated_voxel_count": r.evaluated_voxel_count,
    })
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate { input, output, cfg } => {
            let cfg = cfg.resolve()?;
            let pool = cfg.thread_pool()?;
            let lifted = pipeline::lift_dataset(&input, &cfg, &pool)?;
            let outputs = pipeline::generate(&lifted, &cfg, cfg.history, &pool)?;
            pipeline::write_outputs(&output, &outputs)?;
            print_json(json!({"samples": outputs.len()}));
        }
        Command::Eval {
            pred,
            gt,
            mask,
            report,
            cfg,
        } => {
            let cfg = cfg.resolve()?;
            let table = report::evaluate_dirs(&pred, &gt, mask.as_deref(), &cfg.grid_spec())?;
            table.write(&report)?;
            print_json(report_json(&table.aggregate));
        }
        Command::Mask {
            input,
            labels,
            output,
            cfg,
        } => {
            let cfg = cfg.resolve()?;
            let pool = cfg.thread_pool()?;
            let lifted = pipeline::lift_dataset(&input, &cfg, &pool)?;
            let (grids, _) = reference_grids(&lifted, &labels, None, &cfg)?;
            let masks = pipeline::masks_for(&lifted, &grids, &cfg, &pool)?;
            create_dir(&output)?;
            for (s, m) in lifted.iter().zip(&masks) {
                write_mask(mask_path(&output, &s.sample_id), m)?;
            }
            print_json(json!({"samples": masks.len()}));
        }
        Command::SweepThreshold {
            input,
            gt,
            mask,
            csv,
            cfg,
        } => {
            let cfg = cfg.resolve()?;
            let pool = cfg.thread_pool()?;
            let lifted = pipeline::lift_dataset(&input, &cfg, &pool)?;
            let (gts, masks) = reference_grids(&lifted, &gt, mask.as_deref(), &cfg)?;
            let reference = Reference {
                gt: &gts,
                masks: masks.as_deref(),
            };
            let rows = pipeline::sweep_threshold(&lifted, &reference, &cfg, &pool)?;
            report::write_threshold_csv(&csv, &rows)?;
            let best = rows.iter().max_by(|a, b| a.report.miou.total_cmp(&b.report.miou).then(b.threshold.cmp(&a.threshold)));
            print_json(json!({"rows": rows.len(), "best_threshold": best.map(|r| r.threshold)}));
        }
        Command::SweepTemporal {
            input,
            gt,
            mask,
            csv,
            cfg,
        } => {
            let explicit_history = cfg.history;
            let cfg = cfg.resolve()?;
            let pool = cfg.thread_pool()?;
            let lifted = pipeline::lift_dataset(&input, &cfg, &pool)?;
            let (gts, masks) = reference_grids(&lifted, &gt, mask.as_deref(), &cfg)?;
            let reference = Reference {
                gt: &gts,
                masks: masks.as_deref(),
            };
            let max_h = explicit_history.unwrap_or(MAX_HISTORY);
            let rows = pipeline::sweep_temporal(&lifted, &reference, &cfg, max_h, &pool)?;
            report::write_temporal_csv(&csv, &rows)?;
            print_json(json!({"rows": rows.len()}));
        }
        Command::LossCheck {
            logits,
            target,
            grad,
            cfg,
        } => {
            let cfg = cfg.resolve()?;
            let logits = read_logits(&logits)?;
            let [x, y, z] = logits.dims();
            let spec = occlabel_core::voxelizer::GridSpec::new(
                occlabel_core::Vec3::ZERO,
                occlabel_core::Vec3::new(x as f64, y as f64, z as f64),
                1.0,
            )?;
            let target = read_label_grid(&target, &spec)?;
            let loss_cfg = cfg.loss_config();
            let b = pseudo_loss(&logits, &target, &loss_cfg)?;
            let mut out = json!({
                "total": b.total,
                "ce": b.ce,
                "geom_scal": b.geom_scal,
                "sem_scal": b.sem_scal,
                "lovasz": b.lovasz,
                "lambda": b.lambda,
            });
            if grad {
                out["max_rel_error"] = json!(gradient_check(&logits, &target, &loss_cfg, 1e-4, 1e-6)?);
            }
            print_json(out);
        }
        Command::Synth {
            output,
            scene,
            timesteps,
            width,
            height,
            moving_car,
            cfg,
        } => {
            let cfg = cfg.resolve()?;
            let pool = cfg.thread_pool()?;
            let scene = match scene {
                Some(p) => read_scene(p)?,
                None => courtyard(timesteps, width, height, moving_car)?,
            };
            pipeline::write_synthetic(&scene, &output, &cfg, &pool)?;
            let path = output.join("scene.json");
            std::fs::write(&path, scene_to_json(&scene)).map_err(|e| Error::io(&path, e))?;
            print_json(json!({"samples": scene.timesteps()}));
        }
    }
    Ok(())
}

/// One-line JSON error for stderr.
pub fn error_line(e: &Error) -> String {
    json!({"error": e.kind(), "sample_id": e.sample_id(), "message": e.to_string()}).to_string()
}
