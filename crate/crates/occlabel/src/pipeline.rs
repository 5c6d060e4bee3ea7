//! Batch label generation over a sample sequence.
//!
//! Each sample is lifted once (all cameras → merged global cloud → outlier
//! removal) and cached; generation and sweeps then only redo densification
//! and voxelization. Work is spread over a rayon pool one sample at a time
//! and results are gathered in manifest order, so outputs do not depend on
//! the worker count.

use std::path::Path;

use occlabel_core::geometry::{Intrinsics, RigidTransform};
use occlabel_core::labels::LabelSpace;
use occlabel_core::metrics::{ConfusionAccumulator, EvalReport};
use occlabel_core::pointcloud::{lift_camera, merge_cameras, remove_outliers, SemanticPointCloud};
use occlabel_core::synth::{analytic_ground_truth, render_sample, rig_poses, SceneSpec};
use occlabel_core::temporal::{densify, MAX_HISTORY};
use occlabel_core::visibility::{compute_mask, CameraMask};
use occlabel_core::voxelizer::{LabelGrid, VoxelHistogram};
use rayon::prelude::*;

use crate::calibration::{CalibrationRecord, CameraCalibration};
use crate::config::PipelineConfig;
use crate::dataset::{
    create_dir, labels_path, load_sample, mask_path, read_manifest, write_manifest, write_sample, LoadedSample,
};
use crate::error::{Error, Result};
use crate::tensorio::{write_label_grid, write_mask};

/// Highest threshold in a sweep.
pub const SWEEP_MAX_THRESHOLD: u32 = 25;

/// One sample after lifting and outlier removal, global frame.
#[derive(Debug, Clone)]
pub struct LiftedSample {
    pub sample_id: String,
    pub cloud: SemanticPointCloud,
    pub points_before: usize,
    pub global_to_ego: RigidTransform,
    /// Camera → ego poses, for visibility masks.
    pub rig: Vec<(Intrinsics, RigidTransform)>,
}

impl LiftedSample {
    pub fn points_after(&self) -> usize {
        self.cloud.len()
    }
}

pub fn lift_sample(sample: &LoadedSample, cfg: &PipelineConfig) -> Result<LiftedSample> {
    let clouds = sample
        .cameras
        .iter()
        .map(|c| lift_camera(c, cfg.pixel_stride))
        .collect::<occlabel_core::Result<Vec<_>>>()
        .map_err(|e| Error::from(e).in_sample(&sample.sample_id))?;
    let merged = merge_cameras(&clouds);
    let cloud = remove_outliers(&merged, &cfg.outlier_params()?);
    let rig = (0..sample.cameras.len())
        .map(|i| (sample.cameras[i].intrinsics, sample.calibration.camera_to_ego(i)))
        .collect();
    Ok(LiftedSample {
        sample_id: sample.sample_id.clone(),
        cloud,
        points_before: merged.len(),
        global_to_ego: sample.calibration.global_to_ego,
        rig,
    })
}

/// Loads and lifts every manifest sample of `input` in parallel.
pub fn lift_dataset(input: &Path, cfg: &PipelineConfig, pool: &rayon::ThreadPool) -> Result<Vec<LiftedSample>> {
    let ids = read_manifest(input)?;
    pool.install(|| {
        ids.par_iter()
            .map(|id| lift_sample(&load_sample(input, id)?, cfg))
            .collect::<Vec<_>>()
    })
    .into_iter()
    .collect()
}

/// Sample `i` densified with up to `history` predecessors, current ego frame.
/// Predecessors are stamped `-1, -2, …` by manifest offset.
pub fn densified(lifted: &[LiftedSample], i: usize, history: usize, space: &LabelSpace) -> SemanticPointCloud {
    let h = history.min(MAX_HISTORY).min(i);
    let past: Vec<SemanticPointCloud> = (1..=h).map(|d| lifted[i - d].cloud.clone().with_stamp(-(d as i32))).collect();
    densify(&lifted[i].cloud.clone().with_stamp(0), &past, space, &lifted[i].global_to_ego)
}

/// Per-sample summary row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleSummary {
    pub sample_id: String,
    pub points_before: usize,
    pub points_after: usize,
    pub densified_points: usize,
    pub occupied_voxels: usize,
}

#[derive(Debug, Clone)]
pub struct SampleOutput {
    pub grid: LabelGrid,
    pub summary: SampleSummary,
}

/// Label grids for every sample at `history` and `cfg.threshold`.
pub fn generate(
    lifted: &[LiftedSample],
    cfg: &PipelineConfig,
    history: usize,
    pool: &rayon::ThreadPool,
) -> Result<Vec<SampleOutput>> {
    let spec = cfg.grid_spec();
    let space = cfg.label_space();
    pool.install(|| {
        (0..lifted.len())
            .into_par_iter()
            .map(|i| {
                let s = &lifted[i];
                let cloud = densified(lifted, i, history, &space);
                let grid = VoxelHistogram::from_cloud(&cloud, spec)
                    .label(cfg.threshold)
                    .map_err(|e| Error::from(e).in_sample(&s.sample_id))?;
                Ok(SampleOutput {
                    summary: SampleSummary {
                        sample_id: s.sample_id.clone(),
                        points_before: s.points_before,
                        points_after: s.points_after(),
                        densified_points: cloud.len(),
                        occupied_voxels: grid.occupied_count(),
                    },
                    grid,
                })
            })
            .collect::<Vec<_>>()
    })
    .into_iter()
    .collect()
}

/// Writes `<id>.labels.vxt` per sample plus `summary.csv`.
pub fn write_outputs(dir: &Path, outputs: &[SampleOutput]) -> Result<()> {
    create_dir(dir)?;
    for o in outputs {
        write_label_grid(labels_path(dir, &o.summary.sample_id), &o.grid)?;
    }
    let rows: Vec<Vec<String>> = outputs
        .iter()
        .map(|o| {
            let s = &o.summary;
            vec![
                s.sample_id.clone(),
                s.points_before.to_string(),
                s.points_after.to_string(),
                s.densified_points.to_string(),
                s.occupied_voxels.to_string(),
            ]
        })
        .collect();
    crate::report::write_csv(
        &dir.join("summary.csv"),
        &["sample_id", "points_before", "points_after", "densified_points", "occupied_voxels"],
        &rows,
    )
}

/// Ground truth (and optional mask) for each lifted sample.
pub struct Reference<'a> {
    pub gt: &'a [LabelGrid],
    pub masks: Option<&'a [CameraMask]>,
}

impl Reference<'_> {
    fn check(&self, n: usize) -> Result<()> {
        if self.gt.len() != n || self.masks.is_some_and(|m| m.len() != n) {
            return Err(Error::Mismatch(format!("{n} samples but {} ground-truth grids", self.gt.len())));
        }
        Ok(())
    }

    fn mask(&self, i: usize) -> Option<&CameraMask> {
        self.masks.map(|m| &m[i])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdRow {
    pub threshold: u32,
    pub report: EvalReport,
    pub occupied_count: usize,
}

/// Scores thresholds `1..=25` at `cfg.history`, building each sample's
/// histogram once.
pub fn sweep_threshold(
    lifted: &[LiftedSample],
    reference: &Reference,
    cfg: &PipelineConfig,
    pool: &rayon::ThreadPool,
) -> Result<Vec<ThresholdRow>> {
    reference.check(lifted.len())?;
    let spec = cfg.grid_spec();
    let space = cfg.label_space();
    let per_sample: Vec<Result<Vec<(ConfusionAccumulator, usize)>>> = pool.install(|| {
        (0..lifted.len())
            .into_par_iter()
            .map(|i| {
                let hist = VoxelHistogram::from_cloud(&densified(lifted, i, cfg.history, &space), spec);
                (1..=SWEEP_MAX_THRESHOLD)
                    .map(|t| {
                        let grid = hist.label(t)?;
                        let mut acc = ConfusionAccumulator::new();
                        acc.accumulate(&grid, &reference.gt[i], reference.mask(i))?;
                        Ok((acc, grid.occupied_count()))
                    })
                    .collect::<occlabel_core::Result<Vec<_>>>()
                    .map_err(|e| Error::from(e).in_sample(&lifted[i].sample_id))
            })
            .collect()
    });
    let per_sample = per_sample.into_iter().collect::<Result<Vec<_>>>()?;
    Ok((1..=SWEEP_MAX_THRESHOLD)
        .map(|t| {
            let k = (t - 1) as usize;
            let mut acc = ConfusionAccumulator::new();
            let mut occupied = 0;
            for s in &per_sample {
                acc.merge(&s[k].0);
                occupied += s[k].1;
            }
            ThresholdRow {
                threshold: t,
                report: acc.finalize(),
                occupied_count: occupied,
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TemporalRow {
    pub history: usize,
    pub report: EvalReport,
    pub densified_points: usize,
    pub occupied_count: usize,
}

/// Scores history lengths `0..=max_history` at `cfg.threshold`.
pub fn sweep_temporal(
    lifted: &[LiftedSample],
    reference: &Reference,
    cfg: &PipelineConfig,
    max_history: usize,
    pool: &rayon::ThreadPool,
) -> Result<Vec<TemporalRow>> {
    reference.check(lifted.len())?;
    (0..=max_history.min(MAX_HISTORY))
        .map(|h| {
            let outputs = generate(lifted, cfg, h, pool)?;
            let mut acc = ConfusionAccumulator::new();
            for (i, o) in outputs.iter().enumerate() {
                acc.accumulate(&o.grid, &reference.gt[i], reference.mask(i))
                    .map_err(|e| Error::from(e).in_sample(&lifted[i].sample_id))?;
            }
            Ok(TemporalRow {
                history: h,
                report: acc.finalize(),
                densified_points: outputs.iter().map(|o| o.summary.densified_points).sum(),
                occupied_count: outputs.iter().map(|o| o.summary.occupied_voxels).sum(),
            })
        })
        .collect()
}

/// Visibility masks of `grids` from each sample's rig.
pub fn masks_for(
    lifted: &[LiftedSample],
    grids: &[LabelGrid],
    cfg: &PipelineConfig,
    pool: &rayon::ThreadPool,
) -> Result<Vec<CameraMask>> {
    pool.install(|| {
        lifted
            .par_iter()
            .zip(grids)
            .map(|(s, g)| compute_mask(g, &s.rig, cfg.ray_stride).map_err(|e| Error::from(e).in_sample(&s.sample_id)))
            .collect::<Vec<_>>()
    })
    .into_iter()
    .collect()
}

/// Sample id of timestep `t` in a synthetic sequence.
pub fn synth_sample_id(t: usize) -> String {
    format!("t{t:03}")
}

/// Renders `scene` into `<out>/input` (sequence layout), writes analytic
/// ground truth to `<out>/gt` and its camera masks to `<out>/masks`.
pub fn write_synthetic(scene: &SceneSpec, out: &Path, cfg: &PipelineConfig, pool: &rayon::ThreadPool) -> Result<()> {
    let spec = cfg.grid_spec();
    let (input, gt_dir, mask_dir) = (out.join("input"), out.join("gt"), out.join("masks"));
    for d in [&input, &gt_dir, &mask_dir] {
        create_dir(d)?;
    }
    let ids: Vec<String> = (0..scene.timesteps()).map(synth_sample_id).collect();
    let rig = rig_poses(scene);
    pool.install(|| {
        (0..scene.timesteps()).into_par_iter().try_for_each(|t| -> Result<()> {
            let id = &ids[t];
            let cameras = (0..scene.cameras.len())
                .map(|c| render_sample(scene, t, c))
                .collect::<occlabel_core::Result<Vec<_>>>()?;
            let calibration = CalibrationRecord {
                sample_id: id.clone(),
                cameras: cameras
                    .iter()
                    .enumerate()
                    .map(|(c, s)| CameraCalibration {
                        camera_id: format!("CAM_{c}"),
                        k: s.intrinsics.matrix(),
                        camera_to_global: s.camera_to_global,
                    })
                    .collect(),
                global_to_ego: scene.ego_to_global[t].inverse(),
            };
            write_sample(&input, &calibration, &cameras)?;
            let gt = analytic_ground_truth(scene, t, &spec)?;
            write_label_grid(labels_path(&gt_dir, id), &gt)?;
            write_mask(mask_path(&mask_dir, id), &compute_mask(&gt, &rig, cfg.ray_stride)?)
        })
    })?;
    write_manifest(&input, &ids)
}
