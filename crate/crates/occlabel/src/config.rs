//! Pipeline configuration (TOML), every field optional.
//!
//! ```toml
//! threshold = 10
//! history = 13
//! outlier_k = 20
//! outlier_std_ratio = 2.0
//! dynamic_set = [2, 3, 4, 5, 6, 7, 9, 10]
//! pixel_stride = 1
//! ray_stride = 4
//! lambda = 0.1
//! ignore_empty = true
//! workers = 0          # 0 = one per core
//!
//! [grid]
//! min = [-40.0, -40.0, -1.0]
//! max = [40.0, 40.0, 5.4]
//! voxel_size = 0.4
//! ```

use std::path::Path;

use occlabel_core::labels::{LabelSpace, DEFAULT_DYNAMIC, EMPTY_LABEL};
use occlabel_core::losses::{LossConfig, DEFAULT_LAMBDA};
use occlabel_core::pointcloud::OutlierParams;
use occlabel_core::temporal::MAX_HISTORY;
use occlabel_core::visibility::DEFAULT_RAY_STRIDE;
use occlabel_core::voxelizer::{GridSpec, DEFAULT_THRESHOLD};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub min: [f64; 3],
    pub max: [f64; 3],
    pub voxel_size: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        let g = GridSpec::default();
        GridConfig {
            min: g.min().to_array(),
            max: g.max().to_array(),
            voxel_size: g.voxel_size(),
        }
    }
}

impl GridConfig {
    pub fn spec(&self) -> Result<GridSpec> {
        GridSpec::new(self.min.into(), self.max.into(), self.voxel_size)
            .map_err(|e| Error::Config(format!("grid: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub grid: GridConfig,
    /// Minimum points for an occupied voxel.
    pub threshold: u32,
    /// Past samples aggregated, 0–13.
    pub history: usize,
    pub outlier_k: usize,
    pub outlier_std_ratio: f64,
    pub dynamic_set: Vec<u8>,
    pub pixel_stride: usize,
    pub ray_stride: usize,
    pub lambda: f64,
    pub ignore_empty: bool,
    /// Worker threads; 0 picks one per core.
    pub workers: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let outlier = OutlierParams::default();
        PipelineConfig {
            grid: GridConfig::default(),
            threshold: DEFAULT_THRESHOLD,
            history: MAX_HISTORY,
            outlier_k: outlier.k(),
            outlier_std_ratio: outlier.std_ratio(),
            dynamic_set: DEFAULT_DYNAMIC.to_vec(),
            pixel_stride: 1,
            ray_stride: DEFAULT_RAY_STRIDE,
            lambda: DEFAULT_LAMBDA,
            ignore_empty: true,
            workers: 0,
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: PipelineConfig = toml::from_str(text).map_err(|e| Error::Config(e.message().to_owned()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        self.grid.spec()?;
        if self.threshold < 1 {
            return bad("threshold must be at least 1".into());
        }
        if self.history > MAX_HISTORY {
            return bad(format!("history {} exceeds {MAX_HISTORY}", self.history));
        }
        if self.pixel_stride < 1 || self.ray_stride < 1 {
            return bad("strides must be at least 1".into());
        }
        if let Some(c) = self.dynamic_set.iter().find(|&&c| c >= EMPTY_LABEL) {
            return bad(format!("dynamic class {c} out of range 0-16"));
        }
        self.outlier_params()?;
        if !self.lambda.is_finite() || self.lambda < 0.0 {
            return bad(format!("lambda must be finite and non-negative, got {}", self.lambda));
        }
        Ok(())
    }

    pub fn grid_spec(&self) -> GridSpec {
        self.grid.spec().expect("validated grid")
    }

    pub fn outlier_params(&self) -> Result<OutlierParams> {
        OutlierParams::new(self.outlier_k, self.outlier_std_ratio).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn label_space(&self) -> LabelSpace {
        LabelSpace::with_dynamic(&self.dynamic_set).expect("validated dynamic set")
    }

    pub fn loss_config(&self) -> LossConfig {
        LossConfig {
            lambda: self.lambda,
            ignore_empty: self.ignore_empty,
            class_weights: None,
        }
    }

    /// A thread pool sized by `workers`.
    pub fn thread_pool(&self) -> Result<rayon::ThreadPool> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.workers)
            .build()
            .map_err(|e| Error::Config(format!("workers: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = PipelineConfig::default();
        assert_eq!((c.threshold, c.history, c.ray_stride, c.pixel_stride), (10, 13, 4, 1));
        assert_eq!(c.lambda, 0.1);
        assert!(c.ignore_empty);
        assert_eq!(c.grid_spec().dims(), [200, 200, 16]);
        assert_eq!(PipelineConfig::from_toml("").unwrap(), c);
    }

    #[test]
    fn partial_document_overrides() {
        let c = PipelineConfig::from_toml("threshold = 3\nhistory = 0\n[grid]\nmin = [0.0, 0.0, 0.0]\nmax = [4.0, 4.0, 2.0]\nvoxel_size = 0.5\n").unwrap();
        assert_eq!((c.threshold, c.history), (3, 0));
        assert_eq!(c.grid_spec().dims(), [8, 8, 4]);
    }

    #[test]
    fn rejects_unknown_keys_and_ranges() {
        for doc in [
            "treshold = 3",
            "history = 14",
            "threshold = 0",
            "ray_stride = 0",
            "dynamic_set = [17]",
            "outlier_k = 0",
            "lambda = -1.0",
            "[grid]\nmin = [0.0, 0.0, 0.0]\nmax = [1.0, 1.0, 1.0]\nvoxel_size = 0.3",
            "[grid]\nmin = [0.0, 0.0, 0.0]\nmax = [1.0, 1.0, 1.0]\nvoxel_size = 0.5\nextra = 1",
        ] {
            assert!(matches!(PipelineConfig::from_toml(doc), Err(Error::Config(_))), "{doc}");
        }
    }
}
