//! Semantic point clouds: lifting camera samples, merging cameras and
//! statistical outlier removal.

mod knn;

use alloc::format;
use alloc::vec::Vec;

use crate::geometry::{camera_point, Intrinsics, RigidTransform, Vec3};
use crate::labels::{EMPTY_LABEL, NUM_CLASSES};
use crate::math::{pairwise_sum, sqrt};
use crate::{Error, Result};

pub use knn::KnnIndex;

/// Points with a class label and a relative sample offset each.
///
/// `stamp` is 0 for the current sample and `-Δ` for a point observed `Δ`
/// samples earlier. Labels are always occupied classes (`< 17`).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SemanticPointCloud {
    points: Vec<Vec3>,
    labels: Vec<u8>,
    stamps: Vec<i32>,
}

impl SemanticPointCloud {
    /// An empty cloud.
    pub fn new() -> Self {
        Self::default()
    }

    #[allow(missing_docs)]
    pub fn with_capacity(n: usize) -> Self {
        SemanticPointCloud {
            points: Vec::with_capacity(n),
            labels: Vec::with_capacity(n),
            stamps: Vec::with_capacity(n),
        }
    }

    /// Builds a cloud from parallel arrays, checking lengths and labels.
    pub fn from_parts(points: Vec<Vec3>, labels: Vec<u8>, stamps: Vec<i32>) -> Result<Self> {
        if points.len() != labels.len() || points.len() != stamps.len() {
            return Err(Error::ShapeMismatch(format!(
                "cloud arrays have lengths {}, {}, {}",
                points.len(),
                labels.len(),
                stamps.len()
            )));
        }
        if let Some(bad) = labels.iter().find(|&&l| l >= EMPTY_LABEL) {
            return Err(Error::invalid(
                "point label",
                format!("{bad} is not an occupied class"),
            ));
        }
        Ok(SemanticPointCloud {
            points,
            labels,
            stamps,
        })
    }

    /// Appends one point. Fails for labels that are not occupied classes.
    pub fn push(&mut self, p: Vec3, label: u8, stamp: i32) -> Result<()> {
        if label >= EMPTY_LABEL {
            return Err(Error::invalid(
                "point label",
                format!("{label} is not an occupied class"),
            ));
        }
        self.points.push(p);
        self.labels.push(label);
        self.stamps.push(stamp);
        Ok(())
    }

    #[allow(missing_docs)]
    pub fn len(&self) -> usize {
        self.points.len()
    }

    #[allow(missing_docs)]
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    #[allow(missing_docs)]
    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    #[allow(missing_docs)]
    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    #[allow(missing_docs)]
    pub fn stamps(&self) -> &[i32] {
        &self.stamps
    }

    /// `(point, label, stamp)` triples in storage order.
    pub fn iter(&self) -> impl ExactSizeIterator<Item = (Vec3, u8, i32)> + '_ {
        self.points
            .iter()
            .zip(self.labels.iter())
            .zip(self.stamps.iter())
            .map(|((&p, &l), &s)| (p, l, s))
    }

    /// Appends every point of `other`, keeping order.
    pub fn extend_from(&mut self, other: &SemanticPointCloud) {
        self.points.extend_from_slice(&other.points);
        self.labels.extend_from_slice(&other.labels);
        self.stamps.extend_from_slice(&other.stamps);
    }

    /// Keeps the points for which `keep(point, label, stamp)` holds, in order.
    pub fn filtered(&self, mut keep: impl FnMut(Vec3, u8, i32) -> bool) -> SemanticPointCloud {
        let mut out = SemanticPointCloud::new();
        for (p, l, s) in self.iter() {
            if keep(p, l, s) {
                out.points.push(p);
                out.labels.push(l);
                out.stamps.push(s);
            }
        }
        out
    }

    /// Applies `t` to every point.
    pub fn transformed(&self, t: &RigidTransform) -> SemanticPointCloud {
        SemanticPointCloud {
            points: self.points.iter().map(|&p| t.apply(p)).collect(),
            labels: self.labels.clone(),
            stamps: self.stamps.clone(),
        }
    }

    /// Same points with every stamp replaced by `stamp`.
    pub fn with_stamp(mut self, stamp: i32) -> SemanticPointCloud {
        self.stamps.iter_mut().for_each(|s| *s = stamp);
        self
    }

    /// Per-class point counts.
    pub fn class_histogram(&self) -> [usize; NUM_CLASSES] {
        let mut h = [0; NUM_CLASSES];
        for &l in &self.labels {
            h[l as usize] += 1;
        }
        h
    }
}

/// One camera's observation at one timestep.
///
/// `depth` holds z-depth in meters and `semantics` class indices, both
/// row-major with `height` rows of `width` pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraSample {
    #[allow(missing_docs)]
    pub intrinsics: Intrinsics,
    /// Camera to global frame.
    pub camera_to_global: RigidTransform,
    #[allow(missing_docs)]
    pub depth: Vec<f32>,
    #[allow(missing_docs)]
    pub semantics: Vec<u8>,
}

impl CameraSample {
    fn check_shapes(&self) -> Result<()> {
        let expected = self.intrinsics.width as usize * self.intrinsics.height as usize;
        if self.depth.len() != expected || self.semantics.len() != expected {
            return Err(Error::ShapeMismatch(format!(
                "camera is {}x{} but depth has {} and semantics {} pixels",
                self.intrinsics.width,
                self.intrinsics.height,
                self.depth.len(),
                self.semantics.len()
            )));
        }
        Ok(())
    }
}

/// Unprojects every pixel on the `stride` grid into a global-frame point
/// labeled with its semantic class.
///
/// Pixels with non-positive (or non-finite) depth or label 17 are skipped.
/// All stamps are 0.
pub fn lift_camera(sample: &CameraSample, stride: usize) -> Result<SemanticPointCloud> {
    if stride == 0 {
        return Err(Error::invalid("pixel stride", "must be at least 1"));
    }
    sample.check_shapes()?;
    let intr = &sample.intrinsics;
    let (w, h) = (intr.width as usize, intr.height as usize);
    let mut cloud = SemanticPointCloud::with_capacity((w / stride + 1) * (h / stride + 1));
    for v in (0..h).step_by(stride) {
        for u in (0..w).step_by(stride) {
            let i = v * w + u;
            let label = sample.semantics[i];
            let d = sample.depth[i] as f64;
            if label == EMPTY_LABEL || !(d > 0.0) || !d.is_finite() {
                continue;
            }
            if label > EMPTY_LABEL {
                return Err(Error::invalid(
                    "semantic map",
                    format!("pixel ({u}, {v}) has label {label}"),
                ));
            }
            let p = sample
                .camera_to_global
                .apply(camera_point(intr, u as u32, v as u32, d));
            cloud.points.push(p);
            cloud.labels.push(label);
            cloud.stamps.push(0);
        }
    }
    Ok(cloud)
}

/// Concatenates clouds in input order.
pub fn merge_cameras<'a, I>(clouds: I) -> SemanticPointCloud
where
    I: IntoIterator<Item = &'a SemanticPointCloud>,
{
    let mut out = SemanticPointCloud::new();
    for c in clouds {
        out.extend_from(c);
    }
    out
}

/// Parameters of the statistical outlier filter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutlierParams {
    k: usize,
    std_ratio: f64,
}

impl Default for OutlierParams {
    fn default() -> Self {
        OutlierParams {
            k: 20,
            std_ratio: 2.0,
        }
    }
}

impl OutlierParams {
    /// `k ≥ 1` neighbors, `std_ratio > 0`.
    pub fn new(k: usize, std_ratio: f64) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("outlier k", "must be at least 1"));
        }
        if !(std_ratio > 0.0) || !std_ratio.is_finite() {
            return Err(Error::invalid("outlier std_ratio", "must be positive"));
        }
        Ok(OutlierParams { k, std_ratio })
    }

    #[allow(missing_docs)]
    pub fn k(&self) -> usize {
        self.k
    }

    #[allow(missing_docs)]
    pub fn std_ratio(&self) -> f64 {
        self.std_ratio
    }
}

/// For every point, the mean distance to its `k` nearest other points.
pub fn mean_neighbor_distances(points: &[Vec3], k: usize) -> Vec<f64> {
    let index = KnnIndex::build(points);
    (0..points.len()).map(|i| index.mean_knn_distance(i, k)).collect()
}

/// Keep-mask for a population of mean neighbor distances: a point survives
/// unless its distance exceeds `μ + std_ratio · σ`, with `σ` the population
/// standard deviation.
pub fn inlier_mask(mean_distances: &[f64], std_ratio: f64) -> Vec<bool> {
    let n = mean_distances.len();
    if n == 0 {
        return Vec::new();
    }
    let mu = pairwise_sum(mean_distances) / n as f64;
    let sq: Vec<f64> = mean_distances.iter().map(|d| (d - mu) * (d - mu)).collect();
    let sigma = sqrt(pairwise_sum(&sq) / n as f64);
    let limit = mu + std_ratio * sigma;
    mean_distances.iter().map(|&d| d <= limit).collect()
}

/// Statistical outlier removal. Survivors keep their input order; clouds
/// with at most `k` points are returned unchanged.
pub fn remove_outliers(cloud: &SemanticPointCloud, params: &OutlierParams) -> SemanticPointCloud {
    if cloud.len() <= params.k {
        return cloud.clone();
    }
    let distances = mean_neighbor_distances(cloud.points(), params.k);
    apply_mask(cloud, &inlier_mask(&distances, params.std_ratio))
}

/// Keeps the points whose mask entry is true.
pub fn apply_mask(cloud: &SemanticPointCloud, keep: &[bool]) -> SemanticPointCloud {
    assert_eq!(keep.len(), cloud.len(), "mask length must match cloud");
    let mut i = 0;
    cloud.filtered(|_, _, _| {
        let k = keep[i];
        i += 1;
        k
    })
}
