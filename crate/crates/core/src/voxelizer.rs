//! Thresholded majority-vote voxelization into dense label grids.
//!
//! Grids are stored x-major, z-minor: the linear index of voxel
//! `(x, y, z)` is `(x · Ny + y) · Nz + z`. Voxel intervals are half-open,
//! `[lo, hi)`, on every axis.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::geometry::Vec3;
use crate::labels::{EMPTY_LABEL, NUM_CLASSES};
use crate::math::{floor, round};
use crate::pointcloud::SemanticPointCloud;
use crate::{Error, Result};

/// Default occupancy threshold: a voxel needs ten points to be occupied.
pub const DEFAULT_THRESHOLD: u32 = 10;

/// Axis-aligned voxel grid in the ego frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    min: Vec3,
    max: Vec3,
    voxel_size: f64,
    dims: [usize; 3],
}

impl Default for GridSpec {
    /// The Occ3D-nuScenes grid: `[-40, 40] × [-40, 40] × [-1, 5.4]` m at 0.4 m.
    fn default() -> Self {
        GridSpec::new(
            Vec3::new(-40.0, -40.0, -1.0),
            Vec3::new(40.0, 40.0, 5.4),
            0.4,
        )
        .expect("default grid is valid")
    }
}

impl GridSpec {
    /// Builds a grid whose extent is a whole number of voxels on each axis
    /// (within 1e-9 voxels).
    pub fn new(min: Vec3, max: Vec3, voxel_size: f64) -> Result<Self> {
        if !(voxel_size > 0.0) || !voxel_size.is_finite() {
            return Err(Error::invalid("grid", "voxel size must be positive"));
        }
        let mut dims = [0usize; 3];
        for (axis, dim) in dims.iter_mut().enumerate() {
            let extent = max.axis(axis) - min.axis(axis);
            let cells = extent / voxel_size;
            if !cells.is_finite() || cells < 0.5 {
                return Err(Error::invalid(
                    "grid",
                    format!("axis {axis} extent {extent} holds no voxel"),
                ));
            }
            let whole = round(cells);
            if (cells - whole).abs() > 1e-9 {
                return Err(Error::invalid(
                    "grid",
                    format!("axis {axis} extent {extent} is not a multiple of {voxel_size}"),
                ));
            }
            if whole > u32::MAX as f64 {
                return Err(Error::invalid("grid", "too many voxels"));
            }
            *dim = whole as usize;
        }
        let total = dims[0] as u128 * dims[1] as u128 * dims[2] as u128;
        if total > u32::MAX as u128 {
            return Err(Error::invalid("grid", "too many voxels"));
        }
        Ok(GridSpec {
            min,
            max,
            voxel_size,
            dims,
        })
    }

    #[allow(missing_docs)]
    pub fn min(&self) -> Vec3 {
        self.min
    }

    #[allow(missing_docs)]
    pub fn max(&self) -> Vec3 {
        self.max
    }

    /// Voxel edge length in meters.
    pub fn voxel_size(&self) -> f64 {
        self.voxel_size
    }

    /// `[Nx, Ny, Nz]`.
    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    /// `Nx · Ny · Nz`.
    pub fn voxel_count(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    /// Voxel containing `p`, or `None` outside the grid.
    #[inline]
    pub fn voxel_index(&self, p: Vec3) -> Option<[usize; 3]> {
        let mut out = [0usize; 3];
        for axis in 0..3 {
            let f = floor((p.axis(axis) - self.min.axis(axis)) / self.voxel_size);
            // NaN fails both comparisons
            if !(f >= 0.0 && f < self.dims[axis] as f64) {
                return None;
            }
            out[axis] = f as usize;
        }
        Some(out)
    }

    /// Linear index of voxel `(x, y, z)`.
    #[inline]
    pub fn linear_index(&self, [x, y, z]: [usize; 3]) -> usize {
        (x * self.dims[1] + y) * self.dims[2] + z
    }

    /// Inverse of [`Self::linear_index`].
    #[inline]
    pub fn unravel(&self, i: usize) -> [usize; 3] {
        let z = i % self.dims[2];
        let xy = i / self.dims[2];
        [xy / self.dims[1], xy % self.dims[1], z]
    }

    /// Center point of voxel `(x, y, z)`.
    pub fn voxel_center(&self, [x, y, z]: [usize; 3]) -> Vec3 {
        let s = self.voxel_size;
        Vec3::new(
            self.min.x + (x as f64 + 0.5) * s,
            self.min.y + (y as f64 + 0.5) * s,
            self.min.z + (z as f64 + 0.5) * s,
        )
    }
}

/// Dense grid of class labels; 17 marks empty voxels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelGrid {
    spec: GridSpec,
    data: Vec<u8>,
}

impl LabelGrid {
    /// All-empty grid.
    pub fn empty(spec: GridSpec) -> Self {
        LabelGrid {
            data: vec![EMPTY_LABEL; spec.voxel_count()],
            spec,
        }
    }

    /// Wraps `data`, checking its length and that every label is at most 17.
    pub fn from_data(spec: GridSpec, data: Vec<u8>) -> Result<Self> {
        if data.len() != spec.voxel_count() {
            return Err(Error::ShapeMismatch(format!(
                "grid {:?} needs {} labels, got {}",
                spec.dims(),
                spec.voxel_count(),
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|&l| l > EMPTY_LABEL) {
            return Err(Error::invalid(
                "label grid",
                format!("voxel {i} has label {}", data[i]),
            ));
        }
        Ok(LabelGrid { spec, data })
    }

    #[allow(missing_docs)]
    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    /// Labels in linear-index order.
    pub fn data(&self) -> &[u8] {
        &self.data
    }

    #[allow(missing_docs)]
    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    #[allow(missing_docs)]
    pub fn get(&self, idx: [usize; 3]) -> u8 {
        self.data[self.spec.linear_index(idx)]
    }

    /// Sets one voxel. Panics on labels above 17.
    pub fn set(&mut self, idx: [usize; 3], label: u8) {
        assert!(label <= EMPTY_LABEL, "label {label} out of range");
        let i = self.spec.linear_index(idx);
        self.data[i] = label;
    }

    /// Number of voxels not labeled empty.
    pub fn occupied_count(&self) -> usize {
        self.data.iter().filter(|&&l| l != EMPTY_LABEL).count()
    }
}

/// Per-class point counts for one voxel.
pub type ClassCounts = [u32; NUM_CLASSES];

/// Sparse per-voxel class histograms keyed by linear voxel index.
///
/// Histograms from disjoint chunks of a cloud can be built independently and
/// combined with [`Self::merge`]; addition is order independent, so the final
/// grid does not depend on how the cloud was partitioned.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelHistogram {
    spec: GridSpec,
    bins: BTreeMap<u32, ClassCounts>,
    outside: usize,
}

impl VoxelHistogram {
    #[allow(missing_docs)]
    pub fn new(spec: GridSpec) -> Self {
        VoxelHistogram {
            spec,
            bins: BTreeMap::new(),
            outside: 0,
        }
    }

    /// Histogram of a whole cloud.
    pub fn from_cloud(cloud: &SemanticPointCloud, spec: GridSpec) -> Self {
        let mut h = Self::new(spec);
        h.add_points(cloud.points(), cloud.labels());
        h
    }

    /// Bins points with their labels. Out-of-grid points are counted in
    /// [`Self::outside`] only.
    pub fn add_points(&mut self, points: &[Vec3], labels: &[u8]) {
        assert_eq!(points.len(), labels.len());
        for (&p, &l) in points.iter().zip(labels) {
            match self.spec.voxel_index(p) {
                Some(idx) => {
                    let key = self.spec.linear_index(idx) as u32;
                    self.bins.entry(key).or_insert([0; NUM_CLASSES])[l as usize] += 1;
                }
                None => self.outside += 1,
            }
        }
    }

    /// Adds `other`'s counts into `self`. Both must share a grid.
    pub fn merge(&mut self, other: VoxelHistogram) -> Result<()> {
        if other.spec != self.spec {
            return Err(Error::ShapeMismatch("histograms over different grids".into()));
        }
        for (k, counts) in other.bins {
            let slot = self.bins.entry(k).or_insert([0; NUM_CLASSES]);
            for (a, b) in slot.iter_mut().zip(counts.iter()) {
                *a += b;
            }
        }
        self.outside += other.outside;
        Ok(())
    }

    #[allow(missing_docs)]
    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    /// Points that fell outside the grid.
    pub fn outside(&self) -> usize {
        self.outside
    }

    /// Non-zero voxels as `(linear index, counts)`, ascending by index.
    pub fn voxels(&self) -> impl Iterator<Item = (usize, &ClassCounts)> {
        self.bins.iter().map(|(&k, c)| (k as usize, c))
    }

    /// Largest point count in any voxel.
    pub fn max_count(&self) -> u32 {
        self.bins
            .values()
            .map(|c| c.iter().sum::<u32>())
            .max()
            .unwrap_or(0)
    }

    /// Labels every voxel with at least `threshold` points by its most
    /// frequent class (smallest index on ties); everything else is empty.
    pub fn label(&self, threshold: u32) -> Result<LabelGrid> {
        check_threshold(threshold)?;
        let mut grid = LabelGrid::empty(self.spec);
        for (&k, counts) in &self.bins {
            let total: u32 = counts.iter().sum();
            if total >= threshold {
                grid.data[k as usize] = majority(counts);
            }
        }
        Ok(grid)
    }
}

fn check_threshold(threshold: u32) -> Result<()> {
    if threshold == 0 {
        return Err(Error::invalid("threshold", "must be at least 1"));
    }
    Ok(())
}

/// Most frequent class; ties go to the smallest class index.
pub fn majority(counts: &ClassCounts) -> u8 {
    let mut best = 0usize;
    for c in 1..NUM_CLASSES {
        if counts[c] > counts[best] {
            best = c;
        }
    }
    best as u8
}

/// Voxelizes an ego-frame cloud with the given occupancy threshold.
pub fn voxelize(cloud: &SemanticPointCloud, spec: &GridSpec, threshold: u32) -> Result<LabelGrid> {
    check_threshold(threshold)?;
    VoxelHistogram::from_cloud(cloud, *spec).label(threshold)
}
