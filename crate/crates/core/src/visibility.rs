//! Camera-visibility masks by exact voxel traversal.
//!
//! A voxel is visible when some pixel ray reaches it before, or exactly at,
//! the first occupied voxel along that ray. Empty voxels in front of the
//! first hit are therefore part of the mask.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::geometry::{Intrinsics, RigidTransform, Vec3};
use crate::labels::EMPTY_LABEL;
use crate::math::floor;
use crate::voxelizer::{GridSpec, LabelGrid};
use crate::{Error, Result};

/// Default pixel stride between cast rays.
pub const DEFAULT_RAY_STRIDE: usize = 4;

/// Boolean visibility per voxel, in the grid's linear order.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraMask {
    spec: GridSpec,
    data: Vec<bool>,
}

impl CameraMask {
    /// Nothing visible.
    pub fn none(spec: GridSpec) -> Self {
        CameraMask {
            data: vec![false; spec.voxel_count()],
            spec,
        }
    }

    /// Everything visible.
    pub fn all(spec: GridSpec) -> Self {
        CameraMask {
            data: vec![true; spec.voxel_count()],
            spec,
        }
    }

    /// Wraps `data`, checking its length.
    pub fn from_data(spec: GridSpec, data: Vec<bool>) -> Result<Self> {
        if data.len() != spec.voxel_count() {
            return Err(Error::ShapeMismatch(format!(
                "mask for {:?} needs {} entries, got {}",
                spec.dims(),
                spec.voxel_count(),
                data.len()
            )));
        }
        Ok(CameraMask { spec, data })
    }

    #[allow(missing_docs)]
    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    #[allow(missing_docs)]
    pub fn data(&self) -> &[bool] {
        &self.data
    }

    #[allow(missing_docs)]
    pub fn get(&self, idx: [usize; 3]) -> bool {
        self.data[self.spec.linear_index(idx)]
    }

    #[allow(missing_docs)]
    pub fn set(&mut self, idx: [usize; 3], visible: bool) {
        let i = self.spec.linear_index(idx);
        self.data[i] = visible;
    }

    /// Number of visible voxels.
    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    /// Elementwise OR with `other`.
    pub fn union_with(&mut self, other: &CameraMask) -> Result<()> {
        if other.spec != self.spec {
            return Err(Error::ShapeMismatch("masks over different grids".into()));
        }
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a |= b;
        }
        Ok(())
    }
}

/// Walks the ray `origin + t · direction`, `t ≥ 0`, through the grid,
/// marking voxels in `mask` until the first occupied voxel (inclusive) or
/// until the ray leaves the grid.
pub fn cast_ray(grid: &LabelGrid, origin: Vec3, direction: Vec3, mask: &mut CameraMask) {
    let spec = grid.spec();
    let dims = spec.dims();
    let s = spec.voxel_size();
    // voxel units
    let o = [
        (origin.x - spec.min().x) / s,
        (origin.y - spec.min().y) / s,
        (origin.z - spec.min().z) / s,
    ];
    let d = [direction.x / s, direction.y / s, direction.z / s];

    let mut t_enter = 0.0f64;
    let mut t_exit = f64::INFINITY;
    for a in 0..3 {
        let hi = dims[a] as f64;
        if d[a] == 0.0 {
            if o[a] < 0.0 || o[a] >= hi {
                return;
            }
        } else {
            let t0 = (0.0 - o[a]) / d[a];
            let t1 = (hi - o[a]) / d[a];
            let (near, far) = if t0 < t1 { (t0, t1) } else { (t1, t0) };
            t_enter = t_enter.max(near);
            t_exit = t_exit.min(far);
        }
    }
    if !(t_enter < t_exit) {
        return;
    }

    let mut cell = [0i64; 3];
    let mut step = [0i64; 3];
    let mut t_max = [f64::INFINITY; 3];
    let mut t_delta = [f64::INFINITY; 3];
    for a in 0..3 {
        let p = o[a] + d[a] * t_enter;
        cell[a] = (floor(p) as i64).clamp(0, dims[a] as i64 - 1);
        if d[a] > 0.0 {
            step[a] = 1;
            t_max[a] = (cell[a] as f64 + 1.0 - o[a]) / d[a];
            t_delta[a] = 1.0 / d[a];
        } else if d[a] < 0.0 {
            step[a] = -1;
            t_max[a] = (cell[a] as f64 - o[a]) / d[a];
            t_delta[a] = -1.0 / d[a];
        }
    }

    loop {
        let idx = [cell[0] as usize, cell[1] as usize, cell[2] as usize];
        let li = spec.linear_index(idx);
        mask.data[li] = true;
        if grid.data()[li] != EMPTY_LABEL {
            return;
        }
        let a = if t_max[0] <= t_max[1] {
            if t_max[0] <= t_max[2] {
                0
            } else {
                2
            }
        } else if t_max[1] <= t_max[2] {
            1
        } else {
            2
        };
        if !t_max[a].is_finite() {
            return;
        }
        cell[a] += step[a];
        if cell[a] < 0 || cell[a] >= dims[a] as i64 {
            return;
        }
        t_max[a] += t_delta[a];
    }
}

/// Casts one ray per pixel on the `ray_stride` grid of a single camera.
pub fn mark_camera(
    grid: &LabelGrid,
    intrinsics: &Intrinsics,
    camera_to_ego: &RigidTransform,
    ray_stride: usize,
    mask: &mut CameraMask,
) -> Result<()> {
    if ray_stride == 0 {
        return Err(Error::invalid("ray stride", "must be at least 1"));
    }
    if mask.spec != *grid.spec() {
        return Err(Error::ShapeMismatch("mask and grid differ".into()));
    }
    let origin = camera_to_ego.translation();
    for v in (0..intrinsics.height).step_by(ray_stride) {
        for u in (0..intrinsics.width).step_by(ray_stride) {
            let dir = camera_to_ego.apply_vector(intrinsics.ray(u as f64, v as f64));
            cast_ray(grid, origin, dir, mask);
        }
    }
    Ok(())
}

/// Union over all cameras of the voxels their pixel rays reach.
pub fn compute_mask(
    grid: &LabelGrid,
    cameras: &[(Intrinsics, RigidTransform)],
    ray_stride: usize,
) -> Result<CameraMask> {
    let mut mask = CameraMask::none(*grid.spec());
    for (intr, pose) in cameras {
        mark_camera(grid, intr, pose, ray_stride, &mut mask)?;
    }
    Ok(mask)
}
