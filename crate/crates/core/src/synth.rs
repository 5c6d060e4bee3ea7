//! Analytic box-and-plane scenes with exact depth, semantics and ground truth.
//!
//! Frames: boxes, the ground plane and the world extent live in the global
//! frame; cameras are mounted on the ego vehicle (`camera_to_ego`) and the
//! ego moves along `ego_to_global[t]`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::geometry::{Intrinsics, RigidTransform, Vec3};
use crate::labels::EMPTY_LABEL;
use crate::pointcloud::CameraSample;
use crate::voxelizer::{GridSpec, LabelGrid};
use crate::{Error, Result};

/// Horizontal plane `z = height`, bounded in x/y by the world extent, solid below.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundPlane {
    #[allow(missing_docs)]
    pub height: f64,
    #[allow(missing_docs)]
    pub class: u8,
}

/// Axis-aligned solid box.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneBox {
    /// Center at rest, global frame.
    pub center: Vec3,
    /// Full edge lengths.
    pub size: Vec3,
    #[allow(missing_docs)]
    pub class: u8,
    /// Per-timestep offset of the center; empty for static boxes.
    pub motion: Vec<Vec3>,
}

/// Slack, in meters, for voxel centers lying on a box face.
pub const FACE_TOLERANCE: f64 = 1e-9;

impl SceneBox {
    /// A box that never moves.
    pub fn fixed(center: Vec3, size: Vec3, class: u8) -> Self {
        SceneBox {
            center,
            size,
            class,
            motion: Vec::new(),
        }
    }

    /// Box spanning `[lo, hi]`.
    pub fn from_bounds(lo: Vec3, hi: Vec3, class: u8) -> Self {
        Self::fixed((lo + hi) * 0.5, hi - lo, class)
    }

    #[allow(missing_docs)]
    pub fn is_dynamic(&self) -> bool {
        !self.motion.is_empty()
    }

    /// `(lo, hi)` corners at timestep `t`.
    pub fn bounds_at(&self, t: usize) -> (Vec3, Vec3) {
        let c = self.center + self.motion.get(t).copied().unwrap_or(Vec3::ZERO);
        let h = self.size * 0.5;
        (c - h, c + h)
    }

    /// Closed containment, widened by [`FACE_TOLERANCE`] so points that sit
    /// on a face stay inside despite rounding.
    fn contains_at(&self, t: usize, p: Vec3) -> bool {
        let (lo, hi) = self.bounds_at(t);
        (0..3).all(|a| p.axis(a) >= lo.axis(a) - FACE_TOLERANCE && p.axis(a) <= hi.axis(a) + FACE_TOLERANCE)
    }
}

/// A camera on the ego vehicle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigCamera {
    #[allow(missing_docs)]
    pub intrinsics: Intrinsics,
    #[allow(missing_docs)]
    pub camera_to_ego: RigidTransform,
}

impl RigCamera {
    /// Camera at `position` (ego frame: x forward, y left, z up) looking
    /// along heading `yaw` (radians, counter-clockwise from +x), pitched down
    /// by `pitch` radians.
    pub fn looking(intrinsics: Intrinsics, position: Vec3, yaw: f64, pitch: f64) -> Self {
        let (sy, cy) = (libm::sin(yaw), libm::cos(yaw));
        let (sp, cp) = (libm::sin(pitch), libm::cos(pitch));
        let forward = Vec3::new(cp * cy, cp * sy, -sp);
        let right = Vec3::new(sy, -cy, 0.0);
        let down = forward.cross(right);
        let rotation = [
            [right.x, down.x, forward.x],
            [right.y, down.y, forward.y],
            [right.z, down.z, forward.z],
        ];
        RigCamera {
            intrinsics,
            camera_to_ego: RigidTransform::new(rotation, position).expect("orthonormal camera basis"),
        }
    }
}

/// Six cameras around the ego, 60° apart, each with the given image size and
/// horizontal field of view.
pub fn surround_rig(width: u32, height: u32, hfov_deg: f64, mount_height: f64, pitch: f64) -> Result<Vec<RigCamera>> {
    let f = width as f64 / 2.0 / libm::tan(hfov_deg.to_radians() / 2.0);
    let intr = Intrinsics::new(f, f, width as f64 / 2.0, height as f64 / 2.0, width, height)?;
    Ok((0..6)
        .map(|k| {
            let yaw = (k as f64 * 60.0).to_radians();
            RigCamera::looking(intr, Vec3::new(0.0, 0.0, mount_height), yaw, pitch)
        })
        .collect())
}

/// A complete synthetic sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    #[allow(missing_docs)]
    pub ground: Option<GroundPlane>,
    #[allow(missing_docs)]
    pub boxes: Vec<SceneBox>,
    #[allow(missing_docs)]
    pub cameras: Vec<RigCamera>,
    /// Ego pose per timestep.
    pub ego_to_global: Vec<RigidTransform>,
    /// Lower world corner; boxes and the ground stay inside.
    pub world_min: Vec3,
    #[allow(missing_docs)]
    pub world_max: Vec3,
}

impl SceneSpec {
    /// Number of timesteps.
    pub fn timesteps(&self) -> usize {
        self.ego_to_global.len()
    }

    /// Checks classes, motion lengths and that boxes stay in the world at every timestep.
    pub fn validate(&self) -> Result<()> {
        let t_n = self.timesteps();
        if t_n == 0 {
            return Err(Error::invalid("scene", "needs at least one timestep"));
        }
        for a in 0..3 {
            if !(self.world_min.axis(a) < self.world_max.axis(a)) {
                return Err(Error::invalid("scene", "world extent is empty"));
            }
        }
        if let Some(g) = &self.ground {
            if g.class >= EMPTY_LABEL {
                return Err(Error::invalid("scene", "ground class must be occupied"));
            }
        }
        for (bi, b) in self.boxes.iter().enumerate() {
            if b.class >= EMPTY_LABEL {
                return Err(Error::invalid("scene", format!("box {bi} has class {}", b.class)));
            }
            if (0..3).any(|a| !(b.size.axis(a) > 0.0)) {
                return Err(Error::invalid("scene", format!("box {bi} has non-positive size")));
            }
            if b.is_dynamic() && b.motion.len() != t_n {
                return Err(Error::invalid(
                    "scene",
                    format!("dynamic box {bi} has {} motion entries for {t_n} timesteps", b.motion.len()),
                ));
            }
            for t in 0..t_n {
                let (lo, hi) = b.bounds_at(t);
                let inside = (0..3).all(|a| {
                    lo.axis(a) >= self.world_min.axis(a) && hi.axis(a) <= self.world_max.axis(a)
                });
                if !inside {
                    return Err(Error::invalid(
                        "scene",
                        format!("box {bi} leaves the world extent at timestep {t}"),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Camera-to-global pose of camera `cam` at timestep `t`.
    pub fn camera_to_global(&self, t: usize, cam: usize) -> RigidTransform {
        self.ego_to_global[t].compose(&self.cameras[cam].camera_to_ego)
    }

    fn check_indices(&self, t: usize, cam: Option<usize>) -> Result<()> {
        if t >= self.timesteps() {
            return Err(Error::invalid("timestep", format!("{t} of {}", self.timesteps())));
        }
        if let Some(c) = cam {
            if c >= self.cameras.len() {
                return Err(Error::invalid("camera index", format!("{c} of {}", self.cameras.len())));
            }
        }
        Ok(())
    }

    /// Nearest hit along `origin + s · dir` for `s > 0`: `(s, class)`.
    pub fn trace(&self, t: usize, origin: Vec3, dir: Vec3) -> Option<(f64, u8)> {
        let mut best: Option<(f64, u8)> = None;
        let mut offer = |s: f64, class: u8| {
            let better = match best {
                None => true,
                Some((bs, bc)) => s < bs || (s == bs && class < bc),
            };
            if better {
                best = Some((s, class));
            }
        };
        if let Some(g) = &self.ground {
            if dir.z != 0.0 {
                let s = (g.height - origin.z) / dir.z;
                if s > 0.0 {
                    let p = origin + dir * s;
                    let in_world = p.x >= self.world_min.x
                        && p.x <= self.world_max.x
                        && p.y >= self.world_min.y
                        && p.y <= self.world_max.y;
                    if in_world {
                        offer(s, g.class);
                    }
                }
            }
        }
        for b in &self.boxes {
            let (lo, hi) = b.bounds_at(t);
            if let Some(s) = ray_box(origin, dir, lo, hi) {
                offer(s, b.class);
            }
        }
        best
    }
}

/// Entry parameter of a ray into a closed box, if positive.
fn ray_box(o: Vec3, d: Vec3, lo: Vec3, hi: Vec3) -> Option<f64> {
    let mut near = f64::NEG_INFINITY;
    let mut far = f64::INFINITY;
    for a in 0..3 {
        let (oa, da) = (o.axis(a), d.axis(a));
        if da == 0.0 {
            if oa < lo.axis(a) || oa > hi.axis(a) {
                return None;
            }
        } else {
            let t0 = (lo.axis(a) - oa) / da;
            let t1 = (hi.axis(a) - oa) / da;
            near = near.max(t0.min(t1));
            far = far.min(t0.max(t1));
        }
    }
    (near <= far && near > 0.0).then_some(near)
}

/// Renders depth and semantics for camera `cam` at timestep `t` by exact
/// ray casting. Misses get depth 0 and label 17.
pub fn render_sample(scene: &SceneSpec, t: usize, cam: usize) -> Result<CameraSample> {
    scene.check_indices(t, Some(cam))?;
    let intr = scene.cameras[cam].intrinsics;
    let pose = scene.camera_to_global(t, cam);
    let (w, h) = (intr.width as usize, intr.height as usize);
    let mut depth = vec![0f32; w * h];
    let mut semantics = vec![EMPTY_LABEL; w * h];
    let origin = pose.translation();
    for v in 0..h {
        for u in 0..w {
            // camera-frame z of the ray is 1, so the hit parameter is the z-depth
            let dir = pose.apply_vector(intr.ray(u as f64, v as f64));
            if let Some((s, class)) = scene.trace(t, origin, dir) {
                depth[v * w + u] = s as f32;
                semantics[v * w + u] = class;
            }
        }
    }
    Ok(CameraSample {
        intrinsics: intr,
        camera_to_global: pose,
        depth,
        semantics,
    })
}

/// Solid ground truth in the ego frame of timestep `t`: each voxel takes the
/// smallest class among boxes containing its center, else the ground class
/// when the center lies on or below the plane, else 17.
pub fn analytic_ground_truth(scene: &SceneSpec, t: usize, spec: &GridSpec) -> Result<LabelGrid> {
    scene.check_indices(t, None)?;
    let ego = scene.ego_to_global[t];
    let mut grid = LabelGrid::empty(*spec);
    let [nx, ny, nz] = spec.dims();
    for x in 0..nx {
        for y in 0..ny {
            for z in 0..nz {
                let p = ego.apply(spec.voxel_center([x, y, z]));
                let mut label = scene
                    .boxes
                    .iter()
                    .filter(|b| b.contains_at(t, p))
                    .map(|b| b.class)
                    .min()
                    .unwrap_or(EMPTY_LABEL);
                if label == EMPTY_LABEL {
                    if let Some(g) = &scene.ground {
                        let on_ground = p.z <= g.height
                            && p.x >= scene.world_min.x
                            && p.x <= scene.world_max.x
                            && p.y >= scene.world_min.y
                            && p.y <= scene.world_max.y;
                        if on_ground {
                            label = g.class;
                        }
                    }
                }
                if label != EMPTY_LABEL {
                    grid.set([x, y, z], label);
                }
            }
        }
    }
    Ok(grid)
}

/// Ego-frame rig pose of every camera, for mask computation.
pub fn rig_poses(scene: &SceneSpec) -> Vec<(Intrinsics, RigidTransform)> {
    scene.cameras.iter().map(|c| (c.intrinsics, c.camera_to_ego)).collect()
}

/// A walled courtyard driven through in a straight line.
///
/// Every box face and the ground plane sit on voxel-center planes of the
/// default grid, and the ego advances 0.8 m (two voxels) per timestep, so
/// rendered surfaces fall inside the ground-truth voxels they belong to in
/// every sample's ego frame. With `moving_car` a car (class 4) drives past
/// at 1.2 m per timestep.
pub fn courtyard(timesteps: usize, width: u32, height: u32, moving_car: bool) -> Result<SceneSpec> {
    let b = |lo: [f64; 3], hi: [f64; 3], class: u8| SceneBox::from_bounds(lo.into(), hi.into(), class);
    let mut boxes = vec![
        // manmade walls
        b([-14.2, 8.2, -0.4], [26.2, 9.8, 4.4], 15),
        b([-14.2, -9.8, -0.4], [26.2, -8.2, 4.4], 15),
        b([-14.2, -8.2, -0.4], [-12.6, 8.2, 3.6], 15),
        b([24.6, -8.2, -0.4], [26.2, 8.2, 3.6], 15),
        // vegetation
        b([2.6, 5.0, -0.4], [4.6, 7.0, 3.2], 16),
        b([15.0, -7.4, -0.4], [17.0, -5.4, 2.8], 16),
        // barrier and cones
        b([7.4, -4.6, -0.4], [11.4, -3.8, 0.8], 1),
        b([5.8, 2.6, -0.4], [6.6, 3.4, 0.4], 8),
        b([19.4, 3.4, -0.4], [20.2, 4.2, 0.4], 8),
        // parked truck
        b([-6.2, 3.4, -0.4], [-1.0, 6.2, 2.8], 10),
    ];
    if moving_car {
        let mut car = b([-6.2, -2.6, -0.4], [-2.2, -0.6, 1.2], 4);
        car.motion = (0..timesteps).map(|t| Vec3::new(1.2 * t as f64, 0.0, 0.0)).collect();
        boxes.push(car);
    }
    let scene = SceneSpec {
        ground: Some(GroundPlane {
            height: -0.3,
            class: 11,
        }),
        boxes,
        cameras: surround_rig(width, height, 70.0, 1.5, 8f64.to_radians())?,
        ego_to_global: (0..timesteps)
            .map(|t| RigidTransform::from_translation(Vec3::new(0.8 * t as f64, 0.0, 0.0)))
            .collect(),
        world_min: Vec3::new(-15.0, -10.6, -1.0),
        world_max: Vec3::new(27.0, 10.6, 6.0),
    };
    scene.validate()?;
    Ok(scene)
}
