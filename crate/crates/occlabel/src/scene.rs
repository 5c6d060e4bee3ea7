//! JSON scene documents for the synthetic generator.
//!
//! ```json
//! {
//!   "ground": {"height": -0.3, "class": 11},
//!   "boxes": [{"min": [0, 0, 0], "max": [1, 1, 1], "class": 4, "motion": [[0, 0, 0], [1.2, 0, 0]]}],
//!   "cameras": [{"K": [9 numbers], "width": 320, "height": 180, "T_camera_to_ego": [16 numbers]}],
//!   "ego_to_global": [[16 numbers], ...],
//!   "world_min": [-15, -10, -1],
//!   "world_max": [27, 10, 6]
//! }
//! ```
//!
//! `motion` is optional (static box) and otherwise has one center offset
//! per timestep.

use std::path::Path;

use occlabel_core::geometry::{Intrinsics, RigidTransform};
use occlabel_core::synth::{GroundPlane, RigCamera, SceneBox, SceneSpec};
use occlabel_core::Vec3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GroundDoc {
    height: f64,
    class: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BoxDoc {
    min: [f64; 3],
    max: [f64; 3],
    class: u8,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    motion: Vec<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CameraDoc {
    #[serde(rename = "K")]
    k: [f64; 9],
    width: u32,
    height: u32,
    #[serde(rename = "T_camera_to_ego")]
    t_camera_to_ego: [f64; 16],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SceneDoc {
    #[serde(default)]
    ground: Option<GroundDoc>,
    #[serde(default)]
    boxes: Vec<BoxDoc>,
    cameras: Vec<CameraDoc>,
    ego_to_global: Vec<[f64; 16]>,
    world_min: [f64; 3],
    world_max: [f64; 3],
}

fn invalid(origin: &Path, message: String) -> Error {
    Error::Parse {
        path: origin.to_owned(),
        message,
    }
}

pub fn scene_from_json(text: &str, origin: &Path) -> Result<SceneSpec> {
    let doc: SceneDoc = serde_json::from_str(text).map_err(|e| invalid(origin, e.to_string()))?;
    let cameras = doc
        .cameras
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let k = [[c.k[0], c.k[1], c.k[2]], [c.k[3], c.k[4], c.k[5]], [c.k[6], c.k[7], c.k[8]]];
            let intrinsics = Intrinsics::from_matrix(&k, c.width, c.height)
                .map_err(|e| invalid(origin, format!("camera {i}: {e}")))?;
            let camera_to_ego = RigidTransform::from_row_major(&c.t_camera_to_ego)
                .map_err(|e| invalid(origin, format!("camera {i}: {e}")))?;
            Ok(RigCamera {
                intrinsics,
                camera_to_ego,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let ego_to_global = doc
        .ego_to_global
        .iter()
        .enumerate()
        .map(|(t, m)| RigidTransform::from_row_major(m).map_err(|e| invalid(origin, format!("ego pose {t}: {e}"))))
        .collect::<Result<Vec<_>>>()?;
    let scene = SceneSpec {
        ground: doc.ground.map(|g| GroundPlane {
            height: g.height,
            class: g.class,
        }),
        boxes: doc
            .boxes
            .iter()
            .map(|b| {
                let mut sb = SceneBox::from_bounds(b.min.into(), b.max.into(), b.class);
                sb.motion = b.motion.iter().map(|&m| Vec3::from(m)).collect();
                sb
            })
            .collect(),
        cameras,
        ego_to_global,
        world_min: doc.world_min.into(),
        world_max: doc.world_max.into(),
    };
    scene.validate().map_err(|e| invalid(origin, e.to_string()))?;
    Ok(scene)
}

pub fn scene_to_json(scene: &SceneSpec) -> String {
    let doc = SceneDoc {
        ground: scene.ground.map(|g| GroundDoc {
            height: g.height,
            class: g.class,
        }),
        boxes: scene
            .boxes
            .iter()
            .map(|b| {
                let (lo, hi) = (b.center - b.size * 0.5, b.center + b.size * 0.5);
                BoxDoc {
                    min: lo.to_array(),
                    max: hi.to_array(),
                    class: b.class,
                    motion: b.motion.iter().map(|m| m.to_array()).collect(),
                }
            })
            .collect(),
        cameras: scene
            .cameras
            .iter()
            .map(|c| {
                let k = c.intrinsics.matrix();
                CameraDoc {
                    k: [k[0][0], k[0][1], k[0][2], k[1][0], k[1][1], k[1][2], k[2][0], k[2][1], k[2][2]],
                    width: c.intrinsics.width,
                    height: c.intrinsics.height,
                    t_camera_to_ego: c.camera_to_ego.to_row_major(),
                }
            })
            .collect(),
        ego_to_global: scene.ego_to_global.iter().map(|t| t.to_row_major()).collect(),
        world_min: scene.world_min.to_array(),
        world_max: scene.world_max.to_array(),
    };
    serde_json::to_string_pretty(&doc).expect("scene serializes")
}

pub fn read_scene(path: impl AsRef<Path>) -> Result<SceneSpec> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    scene_from_json(&text, path)
}
