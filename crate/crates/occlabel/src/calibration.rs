//! Per-sample calibration documents (JSON).
//!
//! ```json
//! {
//!   "sample_id": "scene-0001/000",
//!   "cameras": [
//!     {"camera_id": "CAM_FRONT", "K": [9 numbers], "T_camera_to_global": [16 numbers]}
//!   ],
//!   "T_global_to_ego": [16 numbers]
//! }
//! ```
//!
//! All matrices are row-major.

use std::fs;
use std::path::Path;

use occlabel_core::geometry::{Intrinsics, Mat3, RigidTransform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CameraDoc {
    camera_id: String,
    #[serde(rename = "K")]
    k: [f64; 9],
    #[serde(rename = "T_camera_to_global")]
    t_camera_to_global: [f64; 16],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CalibrationDoc {
    sample_id: String,
    cameras: Vec<CameraDoc>,
    #[serde(rename = "T_global_to_ego")]
    t_global_to_ego: [f64; 16],
}

/// One validated camera entry.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraCalibration {
    pub camera_id: String,
    /// Row-major `K`: upper triangular, `K[2][2] = 1`, positive focal lengths.
    pub k: Mat3,
    pub camera_to_global: RigidTransform,
}

impl CameraCalibration {
    /// Intrinsics for an image of the given size.
    pub fn intrinsics(&self, width: u32, height: u32) -> Result<Intrinsics> {
        Intrinsics::from_matrix(&self.k, width, height).map_err(|e| self.error(e.to_string()))
    }

    fn error(&self, message: String) -> Error {
        Error::Camera {
            camera_id: self.camera_id.clone(),
            message,
        }
    }
}

/// A validated calibration record.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationRecord {
    pub sample_id: String,
    pub cameras: Vec<CameraCalibration>,
    pub global_to_ego: RigidTransform,
}

fn mat3(k: &[f64; 9]) -> Mat3 {
    [[k[0], k[1], k[2]], [k[3], k[4], k[5]], [k[6], k[7], k[8]]]
}

impl CalibrationRecord {
    /// Parses and validates a JSON document.
    pub fn from_json(text: &str, origin: &Path) -> Result<Self> {
        let doc: CalibrationDoc = serde_json::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_owned(),
            message: e.to_string(),
        })?;
        let mut cameras = Vec::with_capacity(doc.cameras.len());
        for c in &doc.cameras {
            let camera_err = |message: String| Error::Camera {
                camera_id: c.camera_id.clone(),
                message,
            };
            if cameras.iter().any(|p: &CameraCalibration| p.camera_id == c.camera_id) {
                return Err(camera_err("duplicate camera_id".into()));
            }
            let k = mat3(&c.k);
            // structure only; the image size arrives with the depth map
            Intrinsics::from_matrix(&k, 1, 1).map_err(|e| camera_err(format!("K: {e}")))?;
            let pose = RigidTransform::from_row_major(&c.t_camera_to_global)
                .map_err(|e| camera_err(format!("T_camera_to_global: {e}")))?;
            cameras.push(CameraCalibration {
                camera_id: c.camera_id.clone(),
                k,
                camera_to_global: pose,
            });
        }
        let global_to_ego = RigidTransform::from_row_major(&doc.t_global_to_ego).map_err(|e| Error::Parse {
            path: origin.to_owned(),
            message: format!("T_global_to_ego: {e}"),
        })?;
        Ok(CalibrationRecord {
            sample_id: doc.sample_id,
            cameras,
            global_to_ego,
        })
    }

    pub fn to_json(&self) -> String {
        let doc = CalibrationDoc {
            sample_id: self.sample_id.clone(),
            cameras: self
                .cameras
                .iter()
                .map(|c| CameraDoc {
                    camera_id: c.camera_id.clone(),
                    k: [
                        c.k[0][0], c.k[0][1], c.k[0][2], c.k[1][0], c.k[1][1], c.k[1][2], c.k[2][0], c.k[2][1],
                        c.k[2][2],
                    ],
                    t_camera_to_global: c.camera_to_global.to_row_major(),
                })
                .collect(),
            t_global_to_ego: self.global_to_ego.to_row_major(),
        };
        serde_json::to_string_pretty(&doc).expect("calibration serializes")
    }

    /// Camera → ego pose of camera `i`.
    pub fn camera_to_ego(&self, i: usize) -> RigidTransform {
        self.global_to_ego.compose(&self.cameras[i].camera_to_global)
    }
}

pub fn read_calibration(path: impl AsRef<Path>) -> Result<CalibrationRecord> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    CalibrationRecord::from_json(&text, path)
}

pub fn write_calibration(path: impl AsRef<Path>, record: &CalibrationRecord) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, record.to_json()).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use serde_json::json;

    const I3: [f64; 9] = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];
    const I4: [f64; 16] = [
        1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0,
    ];

    fn parse(v: serde_json::Value) -> Result<CalibrationRecord> {
        CalibrationRecord::from_json(&v.to_string(), Path::new("calib.json"))
    }

    fn doc(k: [f64; 9], t: [f64; 16]) -> serde_json::Value {
        json!({
            "sample_id": "s0",
            "cameras": [{"camera_id": "CAM_BACK", "K": k, "T_camera_to_global": t}],
            "T_global_to_ego": I4,
        })
    }

    #[test]
    fn identity_record() {
        let r = parse(doc(I3, I4)).unwrap();
        assert_eq!(r.sample_id, "s0");
        assert_eq!(r.cameras[0].camera_to_global, RigidTransform::IDENTITY);
        assert_eq!(r.global_to_ego, RigidTransform::IDENTITY);
        assert_eq!(r.cameras[0].k, mat3(&I3));
    }

    #[test]
    fn bad_k_names_camera() {
        let mut k = I3;
        k[8] = 2.0;
        let e = parse(doc(k, I4)).unwrap_err();
        assert!(matches!(&e, Error::Camera { camera_id, .. } if camera_id == "CAM_BACK"), "{e}");
        assert!(e.to_string().contains("CAM_BACK"));
    }

    #[test]
    fn missing_ego_transform_is_parse_error() {
        let mut v = doc(I3, I4);
        v.as_object_mut().unwrap().remove("T_global_to_ego");
        assert!(matches!(parse(v), Err(Error::Parse { .. })));
    }

    #[test]
    fn json_round_trip() {
        let mut t = I4;
        t[3] = 1.5;
        let r = parse(doc([800.0, 0.0, 320.0, 0.0, 810.0, 240.0, 0.0, 0.0, 1.0], t)).unwrap();
        let back = CalibrationRecord::from_json(&r.to_json(), Path::new("x")).unwrap();
        assert_eq!(back, r);
    }

    #[derive(Debug, Clone, Copy)]
    enum Defect {
        None,
        KBottomRow,
        KScale,
        NegativeFocal,
        LowerK,
        PoseBottomRow,
        PoseScaled,
        PoseReflection,
        PoseShear,
    }

    fn rotation(a: f64, b: f64, c: f64) -> [[f64; 3]; 3] {
        let r = RigidTransform::from_axis_angle(occlabel_core::Vec3::new(a, b, c), (a * a + b * b + c * c).sqrt(), occlabel_core::Vec3::ZERO);
        *r.rotation()
    }

    fn build(defect: Defect, angles: (f64, f64, f64), f: f64) -> serde_json::Value {
        let mut k = [f, 0.0, 320.0, 0.0, f, 240.0, 0.0, 0.0, 1.0];
        let r = rotation(angles.0, angles.1, angles.2);
        let mut t = [
            r[0][0], r[0][1], r[0][2], 1.0, r[1][0], r[1][1], r[1][2], 2.0, r[2][0], r[2][1], r[2][2], 3.0, 0.0, 0.0,
            0.0, 1.0,
        ];
        match defect {
            Defect::None => {}
            Defect::KBottomRow => k[7] = 0.5,
            Defect::KScale => k[8] = 1.0 + 1e-3,
            Defect::NegativeFocal => k[0] = -f,
            Defect::LowerK => k[3] = 0.25,
            Defect::PoseBottomRow => t[14] = 1e-3,
            Defect::PoseScaled => {
                for i in [0, 1, 2, 4, 5, 6, 8, 9, 10] {
                    t[i] *= 1.01;
                }
            }
            Defect::PoseReflection => {
                for i in [0, 4, 8] {
                    t[i] = -t[i];
                }
            }
            Defect::PoseShear => {
                // det stays 1 but the block is not orthonormal
                t[0] = 1.0;
                t[1] = 0.3;
                t[2] = 0.0;
                t[4] = 0.0;
                t[5] = 1.0;
                t[6] = 0.0;
                t[8] = 0.0;
                t[9] = 0.0;
                t[10] = 1.0;
            }
        }
        doc(k, t)
    }

    fn defect_strategy() -> impl Strategy<Value = Defect> {
        prop_oneof![
            Just(Defect::None),
            Just(Defect::KBottomRow),
            Just(Defect::KScale),
            Just(Defect::NegativeFocal),
            Just(Defect::LowerK),
            Just(Defect::PoseBottomRow),
            Just(Defect::PoseScaled),
            Just(Defect::PoseReflection),
            Just(Defect::PoseShear),
        ]
    }

    proptest! {
        #[test]
        fn rejects_exactly_the_invalid_documents(
            defect in defect_strategy(),
            a in -2.0f64..2.0, b in -2.0f64..2.0, c in -2.0f64..2.0,
            f in 10.0f64..2000.0,
        ) {
            let result = parse(build(defect, (a, b, c), f));
            match defect {
                Defect::None => prop_assert!(result.is_ok(), "{:?}", result),
                _ => prop_assert!(
                    matches!(&result, Err(Error::Camera { camera_id, .. }) if camera_id == "CAM_BACK"),
                    "{:?}: {:?}", defect, result
                ),
            }
        }
    }
}
