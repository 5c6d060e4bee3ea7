//! On-disk sequence layout.
//!
//! ```text
//! <input>/manifest.txt                 ordered sample ids, one per line
//! <input>/<id>/calib.json              calibration record
//! <input>/<id>/<camera_id>.depth.vxt   f32 [H, W], meters, 0 = no return
//! <input>/<id>/<camera_id>.sem.vxt     u8  [H, W], class indices
//! ```
//!
//! Label grids and masks live flat in their own directories as
//! `<id>.labels.vxt` and `<id>.mask.vxt`.

use std::fs;
use std::path::{Path, PathBuf};

use occlabel_core::pointcloud::CameraSample;

use crate::calibration::{read_calibration, write_calibration, CalibrationRecord};
use crate::error::{Error, Result};
use crate::tensorio::{image_dims, read_tensor, write_tensor, Tensor, TensorData};

pub const MANIFEST: &str = "manifest.txt";
pub const LABELS_EXT: &str = ".labels.vxt";
pub const MASK_EXT: &str = ".mask.vxt";

fn check_id(id: &str) -> Result<()> {
    let ok = !id.is_empty() && id != "." && id != ".." && !id.contains(['/', '\\']) && !id.contains(char::is_whitespace);
    if ok {
        Ok(())
    } else {
        Err(Error::Mismatch(format!("invalid sample id {id:?}")))
    }
}

/// Sample ids in sequence order. Blank lines and `#` comments are skipped.
pub fn read_manifest(dir: impl AsRef<Path>) -> Result<Vec<String>> {
    let path = dir.as_ref().join(MANIFEST);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let ids: Vec<String> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_owned)
        .collect();
    for (i, id) in ids.iter().enumerate() {
        check_id(id)?;
        if ids[..i].contains(id) {
            return Err(Error::Mismatch(format!("sample {id} listed twice in manifest")));
        }
    }
    Ok(ids)
}

pub fn write_manifest(dir: impl AsRef<Path>, ids: &[String]) -> Result<()> {
    let path = dir.as_ref().join(MANIFEST);
    let mut text = String::new();
    for id in ids {
        check_id(id)?;
        text.push_str(id);
        text.push('\n');
    }
    fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

/// Calibration plus per-camera images for one sample.
#[derive(Debug, Clone)]
pub struct LoadedSample {
    pub sample_id: String,
    pub calibration: CalibrationRecord,
    pub cameras: Vec<CameraSample>,
}

fn depth_path(dir: &Path, id: &str, cam: &str) -> PathBuf {
    dir.join(id).join(format!("{cam}.depth.vxt"))
}

fn sem_path(dir: &Path, id: &str, cam: &str) -> PathBuf {
    dir.join(id).join(format!("{cam}.sem.vxt"))
}

pub fn load_sample(dir: impl AsRef<Path>, id: &str) -> Result<LoadedSample> {
    load_sample_inner(dir.as_ref(), id).map_err(|e| e.in_sample(id))
}

fn load_sample_inner(dir: &Path, id: &str) -> Result<LoadedSample> {
    check_id(id)?;
    let calibration = read_calibration(dir.join(id).join("calib.json"))?;
    if calibration.sample_id != id {
        return Err(Error::Mismatch(format!(
            "calibration is for sample {}",
            calibration.sample_id
        )));
    }
    let mut cameras = Vec::with_capacity(calibration.cameras.len());
    for cam in &calibration.cameras {
        let depth = read_tensor(depth_path(dir, id, &cam.camera_id))?;
        let sem = read_tensor(sem_path(dir, id, &cam.camera_id))?;
        let (w, h) = image_dims(&depth)?;
        if sem.dims() != depth.dims() {
            return Err(Error::Camera {
                camera_id: cam.camera_id.clone(),
                message: format!("semantic map {:?} vs depth map {:?}", sem.dims(), depth.dims()),
            });
        }
        let (TensorData::F32(depth), TensorData::U8(semantics)) = (depth.into_data(), sem.into_data()) else {
            return Err(Error::Camera {
                camera_id: cam.camera_id.clone(),
                message: "depth must be f32 and semantics u8".into(),
            });
        };
        cameras.push(CameraSample {
            intrinsics: cam.intrinsics(w, h)?,
            camera_to_global: cam.camera_to_global,
            depth,
            semantics,
        });
    }
    Ok(LoadedSample {
        sample_id: id.to_owned(),
        calibration,
        cameras,
    })
}

/// Writes calibration and images; `cameras` pairs up with `calibration.cameras`.
pub fn write_sample(dir: impl AsRef<Path>, calibration: &CalibrationRecord, cameras: &[CameraSample]) -> Result<()> {
    let dir = dir.as_ref();
    let id = &calibration.sample_id;
    check_id(id)?;
    let sample_dir = dir.join(id);
    fs::create_dir_all(&sample_dir).map_err(|e| Error::io(&sample_dir, e))?;
    write_calibration(sample_dir.join("calib.json"), calibration)?;
    for (cal, cam) in calibration.cameras.iter().zip(cameras) {
        let dims = vec![cam.intrinsics.height, cam.intrinsics.width];
        write_tensor(
            depth_path(dir, id, &cal.camera_id),
            &Tensor::new(dims.clone(), TensorData::F32(cam.depth.clone()))?,
        )?;
        write_tensor(
            sem_path(dir, id, &cal.camera_id),
            &Tensor::new(dims, TensorData::U8(cam.semantics.clone()))?,
        )?;
    }
    Ok(())
}

pub fn labels_path(dir: impl AsRef<Path>, id: &str) -> PathBuf {
    dir.as_ref().join(format!("{id}{LABELS_EXT}"))
}

pub fn mask_path(dir: impl AsRef<Path>, id: &str) -> PathBuf {
    dir.as_ref().join(format!("{id}{MASK_EXT}"))
}

/// Sorted sample ids of every `<id>.labels.vxt` in `dir`.
pub fn list_label_files(dir: impl AsRef<Path>) -> Result<Vec<String>> {
    let dir = dir.as_ref();
    let mut ids = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        if let Some(id) = entry.file_name().to_str().and_then(|n| n.strip_suffix(LABELS_EXT)) {
            ids.push(id.to_owned());
        }
    }
    ids.sort();
    Ok(ids)
}

pub fn create_dir(dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}
