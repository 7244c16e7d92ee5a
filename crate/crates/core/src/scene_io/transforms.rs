//! `transforms.json` in the NeRF-synthetic layout.
//!
//! Only `camera_angle_x` and `frames[].{file_path, transform_matrix}` are
//! required. Written files also carry explicit intrinsics (`fl_x`, `fl_y`,
//! `cx`, `cy`, `w`, `h`), which the loader prefers when present so that
//! non-square or off-center cameras round-trip exactly.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::image_dimensions;

use super::camera::{focal_from_angle, Camera};

pub const TRANSFORMS_FILE: &str = "transforms.json";

/// Loaded poses may deviate this far from orthonormal.
const POSE_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Serialize, Deserialize)]
pub(crate) struct TransformsFile {
    pub camera_angle_x: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fl_x: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fl_y: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cx: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time: Option<f64>,
    pub frames: Vec<TransformsFrame>,
}

#[derive(Debug, Serialize, Deserialize)]
pub(crate) struct TransformsFrame {
    pub file_path: String,
    pub transform_matrix: [[f64; 4]; 4],
}

pub(crate) fn read_transforms_file(dir: &Path) -> Result<TransformsFile> {
    let path = dir.join(TRANSFORMS_FILE);
    if !path.is_file() {
        return Err(Error::NotFound(path));
    }
    Ok(serde_json::from_str(&fs::read_to_string(&path)?)?)
}

fn resolve_image(dir: &Path, file_path: &str) -> PathBuf {
    let path = dir.join(file_path);
    if path.extension().is_none() && !path.exists() {
        path.with_extension("png")
    } else {
        path
    }
}

/// One camera per frame entry, in file order, with its image path. Image
/// headers are read for the resolution.
pub fn load_transforms(dir: &Path) -> Result<(Vec<Camera>, Vec<PathBuf>)> {
    let file = read_transforms_file(dir)?;
    let mut cameras = Vec::with_capacity(file.frames.len());
    let mut paths = Vec::with_capacity(file.frames.len());
    for frame in &file.frames {
        let path = resolve_image(dir, &frame.file_path);
        let (width, height) = image_dimensions(&path)?;
        let default_focal = focal_from_angle(width, file.camera_angle_x);
        let camera = Camera {
            width,
            height,
            focal_x: file.fl_x.unwrap_or(default_focal),
            focal_y: file.fl_y.or(file.fl_x).unwrap_or(default_focal),
            principal_point: [
                file.cx.unwrap_or(width as f64 / 2.0),
                file.cy.unwrap_or(height as f64 / 2.0),
            ],
            pose: frame.transform_matrix,
        };
        camera.validate(POSE_TOLERANCE)?;
        cameras.push(camera);
        paths.push(path);
    }
    Ok((cameras, paths))
}

/// Writes `dir/transforms.json` for cameras sharing one set of intrinsics.
pub fn write_transforms(
    dir: &Path,
    cameras: &[Camera],
    file_paths: &[String],
    time: Option<f64>,
) -> Result<()> {
    if cameras.len() != file_paths.len() {
        return Err(Error::InvalidShape(format!(
            "{} cameras for {} file paths",
            cameras.len(),
            file_paths.len()
        )));
    }
    let first = cameras
        .first()
        .ok_or_else(|| Error::InvalidInput("no cameras to write".into()))?;
    let shared = |c: &Camera| {
        (c.width, c.height, c.focal_x, c.focal_y, c.principal_point)
            == (first.width, first.height, first.focal_x, first.focal_y, first.principal_point)
    };
    if !cameras.iter().all(shared) {
        return Err(Error::InvalidInput(
            "all cameras in one transforms file must share intrinsics".into(),
        ));
    }
    let file = TransformsFile {
        camera_angle_x: first.camera_angle_x(),
        fl_x: Some(first.focal_x),
        fl_y: Some(first.focal_y),
        cx: Some(first.principal_point[0]),
        cy: Some(first.principal_point[1]),
        time,
        frames: cameras
            .iter()
            .zip(file_paths)
            .map(|(c, p)| TransformsFrame {
                file_path: p.clone(),
                transform_matrix: c.pose,
            })
            .collect(),
    };
    let path = dir.join(TRANSFORMS_FILE);
    fs::write(&path, serde_json::to_string_pretty(&file)?).map_err(|e| Error::WriteError {
        path,
        reason: e.to_string(),
    })
}
