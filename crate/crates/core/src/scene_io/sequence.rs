use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::image::Image;

use super::camera::Camera;
use super::transforms::{load_transforms, read_transforms_file, TRANSFORMS_FILE};

/// One time step: the training cameras and their images.
#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    pub index: usize,
    pub cameras: Vec<Camera>,
    pub image_paths: Vec<PathBuf>,
    /// Informational timestamp in seconds.
    pub time: f64,
}

/// Time-ordered frames under `root/frame_%04d/`, each with held-out views in
/// `eval/`.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameSequence {
    pub root: PathBuf,
    pub frames: Vec<Frame>,
    /// Held-out cameras per frame.
    pub eval_cameras: Vec<Vec<Camera>>,
    /// Ground-truth images for `eval_cameras`.
    pub eval_image_paths: Vec<Vec<PathBuf>>,
}

pub(crate) fn frame_dir_name(index: usize) -> String {
    format!("frame_{index:04}")
}

impl FrameSequence {
    pub fn load(root: &Path) -> Result<Self> {
        if !root.is_dir() {
            return Err(Error::NotFound(root.to_path_buf()));
        }
        let mut seq = Self {
            root: root.to_path_buf(),
            frames: Vec::new(),
            eval_cameras: Vec::new(),
            eval_image_paths: Vec::new(),
        };
        loop {
            let index = seq.frames.len();
            let dir = root.join(frame_dir_name(index));
            if !dir.join(TRANSFORMS_FILE).is_file() {
                break;
            }
            let (cameras, image_paths) = load_transforms(&dir)?;
            let time = read_transforms_file(&dir)?.time.unwrap_or(index as f64);
            let eval_dir = dir.join("eval");
            let (eval_cams, eval_paths) = if eval_dir.join(TRANSFORMS_FILE).is_file() {
                load_transforms(&eval_dir)?
            } else {
                (Vec::new(), Vec::new())
            };
            seq.frames.push(Frame {
                index,
                cameras,
                image_paths,
                time,
            });
            seq.eval_cameras.push(eval_cams);
            seq.eval_image_paths.push(eval_paths);
        }
        if seq.frames.is_empty() {
            return Err(Error::NotFound(root.join(frame_dir_name(0)).join(TRANSFORMS_FILE)));
        }
        seq.validate()?;
        Ok(seq)
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let Some(first) = self.frames.first() else {
            return Ok(());
        };
        for (k, frame) in self.frames.iter().enumerate() {
            if frame.index != k {
                return Err(Error::InvalidInput(format!(
                    "frame {} found at position {k}",
                    frame.index
                )));
            }
            if frame.cameras.len() != frame.image_paths.len() {
                return Err(Error::InvalidShape(format!(
                    "frame {k}: {} cameras, {} images",
                    frame.cameras.len(),
                    frame.image_paths.len()
                )));
            }
            if frame.cameras.len() != first.cameras.len()
                || self.eval_cameras[k].len() != self.eval_cameras[0].len()
            {
                return Err(Error::InvalidShape(format!(
                    "frame {k} changes the camera count"
                )));
            }
        }
        Ok(())
    }
}

/// Source of training and evaluation images; lets callers observe or
/// redirect file access.
pub trait ImageReader: Sync {
    fn read(&self, path: &Path) -> Result<Image>;
}

/// Decodes PNG files from disk.
#[derive(Clone, Copy, Debug, Default)]
pub struct PngReader;

impl ImageReader for PngReader {
    fn read(&self, path: &Path) -> Result<Image> {
        Image::load_png(path)
    }
}
