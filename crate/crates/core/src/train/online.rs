use std::path::PathBuf;

use crate::error::Result;
use crate::image::Image;
use crate::render::{image_metrics, render_view, RenderConfig};
use crate::scalar::Real;
use crate::scene_io::{Camera, Frame, FrameSequence, ImageReader, PngReader};

use super::config::TrainConfig;
use super::metrics::{EvalRow, LossRow, MetricsLog};
use super::state::TrainState;

/// Cameras with their decoded images.
#[derive(Clone, Debug)]
pub struct LoadedFrame {
    pub cameras: Vec<Camera>,
    pub images: Vec<Image>,
}

impl LoadedFrame {
    pub fn load(cameras: &[Camera], paths: &[PathBuf], reader: &dyn ImageReader) -> Result<Self> {
        let images = paths.iter().map(|p| reader.read(p)).collect::<Result<_>>()?;
        Ok(Self {
            cameras: cameras.to_vec(),
            images,
        })
    }

    pub fn train_views(frame: &Frame, reader: &dyn ImageReader) -> Result<Self> {
        Self::load(&frame.cameras, &frame.image_paths, reader)
    }
}

/// PSNR and SSIM of every held-out view of `frame`.
pub fn evaluate_frame<T: Real>(
    state: &TrainState<T>,
    frame: usize,
    views: &LoadedFrame,
) -> Result<Vec<EvalRow>> {
    let config = RenderConfig {
        seed: state.config.render.seed ^ (frame as u64),
        ..state.config.render.clone()
    };
    let field = state.field();
    views
        .cameras
        .iter()
        .zip(&views.images)
        .enumerate()
        .map(|(view, (cam, gt))| {
            let img = render_view(&field, cam, &config)?;
            let (psnr, ssim) = image_metrics(&img, gt)?;
            Ok(EvalRow { frame, view, psnr, ssim })
        })
        .collect()
}

/// Trains a fresh state over `sequence`, reading PNGs from disk.
pub fn run_online_sequence(sequence: &FrameSequence, config: TrainConfig) -> Result<MetricsLog> {
    let mut state = TrainState::<f32>::new(config)?;
    run_online_with(&mut state, sequence, &PngReader, |_, _| Ok(()))
}

/// Online protocol: warmup on the first frame, then for each frame in turn
/// `steps_per_frame` steps on that frame's views followed by evaluation on
/// its held-out views. A frame's images are read only once training reaches
/// it. `on_frame` runs after each frame's evaluation.
pub fn run_online_with<T: Real>(
    state: &mut TrainState<T>,
    sequence: &FrameSequence,
    reader: &dyn ImageReader,
    mut on_frame: impl FnMut(usize, &TrainState<T>) -> Result<()>,
) -> Result<MetricsLog> {
    sequence.validate()?;
    let mut log = MetricsLog::default();
    for (t, frame) in sequence.frames.iter().enumerate() {
        let train = LoadedFrame::train_views(frame, reader)?;
        let steps = if t == 0 {
            state.config.warmup_steps + state.config.steps_per_frame
        } else {
            state.config.steps_per_frame
        };
        for _ in 0..steps {
            let loss = state.train_step(&train.cameras, &train.images)?;
            log.losses.push(LossRow {
                frame: t,
                step: state.step,
                loss: loss.as_f64(),
            });
        }
        let eval = LoadedFrame::load(&sequence.eval_cameras[t], &sequence.eval_image_paths[t], reader)?;
        log.evals.extend(evaluate_frame(state, t, &eval)?);
        on_frame(t, state)?;
    }
    Ok(log)
}
