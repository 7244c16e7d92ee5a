use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::encoding::{clip_position_gradients, EncodingGradients, ParticleCloud};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::neighbor::SpatialIndex;
use crate::network::{AdamState, FieldGradients, FieldParams};
use crate::physics::pbd_step;
use crate::render::{accumulate_rays, update_occupancy, Field, OccupancyGrid, RayWorkspace, TrainRay};
use crate::scalar::Real;
use crate::scene_io::Camera;

use super::config::{TrainConfig, TrainMode};

/// A batch is split into this many contiguous slices, each reduced into its
/// own gradient buffers and summed in slice order. The count is fixed so
/// results do not depend on the number of threads.
pub const GRADIENT_CHUNKS: usize = 16;

const PARAMS_SEED_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Clone, Debug)]
struct Worker<T> {
    ws: RayWorkspace<T>,
    enc: EncodingGradients<T>,
    mlp: FieldGradients<T>,
}

/// Everything that evolves during training.
#[derive(Clone, Debug)]
pub struct TrainState<T> {
    pub config: TrainConfig,
    pub cloud: ParticleCloud<T>,
    /// Always built for the current positions.
    pub index: SpatialIndex<T>,
    pub params: FieldParams<T>,
    pub grid: OccupancyGrid,
    pub mlp_adam: AdamState<T>,
    pub feature_adam: AdamState<T>,
    /// Completed training steps.
    pub step: u64,
    workers: Vec<Worker<T>>,
}

impl<T: Real> TrainState<T> {
    pub fn new(config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let cloud = ParticleCloud::init(
            config.particles,
            config.feature_dim,
            T::lit(config.search_radius),
            config.seed,
        )?;
        let params = FieldParams::init(config.feature_dim, config.seed ^ PARAMS_SEED_SALT);
        Self::from_parts(config, cloud, params, None, None, 0)
    }

    /// Reassembles a state, e.g. from a checkpoint. Missing optimizer
    /// states start fresh.
    pub fn from_parts(
        config: TrainConfig,
        cloud: ParticleCloud<T>,
        params: FieldParams<T>,
        mlp_adam: Option<AdamState<T>>,
        feature_adam: Option<AdamState<T>>,
        step: u64,
    ) -> Result<Self> {
        config.validate()?;
        cloud.validate()?;
        if params.feature_dim() != cloud.feature_dim {
            return Err(Error::InvalidShape(format!(
                "network expects features of width {}, particles carry {}",
                params.feature_dim(),
                cloud.feature_dim
            )));
        }
        let mlp_adam = mlp_adam.unwrap_or_else(|| AdamState::new(params.len(), config.mlp_optimizer));
        let feature_adam =
            feature_adam.unwrap_or_else(|| AdamState::new(cloud.features.len(), config.feature_optimizer));
        if mlp_adam.len() != params.len() || feature_adam.len() != cloud.features.len() {
            return Err(Error::InvalidShape("optimizer state does not match its parameters".into()));
        }
        let index = cloud.build_index()?;
        let grid = config.occupancy_grid()?;
        Ok(Self {
            config,
            cloud,
            index,
            params,
            grid,
            mlp_adam,
            feature_adam,
            step,
            workers: Vec::new(),
        })
    }

    pub fn field(&self) -> Field<'_, T> {
        Field {
            cloud: &self.cloud,
            index: &self.index,
            params: &self.params,
            grid: Some(&self.grid),
        }
    }

    pub fn in_warmup(&self) -> bool {
        self.step < self.config.warmup_steps as u64
    }

    /// Draws this step's rays: uniform over cameras and pixel centers.
    fn sample_batch(&self, cameras: &[Camera], images: &[Image]) -> Vec<TrainRay<T>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        rng.set_stream(self.step);
        (0..self.config.batch_size)
            .map(|_| {
                let c = rng.gen_range(0..cameras.len());
                let cam = &cameras[c];
                let x = rng.gen_range(0..cam.width);
                let y = rng.gen_range(0..cam.height);
                let target = images[c].get(x, y).map(|v| T::lit(v as f64));
                TrainRay {
                    ray: cam.pixel_ray(x, y),
                    target,
                    seed: rng.gen(),
                }
            })
            .collect()
    }

    /// One optimization step on a frame's training views; returns the batch
    /// loss.
    pub fn train_step(&mut self, cameras: &[Camera], images: &[Image]) -> Result<T> {
        if cameras.is_empty() || cameras.len() != images.len() {
            return Err(Error::InvalidShape(format!(
                "{} cameras with {} images",
                cameras.len(),
                images.len()
            )));
        }
        for (cam, img) in cameras.iter().zip(images) {
            if (cam.width, cam.height) != (img.width, img.height) {
                return Err(Error::InvalidShape(format!(
                    "{}x{} camera with a {}x{} image",
                    cam.width, cam.height, img.width, img.height
                )));
            }
        }

        update_occupancy(&mut self.grid, &self.cloud, &self.index, &self.params);
        let rays = self.sample_batch(cameras, images);

        if self.workers.len() != GRADIENT_CHUNKS
            || self.workers[0].enc.len() != self.cloud.len()
            || self.workers[0].mlp.data.len() != self.params.len()
        {
            self.workers = (0..GRADIENT_CHUNKS)
                .map(|_| Worker {
                    ws: RayWorkspace::default(),
                    enc: EncodingGradients::for_cloud(&self.cloud),
                    mlp: FieldGradients::zeros_like(&self.params),
                })
                .collect();
        }
        let chunk = rays.len().div_ceil(GRADIENT_CHUNKS);
        let field = Field {
            cloud: &self.cloud,
            index: &self.index,
            params: &self.params,
            grid: Some(&self.grid),
        };
        let (render, loss, batch) = (&self.config.render, self.config.loss, rays.len());
        let losses: Vec<T> = self
            .workers
            .par_iter_mut()
            .enumerate()
            .map(|(k, w)| {
                w.enc.clear();
                w.mlp.clear();
                let lo = (k * chunk).min(batch);
                let hi = ((k + 1) * chunk).min(batch);
                accumulate_rays(&field, &rays[lo..hi], batch, render, loss, &mut w.ws, &mut w.enc, &mut w.mlp)
            })
            .collect::<Result<_>>()?;
        let total = losses.into_iter().fold(T::zero(), |a, b| a + b);

        let mode = self.config.mode;
        let train_mlp = mode != TrainMode::PositionsOnly || self.in_warmup();
        let (head, rest) = self.workers.split_at_mut(1);
        let grads = &mut head[0];
        for w in rest.iter() {
            grads.enc.accumulate(&w.enc);
            grads.mlp.accumulate(&w.mlp);
        }
        clip_position_gradients(&mut grads.enc, self.cloud.search_radius);

        if train_mlp {
            self.mlp_adam.step(self.params.as_mut_slice(), &grads.mlp.data)?;
        }
        if mode != TrainMode::PositionsOnly {
            self.feature_adam.step(&mut self.cloud.features, &grads.enc.d_features)?;
        }
        if mode != TrainMode::FeaturesOnly {
            pbd_step(&mut self.cloud, &grads.enc.d_positions, &self.config.physics, &mut self.index)?;
        }
        self.step += 1;
        Ok(total)
    }
}
