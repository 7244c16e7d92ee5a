use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::AdamConfig;
use crate::physics::PhysicsConfig;
use crate::render::{OccupancyGrid, PhotometricLoss, RenderConfig};

/// Which particle attributes are optimized.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainMode {
    /// Features by Adam, positions by dynamics.
    #[default]
    Both,
    /// Positions and velocities never change.
    FeaturesOnly,
    /// Features keep their initial values; the network trains only during
    /// warmup.
    PositionsOnly,
}

impl std::str::FromStr for TrainMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "both" => Ok(Self::Both),
            "features_only" => Ok(Self::FeaturesOnly),
            "positions_only" => Ok(Self::PositionsOnly),
            other => Err(Error::InvalidConfig(format!("unknown mode `{other}`"))),
        }
    }
}

impl std::fmt::Display for TrainMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Both => "both",
            Self::FeaturesOnly => "features_only",
            Self::PositionsOnly => "positions_only",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub steps_per_frame: usize,
    /// Steps on the first frame before the sequence starts playing.
    pub warmup_steps: usize,
    /// Rays per step.
    pub batch_size: usize,
    pub particles: usize,
    pub search_radius: f64,
    pub feature_dim: usize,
    pub mode: TrainMode,
    pub seed: u64,
    pub physics: PhysicsConfig,
    pub mlp_optimizer: AdamConfig,
    pub feature_optimizer: AdamConfig,
    pub loss: PhotometricLoss,
    pub render: RenderConfig,
    pub occupancy_resolution: usize,
    /// Defaults to `0.01 · occupancy_resolution`.
    pub occupancy_threshold: Option<f64>,
    /// Lower the occupancy threshold to the mean density when that is
    /// smaller.
    pub occupancy_mean_cap: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            steps_per_frame: 5,
            warmup_steps: 500,
            batch_size: 4096,
            particles: 20_000,
            search_radius: 0.06,
            feature_dim: 4,
            mode: TrainMode::Both,
            seed: 0,
            physics: PhysicsConfig::default(),
            mlp_optimizer: AdamConfig::default(),
            feature_optimizer: AdamConfig::default(),
            loss: PhotometricLoss::default(),
            render: RenderConfig::default(),
            occupancy_resolution: 32,
            occupancy_threshold: None,
            occupancy_mean_cap: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if self.steps_per_frame == 0 {
            return bad("steps_per_frame must be at least 1");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if self.particles == 0 || self.feature_dim == 0 {
            return bad("particles and feature_dim must be at least 1");
        }
        if !(self.search_radius > 0.0 && self.search_radius.is_finite()) {
            return bad("search_radius must be positive");
        }
        if self.physics.min_dist > self.search_radius {
            return bad("physics.min_dist must not exceed search_radius");
        }
        if self.render.samples == 0 || !(self.render.near >= 0.0 && self.render.near < self.render.far) {
            return bad("render needs samples >= 1 and 0 <= near < far");
        }
        for adam in [&self.mlp_optimizer, &self.feature_optimizer] {
            if !(adam.lr >= 0.0 && (0.0..1.0).contains(&adam.beta1) && (0.0..1.0).contains(&adam.beta2) && adam.epsilon >= 0.0) {
                return bad("optimizer needs lr >= 0, betas in [0, 1) and epsilon >= 0");
            }
        }
        self.physics.validate()?;
        self.occupancy_grid().map(|_| ())
    }

    pub(crate) fn occupancy_grid(&self) -> Result<OccupancyGrid> {
        let threshold = self
            .occupancy_threshold
            .unwrap_or_else(|| OccupancyGrid::default_threshold(self.occupancy_resolution));
        Ok(OccupancyGrid::new(self.occupancy_resolution, threshold)?.with_mean_cap(self.occupancy_mean_cap))
    }
}
