//! Neural radiance fields on a movable particle encoding.
//!
//! Latent features live on particles in the unit cube. A query point's
//! feature is the bump-kernel weighted sum of its neighbors' features; a
//! small MLP maps it, with the view direction, to density and color, and
//! the result is volume rendered. Photometric loss gradients train the
//! network and the features and act as forces on the particles, which are
//! moved by position-based dynamics. Training is online: each frame of a
//! dynamic scene gets a fixed budget of steps before the next one arrives.
//!
//! Numeric code is generic over [`Real`] (`f32` or `f64`). The aliases
//! below name the concrete instantiations.

pub mod encoding;
pub mod error;
pub mod geom;
pub mod image;
pub mod neighbor;
pub mod network;
pub mod physics;
pub mod render;
pub mod scalar;
pub mod scene_io;
pub mod train;

pub use encoding::{
    backpropagate_to_particles, bump_kernel, clip_position_gradients, interpolate_feature,
    EncodingGradients, ParticleCloud,
};
pub use error::{Error, Result};
pub use geom::{Mat3, Ray, Rigid, Vec3};
pub use image::Image;
pub use neighbor::{brute_force_query, collision_pairs, NeighborHit, SpatialIndex};
pub use network::{AdamConfig, AdamState, FieldParams};
pub use physics::{pbd_step, PhysicsConfig};
pub use render::{image_metrics, render_view, Field, OccupancyGrid, RenderConfig};
pub use scalar::Real;
pub use scene_io::{Camera, FrameSequence, SceneSpec};
pub use train::{
    load_checkpoint, run_online_sequence, save_checkpoint, MetricsLog, TrainConfig, TrainMode,
    TrainState,
};

pub type Vec3f = Vec3<f32>;
pub type Vec3d = Vec3<f64>;
pub type ParticleCloud32 = ParticleCloud<f32>;
pub type ParticleCloud64 = ParticleCloud<f64>;
pub type SpatialIndex32 = SpatialIndex<f32>;
pub type SpatialIndex64 = SpatialIndex<f64>;
pub type FieldParams32 = FieldParams<f32>;
pub type FieldParams64 = FieldParams<f64>;
pub type TrainState32 = TrainState<f32>;
pub type TrainState64 = TrainState<f64>;
