//! Ray sampling, occupancy skipping, volume compositing, the photometric
//! loss, full-frame rendering and image metrics.

mod composite;
mod loss;
mod metrics;
mod occupancy;
mod sampling;
mod view;

pub use composite::{composite_backward, composite_ray, CompositeCache, RenderOutput};
pub use loss::{photometric_loss, LossKind, PhotometricLoss, Reduction};
pub use metrics::{image_metrics, mse, psnr, ssim, PSNR_CAP_DB};
pub use occupancy::OccupancyGrid;
pub use sampling::{sample_along_ray, RaySamples};
pub use view::{
    ray_batch_gradients, render_ray, render_view, update_occupancy, Field, RayWorkspace,
    RenderConfig, TrainRay, CANONICAL_DIRECTION,
};

pub(crate) use view::accumulate_rays;
