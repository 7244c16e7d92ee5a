use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::encoding::{
    blend_features, gather_taps, scatter_gradients, EncodingGradients, KernelTap, ParticleCloud,
};
use crate::error::Result;
use crate::geom::{Ray, Vec3};
use crate::image::Image;
use crate::neighbor::SpatialIndex;
use crate::network::{encode_direction_unchecked, FieldCache, FieldGradients, FieldParams, SH_COEFFS};
use crate::scalar::Real;
use crate::scene_io::Camera;

use super::composite::{composite_backward_in_place, composite_in_place};
use super::loss::PhotometricLoss;
use super::occupancy::OccupancyGrid;
use super::sampling::{sample_into, RaySamples};

/// Viewing direction used when the field is probed without a ray.
pub const CANONICAL_DIRECTION: [f64; 3] = [0.0, 0.0, -1.0];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RenderConfig {
    /// Stratified samples per ray before occupancy culling.
    pub samples: usize,
    /// Sampling starts this far past the point where the ray enters the
    /// unit cube (or past the origin when it starts inside).
    pub near: f64,
    pub far: f64,
    pub background: [f64; 3],
    pub seed: u64,
    /// Full-frame rendering stops marching once transmittance drops below
    /// this. Training always marches the whole ray.
    pub early_stop: f64,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self {
            samples: 128,
            near: 0.05,
            far: 3f64.sqrt(),
            background: [1.0; 3],
            seed: 0,
            early_stop: 1e-4,
        }
    }
}

impl RenderConfig {
    /// Absolute `[near, far]` along `ray`, or `None` when it misses the cube.
    fn interval<T: Real>(&self, ray: &Ray<T>) -> Option<(T, T)> {
        let (enter, _) = ray.box_interval(T::zero(), T::one())?;
        let base = enter.max(T::zero());
        Some((base + T::lit(self.near), base + T::lit(self.far)))
    }

    fn background<T: Real>(&self) -> [T; 3] {
        self.background.map(T::lit)
    }
}

/// Everything needed to evaluate the radiance field.
#[derive(Clone, Copy, Debug)]
pub struct Field<'a, T> {
    pub cloud: &'a ParticleCloud<T>,
    pub index: &'a SpatialIndex<T>,
    pub params: &'a FieldParams<T>,
    pub grid: Option<&'a OccupancyGrid>,
}

impl<'a, T: Real> Field<'a, T> {
    /// Density at `p` seen along the canonical direction. Points without
    /// neighboring particles are empty space.
    pub fn density_at(&self, p: Vec3<T>) -> T {
        let mut ws = RayWorkspace::default();
        let dir = encode_direction_unchecked(Vec3::from_f64(CANONICAL_DIRECTION));
        match self.eval(p, &dir, &mut ws) {
            Some(()) => ws.probe.sigma,
            None => T::zero(),
        }
    }

    /// Evaluates the network at `p` into `ws.probe`; `None` when `p` has no
    /// neighbors.
    fn eval(&self, p: Vec3<T>, dir: &[T; SH_COEFFS], ws: &mut RayWorkspace<T>) -> Option<()> {
        ws.taps.clear();
        if gather_taps(self.cloud, self.index, p, &mut ws.taps) == 0 {
            return None;
        }
        ws.feature.resize(self.cloud.feature_dim, T::zero());
        blend_features(self.cloud, &ws.taps, &mut ws.feature);
        self.params.forward_into(&ws.feature, dir, &mut ws.probe);
        Some(())
    }
}

/// Reusable per-worker scratch for rendering and training rays.
#[derive(Clone, Debug)]
pub struct RayWorkspace<T> {
    samples: RaySamples<T>,
    taps: Vec<KernelTap<T>>,
    tap_ranges: Vec<(usize, usize)>,
    caches: Vec<FieldCache<T>>,
    probe: FieldCache<T>,
    feature: Vec<T>,
    d_feature: Vec<T>,
    colors: Vec<[T; 3]>,
    densities: Vec<T>,
    deltas: Vec<T>,
    weights: Vec<T>,
    trans: Vec<T>,
    d_colors: Vec<[T; 3]>,
    d_densities: Vec<T>,
}

impl<T: Real> Default for RayWorkspace<T> {
    fn default() -> Self {
        Self {
            samples: RaySamples::default(),
            taps: Vec::new(),
            tap_ranges: Vec::new(),
            caches: Vec::new(),
            probe: FieldCache::default(),
            feature: Vec::new(),
            d_feature: Vec::new(),
            colors: Vec::new(),
            densities: Vec::new(),
            deltas: Vec::new(),
            weights: Vec::new(),
            trans: Vec::new(),
            d_colors: Vec::new(),
            d_densities: Vec::new(),
        }
    }
}

/// Composited color of one ray, marching front to back and stopping early
/// once the ray is nearly opaque.
pub fn render_ray<T: Real>(
    field: &Field<'_, T>,
    ray: &Ray<T>,
    config: &RenderConfig,
    rng: &mut ChaCha8Rng,
    ws: &mut RayWorkspace<T>,
) -> Result<[T; 3]> {
    let background = config.background();
    let Some((near, far)) = config.interval(ray) else {
        return Ok(background);
    };
    let mut samples = std::mem::take(&mut ws.samples);
    sample_into(ray, near, far, config.samples, field.grid, rng, &mut samples)?;
    let dir = encode_direction_unchecked(ray.direction);
    let early_stop = T::lit(config.early_stop);
    let mut color = [T::zero(); 3];
    let mut trans = T::one();
    for (&p, &delta) in samples.points.iter().zip(&samples.deltas) {
        if field.eval(p, &dir, ws).is_none() {
            continue;
        }
        let alpha = T::one() - (-ws.probe.sigma * delta).exp();
        let w = trans * alpha;
        for k in 0..3 {
            color[k] += w * ws.probe.color[k];
        }
        trans *= T::one() - alpha;
        if trans < early_stop {
            break;
        }
    }
    ws.samples = samples;
    for k in 0..3 {
        color[k] += trans * background[k];
    }
    Ok(color)
}

/// Renders a full frame. Each pixel draws its jitter from its own seeded
/// stream, so the image does not depend on the thread count.
pub fn render_view<T: Real>(field: &Field<'_, T>, camera: &Camera, config: &RenderConfig) -> Result<Image> {
    let (w, h) = (camera.width, camera.height);
    let rows: Vec<Vec<f32>> = (0..h)
        .into_par_iter()
        .map_init(RayWorkspace::default, |ws, y| {
            let mut row = Vec::with_capacity(3 * w as usize);
            for x in 0..w {
                let mut rng = pixel_rng(config.seed, x, y);
                let ray = camera.pixel_ray::<T>(x, y);
                let c = render_ray(field, &ray, config, &mut rng, ws)?;
                row.extend(c.iter().map(|v| v.as_f64() as f32));
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;
    Ok(Image {
        width: w,
        height: h,
        data: rows.concat(),
    })
}

fn pixel_rng(seed: u64, x: u32, y: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((y as u64) << 32) | x as u64);
    rng
}

/// Refreshes every occupancy cell from the field density at its center.
pub fn update_occupancy<T: Real>(
    grid: &mut OccupancyGrid,
    cloud: &ParticleCloud<T>,
    index: &SpatialIndex<T>,
    params: &FieldParams<T>,
) {
    let field = Field {
        cloud,
        index,
        params,
        grid: None,
    };
    grid.update(|p| field.density_at(p));
}

/// A training ray with its target color and jitter seed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainRay<T> {
    pub ray: Ray<T>,
    pub target: [T; 3],
    pub seed: u64,
}

/// Forward and reverse pass over `rays`, accumulating parameter gradients.
/// `batch` is the size of the whole batch the loss is reduced over.
/// Returns this slice's share of the loss.
#[allow(clippy::too_many_arguments)]
pub(crate) fn accumulate_rays<T: Real>(
    field: &Field<'_, T>,
    rays: &[TrainRay<T>],
    batch: usize,
    config: &RenderConfig,
    loss: PhotometricLoss,
    ws: &mut RayWorkspace<T>,
    enc: &mut EncodingGradients<T>,
    mlp: &mut FieldGradients<T>,
) -> Result<T> {
    let background = config.background();
    let m = field.cloud.feature_dim;
    ws.d_feature.resize(m, T::zero());
    let mut total = T::zero();
    for tr in rays {
        let ray = &tr.ray;
        ws.colors.clear();
        ws.densities.clear();
        ws.deltas.clear();
        ws.taps.clear();
        ws.tap_ranges.clear();
        if let Some((near, far)) = config.interval(ray) {
            let mut rng = ChaCha8Rng::seed_from_u64(tr.seed);
            sample_into(ray, near, far, config.samples, field.grid, &mut rng, &mut ws.samples)?;
            let dir = encode_direction_unchecked(ray.direction);
            ws.feature.resize(m, T::zero());
            for (&p, &delta) in ws.samples.points.iter().zip(&ws.samples.deltas) {
                let start = ws.taps.len();
                if gather_taps(field.cloud, field.index, p, &mut ws.taps) == 0 {
                    continue;
                }
                let k = ws.tap_ranges.len();
                if ws.caches.len() <= k {
                    ws.caches.push(FieldCache::default());
                }
                blend_features(field.cloud, &ws.taps[start..], &mut ws.feature);
                field.params.forward_into(&ws.feature, &dir, &mut ws.caches[k]);
                ws.tap_ranges.push((start, ws.taps.len()));
                ws.colors.push(ws.caches[k].color);
                ws.densities.push(ws.caches[k].sigma);
                ws.deltas.push(delta);
            }
        }
        let pred = composite_in_place(
            &ws.colors,
            &ws.densities,
            &ws.deltas,
            background,
            &mut ws.weights,
            &mut ws.trans,
        );
        let (l, d_pred) = loss.ray(pred, tr.target, batch);
        total += l;
        if ws.colors.is_empty() {
            continue;
        }
        composite_backward_in_place(
            &ws.colors,
            &ws.deltas,
            &ws.weights,
            &ws.trans,
            background,
            d_pred,
            &mut ws.d_colors,
            &mut ws.d_densities,
        );
        for k in 0..ws.tap_ranges.len() {
            field.params.backward_into(
                &ws.caches[k],
                ws.d_densities[k],
                ws.d_colors[k],
                mlp,
                &mut ws.d_feature,
            )?;
            let (a, b) = ws.tap_ranges[k];
            scatter_gradients(field.cloud, &ws.taps[a..b], &ws.d_feature, enc);
        }
    }
    Ok(total)
}

/// Batch loss with its gradients for the particles and the network,
/// evaluated sequentially.
pub fn ray_batch_gradients<T: Real>(
    field: &Field<'_, T>,
    rays: &[TrainRay<T>],
    config: &RenderConfig,
    loss: PhotometricLoss,
) -> Result<(T, EncodingGradients<T>, FieldGradients<T>)> {
    let mut enc = EncodingGradients::for_cloud(field.cloud);
    let mut mlp = FieldGradients::zeros_like(field.params);
    let mut ws = RayWorkspace::default();
    let total = accumulate_rays(field, rays, rays.len(), config, loss, &mut ws, &mut enc, &mut mlp)?;
    Ok((total, enc, mlp))
}
