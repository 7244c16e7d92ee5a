//! Position-based dynamics for the particle cloud: loss gradients act as
//! forces on the velocities, positions are integrated, and particles closer
//! than a minimum distance are pushed apart.

use serde::{Deserialize, Serialize};

use crate::encoding::ParticleCloud;
use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::neighbor::{collision_pairs, SpatialIndex};
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PhysicsConfig {
    pub damping: f64,
    pub dt: f64,
    pub min_dist: f64,
    /// Weight of the loss gradient in the velocity update.
    pub gradient_scale: f64,
    /// Box positions are clamped to after collisions; `None` leaves them
    /// free.
    pub bounds: Option<(f64, f64)>,
}

impl Default for PhysicsConfig {
    fn default() -> Self {
        Self {
            damping: 0.96,
            dt: 0.01,
            min_dist: 0.01,
            gradient_scale: 2.0,
            bounds: Some((0.0, 1.0)),
        }
    }
}

impl PhysicsConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return bad(format!("damping {} outside (0, 1]", self.damping));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("timestep {} must be positive", self.dt));
        }
        if !(self.min_dist >= 0.0 && self.min_dist.is_finite()) {
            return bad(format!("minimum distance {} must be >= 0", self.min_dist));
        }
        if !(self.gradient_scale >= 0.0 && self.gradient_scale.is_finite()) {
            return bad(format!("gradient scale {} must be >= 0", self.gradient_scale));
        }
        if let Some((lo, hi)) = self.bounds {
            if !(lo < hi) {
                return bad(format!("empty bounds [{lo}, {hi}]"));
            }
        }
        Ok(())
    }
}

/// One dynamics step driven by (already clipped) position gradients.
///
/// Velocities become `γv − αg`, positions advance by `Δt·v`, each pair
/// closer than `δ` is pushed apart symmetrically in one sequential pass over
/// the sorted pair list, positions are clamped to the bounds and velocities
/// are recomputed from the net displacement. `index` is rebuilt twice: for
/// the integrated positions (to find pairs) and for the final positions.
pub fn pbd_step<T: Real>(
    cloud: &mut ParticleCloud<T>,
    position_grads: &[Vec3<T>],
    config: &PhysicsConfig,
    index: &mut SpatialIndex<T>,
) -> Result<()> {
    config.validate()?;
    if position_grads.len() != cloud.len() || cloud.velocities.len() != cloud.len() {
        return Err(Error::InvalidShape(format!(
            "{} gradients and {} velocities for {} particles",
            position_grads.len(),
            cloud.velocities.len(),
            cloud.len()
        )));
    }
    if let Some(bad) = position_grads.iter().position(|g| !g.is_finite()) {
        return Err(Error::InvalidGradient(bad));
    }
    let gamma = T::lit(config.damping);
    let alpha = T::lit(config.gradient_scale);
    let dt = T::lit(config.dt);
    let delta = T::lit(config.min_dist);

    let previous = cloud.positions.clone();
    for ((x, v), &g) in cloud
        .positions
        .iter_mut()
        .zip(cloud.velocities.iter_mut())
        .zip(position_grads)
    {
        *v = *v * gamma - g * alpha;
        *x += *v * dt;
    }

    if delta > T::zero() {
        index.rebuild(&cloud.positions)?;
        let pairs = collision_pairs(index, &cloud.positions, delta)?;
        resolve_collisions(&mut cloud.positions, &pairs, delta);
    }

    if let Some((lo, hi)) = config.bounds {
        let (lo, hi) = (T::lit(lo), T::lit(hi));
        for x in cloud.positions.iter_mut() {
            *x = x.clamp(lo, hi);
        }
    }

    let inv_dt = T::one() / dt;
    for ((v, &x), &p) in cloud.velocities.iter_mut().zip(&cloud.positions).zip(&previous) {
        *v = (x - p) * inv_dt;
    }
    index.rebuild(&cloud.positions)
}

/// Moves each pair still closer than `min_dist` to exactly `min_dist`
/// apart, splitting the correction evenly. Coincident pairs separate
/// along `+x`.
pub fn resolve_collisions<T: Real>(positions: &mut [Vec3<T>], pairs: &[(usize, usize)], min_dist: T) {
    let half = T::lit(0.5);
    for &(i, j) in pairs {
        let d = positions[j] - positions[i];
        let l = d.norm();
        if l >= min_dist {
            continue;
        }
        let axis = if l > T::zero() {
            d * (T::one() / l)
        } else {
            Vec3::new(T::one(), T::zero(), T::zero())
        };
        let shift = axis * (half * (l - min_dist));
        positions[i] += shift;
        positions[j] -= shift;
    }
}
