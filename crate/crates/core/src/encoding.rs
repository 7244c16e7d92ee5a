//! Particle feature encoding.
//!
//! A query point's feature is the unnormalized sum of the features of all
//! particles within the search radius, each weighted by a compactly supported
//! bump kernel of its distance. Query points with no neighbors get the zero
//! feature. Gradients flow back into both the particle features and the
//! particle positions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geom::{Rigid, Vec3};
use crate::neighbor::SpatialIndex;
use crate::scalar::Real;

/// Half-width of the uniform feature initialization interval.
pub const FEATURE_INIT_SCALE: f64 = 1e-2;

/// The movable latent point cloud: positions, velocities and features.
#[derive(Clone, Debug, PartialEq)]
pub struct ParticleCloud<T> {
    pub positions: Vec<Vec3<T>>,
    pub velocities: Vec<Vec3<T>>,
    /// Row-major `len × feature_dim`.
    pub features: Vec<T>,
    pub feature_dim: usize,
    pub search_radius: T,
}

impl<T: Real> ParticleCloud<T> {
    /// Cell-centered lattice of `⌈count^⅓⌉³` sites in the unit cube,
    /// truncated to `count` (x varies fastest), at rest, with features drawn
    /// uniformly from `(−0.01, 0.01)`.
    pub fn init(count: usize, feature_dim: usize, search_radius: T, seed: u64) -> Result<Self> {
        if count == 0 || feature_dim == 0 {
            return Err(Error::InvalidInput(
                "particle count and feature dimension must be at least 1".into(),
            ));
        }
        if !(search_radius > T::zero()) {
            return Err(Error::InvalidRadius(search_radius.as_f64()));
        }
        let mut side = 1usize;
        while side.pow(3) < count {
            side += 1;
        }
        let n = T::from_usize(side).unwrap();
        let half = T::lit(0.5);
        let site = |k: usize| (T::from_usize(k).unwrap() + half) / n;
        let positions: Vec<Vec3<T>> = (0..count)
            .map(|i| Vec3::new(site(i % side), site((i / side) % side), site(i / (side * side))))
            .collect();

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bound = T::lit(FEATURE_INIT_SCALE);
        let features = (0..count * feature_dim)
            .map(|_| loop {
                let v = T::lit(rng.gen_range(-FEATURE_INIT_SCALE..FEATURE_INIT_SCALE));
                if v.abs() < bound {
                    break v;
                }
            })
            .collect();

        Ok(Self {
            velocities: vec![Vec3::zero(); count],
            positions,
            features,
            feature_dim,
            search_radius,
        })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    #[inline(always)]
    pub fn feature(&self, i: usize) -> &[T] {
        &self.features[i * self.feature_dim..(i + 1) * self.feature_dim]
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.len();
        if self.velocities.len() != m || self.features.len() != m * self.feature_dim {
            return Err(Error::InvalidShape(format!(
                "{} positions, {} velocities, {} feature values of width {}",
                m,
                self.velocities.len(),
                self.features.len(),
                self.feature_dim
            )));
        }
        if self.feature_dim == 0 {
            return Err(Error::InvalidShape("feature dimension is zero".into()));
        }
        if !(self.search_radius > T::zero()) {
            return Err(Error::InvalidRadius(self.search_radius.as_f64()));
        }
        if self.positions.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidInput("non-finite particle position".into()));
        }
        Ok(())
    }

    pub fn build_index(&self) -> Result<SpatialIndex<T>> {
        SpatialIndex::build(&self.positions, self.search_radius)
    }

    /// `T ∘ cloud`: positions map as points, velocities as vectors (rotation
    /// only), features are untouched.
    pub fn apply_rigid_transform(&self, transform: &Rigid<T>) -> Result<Self> {
        transform.validate(T::lit(1e-6))?;
        Ok(Self {
            positions: self
                .positions
                .iter()
                .map(|&p| transform.apply_point(p))
                .collect(),
            velocities: self
                .velocities
                .iter()
                .map(|&v| transform.apply_vector(v))
                .collect(),
            features: self.features.clone(),
            feature_dim: self.feature_dim,
            search_radius: self.search_radius,
        })
    }
}

/// Bump kernel `w(r) = exp(−s²/(s² − r²))` on `[0, s)`, zero beyond, with
/// its radial derivative.
pub fn bump_kernel<T: Real>(r: T, s: T) -> (T, T) {
    let s2 = s * s;
    let gap = s2 - r * r;
    if r >= s || gap <= T::zero() {
        return (T::zero(), T::zero());
    }
    let w = (-s2 / gap).exp();
    let two = T::lit(2.0);
    (w, w * (-two * s2 * r / (gap * gap)))
}

/// Kernel from a squared distance: `(w, (dw/dr)/r)`. The second value is
/// what turns an offset vector into a position gradient without dividing by
/// `r`, so the coincident case needs no special handling.
#[inline(always)]
pub(crate) fn bump_from_sq<T: Real>(d2: T, s2: T) -> Option<(T, T)> {
    let gap = s2 - d2;
    if gap <= T::zero() {
        return None;
    }
    let w = (-s2 / gap).exp();
    Some((w, w * (-T::lit(2.0) * s2 / (gap * gap))))
}

/// One neighbor's contribution to a query, cached between the forward and
/// backward passes.
#[derive(Clone, Copy, Debug)]
pub struct KernelTap<T> {
    pub particle: u32,
    pub weight: T,
    /// `(dw/dr) / r`.
    pub dweight: T,
    /// `xᵢ − query`.
    pub offset: Vec3<T>,
}

/// Appends the kernel taps of every neighbor of `query` to `taps` and
/// returns how many were added.
#[inline]
pub fn gather_taps<T: Real>(
    cloud: &ParticleCloud<T>,
    index: &SpatialIndex<T>,
    query: Vec3<T>,
    taps: &mut Vec<KernelTap<T>>,
) -> usize {
    let s2 = cloud.search_radius * cloud.search_radius;
    let before = taps.len();
    index.for_each_neighbor(query, |i, d2| {
        if let Some((weight, dweight)) = bump_from_sq(d2, s2) {
            taps.push(KernelTap {
                particle: i as u32,
                weight,
                dweight,
                offset: cloud.positions[i] - query,
            });
        }
    });
    taps.len() - before
}

/// Writes `Σ wᵢ fᵢ` over `taps` into `out`.
#[inline]
pub fn blend_features<T: Real>(cloud: &ParticleCloud<T>, taps: &[KernelTap<T>], out: &mut [T]) {
    out.iter_mut().for_each(|v| *v = T::zero());
    for tap in taps {
        let f = cloud.feature(tap.particle as usize);
        for (o, &fi) in out.iter_mut().zip(f) {
            *o += tap.weight * fi;
        }
    }
}

/// Scatters `upstream = ∂L/∂F(query)` into particle feature and position
/// gradients through cached taps.
#[inline]
pub fn scatter_gradients<T: Real>(
    cloud: &ParticleCloud<T>,
    taps: &[KernelTap<T>],
    upstream: &[T],
    grads: &mut EncodingGradients<T>,
) {
    let m = cloud.feature_dim;
    for tap in taps {
        let i = tap.particle as usize;
        let f = cloud.feature(i);
        let df = &mut grads.d_features[i * m..(i + 1) * m];
        let mut along = T::zero();
        for k in 0..m {
            df[k] += tap.weight * upstream[k];
            along += upstream[k] * f[k];
        }
        grads.d_positions[i] += tap.offset * (along * tap.dweight);
    }
}

/// `F(query)`: the interpolated feature, zero when no particle is in range.
pub fn interpolate_feature<T: Real>(
    cloud: &ParticleCloud<T>,
    index: &SpatialIndex<T>,
    query: Vec3<T>,
) -> Vec<T> {
    let mut taps = Vec::new();
    gather_taps(cloud, index, query, &mut taps);
    let mut out = vec![T::zero(); cloud.feature_dim];
    blend_features(cloud, &taps, &mut out);
    out
}

/// Accumulates `∂L/∂fᵢ` and `∂L/∂xᵢ` for one query given `∂L/∂F(query)`.
pub fn backpropagate_to_particles<T: Real>(
    cloud: &ParticleCloud<T>,
    index: &SpatialIndex<T>,
    query: Vec3<T>,
    upstream: &[T],
    grads: &mut EncodingGradients<T>,
) -> Result<()> {
    if upstream.len() != cloud.feature_dim {
        return Err(Error::InvalidShape(format!(
            "upstream has {} entries, feature dimension is {}",
            upstream.len(),
            cloud.feature_dim
        )));
    }
    grads.check_matches(cloud)?;
    let mut taps = Vec::new();
    gather_taps(cloud, index, query, &mut taps);
    scatter_gradients(cloud, &taps, upstream, grads);
    Ok(())
}

/// Per-particle loss gradients.
#[derive(Clone, Debug, PartialEq)]
pub struct EncodingGradients<T> {
    /// Row-major `len × feature_dim`.
    pub d_features: Vec<T>,
    pub d_positions: Vec<Vec3<T>>,
    pub feature_dim: usize,
}

impl<T: Real> EncodingGradients<T> {
    pub fn zeros(len: usize, feature_dim: usize) -> Self {
        Self {
            d_features: vec![T::zero(); len * feature_dim],
            d_positions: vec![Vec3::zero(); len],
            feature_dim,
        }
    }

    pub fn for_cloud(cloud: &ParticleCloud<T>) -> Self {
        Self::zeros(cloud.len(), cloud.feature_dim)
    }

    pub fn len(&self) -> usize {
        self.d_positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d_positions.is_empty()
    }

    pub fn clear(&mut self) {
        self.d_features.iter_mut().for_each(|v| *v = T::zero());
        self.d_positions.iter_mut().for_each(|v| *v = Vec3::zero());
    }

    pub fn check_matches(&self, cloud: &ParticleCloud<T>) -> Result<()> {
        if self.len() != cloud.len()
            || self.feature_dim != cloud.feature_dim
            || self.d_features.len() != cloud.features.len()
        {
            return Err(Error::InvalidShape(format!(
                "gradients for {} particles of width {}, cloud has {} of width {}",
                self.len(),
                self.feature_dim,
                cloud.len(),
                cloud.feature_dim
            )));
        }
        Ok(())
    }

    /// Element-wise `self += other`.
    pub fn accumulate(&mut self, other: &Self) {
        for (a, &b) in self.d_features.iter_mut().zip(&other.d_features) {
            *a += b;
        }
        for (a, &b) in self.d_positions.iter_mut().zip(&other.d_positions) {
            *a += b;
        }
    }
}

/// Rescales every position-gradient row `g` to `g · min(1, limit/‖g‖)`.
pub fn clip_position_gradients<T: Real>(grads: &mut EncodingGradients<T>, limit: T) {
    let limit_sq = limit * limit;
    for g in grads.d_positions.iter_mut() {
        let n2 = g.norm_squared();
        if n2 > limit_sq {
            *g = *g * (limit / n2.sqrt());
        }
    }
}
