use rand::Rng;

use crate::error::{Error, Result};
use crate::geom::{Ray, Vec3};
use crate::scalar::Real;

use super::occupancy::OccupancyGrid;

/// Samples kept along one ray, ordered by `t`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RaySamples<T> {
    pub t: Vec<T>,
    pub points: Vec<Vec3<T>>,
    pub deltas: Vec<T>,
    pub direction: Vec3<T>,
}

impl<T: Real> RaySamples<T> {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    fn clear(&mut self) {
        self.t.clear();
        self.points.clear();
        self.deltas.clear();
    }
}

/// Stratified jittered samples on `[near, far]`, then drops samples in
/// unoccupied (or out-of-cube) cells when a grid is supplied.
///
/// Each sample's `delta` is the gap to the next stratified sample before
/// culling (the last one reaches `far`), so a sample's interval never
/// stretches across skipped free space.
pub fn sample_along_ray<T: Real, R: Rng + ?Sized>(
    ray: &Ray<T>,
    near: T,
    far: T,
    n: usize,
    grid: Option<&OccupancyGrid>,
    rng: &mut R,
) -> Result<RaySamples<T>> {
    let mut out = RaySamples::default();
    sample_into(ray, near, far, n, grid, rng, &mut out)?;
    Ok(out)
}

pub(crate) fn sample_into<T: Real, R: Rng + ?Sized>(
    ray: &Ray<T>,
    near: T,
    far: T,
    n: usize,
    grid: Option<&OccupancyGrid>,
    rng: &mut R,
    out: &mut RaySamples<T>,
) -> Result<()> {
    let dir_norm = ray.direction.norm();
    if !(dir_norm > T::zero()) || !dir_norm.is_finite() || !ray.origin.is_finite() {
        return Err(Error::InvalidRay);
    }
    if !(near >= T::zero() && near < far) || n == 0 {
        return Err(Error::InvalidInput(format!(
            "sampling interval [{near}, {far}] with {n} samples"
        )));
    }
    out.clear();
    out.direction = ray.direction;
    let step = (far - near) / T::from_usize(n).unwrap();
    let mut prev: Option<(T, bool)> = None;
    for k in 0..n {
        let jitter = T::lit(rng.gen::<f64>());
        let t = near + (T::from_usize(k).unwrap() + jitter) * step;
        if let Some((t_prev, kept)) = prev {
            if kept {
                out.deltas.push((t - t_prev) * dir_norm);
            }
        }
        let p = ray.at(t);
        let keep = grid.is_none_or(|g| g.is_occupied(p));
        if keep {
            out.t.push(t);
            out.points.push(p);
        }
        prev = Some((t, keep));
    }
    if let Some((t_last, true)) = prev {
        out.deltas.push((far - t_last) * dir_norm);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn inside_ray() -> Ray<f64> {
        Ray {
            origin: Vec3::new(0.1, 0.5, 0.5),
            direction: Vec3::new(1.0, 0.0, 0.0),
        }
    }

    #[test]
    fn empty_grid_keeps_nothing() {
        let mut g = OccupancyGrid::with_default_threshold(8).unwrap();
        g.fill(false);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = sample_along_ray(&inside_ray(), 0.0, 0.8, 16, Some(&g), &mut rng).unwrap();
        assert!(s.is_empty());
        assert!(s.deltas.is_empty());
    }

    #[test]
    fn full_grid_keeps_stratified_samples() {
        let g = OccupancyGrid::with_default_threshold(8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (near, far) = (0.05, 0.85);
        let s = sample_along_ray(&inside_ray(), near, far, 16, Some(&g), &mut rng).unwrap();
        assert_eq!(s.len(), 16);
        let step = (far - near) / 16.0;
        for (k, &t) in s.t.iter().enumerate() {
            assert!(t >= near + k as f64 * step && t < near + (k + 1) as f64 * step);
        }
        for k in 0..15 {
            assert!(s.t[k] < s.t[k + 1]);
            assert!((s.deltas[k] - (s.t[k + 1] - s.t[k])).abs() < 1e-15);
            assert!((s.deltas[k] - (s.points[k + 1] - s.points[k]).norm()).abs() < 1e-12);
        }
        assert!((s.deltas[15] - (far - s.t[15])).abs() < 1e-15);
    }

    #[test]
    fn culling_keeps_local_deltas() {
        let mut g = OccupancyGrid::with_default_threshold(2).unwrap();
        g.fill(false);
        // Occupy only the x >= 0.5 half along the ray's row.
        let mut g2 = g.clone();
        g2.update(|p: Vec3<f64>| if p.x > 0.5 { 1.0 } else { 0.0 });
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = sample_along_ray(&inside_ray(), 0.0, 0.85, 32, Some(&g2), &mut rng).unwrap();
        assert!(!s.is_empty() && s.len() < 32);
        let step = 0.85 / 32.0;
        assert!(s.deltas.iter().all(|&d| d < 2.0 * step + 1e-12));
        assert!(s.points.iter().all(|p| p.x >= 0.5));
    }

    #[test]
    fn degenerate_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let zero = Ray {
            origin: Vec3::splat(0.5),
            direction: Vec3::zero(),
        };
        assert!(matches!(
            sample_along_ray(&zero, 0.0, 1.0, 4, None, &mut rng),
            Err(Error::InvalidRay)
        ));
        assert!(sample_along_ray(&inside_ray(), 0.5, 0.5, 4, None, &mut rng).is_err());
        assert!(sample_along_ray(&inside_ray(), 0.0, 0.5, 0, None, &mut rng).is_err());
    }
}
