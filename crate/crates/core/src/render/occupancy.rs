use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::scalar::Real;

/// Coarse boolean grid over the unit cube marking cells worth sampling.
#[derive(Clone, Debug, PartialEq)]
pub struct OccupancyGrid {
    resolution: usize,
    threshold: f64,
    mean_cap: bool,
    bits: Vec<bool>,
}

impl OccupancyGrid {
    /// Every cell starts occupied.
    pub fn new(resolution: usize, threshold: f64) -> Result<Self> {
        if resolution == 0 {
            return Err(Error::InvalidConfig("occupancy resolution must be >= 1".into()));
        }
        if !(threshold >= 0.0) {
            return Err(Error::InvalidConfig("occupancy threshold must be >= 0".into()));
        }
        Ok(Self {
            resolution,
            threshold,
            mean_cap: true,
            bits: vec![true; resolution.pow(3)],
        })
    }

    /// Threshold of `0.01 · resolution`: a cell is skipped when one
    /// cell-length of it would absorb less than about 1% of the light.
    pub fn default_threshold(resolution: usize) -> f64 {
        0.01 * resolution as f64
    }

    pub fn with_default_threshold(resolution: usize) -> Result<Self> {
        Self::new(resolution, Self::default_threshold(resolution))
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    /// When on (the default), an update lowers the threshold to the mean
    /// cell density if that is smaller, so a field whose density is still
    /// low everywhere keeps its densest cells instead of going dark.
    pub fn with_mean_cap(mut self, on: bool) -> Self {
        self.mean_cap = on;
        self
    }

    pub fn mean_cap(&self) -> bool {
        self.mean_cap
    }

    pub fn occupied_count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn fill(&mut self, occupied: bool) {
        self.bits.iter_mut().for_each(|b| *b = occupied);
    }

    pub fn cell_center<T: Real>(&self, cell: usize) -> Vec3<T> {
        let n = self.resolution;
        let (x, y, z) = (cell % n, (cell / n) % n, cell / (n * n));
        let c = |k: usize| T::lit((k as f64 + 0.5) / n as f64);
        Vec3::new(c(x), c(y), c(z))
    }

    /// Cell containing `p`, or `None` outside the unit cube.
    pub fn cell_of<T: Real>(&self, p: Vec3<T>) -> Option<usize> {
        let n = self.resolution;
        let nf = T::from_usize(n).unwrap();
        let axis = |v: T| -> Option<usize> {
            if !(v >= T::zero() && v <= T::one()) {
                return None;
            }
            Some((v * nf).to_usize().unwrap_or(n - 1).min(n - 1))
        };
        Some((axis(p.z)? * n + axis(p.y)?) * n + axis(p.x)?)
    }

    #[inline]
    pub fn is_occupied<T: Real>(&self, p: Vec3<T>) -> bool {
        self.cell_of(p).is_some_and(|c| self.bits[c])
    }

    pub fn is_cell_occupied(&self, cell: usize) -> bool {
        self.bits[cell]
    }

    /// Full refresh: each cell is occupied iff the density at its center
    /// exceeds the threshold (capped by the mean density, see
    /// [`with_mean_cap`](Self::with_mean_cap)).
    pub fn update<T: Real>(&mut self, density: impl Fn(Vec3<T>) -> T + Sync) {
        let this = &*self;
        let values: Vec<T> = (0..this.bits.len())
            .into_par_iter()
            .map(|cell| density(this.cell_center(cell)))
            .collect();
        let mut threshold = T::lit(self.threshold);
        if self.mean_cap {
            let mean = values.iter().fold(0.0, |a, v| a + v.as_f64()) / values.len() as f64;
            threshold = threshold.min(T::lit(mean));
        }
        for (bit, &v) in self.bits.iter_mut().zip(&values) {
            *bit = v > threshold;
        }
    }
}
