//! Fixed-radius neighbor search over particle positions.
//!
//! Particles are bucketed into a uniform grid over the unit cube whose cells
//! are at least as wide as the search radius, then counting-sorted by cell so
//! every cell is a contiguous run. A query scans the 3x3x3 block of cells
//! around the query cell. Positions outside the unit cube are clamped into
//! the boundary cells; clamping never separates two points that are within
//! one cell of each other, so such particles stay searchable.

use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::scalar::Real;

/// Upper bound on cells per axis, reached only for radii below `1/256`.
const MAX_CELLS_PER_AXIS: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NeighborHit<T> {
    pub index: usize,
    pub distance: T,
}

/// Shared membership test so the index and the brute-force oracle agree
/// bit for bit.
#[inline(always)]
fn within<T: Real>(d2: T, radius_sq: T) -> bool {
    d2 < radius_sq
}

#[derive(Clone, Debug)]
pub struct SpatialIndex<T> {
    radius: T,
    radius_sq: T,
    cells_per_axis: usize,
    /// Particle indices sorted by cell id.
    order: Vec<u32>,
    /// Positions in sorted order, for cache-friendly scans.
    sorted: Vec<Vec3<T>>,
    /// `cell_start[c]..cell_start[c + 1]` is the run of cell `c`.
    cell_start: Vec<u32>,
}

impl<T: Real> SpatialIndex<T> {
    pub fn build(positions: &[Vec3<T>], radius: T) -> Result<Self> {
        if !(radius > T::zero()) || !radius.is_finite() {
            return Err(Error::InvalidRadius(radius.as_f64()));
        }
        let inv = (T::one() / radius).floor().to_usize().unwrap_or(MAX_CELLS_PER_AXIS);
        let cells_per_axis = inv.clamp(1, MAX_CELLS_PER_AXIS);
        let mut index = Self {
            radius,
            radius_sq: radius * radius,
            cells_per_axis,
            order: Vec::new(),
            sorted: Vec::new(),
            cell_start: vec![0; cells_per_axis.pow(3) + 1],
        };
        index.rebuild(positions)?;
        Ok(index)
    }

    /// Re-sorts the index for new positions, keeping the radius and buffers.
    pub fn rebuild(&mut self, positions: &[Vec3<T>]) -> Result<()> {
        if let Some(bad) = positions.iter().position(|p| !p.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "position {bad} is not finite"
            )));
        }
        if positions.len() > u32::MAX as usize {
            return Err(Error::InvalidInput("too many particles".into()));
        }
        let n_cells = self.cells_per_axis.pow(3);
        let cells: Vec<u32> = positions.iter().map(|&p| self.cell_of(p) as u32).collect();

        self.cell_start.clear();
        self.cell_start.resize(n_cells + 1, 0);
        for &c in &cells {
            self.cell_start[c as usize + 1] += 1;
        }
        for c in 0..n_cells {
            self.cell_start[c + 1] += self.cell_start[c];
        }
        let mut cursor = self.cell_start.clone();
        self.order.clear();
        self.order.resize(positions.len(), 0);
        self.sorted.clear();
        self.sorted.resize(positions.len(), Vec3::zero());
        for (i, &c) in cells.iter().enumerate() {
            let slot = cursor[c as usize] as usize;
            cursor[c as usize] += 1;
            self.order[slot] = i as u32;
            self.sorted[slot] = positions[i];
        }
        Ok(())
    }

    pub fn radius(&self) -> T {
        self.radius
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn cells_per_axis(&self) -> usize {
        self.cells_per_axis
    }

    /// Edge length of one cell; never smaller than the radius.
    pub fn cell_size(&self) -> T {
        T::one() / T::from_usize(self.cells_per_axis).unwrap()
    }

    /// Particle indices in cell-sorted order.
    pub fn order(&self) -> &[u32] {
        &self.order
    }

    pub fn occupied_cells(&self) -> usize {
        self.cell_start.windows(2).filter(|w| w[1] > w[0]).count()
    }

    /// Indices of the particles bucketed in cell `cell`.
    pub fn cell_members(&self, cell: usize) -> &[u32] {
        let (a, b) = (self.cell_start[cell], self.cell_start[cell + 1]);
        &self.order[a as usize..b as usize]
    }

    #[inline(always)]
    fn axis_cell(&self, v: T) -> usize {
        let n = self.cells_per_axis;
        let scaled = v * T::from_usize(n).unwrap();
        if scaled <= T::zero() {
            0
        } else {
            scaled.to_usize().unwrap_or(n - 1).min(n - 1)
        }
    }

    #[inline(always)]
    fn cell_coords(&self, p: Vec3<T>) -> [usize; 3] {
        [self.axis_cell(p.x), self.axis_cell(p.y), self.axis_cell(p.z)]
    }

    /// Linear id of the (clamped) cell containing `p`.
    pub fn cell_of(&self, p: Vec3<T>) -> usize {
        let [cx, cy, cz] = self.cell_coords(p);
        (cz * self.cells_per_axis + cy) * self.cells_per_axis + cx
    }

    /// Calls `visit(particle, squared_distance)` for every particle strictly
    /// within the radius of `point`.
    #[inline]
    pub fn for_each_neighbor(&self, point: Vec3<T>, mut visit: impl FnMut(usize, T)) {
        self.scan(point, self.radius_sq, |slot, d2| {
            visit(self.order[slot] as usize, d2)
        });
    }

    /// Walks the 27-cell stencil around `point`, reporting sorted slots with
    /// squared distance below `radius_sq`.
    #[inline(always)]
    fn scan(&self, point: Vec3<T>, radius_sq: T, mut visit: impl FnMut(usize, T)) {
        if self.order.is_empty() {
            return;
        }
        let n = self.cells_per_axis;
        let [cx, cy, cz] = self.cell_coords(point);
        let x_lo = cx.saturating_sub(1);
        let x_hi = (cx + 1).min(n - 1);
        for z in cz.saturating_sub(1)..=(cz + 1).min(n - 1) {
            for y in cy.saturating_sub(1)..=(cy + 1).min(n - 1) {
                let row = (z * n + y) * n;
                let start = self.cell_start[row + x_lo] as usize;
                let end = self.cell_start[row + x_hi + 1] as usize;
                for slot in start..end {
                    let d2 = (self.sorted[slot] - point).norm_squared();
                    if within(d2, radius_sq) {
                        visit(slot, d2);
                    }
                }
            }
        }
    }

    /// Every particle with `‖point − xᵢ‖ < radius`, in unspecified order.
    pub fn query_radius(&self, point: Vec3<T>) -> Vec<NeighborHit<T>> {
        let mut hits = Vec::new();
        self.for_each_neighbor(point, |index, d2| {
            hits.push(NeighborHit {
                index,
                distance: d2.sqrt(),
            })
        });
        hits
    }
}

/// O(M) reference scan with the same contract as [`SpatialIndex::query_radius`].
pub fn brute_force_query<T: Real>(
    positions: &[Vec3<T>],
    point: Vec3<T>,
    radius: T,
) -> Vec<NeighborHit<T>> {
    let radius_sq = radius * radius;
    positions
        .iter()
        .enumerate()
        .filter_map(|(index, &p)| {
            let d2 = (p - point).norm_squared();
            within(d2, radius_sq).then(|| NeighborHit {
                index,
                distance: d2.sqrt(),
            })
        })
        .collect()
}

/// All unordered pairs `(i, j)`, `i < j`, closer than `min_dist`.
///
/// `positions` must be the positions the index was built from. Pairs come
/// back sorted lexicographically.
pub fn collision_pairs<T: Real>(
    index: &SpatialIndex<T>,
    positions: &[Vec3<T>],
    min_dist: T,
) -> Result<Vec<(usize, usize)>> {
    if min_dist > index.radius() {
        return Err(Error::IndexTooCoarse {
            min_dist: min_dist.as_f64(),
            radius: index.radius().as_f64(),
        });
    }
    if positions.len() != index.len() {
        return Err(Error::InvalidShape(format!(
            "{} positions for an index over {} particles",
            positions.len(),
            index.len()
        )));
    }
    let min_sq = min_dist * min_dist;
    let mut pairs = Vec::new();
    for (slot, &i) in index.order.iter().enumerate() {
        let i = i as usize;
        let p = index.sorted[slot];
        index.scan(p, min_sq, |other, _| {
            let j = index.order[other] as usize;
            if j > i {
                pairs.push((i, j));
            }
        });
    }
    pairs.sort_unstable();
    Ok(pairs)
}
