//! Vertex lattices over axis-aligned boxes.
//!
//! Vertices are stored row-major with x fastest:
//! `index = i + nx * (j + ny * k)`. Vertex `(i, j, k)` sits at
//! `min + (i, j, k) * spacing`, so the lattice spans the bounds inclusively.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::Vec3;
use crate::par;

/// Default character volume: a tall box around the origin.
pub const CHARACTER_MIN: Vec3 = Vec3::new(-0.5, -0.5, -0.75);
pub const CHARACTER_MAX: Vec3 = Vec3::new(0.5, 0.5, 0.75);
pub const DEFAULT_FINE_RESOLUTION: [usize; 3] = [256, 256, 384];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    resolution: [usize; 3],
    min: Vec3,
    max: Vec3,
}

impl GridSpec {
    pub fn new(resolution: [usize; 3], min: Vec3, max: Vec3) -> Result<Self> {
        if resolution.iter().any(|&n| n < 2) {
            return Err(Error::invalid(alloc::format!(
                "grid resolution {resolution:?} must be at least 2 per axis"
            )));
        }
        if !(min.is_finite() && max.is_finite()) {
            return Err(Error::invalid("grid bounds must be finite"));
        }
        for a in 0..3 {
            if !(min[a] < max[a]) {
                return Err(Error::invalid(alloc::format!(
                    "grid bounds need min < max on every axis (axis {a}: {} vs {})",
                    min[a],
                    max[a]
                )));
            }
        }
        resolution
            .iter()
            .try_fold(1usize, |acc, &n| acc.checked_mul(n))
            .ok_or_else(|| Error::invalid("grid vertex count overflows usize"))?;
        Ok(GridSpec { resolution, min, max })
    }

    /// Cube `[lo, hi]^3` with `n` vertices per axis.
    pub fn cube(n: usize, lo: f64, hi: f64) -> Result<Self> {
        GridSpec::new([n; 3], Vec3::splat(lo), Vec3::splat(hi))
    }

    /// The default character volume at the given resolution.
    pub fn character(resolution: [usize; 3]) -> Result<Self> {
        GridSpec::new(resolution, CHARACTER_MIN, CHARACTER_MAX)
    }

    #[inline]
    pub fn resolution(&self) -> [usize; 3] {
        self.resolution
    }

    #[inline]
    pub fn min(&self) -> Vec3 {
        self.min
    }

    #[inline]
    pub fn max(&self) -> Vec3 {
        self.max
    }

    #[inline]
    pub fn vertex_count(&self) -> usize {
        self.resolution[0] * self.resolution[1] * self.resolution[2]
    }

    pub fn cell_count(&self) -> usize {
        (self.resolution[0] - 1) * (self.resolution[1] - 1) * (self.resolution[2] - 1)
    }

    #[inline]
    pub fn spacing(&self) -> Vec3 {
        let [nx, ny, nz] = self.resolution;
        Vec3::new(
            (self.max.x - self.min.x) / (nx - 1) as f64,
            (self.max.y - self.min.y) / (ny - 1) as f64,
            (self.max.z - self.min.z) / (nz - 1) as f64,
        )
    }

    pub fn cell_diagonal(&self) -> f64 {
        self.spacing().norm()
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.resolution[0] * (j + self.resolution[1] * k)
    }

    #[inline]
    pub fn coords(&self, index: usize) -> [usize; 3] {
        let [nx, ny, _] = self.resolution;
        [index % nx, (index / nx) % ny, index / (nx * ny)]
    }

    /// Lattice position of vertex `(i, j, k)`. The last vertex on each axis
    /// lands exactly on `max`.
    #[inline]
    pub fn position(&self, i: usize, j: usize, k: usize) -> Vec3 {
        Vec3::new(
            axis_coord(self.min.x, self.max.x, i, self.resolution[0]),
            axis_coord(self.min.y, self.max.y, j, self.resolution[1]),
            axis_coord(self.min.z, self.max.z, k, self.resolution[2]),
        )
    }

    #[inline]
    pub fn position_of(&self, index: usize) -> Vec3 {
        let [i, j, k] = self.coords(index);
        self.position(i, j, k)
    }

    pub fn contains(&self, p: Vec3) -> bool {
        (0..3).all(|a| p[a] >= self.min[a] && p[a] <= self.max[a])
    }

    pub fn same_bounds(&self, other: &GridSpec) -> bool {
        self.min == other.min && self.max == other.max
    }

    /// Same bounds with a different resolution.
    pub fn with_resolution(&self, resolution: [usize; 3]) -> Result<Self> {
        GridSpec::new(resolution, self.min, self.max)
    }
}

#[inline]
fn axis_coord(lo: f64, hi: f64, i: usize, n: usize) -> f64 {
    if i + 1 == n {
        hi
    } else {
        lo + (hi - lo) * (i as f64 / (n - 1) as f64)
    }
}

/// One scalar per lattice vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarGrid {
    spec: GridSpec,
    values: Vec<f64>,
}

impl ScalarGrid {
    pub fn new(spec: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.vertex_count() {
            return Err(Error::invalid(alloc::format!(
                "grid needs {} values, got {}",
                spec.vertex_count(),
                values.len()
            )));
        }
        Ok(ScalarGrid { spec, values })
    }

    /// Evaluates `f` at every lattice vertex.
    pub fn from_fn<F>(spec: GridSpec, f: F) -> Self
    where
        F: Fn(Vec3) -> f64 + Sync + Send,
    {
        let values = par::map_blocks(spec.vertex_count(), 4096, |range, out| {
            out.extend(range.map(|idx| f(spec.position_of(idx))));
        });
        ScalarGrid { spec, values }
    }

    #[inline]
    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[self.spec.index(i, j, k)]
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lattice_spans_bounds_inclusively() {
        let g = GridSpec::cube(2, -1.0, 1.0).unwrap();
        assert_eq!(g.vertex_count(), 8);
        assert_eq!(g.position(0, 0, 0), Vec3::splat(-1.0));
        assert_eq!(g.position(1, 1, 1), Vec3::splat(1.0));
        assert_eq!(g.position_of(1), Vec3::new(1.0, -1.0, -1.0));
        assert_eq!(g.position_of(2), Vec3::new(-1.0, 1.0, -1.0));
        assert_eq!(g.position_of(4), Vec3::new(-1.0, -1.0, 1.0));
    }

    #[test]
    fn index_round_trip() {
        let g = GridSpec::new([3, 4, 5], Vec3::ZERO, Vec3::splat(1.0)).unwrap();
        for idx in 0..g.vertex_count() {
            let [i, j, k] = g.coords(idx);
            assert_eq!(g.index(i, j, k), idx);
        }
    }

    #[test]
    fn rejects_degenerate_specs() {
        assert!(GridSpec::new([1, 4, 4], Vec3::ZERO, Vec3::splat(1.0)).is_err());
        assert!(GridSpec::new([4, 4, 4], Vec3::splat(1.0), Vec3::splat(1.0)).is_err());
        assert!(GridSpec::new([4, 4, 4], Vec3::ZERO, Vec3::new(1.0, f64::NAN, 1.0)).is_err());
    }
}
