//! Uniform-grid point index with exact nearest-neighbor queries.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::{cbrt, floor, Vec3};

/// Upper bound on cells per point, so a tiny cell size cannot blow up memory.
const MAX_CELLS_PER_POINT: usize = 8;

/// Points bucketed into cubic cells. Queries are exact; ties in distance go
/// to the lowest point index.
#[derive(Debug, Clone)]
pub struct PointGrid {
    points: Vec<Vec3>,
    origin: Vec3,
    cell: f64,
    dims: [usize; 3],
    /// `cell_start[c]..cell_start[c + 1]` indexes `order`.
    cell_start: Vec<u32>,
    order: Vec<u32>,
}

impl PointGrid {
    /// Builds the index with the given cell edge length. The length is
    /// enlarged if needed to keep the cell count proportional to the points.
    pub fn new(points: Vec<Vec3>, cell: f64) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::invalid("point grid needs at least one point"));
        }
        if points.len() > u32::MAX as usize {
            return Err(Error::invalid("too many points for the point grid"));
        }
        if points.iter().any(|p| !p.is_finite()) {
            return Err(Error::invalid("point grid coordinates must be finite"));
        }
        let mut lo = points[0];
        let mut hi = points[0];
        for &p in &points {
            lo = lo.component_min(p);
            hi = hi.component_max(p);
        }
        let extent = hi - lo;
        let mut cell = if cell.is_finite() && cell > 0.0 {
            cell
        } else {
            auto_cell(extent, points.len())
        };
        let budget = points.len().saturating_mul(MAX_CELLS_PER_POINT).max(1);
        let dims = loop {
            let d = [0, 1, 2].map(|a| (floor(extent[a] / cell) as usize).saturating_add(1));
            let total = d[0].saturating_mul(d[1]).saturating_mul(d[2]);
            if total <= budget {
                break d;
            }
            cell *= 2.0;
        };

        let cell_of: Vec<usize> = points.iter().map(|&p| linear_cell(p, lo, cell, dims)).collect();
        let n_cells = dims[0] * dims[1] * dims[2];
        let mut counts = vec![0u32; n_cells + 1];
        for &c in &cell_of {
            counts[c + 1] += 1;
        }
        for c in 0..n_cells {
            counts[c + 1] += counts[c];
        }
        let mut fill = counts.clone();
        let mut order = vec![0u32; points.len()];
        // Ascending point index within each cell.
        for (i, &c) in cell_of.iter().enumerate() {
            order[fill[c] as usize] = i as u32;
            fill[c] += 1;
        }
        Ok(PointGrid {
            points,
            origin: lo,
            cell,
            dims,
            cell_start: counts,
            order,
        })
    }

    /// Cell size chosen from the bounding box and point count.
    pub fn auto(points: Vec<Vec3>) -> Result<Self> {
        PointGrid::new(points, f64::NAN)
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    pub fn cell_size(&self) -> f64 {
        self.cell
    }

    /// Index and squared distance of the point nearest to `q`.
    pub fn nearest(&self, q: Vec3) -> (usize, f64) {
        let c = [0, 1, 2].map(|a| axis_cell(q[a], self.origin[a], self.cell, self.dims[a]) as i64);
        let max_ring = self.dims.iter().copied().max().unwrap_or(1) as i64;
        let mut best = (usize::MAX, f64::INFINITY);
        for r in 0..=max_ring {
            self.visit_ring(c, r, |i| {
                let d = (self.points[i] - q).norm_squared();
                if d < best.1 || (d == best.1 && i < best.0) {
                    best = (i, d);
                }
            });
            // Anything beyond ring r is at least r cells away.
            let reach = r as f64 * self.cell;
            if best.0 != usize::MAX && best.1 < reach * reach {
                break;
            }
        }
        best
    }

    fn visit_ring(&self, c: [i64; 3], r: i64, mut f: impl FnMut(usize)) {
        let [nx, ny, nz] = self.dims.map(|d| d as i64);
        let zr = (c[2] - r).max(0)..=(c[2] + r).min(nz - 1);
        for z in zr {
            let on_z = (z - c[2]).abs() == r;
            for y in (c[1] - r).max(0)..=(c[1] + r).min(ny - 1) {
                let on_y = on_z || (y - c[1]).abs() == r;
                let row = nx * (y + ny * z);
                if on_y {
                    for x in (c[0] - r).max(0)..=(c[0] + r).min(nx - 1) {
                        self.visit_cell((row + x) as usize, &mut f);
                    }
                } else {
                    for x in [c[0] - r, c[0] + r] {
                        if x >= 0 && x < nx {
                            self.visit_cell((row + x) as usize, &mut f);
                        }
                        if r == 0 {
                            break;
                        }
                    }
                }
            }
        }
    }

    #[inline]
    fn visit_cell(&self, cell: usize, f: &mut impl FnMut(usize)) {
        let (a, b) = (self.cell_start[cell] as usize, self.cell_start[cell + 1] as usize);
        for &i in &self.order[a..b] {
            f(i as usize);
        }
    }
}

fn auto_cell(extent: Vec3, n: usize) -> f64 {
    let m = extent.max_elem();
    if m > 0.0 {
        m / cbrt(n as f64).max(1.0)
    } else {
        1.0
    }
}

#[inline]
fn axis_cell(v: f64, lo: f64, cell: f64, n: usize) -> usize {
    let t = floor((v - lo) / cell);
    if t <= 0.0 {
        0
    } else {
        (t as usize).min(n - 1)
    }
}

#[inline]
fn linear_cell(p: Vec3, lo: Vec3, cell: f64, dims: [usize; 3]) -> usize {
    let i = axis_cell(p.x, lo.x, cell, dims[0]);
    let j = axis_cell(p.y, lo.y, cell, dims[1]);
    let k = axis_cell(p.z, lo.z, cell, dims[2]);
    i + dims[0] * (j + dims[1] * k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute(points: &[Vec3], q: Vec3) -> (usize, f64) {
        let mut best = (usize::MAX, f64::INFINITY);
        for (i, p) in points.iter().enumerate() {
            let d = (*p - q).norm_squared();
            if d < best.1 {
                best = (i, d);
            }
        }
        best
    }

    #[test]
    fn matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut v = || Vec3::new(rng.random::<f64>(), rng.random::<f64>() * 0.3, rng.random::<f64>() * 2.0);
        let pts: Vec<Vec3> = (0..500).map(|_| v()).collect();
        let queries: Vec<Vec3> = (0..300).map(|_| v() * 1.5 - Vec3::splat(0.25)).collect();
        for cell in [0.01, 0.1, 0.5, f64::NAN] {
            let g = PointGrid::new(pts.clone(), cell).unwrap();
            for &q in &queries {
                assert_eq!(g.nearest(q), brute(&pts, q));
            }
        }
    }

    #[test]
    fn ties_go_to_lowest_index() {
        let pts = vec![Vec3::new(1.0, 0.0, 0.0), Vec3::new(-1.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0)];
        let g = PointGrid::new(pts, 0.25).unwrap();
        assert_eq!(g.nearest(Vec3::ZERO).0, 0);
        assert_eq!(g.nearest(Vec3::new(2.0, 0.0, 0.0)).0, 0);
    }

    #[test]
    fn single_and_coincident_points() {
        let g = PointGrid::auto(vec![Vec3::splat(0.5); 4]).unwrap();
        assert_eq!(g.nearest(Vec3::new(9.0, -3.0, 1.0)).0, 0);
        assert!(PointGrid::auto(Vec::new()).is_err());
    }
}
