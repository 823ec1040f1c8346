//! Parity ray casting along `+x`.
//!
//! A query point is tested against the `yz` projection of each triangle. Ties
//! (the point on a projected edge or vertex) are broken by nudging the point
//! by `(e, e^2)` with `e` infinitesimal, evaluated symbolically. The nudge is
//! the same for every triangle, so a ray through a shared edge is counted in
//! exactly one of its triangles.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::{ceil, Vec3};
use crate::mesh::Mesh;
use crate::par;

/// Sign of the 2D edge function of `(y, z)` against edge `a -> b`, with the
/// symbolic nudge resolving zeros. Endpoints are put in a canonical order
/// first so both triangles sharing an edge compute identical values.
fn edge_sign(a: (f64, f64), b: (f64, f64), p: (f64, f64)) -> i8 {
    let (u, v, flip) = if a <= b { (a, b, 1) } else { (b, a, -1) };
    let (dy, dz) = (v.0 - u.0, v.1 - u.1);
    let e = dy * (p.1 - u.1) - dz * (p.0 - u.0);
    let s = if e > 0.0 {
        1
    } else if e < 0.0 {
        -1
    } else if dz != 0.0 {
        // d/de of dy * e^2 - dz * e at e -> 0+.
        if dz > 0.0 {
            -1
        } else {
            1
        }
    } else if dy > 0.0 {
        1
    } else {
        -1
    };
    s * flip
}

/// `x` where the `+x` ray through `(y, z)` meets the triangle, if it does.
pub(crate) fn ray_hit(tri: [Vec3; 3], y: f64, z: f64) -> Option<f64> {
    let [a, b, c] = tri;
    let pa = (a.y, a.z);
    let pb = (b.y, b.z);
    let pc = (c.y, c.z);
    let area = (pb.0 - pa.0) * (pc.1 - pa.1) - (pb.1 - pa.1) * (pc.0 - pa.0);
    if area == 0.0 {
        return None;
    }
    let p = (y, z);
    let s0 = edge_sign(pa, pb, p);
    let s1 = edge_sign(pb, pc, p);
    let s2 = edge_sign(pc, pa, p);
    if s0 != s1 || s1 != s2 {
        return None;
    }
    // Barycentric interpolation of x at the (unnudged) point.
    let w_a = ((pb.0 - p.0) * (pc.1 - p.1) - (pb.1 - p.1) * (pc.0 - p.0)) / area;
    let w_b = ((pc.0 - p.0) * (pa.1 - p.1) - (pc.1 - p.1) * (pa.0 - p.0)) / area;
    let w_c = 1.0 - w_a - w_b;
    Some(w_a * a.x + w_b * b.x + w_c * c.x)
}

/// Parity test of `p` against the given triangles of `mesh`.
pub(crate) fn inside_by_parity(mesh: &Mesh, tris: &[usize], p: Vec3) -> bool {
    let mut count = 0usize;
    for &t in tris {
        if let Some(x) = ray_hit(mesh.corners(t), p.y, p.z) {
            if x > p.x {
                count += 1;
            }
        }
    }
    count % 2 == 1
}

/// Errors unless every connected component is closed.
pub fn require_watertight(mesh: &Mesh) -> Result<()> {
    for (i, comp) in mesh.components().iter().enumerate() {
        let open = mesh.open_edge_count(comp);
        if open > 0 {
            return Err(Error::NotWatertight {
                component: i,
                open_edges: open,
            });
        }
    }
    Ok(())
}

/// Voxel lattice shared by both meshes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VoxelFrame {
    pub origin: Vec3,
    pub cell: f64,
    pub dims: [usize; 3],
}

impl VoxelFrame {
    pub fn center(&self, i: usize, j: usize, k: usize) -> Vec3 {
        self.origin + Vec3::new(i as f64 + 0.5, j as f64 + 0.5, k as f64 + 0.5) * self.cell
    }
}

/// Occupancy of voxel centers, `x` fastest.
pub fn voxelize(mesh: &Mesh, frame: &VoxelFrame) -> Vec<bool> {
    let [nx, ny, nz] = frame.dims;
    // Bin triangles into the yz columns their projection can touch.
    let mut bins: Vec<Vec<usize>> = vec![Vec::new(); ny * nz];
    let col = |v: f64, lo: f64, n: usize| -> (usize, usize) {
        let t = (v - lo) / frame.cell - 0.5;
        let a = if t <= 0.0 { 0 } else { (t as usize).min(n - 1) };
        let b = if t < 0.0 { 0 } else { (ceil(t) as usize).min(n - 1) };
        (a, b)
    };
    for t in 0..mesh.triangle_count() {
        let [a, b, c] = mesh.corners(t);
        let (ylo, yhi) = (a.y.min(b.y).min(c.y), a.y.max(b.y).max(c.y));
        let (zlo, zhi) = (a.z.min(b.z).min(c.z), a.z.max(b.z).max(c.z));
        let (j0, _) = col(ylo, frame.origin.y, ny);
        let (_, j1) = col(yhi, frame.origin.y, ny);
        let (k0, _) = col(zlo, frame.origin.z, nz);
        let (_, k1) = col(zhi, frame.origin.z, nz);
        for k in k0..=k1 {
            for j in j0..=j1 {
                bins[j + ny * k].push(t);
            }
        }
    }
    let columns: Vec<Vec<bool>> = par::map_indexed(ny * nz, |c| {
        let (j, k) = (c % ny, c / ny);
        let p = frame.center(0, j, k);
        let mut xs: Vec<f64> = bins[c].iter().filter_map(|&t| ray_hit(mesh.corners(t), p.y, p.z)).collect();
        xs.sort_by(f64::total_cmp);
        (0..nx)
            .map(|i| {
                let xc = frame.center(i, j, k).x;
                let above = xs.len() - xs.partition_point(|&x| x <= xc);
                above % 2 == 1
            })
            .collect()
    });
    let mut occ = vec![false; nx * ny * nz];
    for (c, column) in columns.iter().enumerate() {
        for (i, &o) in column.iter().enumerate() {
            occ[i + nx * c] = o;
        }
    }
    occ
}

/// Frame over the union bounding box with cell `granularity * max extent`.
pub fn union_frame(a: &Mesh, b: &Mesh, granularity: f64) -> Result<VoxelFrame> {
    if !(granularity > 0.0 && granularity <= 1.0) {
        return Err(Error::invalid("voxel granularity must lie in (0, 1]"));
    }
    let (lo_a, hi_a) = a.bounds().ok_or_else(|| Error::UndefinedMetric("voxel IoU of an empty mesh".into()))?;
    let (lo_b, hi_b) = b.bounds().ok_or_else(|| Error::UndefinedMetric("voxel IoU of an empty mesh".into()))?;
    let lo = lo_a.component_min(lo_b);
    let hi = hi_a.component_max(hi_b);
    let extent = (hi - lo).max_elem();
    if !(extent > 0.0) {
        return Err(Error::UndefinedMetric("voxel IoU of meshes with zero extent".into()));
    }
    let cell = granularity * extent;
    let dims = [0, 1, 2].map(|ax| (ceil((hi[ax] - lo[ax]) / cell) as usize).max(1));
    Ok(VoxelFrame { origin: lo, cell, dims })
}

/// Intersection over union of voxel occupancy. Both meshes must be
/// watertight per component.
pub fn voxel_iou(a: &Mesh, b: &Mesh, granularity: f64) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::UndefinedMetric("voxel IoU of an empty mesh".into()));
    }
    require_watertight(a)?;
    require_watertight(b)?;
    let frame = union_frame(a, b, granularity)?;
    let oa = voxelize(a, &frame);
    let ob = voxelize(b, &frame);
    let inter = oa.iter().zip(&ob).filter(|(x, y)| **x && **y).count();
    let union = oa.iter().zip(&ob).filter(|(x, y)| **x || **y).count();
    if union == 0 {
        // Neither mesh covers a voxel center; the occupancies agree.
        return Ok(1.0);
    }
    Ok(inter as f64 / union as f64)
}
