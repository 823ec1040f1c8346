use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::{pairwise_sum, Vec3};
use crate::mesh::Mesh;
use crate::par;
use crate::spatial::PointGrid;

/// How the inner-mesh partner of an outer vertex is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Nearest {
    /// Nearest inner vertex, paired with its vertex normal.
    #[default]
    Vertex,
    /// Closest point on the inner triangles, paired with the face normal.
    Surface,
}

/// Partner of one outer vertex.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contact {
    /// Inner vertex or triangle index.
    pub index: usize,
    pub point: Vec3,
    pub normal: Vec3,
}

impl Contact {
    /// Signed depth of `v` behind the partner along its normal.
    #[inline]
    pub fn depth(&self, v: Vec3) -> f64 {
        (self.point - v).dot(self.normal)
    }
}

/// Prepared inner mesh for repeated queries.
pub struct CollisionTarget<'a> {
    inner: &'a Mesh,
    mode: Nearest,
    grid: Option<PointGrid>,
    face_normals: Vec<Vec3>,
}

impl<'a> CollisionTarget<'a> {
    pub fn new(inner: &'a Mesh, mode: Nearest) -> Result<Self> {
        if inner.vertex_count() == 0 {
            return Err(Error::invalid("inner mesh has no vertices"));
        }
        match mode {
            Nearest::Vertex => {
                if inner.normals().is_none() {
                    return Err(Error::invalid("inner mesh needs vertex normals"));
                }
                let mut lengths = inner.edge_lengths();
                let cell = if lengths.is_empty() {
                    f64::NAN
                } else {
                    lengths.sort_by(f64::total_cmp);
                    lengths[lengths.len() / 2]
                };
                Ok(CollisionTarget {
                    inner,
                    mode,
                    grid: Some(PointGrid::new(inner.positions().to_vec(), cell)?),
                    face_normals: Vec::new(),
                })
            }
            Nearest::Surface => {
                if inner.is_empty() {
                    return Err(Error::invalid("inner mesh has no triangles"));
                }
                let face_normals = (0..inner.triangle_count()).map(|t| inner.face_cross(t).normalized()).collect();
                Ok(CollisionTarget {
                    inner,
                    mode,
                    grid: None,
                    face_normals,
                })
            }
        }
    }

    pub fn contact(&self, v: Vec3) -> Contact {
        match self.mode {
            Nearest::Vertex => {
                let grid = self.grid.as_ref().expect("vertex mode has a grid");
                let (j, _) = grid.nearest(v);
                Contact {
                    index: j,
                    point: self.inner.positions()[j],
                    normal: self.inner.normals().expect("checked")[j],
                }
            }
            Nearest::Surface => {
                let mut best = (usize::MAX, f64::INFINITY, Vec3::ZERO);
                for t in 0..self.inner.triangle_count() {
                    let [a, b, c] = self.inner.corners(t);
                    let p = closest_on_triangle(v, a, b, c);
                    let d = (p - v).norm_squared();
                    if d < best.1 {
                        best = (t, d, p);
                    }
                }
                Contact {
                    index: best.0,
                    point: best.2,
                    normal: self.face_normals[best.0],
                }
            }
        }
    }

    pub fn contacts(&self, points: &[Vec3]) -> Vec<Contact> {
        par::map_indexed(points.len(), |i| self.contact(points[i]))
    }
}

/// Collision loss `(1/n) sum_i max((v_j - v_i) . n_j, 0)^3` over the `n`
/// outer vertices, with gradient `-(3/n) max(.,0)^2 n_j` per vertex and the
/// partner assignment held fixed. Also returns the assignment.
pub fn collision_loss_with(target: &CollisionTarget<'_>, outer: &[Vec3]) -> Result<(f64, Vec<Vec3>, Vec<Contact>)> {
    if outer.is_empty() {
        return Err(Error::invalid("outer mesh has no vertices"));
    }
    let n = outer.len() as f64;
    let contacts = target.contacts(outer);
    let depths: Vec<f64> = outer.iter().zip(&contacts).map(|(&v, c)| c.depth(v).max(0.0)).collect();
    let terms: Vec<f64> = depths.iter().map(|d| d * d * d).collect();
    let grad = depths
        .iter()
        .zip(&contacts)
        .map(|(&d, c)| c.normal * (-3.0 / n * d * d))
        .collect();
    Ok((pairwise_sum(&terms) / n, grad, contacts))
}

pub fn collision_loss(outer: &Mesh, inner: &Mesh, mode: Nearest) -> Result<(f64, Vec<Vec3>)> {
    let target = CollisionTarget::new(inner, mode)?;
    let (v, g, _) = collision_loss_with(&target, outer.positions())?;
    Ok((v, g))
}

/// Largest positive depth of an outer vertex behind its partner.
pub fn max_penetration(outer: &Mesh, inner: &Mesh, mode: Nearest) -> Result<f64> {
    let target = CollisionTarget::new(inner, mode)?;
    let contacts = target.contacts(outer.positions());
    Ok(outer
        .positions()
        .iter()
        .zip(&contacts)
        .map(|(&v, c)| c.depth(v).max(0.0))
        .fold(0.0, f64::max))
}

/// Closest point on triangle `abc` to `p`.
pub fn closest_on_triangle(p: Vec3, a: Vec3, b: Vec3, c: Vec3) -> Vec3 {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(ap);
    let d2 = ac.dot(ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return a;
    }
    let bp = p - b;
    let d3 = ab.dot(bp);
    let d4 = ac.dot(bp);
    if d3 >= 0.0 && d4 <= d3 {
        return b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        return a + ab * (d1 / (d1 - d3));
    }
    let cp = p - c;
    let d5 = ab.dot(cp);
    let d6 = ac.dot(cp);
    if d6 >= 0.0 && d5 <= d6 {
        return c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        return a + ac * (d2 / (d2 - d6));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        return b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)));
    }
    let denom = 1.0 / (va + vb + vc);
    a + ab * (vb * denom) + ac * (vc * denom)
}

/// Uniform-Laplacian neighbor lists (sorted, unique).
pub fn vertex_neighbors(mesh: &Mesh) -> Vec<Vec<u32>> {
    let mut nb: Vec<Vec<u32>> = vec![Vec::new(); mesh.vertex_count()];
    for &[a, b, c] in mesh.triangles() {
        for (u, v) in [(a, b), (b, c), (c, a)] {
            nb[u as usize].push(v);
            nb[v as usize].push(u);
        }
    }
    for l in &mut nb {
        l.sort_unstable();
        l.dedup();
    }
    nb
}
