//! Indexed triangle meshes and layered characters.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use hashbrown::HashMap;

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::math::Vec3;
use crate::semantics::SemanticSet;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Mesh {
    positions: Vec<Vec3>,
    triangles: Vec<[u32; 3]>,
    normals: Option<Vec<Vec3>>,
    colors: Option<Vec<[f64; 3]>>,
}

impl Mesh {
    pub fn new(positions: Vec<Vec3>, triangles: Vec<[u32; 3]>) -> Result<Self> {
        if positions.iter().any(|p| !p.is_finite()) {
            return Err(Error::invalid("mesh positions must be finite"));
        }
        if positions.len() > u32::MAX as usize {
            return Err(Error::invalid("mesh has too many vertices for u32 indices"));
        }
        let n = positions.len() as u32;
        if triangles.iter().flatten().any(|&i| i >= n) {
            return Err(Error::invalid("triangle index out of range"));
        }
        Ok(Mesh {
            positions,
            triangles,
            normals: None,
            colors: None,
        })
    }

    pub fn empty() -> Self {
        Mesh::default()
    }

    pub fn with_normals(mut self, normals: Vec<Vec3>) -> Result<Self> {
        if normals.len() != self.positions.len() {
            return Err(Error::invalid("need one normal per vertex"));
        }
        if normals.iter().any(|n| !n.is_finite()) {
            return Err(Error::invalid("normals must be finite"));
        }
        self.normals = Some(normals);
        Ok(self)
    }

    pub fn with_colors(mut self, colors: Vec<[f64; 3]>) -> Result<Self> {
        if colors.len() != self.positions.len() {
            return Err(Error::invalid("need one color per vertex"));
        }
        if colors.iter().flatten().any(|c| !(0.0..=1.0).contains(c)) {
            return Err(Error::invalid("color channels must lie in [0, 1]"));
        }
        self.colors = Some(colors);
        Ok(self)
    }

    pub fn positions(&self) -> &[Vec3] {
        &self.positions
    }

    pub fn triangles(&self) -> &[[u32; 3]] {
        &self.triangles
    }

    pub fn normals(&self) -> Option<&[Vec3]> {
        self.normals.as_deref()
    }

    pub fn colors(&self) -> Option<&[[f64; 3]]> {
        self.colors.as_deref()
    }

    pub fn vertex_count(&self) -> usize {
        self.positions.len()
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    /// Same connectivity and attributes with new positions.
    pub fn with_positions(&self, positions: Vec<Vec3>) -> Result<Self> {
        if positions.len() != self.positions.len() {
            return Err(Error::invalid("position count must not change"));
        }
        if positions.iter().any(|p| !p.is_finite()) {
            return Err(Error::invalid("mesh positions must be finite"));
        }
        Ok(Mesh {
            positions,
            ..self.clone()
        })
    }

    pub fn corners(&self, t: usize) -> [Vec3; 3] {
        self.triangles[t].map(|i| self.positions[i as usize])
    }

    /// Unnormalized face normal (twice the area, right-handed winding).
    pub fn face_cross(&self, t: usize) -> Vec3 {
        let [a, b, c] = self.corners(t);
        (b - a).cross(c - a)
    }

    pub fn face_area(&self, t: usize) -> f64 {
        0.5 * self.face_cross(t).norm()
    }

    pub fn area(&self) -> f64 {
        let areas: Vec<f64> = (0..self.triangles.len()).map(|t| self.face_area(t)).collect();
        crate::math::pairwise_sum(&areas)
    }

    /// Area-weighted vertex normals from the faces, normalized.
    pub fn face_weighted_normals(&self) -> Vec<Vec3> {
        let mut acc = vec![Vec3::ZERO; self.positions.len()];
        for t in 0..self.triangles.len() {
            let n = self.face_cross(t);
            for &i in &self.triangles[t] {
                acc[i as usize] += n;
            }
        }
        acc.into_iter().map(Vec3::normalized).collect()
    }

    /// Replaces the normals with area-weighted face normals.
    pub fn with_face_normals(self) -> Self {
        let n = self.face_weighted_normals();
        Mesh {
            normals: Some(n),
            ..self
        }
    }

    pub fn bounds(&self) -> Option<(Vec3, Vec3)> {
        let first = *self.positions.first()?;
        Some(self.positions.iter().fold((first, first), |(lo, hi), &p| {
            (lo.component_min(p), hi.component_max(p))
        }))
    }

    /// Applies `f` to every position; normals are kept as they are.
    pub fn map_positions(&self, f: impl Fn(Vec3) -> Vec3) -> Result<Self> {
        self.with_positions(self.positions.iter().map(|&p| f(p)).collect())
    }

    /// Connected components over triangles sharing a vertex. Returns the
    /// triangle lists, ordered by their lowest triangle index.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut uf = UnionFind::new(self.positions.len());
        for t in &self.triangles {
            uf.union(t[0] as usize, t[1] as usize);
            uf.union(t[0] as usize, t[2] as usize);
        }
        let mut slot: HashMap<usize, usize> = HashMap::new();
        let mut out: Vec<Vec<usize>> = Vec::new();
        for (ti, t) in self.triangles.iter().enumerate() {
            let root = uf.find(t[0] as usize);
            let k = *slot.entry(root).or_insert_with(|| {
                out.push(Vec::new());
                out.len() - 1
            });
            out[k].push(ti);
        }
        out
    }

    /// Number of undirected edges in the given triangles not shared by
    /// exactly two of them.
    pub fn open_edge_count(&self, tris: &[usize]) -> usize {
        let mut uses: HashMap<(u32, u32), u32> = HashMap::new();
        for &t in tris {
            let [a, b, c] = self.triangles[t];
            for (u, v) in [(a, b), (b, c), (c, a)] {
                *uses.entry((u.min(v), u.max(v))).or_insert(0) += 1;
            }
        }
        uses.values().filter(|&&n| n != 2).count()
    }

    pub fn is_closed(&self) -> bool {
        !self.is_empty() && self.open_edge_count(&(0..self.triangles.len()).collect::<Vec<_>>()) == 0
    }

    /// Sub-mesh made of the given triangles, with unused vertices dropped.
    pub fn submesh(&self, tris: &[usize]) -> Mesh {
        let mut remap = vec![u32::MAX; self.positions.len()];
        let mut keep = Vec::new();
        let mut triangles = Vec::with_capacity(tris.len());
        for &t in tris {
            let mut out = [0u32; 3];
            for (k, &i) in self.triangles[t].iter().enumerate() {
                if remap[i as usize] == u32::MAX {
                    remap[i as usize] = keep.len() as u32;
                    keep.push(i as usize);
                }
                out[k] = remap[i as usize];
            }
            triangles.push(out);
        }
        Mesh {
            positions: keep.iter().map(|&i| self.positions[i]).collect(),
            triangles,
            normals: self.normals.as_ref().map(|n| keep.iter().map(|&i| n[i]).collect()),
            colors: self.colors.as_ref().map(|c| keep.iter().map(|&i| c[i]).collect()),
        }
    }

    /// Appends another mesh, offsetting its indices. Attributes survive only
    /// if both meshes carry them.
    pub fn merged(&self, other: &Mesh) -> Result<Mesh> {
        let off = self.positions.len() as u32;
        let mut positions = self.positions.clone();
        positions.extend_from_slice(&other.positions);
        let mut triangles = self.triangles.clone();
        triangles.extend(other.triangles.iter().map(|t| t.map(|i| i + off)));
        let normals = match (&self.normals, &other.normals) {
            (Some(a), Some(b)) => Some(a.iter().chain(b).copied().collect()),
            _ => None,
        };
        let colors = match (&self.colors, &other.colors) {
            (Some(a), Some(b)) => Some(a.iter().chain(b).copied().collect()),
            _ => None,
        };
        let mut m = Mesh::new(positions, triangles)?;
        m.normals = normals;
        m.colors = colors;
        Ok(m)
    }

    /// Mean edge length over unique undirected edges, and the median.
    pub fn edge_lengths(&self) -> Vec<f64> {
        let mut edges: Vec<(u32, u32)> = self
            .triangles
            .iter()
            .flat_map(|&[a, b, c]| [(a, b), (b, c), (c, a)])
            .map(|(u, v)| (u.min(v), u.max(v)))
            .collect();
        edges.sort_unstable();
        edges.dedup();
        edges
            .iter()
            .map(|&(u, v)| (self.positions[u as usize] - self.positions[v as usize]).norm())
            .collect()
    }

    /// Unit-radius icosphere scaled to `radius`, with outward normals and
    /// `subdivisions` rounds of midpoint refinement.
    pub fn icosphere(center: Vec3, radius: f64, subdivisions: u32) -> Result<Mesh> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::invalid("icosphere radius must be positive"));
        }
        if subdivisions > 7 {
            return Err(Error::invalid("icosphere subdivision level above 7"));
        }
        let t = (1.0 + crate::math::sqrt(5.0)) / 2.0;
        let mut pos: Vec<Vec3> = [
            (-1.0, t, 0.0),
            (1.0, t, 0.0),
            (-1.0, -t, 0.0),
            (1.0, -t, 0.0),
            (0.0, -1.0, t),
            (0.0, 1.0, t),
            (0.0, -1.0, -t),
            (0.0, 1.0, -t),
            (t, 0.0, -1.0),
            (t, 0.0, 1.0),
            (-t, 0.0, -1.0),
            (-t, 0.0, 1.0),
        ]
        .iter()
        .map(|&(x, y, z)| Vec3::new(x, y, z).normalized())
        .collect();
        let mut tris: Vec<[u32; 3]> = vec![
            [0, 11, 5],
            [0, 5, 1],
            [0, 1, 7],
            [0, 7, 10],
            [0, 10, 11],
            [1, 5, 9],
            [5, 11, 4],
            [11, 10, 2],
            [10, 7, 6],
            [7, 1, 8],
            [3, 9, 4],
            [3, 4, 2],
            [3, 2, 6],
            [3, 6, 8],
            [3, 8, 9],
            [4, 9, 5],
            [2, 4, 11],
            [6, 2, 10],
            [8, 6, 7],
            [9, 8, 1],
        ];
        for _ in 0..subdivisions {
            let mut mid: HashMap<(u32, u32), u32> = HashMap::new();
            let mut next = Vec::with_capacity(tris.len() * 4);
            for &[a, b, c] in &tris {
                let mut m = |u: u32, v: u32| -> u32 {
                    *mid.entry((u.min(v), u.max(v))).or_insert_with(|| {
                        pos.push(((pos[u as usize] + pos[v as usize]) * 0.5).normalized());
                        pos.len() as u32 - 1
                    })
                };
                let (ab, bc, ca) = (m(a, b), m(b, c), m(c, a));
                next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
            }
            tris = next;
        }
        let normals = pos.clone();
        let positions = pos.into_iter().map(|p| center + p * radius).collect();
        Mesh::new(positions, tris)?.with_normals(normals)
    }

    /// Closed axis-aligned box with outward winding.
    pub fn cuboid(min: Vec3, max: Vec3) -> Result<Mesh> {
        if !(0..3).all(|a| min[a] < max[a]) {
            return Err(Error::invalid("box needs min < max on every axis"));
        }
        let positions: Vec<Vec3> = (0..8)
            .map(|i| {
                Vec3::new(
                    if i & 1 == 0 { min.x } else { max.x },
                    if i & 2 == 0 { min.y } else { max.y },
                    if i & 4 == 0 { min.z } else { max.z },
                )
            })
            .collect();
        let tris = vec![
            [0, 2, 1],
            [1, 2, 3],
            [4, 5, 6],
            [5, 7, 6],
            [0, 1, 4],
            [1, 5, 4],
            [2, 6, 3],
            [3, 6, 7],
            [0, 4, 2],
            [2, 4, 6],
            [1, 3, 5],
            [3, 7, 5],
        ];
        Mesh::new(positions, tris)
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // Smaller root wins, so the structure is order independent.
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

/// One named layer of a character.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub name: String,
    pub selector: SemanticSet,
    pub mesh: Mesh,
}

/// Per-layer meshes extracted from one field, in insertion order.
#[derive(Debug, Clone, PartialEq)]
pub struct LayeredCharacter {
    scene: String,
    grid: GridSpec,
    coarse: Option<[usize; 3]>,
    layers: Vec<Layer>,
}

impl LayeredCharacter {
    pub fn new(scene: impl Into<String>, grid: GridSpec, coarse: Option<[usize; 3]>) -> Self {
        LayeredCharacter {
            scene: scene.into(),
            grid,
            coarse,
            layers: Vec::new(),
        }
    }

    pub fn push(&mut self, name: impl Into<String>, selector: SemanticSet, mesh: Mesh) -> Result<()> {
        let name = name.into();
        if self.get(&name).is_some() {
            return Err(Error::invalid(alloc::format!("duplicate layer name `{name}`")));
        }
        self.layers.push(Layer { name, selector, mesh });
        Ok(())
    }

    pub fn scene(&self) -> &str {
        &self.scene
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// Coarse resolution used by the proposal pass, if any.
    pub fn coarse_resolution(&self) -> Option<[usize; 3]> {
        self.coarse
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn get(&self, name: &str) -> Option<&Layer> {
        self.layers.iter().find(|l| l.name == name)
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn icosphere_is_closed_and_outward() {
        let m = Mesh::icosphere(Vec3::ZERO, 1.0, 2).unwrap();
        assert_eq!(m.vertex_count(), 162);
        assert_eq!(m.triangle_count(), 320);
        assert!(m.is_closed());
        for t in 0..m.triangle_count() {
            let [a, b, c] = m.corners(t);
            assert!(m.face_cross(t).dot(a + b + c) > 0.0);
        }
    }

    #[test]
    fn cuboid_is_closed_and_outward() {
        let m = Mesh::cuboid(Vec3::ZERO, Vec3::splat(1.0)).unwrap();
        assert!(m.is_closed());
        assert!((m.area() - 6.0).abs() < 1e-12);
        for t in 0..12 {
            let [a, b, c] = m.corners(t);
            let centroid = (a + b + c) / 3.0 - Vec3::splat(0.5);
            assert!(m.face_cross(t).dot(centroid) > 0.0);
        }
    }

    #[test]
    fn components_and_submesh() {
        let a = Mesh::icosphere(Vec3::ZERO, 1.0, 0).unwrap();
        let b = Mesh::icosphere(Vec3::new(5.0, 0.0, 0.0), 1.0, 0).unwrap();
        let m = a.merged(&b).unwrap();
        let comps = m.components();
        assert_eq!(comps.len(), 2);
        assert_eq!(m.submesh(&comps[1]).vertex_count(), 12);
        assert!(m.submesh(&comps[0]).is_closed());
        let open = Mesh::new(vec![Vec3::ZERO, Vec3::X, Vec3::Y], vec![[0, 1, 2]]).unwrap();
        assert!(!open.is_closed());
    }

    #[test]
    fn rejects_bad_indices() {
        assert!(Mesh::new(vec![Vec3::ZERO], vec![[0, 0, 1]]).is_err());
    }

    #[test]
    fn layer_names_unique() {
        let g = GridSpec::cube(2, 0.0, 1.0).unwrap();
        let mut c = LayeredCharacter::new("s", g, None);
        let set = SemanticSet::single("a", crate::field::SemanticLabel::new(0).unwrap());
        c.push("a", set.clone(), Mesh::empty()).unwrap();
        assert!(c.push("a", set, Mesh::empty()).is_err());
    }
}
