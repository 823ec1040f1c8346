//! Iso-surface extraction of per-semantic layers.
//!
//! Each layer is the zero level set of the equivalent SDF of a semantic set,
//! sampled densely or through the coarse-to-fine proposal and polygonized by
//! marching cubes. Vertex normals come from the gradient of the original
//! signed distance; where the semantic term is the active branch (a cut
//! through the interior) the face normals are used instead.

mod mc;
mod table;

use alloc::string::{String, ToString};
use alloc::vec::Vec;

pub use mc::{marching_cubes, ScalarSource};

use crate::error::{Error, Result};
use crate::field::{Field, ImplicitScene, LabelRegistry, MAX_LABELS};
use crate::grid::GridSpec;
use crate::math::Vec3;
use crate::mesh::{LayeredCharacter, Mesh};
use crate::par;
use crate::proposal::{dense_evaluate, propose_and_evaluate, ProposalConfig, ProposalStats};
use crate::semantics::{set_margin, SemanticSet};

/// Name of the layer extracted with the full label set.
pub const HOLISTIC: &str = "holistic";

/// Step used for central-difference normals.
pub const NORMAL_STEP: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct ExtractConfig {
    pub fine: GridSpec,
    /// `None` evaluates every fine vertex.
    pub proposal: Option<ProposalConfig>,
}

impl ExtractConfig {
    pub fn dense(fine: GridSpec) -> Self {
        ExtractConfig { fine, proposal: None }
    }

    pub fn with_proposal(fine: GridSpec) -> Self {
        ExtractConfig {
            fine,
            proposal: Some(ProposalConfig::for_fine(&fine)),
        }
    }
}

/// Mesh of one semantic set plus its evaluation counts.
pub fn extract_layer<F: Field + ?Sized>(
    field: &F,
    set: &SemanticSet,
    config: &ExtractConfig,
) -> Result<(Mesh, ProposalStats)> {
    let fine = config.fine;
    let (raw, stats) = match &config.proposal {
        Some(p) => {
            let (sparse, stats) = propose_and_evaluate(field, set, fine, p)?;
            (marching_cubes(&sparse, 0.0, None)?, stats)
        }
        None => {
            let dense = dense_evaluate(field, set, fine)?;
            let n = fine.vertex_count();
            let stats = ProposalStats {
                coarse_evaluations: 0,
                fine_evaluations: n,
                dense_evaluations: n,
            };
            (marching_cubes(&dense, 0.0, None)?, stats)
        }
    };
    Ok((decorate(field, set, raw)?, stats))
}

/// Adds colors sampled from the field and normals as described above.
pub fn decorate<F: Field + ?Sized>(field: &F, set: &SemanticSet, mesh: Mesh) -> Result<Mesh> {
    let k = field.label_count();
    if k == 0 || k > MAX_LABELS {
        return Err(Error::invalid("field label count outside the supported range"));
    }
    let faces = mesh.face_weighted_normals();
    let pos = mesh.positions();
    let attrs: Vec<(Vec3, [f64; 3])> = par::map_blocks(pos.len(), 1024, |range, out| {
        for i in range {
            let x = pos[i];
            let s = field.eval(x);
            let mut q = [0.0; MAX_LABELS];
            let sum: f64 = s.sem_probs.iter().map(|v| v.max(0.0)).sum();
            for (o, v) in q.iter_mut().zip(&s.sem_probs) {
                *o = v.max(0.0) / sum;
            }
            let cut = set_margin(&q[..k], set) > s.sdf;
            let n = if cut {
                faces[i]
            } else {
                let g = field.sdf_gradient(x, NORMAL_STEP).normalized();
                if g == Vec3::ZERO {
                    faces[i]
                } else {
                    g
                }
            };
            out.push((n, s.color));
        }
    });
    let (normals, colors): (Vec<Vec3>, Vec<[f64; 3]>) = attrs.into_iter().unzip();
    mesh.with_normals(normals)?.with_colors(colors)
}

/// A named semantic set to extract.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerDef {
    pub name: String,
    pub set: SemanticSet,
}

/// One layer per registry label, named after it.
pub fn default_layers(registry: &LabelRegistry) -> Vec<LayerDef> {
    registry
        .labels()
        .map(|l| {
            let name = registry.name(l).unwrap_or_default().to_string();
            LayerDef {
                set: SemanticSet::single(name.clone(), l),
                name,
            }
        })
        .collect()
}

/// Per-layer evaluation counts, in layer order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExtractReport {
    pub layers: Vec<(String, ProposalStats)>,
}

impl ExtractReport {
    pub fn total(&self) -> ProposalStats {
        let mut t = ProposalStats::default();
        for (_, s) in &self.layers {
            t.accumulate(s);
        }
        t
    }
}

/// Extracts every requested layer plus the holistic layer (full label set).
pub fn extract_character(
    scene: &ImplicitScene,
    layers: &[LayerDef],
    config: &ExtractConfig,
) -> Result<(LayeredCharacter, ExtractReport)> {
    if layers.is_empty() {
        return Err(Error::invalid("at least one layer definition is required"));
    }
    let registry = scene.labels();
    let mut defs: Vec<LayerDef> = layers.to_vec();
    if defs.iter().any(|d| d.name == HOLISTIC) {
        return Err(Error::invalid("`holistic` is reserved for the full-set layer"));
    }
    for d in &defs {
        if !d.set.fits(registry) {
            return Err(Error::invalid(alloc::format!(
                "layer `{}` refers to labels outside the registry",
                d.name
            )));
        }
    }
    defs.push(LayerDef {
        name: HOLISTIC.to_string(),
        set: SemanticSet::full(HOLISTIC, registry),
    });
    let mut character = LayeredCharacter::new(
        scene.name(),
        config.fine,
        config.proposal.map(|p| p.coarse_resolution),
    );
    let mut report = ExtractReport::default();
    for d in defs {
        let (mesh, stats) = extract_layer(scene, &d.set, config)?;
        character.push(d.name.clone(), d.set, mesh)?;
        report.layers.push((d.name, stats));
    }
    Ok((character, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::ScalarGrid;

    fn sphere_grid(n: usize, r: f64) -> ScalarGrid {
        let spec = GridSpec::cube(n, -1.0, 1.0).unwrap();
        ScalarGrid::from_fn(spec, |p| p.norm() - r)
    }

    #[test]
    fn all_positive_grid_is_empty() {
        let g = ScalarGrid::from_fn(GridSpec::cube(5, 0.0, 1.0).unwrap(), |_| 1.0);
        assert!(marching_cubes(&g, 0.0, None).unwrap().is_empty());
    }

    #[test]
    fn single_negative_corner_gives_one_triangle() {
        let spec = GridSpec::cube(2, 0.0, 1.0).unwrap();
        let mut v = alloc::vec![1.0; 8];
        v[0] = -1.0;
        let m = marching_cubes(&ScalarGrid::new(spec, v).unwrap(), 0.0, None).unwrap();
        assert_eq!(m.triangle_count(), 1);
        assert_eq!(m.vertex_count(), 3);
        // Normal points away from the inside corner.
        assert!(m.face_cross(0).dot(Vec3::splat(1.0)) > 0.0);
        for p in m.positions() {
            assert!((p.norm() - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn sphere_is_closed_manifold_and_accurate() {
        let g = sphere_grid(64, 0.5);
        let m = marching_cubes(&g, 0.0, None).unwrap();
        assert!(m.is_closed());
        assert_eq!(m.components().len(), 1);
        let diag = g.spec().cell_diagonal();
        for p in m.positions() {
            assert!((p.norm() - 0.5).abs() < diag);
        }
        for t in 0..m.triangle_count() {
            let [a, b, c] = m.corners(t);
            assert!(m.face_cross(t).dot(a + b + c) > 0.0, "inward face {t}");
        }
        // Each undirected edge is traversed once in each direction.
        let mut directed: Vec<(u32, u32)> = Vec::new();
        for &[a, b, c] in m.triangles() {
            directed.extend_from_slice(&[(a, b), (b, c), (c, a)]);
        }
        directed.sort_unstable();
        let before = directed.len();
        directed.dedup();
        assert_eq!(before, directed.len());
    }

    #[test]
    fn exact_iso_vertices_are_shared() {
        // Plane through lattice vertices: values hit zero exactly.
        let spec = GridSpec::cube(5, 0.0, 4.0).unwrap();
        let g = ScalarGrid::from_fn(spec, |p| p.z - 2.0 + 0.5 * (p.x - 2.0).abs().min(0.0));
        let m = marching_cubes(&g, 0.0, None).unwrap();
        let mut pos: Vec<[u64; 3]> = m.positions().iter().map(|p| p.to_array().map(f64::to_bits)).collect();
        let n = pos.len();
        pos.sort_unstable();
        pos.dedup();
        assert_eq!(pos.len(), n, "duplicate vertex positions");
    }

    #[test]
    fn deformation_moves_vertices_and_is_bounded() {
        let g = sphere_grid(16, 0.5);
        let n = g.spec().vertex_count();
        let shift = g.spec().spacing() * 0.25;
        let d = alloc::vec![shift; n];
        let a = marching_cubes(&g, 0.0, None).unwrap();
        let b = marching_cubes(&g, 0.0, Some(&d)).unwrap();
        assert_eq!(a.triangles(), b.triangles());
        for (p, q) in a.positions().iter().zip(b.positions()) {
            assert!(((*q - *p) - shift).norm() < 1e-12);
        }
        let too_far = alloc::vec![g.spec().spacing(); n];
        assert!(marching_cubes(&g, 0.0, Some(&too_far)).is_err());
    }
}
