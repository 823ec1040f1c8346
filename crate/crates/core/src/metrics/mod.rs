//! Geometric comparison of layered meshes: Chamfer distance, F-score, voxel
//! IoU, and a structural check for hollow shells.
//!
//! Surface samples are drawn area-weighted from a ChaCha8 stream seeded by
//! the caller. Both meshes of a comparison use the same stream, so identical
//! meshes produce identical sample sets.

mod voxel;

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use voxel::{require_watertight, union_frame, voxel_iou, voxelize, VoxelFrame};

use crate::error::{Error, Result};
use crate::extract::HOLISTIC;
use crate::math::{pairwise_sum, sqrt, Vec3};
use crate::mesh::{LayeredCharacter, Mesh};
use crate::par;
use crate::spatial::PointGrid;

pub const DEFAULT_SAMPLES: usize = 100_000;
pub const DEFAULT_TAU_FRACTION: f64 = 0.005;
pub const DEFAULT_GRANULARITY: f64 = 1.0 / 32.0;
/// Row name of the holistic layer in reports.
pub const WHOLE: &str = "whole";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ChamferConvention {
    /// Mean of squared nearest distances.
    #[default]
    Squared,
    /// Mean of nearest distances.
    Unsquared,
}

/// `n` area-weighted points on the surface of `mesh`.
pub fn sample_surface(mesh: &Mesh, n: usize, seed: u64) -> Result<Vec<Vec3>> {
    if mesh.is_empty() {
        return Err(Error::UndefinedMetric("cannot sample an empty mesh".into()));
    }
    if n == 0 {
        return Err(Error::invalid("sample count must be at least 1"));
    }
    let mut cdf = Vec::with_capacity(mesh.triangle_count());
    let mut acc = 0.0;
    for t in 0..mesh.triangle_count() {
        acc += mesh.face_area(t);
        cdf.push(acc);
    }
    if !(acc > 0.0) {
        return Err(Error::UndefinedMetric("mesh has zero surface area".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let u: f64 = rng.random::<f64>() * acc;
        let t = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
        let (r1, r2): (f64, f64) = (rng.random(), rng.random());
        let s = sqrt(r1);
        let [a, b, c] = mesh.corners(t);
        out.push(a * (1.0 - s) + b * (s * (1.0 - r2)) + c * (s * r2));
    }
    Ok(out)
}

/// Squared distance from each query to its nearest reference point.
pub fn nearest_squared(queries: &[Vec3], reference: &[Vec3]) -> Result<Vec<f64>> {
    let grid = PointGrid::auto(reference.to_vec())?;
    Ok(par::map_indexed(queries.len(), |i| grid.nearest(queries[i]).1))
}

/// Symmetric Chamfer distance between point sets: the average of the two
/// directed means.
pub fn chamfer_points(a: &[Vec3], b: &[Vec3], convention: ChamferConvention) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::UndefinedMetric("Chamfer distance of an empty point set".into()));
    }
    let directed = |q: &[Vec3], r: &[Vec3]| -> Result<f64> {
        let mut d = nearest_squared(q, r)?;
        if convention == ChamferConvention::Unsquared {
            d.iter_mut().for_each(|v| *v = sqrt(*v));
        }
        Ok(pairwise_sum(&d) / d.len() as f64)
    };
    Ok((directed(a, b)? + directed(b, a)?) / 2.0)
}

pub fn chamfer(a: &Mesh, b: &Mesh, n: usize, seed: u64, convention: ChamferConvention) -> Result<f64> {
    let pa = sample_surface(a, n, seed)?;
    let pb = sample_surface(b, n, seed)?;
    chamfer_points(&pa, &pb, convention)
}

/// Diagonal of the bounding box of both meshes.
pub fn union_diagonal(a: &Mesh, b: &Mesh) -> Result<f64> {
    let (la, ha) = a.bounds().ok_or_else(|| Error::UndefinedMetric("empty mesh".into()))?;
    let (lb, hb) = b.bounds().ok_or_else(|| Error::UndefinedMetric("empty mesh".into()))?;
    Ok((ha.component_max(hb) - la.component_min(lb)).norm())
}

/// F1 of point sets at absolute threshold `tau` (distances `<= tau` match).
pub fn fscore_points(a: &[Vec3], b: &[Vec3], tau: f64) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::UndefinedMetric("F-score of an empty point set".into()));
    }
    let t2 = tau * tau;
    let frac = |q: &[Vec3], r: &[Vec3]| -> Result<f64> {
        let d = nearest_squared(q, r)?;
        Ok(d.iter().filter(|&&v| v <= t2).count() as f64 / d.len() as f64)
    };
    let precision = frac(a, b)?;
    let recall = frac(b, a)?;
    if precision + recall == 0.0 {
        return Ok(0.0);
    }
    Ok(2.0 * precision * recall / (precision + recall))
}

/// F1 with `tau = tau_fraction * union bounding-box diagonal`.
pub fn fscore(a: &Mesh, b: &Mesh, tau_fraction: f64, n: usize, seed: u64) -> Result<f64> {
    if !(tau_fraction > 0.0 && tau_fraction.is_finite()) {
        return Err(Error::invalid("tau fraction must be positive"));
    }
    let tau = tau_fraction * union_diagonal(a, b)?;
    let pa = sample_surface(a, n, seed)?;
    let pb = sample_surface(b, n, seed)?;
    fscore_points(&pa, &pb, tau)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HollowReport {
    pub components: usize,
    pub closed_components: usize,
    /// Ordered pairs `(i, j)` with component `i` inside closed component `j`.
    pub nested_pairs: usize,
}

/// Counts components, closed components and nested pairs. Nesting is tested
/// by casting a parity ray from one vertex of each component against every
/// other closed component.
pub fn hollow_check(mesh: &Mesh) -> Result<HollowReport> {
    if mesh.is_empty() {
        return Err(Error::invalid("hollow check needs a non-empty mesh"));
    }
    let comps = mesh.components();
    let closed: Vec<bool> = comps.iter().map(|c| mesh.open_edge_count(c) == 0).collect();
    let mut nested = 0;
    for (i, ci) in comps.iter().enumerate() {
        let probe = mesh.positions()[mesh.triangles()[ci[0]][0] as usize];
        for (j, cj) in comps.iter().enumerate() {
            if i != j && closed[j] && voxel::inside_by_parity(mesh, cj, probe) {
                nested += 1;
            }
        }
    }
    Ok(HollowReport {
        components: comps.len(),
        closed_components: closed.iter().filter(|&&c| c).count(),
        nested_pairs: nested,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsConfig {
    pub samples: usize,
    pub seed: u64,
    pub tau_fraction: f64,
    pub granularity: f64,
    pub convention: ChamferConvention,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig {
            samples: DEFAULT_SAMPLES,
            seed: 0,
            tau_fraction: DEFAULT_TAU_FRACTION,
            granularity: DEFAULT_GRANULARITY,
            convention: ChamferConvention::Squared,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerRow {
    pub layer: String,
    pub chamfer: f64,
    pub voxel_iou: f64,
    pub fscore: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerReport {
    pub rows: Vec<LayerRow>,
    pub samples: usize,
    pub seed: u64,
    pub tau_fraction: f64,
    pub granularity: f64,
    pub convention: ChamferConvention,
}

/// All three metrics for one pair of meshes. Two empty meshes agree
/// perfectly; one empty mesh makes the metrics undefined.
pub fn compare(pred: &Mesh, reference: &Mesh, config: &MetricsConfig) -> Result<(f64, f64, f64)> {
    if pred.is_empty() && reference.is_empty() {
        return Ok((0.0, 1.0, 1.0));
    }
    let pa = sample_surface(pred, config.samples, config.seed)?;
    let pb = sample_surface(reference, config.samples, config.seed)?;
    let cd = chamfer_points(&pa, &pb, config.convention)?;
    let tau = config.tau_fraction * union_diagonal(pred, reference)?;
    let f = fscore_points(&pa, &pb, tau)?;
    let iou = voxel_iou(pred, reference, config.granularity)?;
    Ok((cd, iou, f))
}

/// One row per non-holistic layer of `pred` (in its order) and a final
/// `whole` row for the holistic layer.
pub fn evaluate_layers(pred: &LayeredCharacter, reference: &LayeredCharacter, config: &MetricsConfig) -> Result<LayerReport> {
    let mut rows = Vec::new();
    let mut names: Vec<&str> = pred
        .layers()
        .iter()
        .map(|l| l.name.as_str())
        .filter(|n| *n != HOLISTIC)
        .collect();
    for l in reference.layers() {
        if l.name != HOLISTIC && pred.get(&l.name).is_none() {
            return Err(Error::MissingLayer(l.name.clone()));
        }
    }
    names.push(HOLISTIC);
    for name in names {
        let p = pred.get(name).ok_or_else(|| Error::MissingLayer(name.to_string()))?;
        let r = reference.get(name).ok_or_else(|| Error::MissingLayer(name.to_string()))?;
        let (chamfer, voxel_iou, fscore) = compare(&p.mesh, &r.mesh, config)?;
        rows.push(LayerRow {
            layer: if name == HOLISTIC { WHOLE.to_string() } else { name.to_string() },
            chamfer,
            voxel_iou,
            fscore,
        });
    }
    Ok(LayerReport {
        rows,
        samples: config.samples,
        seed: config.seed,
        tau_fraction: config.tau_fraction,
        granularity: config.granularity,
        convention: config.convention,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_point_clouds() {
        let a = [Vec3::ZERO];
        let b = [Vec3::X];
        assert_eq!(chamfer_points(&a, &b, ChamferConvention::Squared).unwrap(), 1.0);
        assert_eq!(chamfer_points(&a, &b, ChamferConvention::Unsquared).unwrap(), 1.0);
        assert!(chamfer_points(&a, &[], ChamferConvention::Squared).is_err());
        assert_eq!(fscore_points(&a, &b, 0.5).unwrap(), 0.0);
        assert_eq!(fscore_points(&a, &b, 1.0).unwrap(), 1.0);
    }

    #[test]
    fn identical_meshes_score_perfectly() {
        let m = Mesh::icosphere(Vec3::ZERO, 0.5, 2).unwrap();
        assert_eq!(chamfer(&m, &m, 2000, 3, ChamferConvention::Squared).unwrap(), 0.0);
        assert_eq!(fscore(&m, &m, 0.005, 2000, 3).unwrap(), 1.0);
        assert_eq!(voxel_iou(&m, &m, 1.0 / 32.0).unwrap(), 1.0);
    }

    #[test]
    fn far_apart_meshes() {
        let a = Mesh::icosphere(Vec3::ZERO, 0.5, 1).unwrap();
        let b = Mesh::icosphere(Vec3::new(3.0, 0.0, 0.0), 0.5, 1).unwrap();
        assert_eq!(voxel_iou(&a, &b, 1.0 / 32.0).unwrap(), 0.0);
        assert_eq!(fscore(&a, &b, 0.005, 500, 0).unwrap(), 0.0);
    }

    #[test]
    fn shifted_cube_iou() {
        let a = Mesh::cuboid(Vec3::ZERO, Vec3::splat(1.0)).unwrap();
        let b = Mesh::cuboid(Vec3::new(0.5, 0.0, 0.0), Vec3::new(1.5, 1.0, 1.0)).unwrap();
        let iou = voxel_iou(&a, &b, 1.0 / 32.0).unwrap();
        assert!((iou - 1.0 / 3.0).abs() <= 1.0 / 32.0, "{iou}");
    }

    #[test]
    fn open_mesh_rejected_by_iou() {
        let open = Mesh::new(alloc::vec![Vec3::ZERO, Vec3::X, Vec3::Y], alloc::vec![[0, 1, 2]]).unwrap();
        let closed = Mesh::cuboid(Vec3::ZERO, Vec3::splat(1.0)).unwrap();
        assert!(matches!(
            voxel_iou(&open, &closed, 1.0 / 32.0),
            Err(Error::NotWatertight { component: 0, .. })
        ));
    }

    #[test]
    fn voxelized_sphere_volume() {
        let m = Mesh::icosphere(Vec3::ZERO, 0.5, 4).unwrap();
        let frame = union_frame(&m, &m, 1.0 / 64.0).unwrap();
        let occ = voxelize(&m, &frame);
        let vol = occ.iter().filter(|&&o| o).count() as f64 * frame.cell.powi(3);
        let want = 4.0 / 3.0 * core::f64::consts::PI * 0.125;
        assert!((vol - want).abs() / want < 0.03, "{vol} vs {want}");
    }

    #[test]
    fn hollow_check_cases() {
        let s = Mesh::icosphere(Vec3::ZERO, 0.5, 1).unwrap();
        assert_eq!(
            hollow_check(&s).unwrap(),
            HollowReport {
                components: 1,
                closed_components: 1,
                nested_pairs: 0
            }
        );
        let pair = s.merged(&Mesh::icosphere(Vec3::ZERO, 0.3, 1).unwrap()).unwrap();
        assert_eq!(
            hollow_check(&pair).unwrap(),
            HollowReport {
                components: 2,
                closed_components: 2,
                nested_pairs: 1
            }
        );
    }
}
