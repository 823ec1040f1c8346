//! Objectives with analytic gradients, a finite-difference checker and a
//! collision-resolving vertex optimizer.
//!
//! Reductions collect their terms in a fixed order and sum them pairwise, so
//! values do not depend on the thread count.

mod collision;
mod gradcheck;
mod hole;
mod resolve;

use alloc::vec::Vec;

pub use collision::{
    closest_on_triangle, collision_loss, collision_loss_with, max_penetration, vertex_neighbors, CollisionTarget,
    Contact, Nearest,
};
pub use gradcheck::{check_collision_loss, check_hole_loss, finite_diff_check, GradCheckReport, REL_GUARD};
pub use hole::{hole_edges, hole_loss, hole_loss_values, LossGrad};
pub use resolve::{resolve_collisions, ResolveOutcome, ResolveParams, MAX_REJECTIONS, RESOLVED_LOSS};

use crate::error::{Error, Result};
use crate::math::{ln, pairwise_sum, Vec3};
use crate::render::RenderBuffers;

/// Loss weights. The perceptual and deviation weights are carried for
/// completeness; their losses need a pretrained network or a learned
/// extractor and are not computed here.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub lambda_lpips: f64,
    pub lambda_mask: f64,
    pub lambda_sem: f64,
    pub lambda_depth: f64,
    pub lambda_normal: f64,
    pub lambda_dev: f64,
    pub lambda_hole: f64,
    /// Mask weight of the refinement stage.
    pub lambda_mask_refine: f64,
    /// Normal weight of the refinement stage.
    pub lambda_normal_refine: f64,
    pub lambda_col: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            lambda_lpips: 2.0,
            lambda_mask: 1.0,
            lambda_sem: 1.0,
            lambda_depth: 0.5,
            lambda_normal: 0.2,
            lambda_dev: 0.5,
            lambda_hole: 1e-4,
            lambda_mask_refine: 1.0,
            lambda_normal_refine: 1.0,
            lambda_col: 1.0,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.lambda_lpips,
            self.lambda_mask,
            self.lambda_sem,
            self.lambda_depth,
            self.lambda_normal,
            self.lambda_dev,
            self.lambda_hole,
            self.lambda_mask_refine,
            self.lambda_normal_refine,
            self.lambda_col,
        ];
        if all.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::invalid("loss weights must be finite and non-negative"));
        }
        Ok(())
    }
}

/// Ground-truth images paired with rendered buffers.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceBuffers {
    pub width: usize,
    pub height: usize,
    pub mask: Vec<f64>,
    pub normal: Vec<Vec3>,
    pub depth: Vec<f64>,
    pub labels: Vec<u8>,
}

impl ReferenceBuffers {
    /// Reference built from rendered buffers: mask is alpha thresholded at
    /// one half, labels are the argmax channel.
    pub fn from_render(b: &RenderBuffers) -> Self {
        ReferenceBuffers {
            width: b.width,
            height: b.height,
            mask: b.alpha.iter().map(|&a| if a >= 0.5 { 1.0 } else { 0.0 }).collect(),
            normal: b.normal.clone(),
            depth: b.depth.clone(),
            labels: b.argmax.clone(),
        }
    }
}

fn same_len(a: usize, b: usize, what: &str) -> Result<()> {
    if a != b {
        return Err(Error::invalid(alloc::format!("{what}: buffer sizes differ ({a} vs {b})")));
    }
    Ok(())
}

/// Mean squared difference between rendered alpha and the reference mask.
pub fn mask_loss(alpha: &[f64], mask: &[f64]) -> Result<f64> {
    same_len(alpha.len(), mask.len(), "mask loss")?;
    if alpha.is_empty() {
        return Ok(0.0);
    }
    let terms: Vec<f64> = alpha.iter().zip(mask).map(|(a, m)| (a - m) * (a - m)).collect();
    Ok(pairwise_sum(&terms) / alpha.len() as f64)
}

fn masked_mean(mask: &[f64], term: impl Fn(usize) -> f64) -> f64 {
    let terms: Vec<f64> = (0..mask.len()).filter(|&i| mask[i] > 0.5).map(term).collect();
    if terms.is_empty() {
        0.0
    } else {
        pairwise_sum(&terms) / terms.len() as f64
    }
}

/// Mean of `1 - n . n_ref` over pixels with mask above one half.
pub fn normal_loss(normal: &[Vec3], reference: &[Vec3], mask: &[f64]) -> Result<f64> {
    same_len(normal.len(), reference.len(), "normal loss")?;
    same_len(normal.len(), mask.len(), "normal loss")?;
    Ok(masked_mean(mask, |i| 1.0 - normal[i].dot(reference[i])))
}

/// Mean absolute depth difference over pixels with mask above one half.
pub fn depth_loss(depth: &[f64], reference: &[f64], mask: &[f64]) -> Result<f64> {
    same_len(depth.len(), reference.len(), "depth loss")?;
    same_len(depth.len(), mask.len(), "depth loss")?;
    Ok(masked_mean(mask, |i| (depth[i] - reference[i]).abs()))
}

/// Floor for probabilities inside the logarithm and for the alpha divisor.
pub const CE_EPS: f64 = 1e-12;

/// Mean cross-entropy of the accumulated semantic vectors (divided by the
/// pixel alpha) against reference labels, over pixels with mask above one
/// half. `semantic` holds `k` values per pixel.
pub fn semantic_ce_loss(semantic: &[f64], alpha: &[f64], k: usize, labels: &[u8], mask: &[f64]) -> Result<f64> {
    if k == 0 {
        return Err(Error::invalid("semantic loss needs at least one label"));
    }
    same_len(semantic.len(), alpha.len() * k, "semantic loss")?;
    same_len(alpha.len(), labels.len(), "semantic loss")?;
    same_len(alpha.len(), mask.len(), "semantic loss")?;
    if let Some(i) = (0..labels.len()).find(|&i| mask[i] > 0.5 && labels[i] as usize >= k) {
        return Err(Error::invalid(alloc::format!(
            "semantic loss: label {} at pixel {i} is out of range for {k} labels",
            labels[i]
        )));
    }
    Ok(masked_mean(mask, |i| {
        let p = semantic[i * k + labels[i] as usize] / alpha[i].max(CE_EPS);
        -ln(p.clamp(CE_EPS, 1.0))
    }))
}

/// Weighted image terms for one rendered view.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImageLosses {
    pub mask: f64,
    pub normal: f64,
    pub depth: f64,
    pub semantic: f64,
    pub total: f64,
}

pub fn image_losses(pred: &RenderBuffers, reference: &ReferenceBuffers, w: &LossWeights) -> Result<ImageLosses> {
    w.validate()?;
    if (pred.width, pred.height) != (reference.width, reference.height) {
        return Err(Error::invalid("rendered and reference images differ in size"));
    }
    let mask = mask_loss(&pred.alpha, &reference.mask)?;
    let normal = normal_loss(&pred.normal, &reference.normal, &reference.mask)?;
    let depth = depth_loss(&pred.depth, &reference.depth, &reference.mask)?;
    let semantic = semantic_ce_loss(&pred.semantic, &pred.alpha, pred.labels, &reference.labels, &reference.mask)?;
    let total = w.lambda_mask * mask + w.lambda_normal * normal + w.lambda_depth * depth + w.lambda_sem * semantic;
    Ok(ImageLosses {
        mask,
        normal,
        depth,
        semantic,
        total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Mesh;
    use alloc::vec;

    #[test]
    fn hole_loss_closed_form() {
        let l = hole_loss_values([1, 1, 2], &[1.0, -0.5]).unwrap();
        assert!((l.value - 1.3132616875182228).abs() < 1e-15);
        assert!((l.gradient[0] - 0.7310585786300049).abs() < 1e-15);
        assert_eq!(l.gradient[1], 0.0);
    }

    #[test]
    fn hole_loss_empty_edge_sets() {
        for v in [vec![-1.0; 8], vec![1.0; 8]] {
            let l = hole_loss_values([2, 2, 2], &v).unwrap();
            assert_eq!(l.value, 0.0);
            assert!(l.gradient.iter().all(|&g| g == 0.0));
        }
        assert!(hole_loss_values([2, 2, 2], &[0.0; 7]).is_err());
    }

    #[test]
    fn collision_flat_patch_depth() {
        let inner = Mesh::new(
            vec![Vec3::new(-1.0, -1.0, 0.0), Vec3::new(1.0, -1.0, 0.0), Vec3::new(0.0, 1.0, 0.0), Vec3::ZERO],
            vec![[0, 1, 2]],
        )
        .unwrap()
        .with_normals(vec![Vec3::Z; 4])
        .unwrap();
        let outer = Mesh::new(vec![Vec3::new(0.0, 0.0, -0.1)], vec![]).unwrap();
        let (l, g) = collision_loss(&outer, &inner, Nearest::Vertex).unwrap();
        assert!((l - 0.001).abs() < 1e-15);
        assert!((g[0] - Vec3::new(0.0, 0.0, -0.03)).norm() < 1e-15);
        let (ls, _) = collision_loss(&outer, &inner, Nearest::Surface).unwrap();
        assert!((ls - 0.001).abs() < 1e-15);
        let touching = Mesh::new(vec![Vec3::ZERO], vec![]).unwrap();
        assert_eq!(collision_loss(&touching, &inner, Nearest::Vertex).unwrap().0, 0.0);
        let bare = Mesh::new(vec![Vec3::ZERO], vec![]).unwrap();
        assert!(collision_loss(&outer, &bare, Nearest::Vertex).is_err());
    }

    #[test]
    fn image_losses_basic_cases() {
        let a = [1.0, 1.0, 0.0, 0.0];
        assert_eq!(mask_loss(&a, &a).unwrap(), 0.0);
        assert_eq!(mask_loss(&a, &[1.0, 0.0, 1.0, 0.0]).unwrap(), 0.5);
        let n = [Vec3::Z; 4];
        let r = [Vec3::X; 4];
        assert_eq!(normal_loss(&n, &r, &a).unwrap(), 1.0);
        assert_eq!(normal_loss(&n, &n, &a).unwrap(), 0.0);
        assert_eq!(depth_loss(&[0.5; 4], &[0.25; 4], &a).unwrap(), 0.25);
        assert!(mask_loss(&a, &[0.0]).is_err());
    }

    #[test]
    fn semantic_ce_cases() {
        let uniform = [0.3, 0.3, 0.3];
        let ce = semantic_ce_loss(&uniform, &[0.9], 3, &[1], &[1.0]).unwrap();
        assert!((ce - 1.0986122886681098).abs() < 1e-12);
        let onehot = [0.0, 0.7, 0.0];
        assert_eq!(semantic_ce_loss(&onehot, &[0.7], 3, &[1], &[1.0]).unwrap(), 0.0);
        assert!(semantic_ce_loss(&onehot, &[0.7], 3, &[3], &[1.0]).is_err());
        // Two pixels: -(ln 0.5 + ln 0.25) / 2.
        let mixed = [0.5, 0.5, 0.0, 0.25, 0.75, 0.0];
        let ce = semantic_ce_loss(&mixed, &[1.0, 1.0], 3, &[0, 0], &[1.0, 1.0]).unwrap();
        assert!((ce - (2f64.ln() + 4f64.ln()) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn default_weights() {
        let w = LossWeights::default();
        assert_eq!(
            (w.lambda_lpips, w.lambda_mask, w.lambda_sem, w.lambda_depth, w.lambda_normal, w.lambda_dev, w.lambda_hole),
            (2.0, 1.0, 1.0, 0.5, 0.2, 0.5, 1e-4)
        );
        assert!(w.validate().is_ok());
    }
}
