use alloc::vec;
use alloc::vec::Vec;

use super::collision::{collision_loss_with, vertex_neighbors, CollisionTarget, Nearest};
use crate::error::{Error, Result};
use crate::math::{pairwise_sum, Vec3};
use crate::mesh::Mesh;

/// Collision loss below which the outer mesh counts as resolved.
pub const RESOLVED_LOSS: f64 = 1e-12;
/// Consecutive rejected steps reported as divergence.
pub const MAX_REJECTIONS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolveParams {
    /// Initial step size; grows by 1.5 after an accepted step and halves
    /// after a rejected one.
    pub step: f64,
    pub max_iters: usize,
    /// Weight of the Laplacian shape term.
    pub smooth_weight: f64,
    pub nearest: Nearest,
}

impl Default for ResolveParams {
    fn default() -> Self {
        ResolveParams {
            step: 0.1,
            max_iters: 500,
            smooth_weight: 1e-3,
            nearest: Nearest::Vertex,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResolveOutcome {
    pub mesh: Mesh,
    /// Attempted steps, accepted or not.
    pub iterations: usize,
    pub accepted: usize,
    /// Collision loss at the start and after every accepted step.
    pub loss_trace: Vec<f64>,
}

impl ResolveOutcome {
    pub fn final_loss(&self) -> f64 {
        *self.loss_trace.last().expect("trace starts with the initial loss")
    }
}

/// Uniform-Laplacian shape term `(1/n) sum_i |L_i(x) - L_i(x0)|^2` with
/// `L_i(x) = x_i - mean_{j in N(i)} x_j`. Zero at the input shape, so it
/// resists distortion without shrinking the mesh.
struct ShapeTerm {
    neighbors: Vec<Vec<u32>>,
    rest: Vec<Vec3>,
}

impl ShapeTerm {
    fn new(mesh: &Mesh) -> Self {
        let neighbors = vertex_neighbors(mesh);
        let mut t = ShapeTerm {
            neighbors,
            rest: Vec::new(),
        };
        t.rest = t.laplacian(mesh.positions());
        t
    }

    fn laplacian(&self, x: &[Vec3]) -> Vec<Vec3> {
        self.neighbors
            .iter()
            .enumerate()
            .map(|(i, nb)| {
                if nb.is_empty() {
                    return Vec3::ZERO;
                }
                let mut m = Vec3::ZERO;
                for &j in nb {
                    m += x[j as usize];
                }
                x[i] - m / nb.len() as f64
            })
            .collect()
    }

    fn eval(&self, x: &[Vec3]) -> (f64, Vec<Vec3>) {
        let n = x.len() as f64;
        let r: Vec<Vec3> = self.laplacian(x).iter().zip(&self.rest).map(|(&l, &l0)| l - l0).collect();
        let terms: Vec<f64> = r.iter().map(|v| v.norm_squared()).collect();
        let mut g = vec![Vec3::ZERO; x.len()];
        for (i, nb) in self.neighbors.iter().enumerate() {
            if nb.is_empty() {
                continue;
            }
            g[i] += r[i] * (2.0 / n);
            let share = r[i] * (2.0 / n / nb.len() as f64);
            for &j in nb {
                g[j as usize] -= share;
            }
        }
        (pairwise_sum(&terms) / n, g)
    }
}

/// Pushes `outer` out of `inner` by adaptive gradient descent on the
/// collision loss plus the weighted shape term.
///
/// A step is accepted only if the total objective decreases and the collision
/// loss does not increase, so accepted collision losses never rise. The input
/// mesh is not modified; vertex normals of the result are recomputed from its
/// faces when the input carried normals.
pub fn resolve_collisions(outer: &Mesh, inner: &Mesh, params: &ResolveParams) -> Result<ResolveOutcome> {
    if !(params.step > 0.0 && params.step.is_finite()) {
        return Err(Error::invalid("resolve step must be positive"));
    }
    if !(params.smooth_weight >= 0.0 && params.smooth_weight.is_finite()) {
        return Err(Error::invalid("smooth weight must be non-negative"));
    }
    let target = CollisionTarget::new(inner, params.nearest)?;
    let shape = ShapeTerm::new(outer);
    let w = params.smooth_weight;

    let mut x = outer.positions().to_vec();
    let (mut col, mut gcol, _) = collision_loss_with(&target, &x)?;
    let (mut smooth, mut gsm) = shape.eval(&x);
    let mut trace = vec![col];
    let mut step = params.step;
    let mut rejected = 0;
    let mut iterations = 0;
    let mut accepted = 0;

    while col >= RESOLVED_LOSS && iterations < params.max_iters {
        let g: Vec<Vec3> = gcol.iter().zip(&gsm).map(|(&a, &b)| a + b * w).collect();
        if g.iter().all(|v| *v == Vec3::ZERO) {
            break;
        }
        iterations += 1;
        let trial: Vec<Vec3> = x.iter().zip(&g).map(|(&p, &d)| p - d * step).collect();
        let (c2, gc2, _) = collision_loss_with(&target, &trial)?;
        let (s2, gs2) = shape.eval(&trial);
        if c2 + w * s2 < col + w * smooth && c2 <= col {
            x = trial;
            (col, gcol, smooth, gsm) = (c2, gc2, s2, gs2);
            trace.push(col);
            accepted += 1;
            rejected = 0;
            step *= 1.5;
        } else {
            rejected += 1;
            step *= 0.5;
            if rejected >= MAX_REJECTIONS {
                return Err(Error::Diverged {
                    iteration: iterations,
                    rejected,
                    trace,
                });
            }
        }
    }

    let mut mesh = outer.with_positions(x)?;
    if outer.normals().is_some() && accepted > 0 {
        mesh = mesh.with_face_normals();
    }
    Ok(ResolveOutcome {
        mesh,
        iterations,
        accepted,
        loss_trace: trace,
    })
}
