use alloc::vec::Vec;

use super::collision::{collision_loss_with, CollisionTarget, Nearest};
use super::hole::{hole_edges, hole_loss_values};
use crate::error::{Error, Result};
use crate::math::Vec3;
use crate::mesh::Mesh;

/// Guard in the relative-error denominator.
pub const REL_GUARD: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    /// Coordinate with the largest error, if any were checked.
    pub worst: Option<usize>,
    pub checked: usize,
    /// Coordinates whose perturbation changed a discrete selection.
    pub excluded: Vec<usize>,
}

/// Compares `grad` with central differences of `eval`. `eval` returns the
/// loss and a selection signature; a coordinate is skipped when either
/// perturbation changes the signature.
///
/// Relative error is `|a - n| / max(|a|, |n|, REL_GUARD)`.
pub fn finite_diff_check<S, F>(x: &[f64], grad: &[f64], eps: f64, eval: F) -> Result<GradCheckReport>
where
    S: PartialEq,
    F: Fn(&[f64]) -> (f64, S),
{
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::invalid("finite-difference step must be positive"));
    }
    if x.len() != grad.len() {
        return Err(Error::invalid("gradient length does not match the input"));
    }
    let (_, base) = eval(x);
    let mut probe = x.to_vec();
    let mut report = GradCheckReport {
        max_rel_err: 0.0,
        worst: None,
        checked: 0,
        excluded: Vec::new(),
    };
    for i in 0..x.len() {
        probe[i] = x[i] + eps;
        let (up, s_up) = eval(&probe);
        probe[i] = x[i] - eps;
        let (down, s_down) = eval(&probe);
        probe[i] = x[i];
        if s_up != base || s_down != base {
            report.excluded.push(i);
            continue;
        }
        let numeric = (up - down) / (2.0 * eps);
        let a = grad[i];
        let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(REL_GUARD);
        report.checked += 1;
        if report.worst.is_none() || err > report.max_rel_err {
            report.max_rel_err = err;
            report.worst = Some(i);
        }
    }
    Ok(report)
}

/// Gradient check of the hole loss on raw lattice values.
pub fn check_hole_loss(resolution: [usize; 3], values: &[f64], eps: f64) -> Result<GradCheckReport> {
    let analytic = hole_loss_values(resolution, values)?;
    finite_diff_check(values, &analytic.gradient, eps, |v| {
        let l = hole_loss_values(resolution, v).map(|l| l.value).unwrap_or(f64::NAN);
        (l, hole_edges(resolution, v))
    })
}

/// Gradient check of the collision loss with respect to the outer vertex
/// coordinates (flattened `x, y, z` per vertex).
pub fn check_collision_loss(outer: &Mesh, inner: &Mesh, mode: Nearest, eps: f64) -> Result<GradCheckReport> {
    let target = CollisionTarget::new(inner, mode)?;
    let (_, grad, _) = collision_loss_with(&target, outer.positions())?;
    let x: Vec<f64> = outer.positions().iter().flat_map(|p| p.to_array()).collect();
    let g: Vec<f64> = grad.iter().flat_map(|p| p.to_array()).collect();
    finite_diff_check(&x, &g, eps, |flat| {
        let pts: Vec<Vec3> = flat.chunks_exact(3).map(|c| Vec3::new(c[0], c[1], c[2])).collect();
        match collision_loss_with(&target, &pts) {
            Ok((l, _, contacts)) => {
                let sig: Vec<(usize, bool)> = contacts
                    .iter()
                    .zip(&pts)
                    .map(|(c, &p)| (c.index, c.depth(p) > 0.0))
                    .collect();
                (l, sig)
            }
            Err(_) => (f64::NAN, Vec::new()),
        }
    })
}
