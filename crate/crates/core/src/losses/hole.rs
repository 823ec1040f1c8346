use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::grid::ScalarGrid;
use crate::math::{logistic, pairwise_sum, softplus};

/// Value and gradient of a scalar objective.
#[derive(Debug, Clone, PartialEq)]
pub struct LossGrad {
    pub value: f64,
    pub gradient: Vec<f64>,
}

/// Directed neighbor edges `(a, b)` with `f_a > 0` and `f_b < 0`, in order of
/// `a` and then of the neighbor offsets `-x, +x, -y, +y, -z, +z`.
pub fn hole_edges(resolution: [usize; 3], values: &[f64]) -> Vec<(usize, usize)> {
    let [nx, ny, nz] = resolution;
    let mut edges = Vec::new();
    for (a, &fa) in values.iter().enumerate() {
        if !(fa > 0.0) {
            continue;
        }
        let (i, j, k) = (a % nx, (a / nx) % ny, a / (nx * ny));
        let mut push = |b: usize| {
            if values[b] < 0.0 {
                edges.push((a, b));
            }
        };
        if i > 0 {
            push(a - 1);
        }
        if i + 1 < nx {
            push(a + 1);
        }
        if j > 0 {
            push(a - nx);
        }
        if j + 1 < ny {
            push(a + nx);
        }
        if k > 0 {
            push(a - nx * ny);
        }
        if k + 1 < nz {
            push(a + nx * ny);
        }
    }
    edges
}

/// Hole-filling regularizer on raw lattice values (any resolution of at
/// least one vertex per axis).
///
/// Every directed edge from a positive to a negative vertex contributes the
/// binary cross-entropy between `logistic(f_a)` and the target 0 given by the
/// negative endpoint, i.e. `-ln(1 - logistic(f_a)) = softplus(f_a)`. The
/// gradient with respect to `f_a` is `logistic(f_a)` per edge; the edge set is
/// held fixed.
pub fn hole_loss_values(resolution: [usize; 3], values: &[f64]) -> Result<LossGrad> {
    if resolution.iter().any(|&n| n == 0) || resolution.iter().product::<usize>() != values.len() {
        return Err(Error::invalid("hole loss: value count does not match the resolution"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("hole loss: grid values must be finite"));
    }
    let edges = hole_edges(resolution, values);
    let terms: Vec<f64> = edges.iter().map(|&(a, _)| softplus(values[a])).collect();
    let mut gradient = vec![0.0; values.len()];
    for &(a, _) in &edges {
        gradient[a] += logistic(values[a]);
    }
    Ok(LossGrad {
        value: pairwise_sum(&terms),
        gradient,
    })
}

pub fn hole_loss(grid: &ScalarGrid) -> Result<LossGrad> {
    hole_loss_values(grid.spec().resolution(), grid.values())
}
