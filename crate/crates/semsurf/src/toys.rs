//! Seeded toy inputs for gradient checks and collision resolution.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use semsurf_core::{Mesh, Vec3};

/// Values uniform in `[-1, 1)` on a `res^3` lattice.
pub fn random_grid_values(res: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..res * res * res).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// Inner icosphere of radius 0.3 and an outer point cloud of `n` vertices at
/// random directions. Radii are drawn from `[0.22, 0.28]` (penetrating) or
/// `[0.32, 0.38]` (clear), which keeps every penetration depth at least a
/// centimeter away from the zero kink.
pub fn collision_pair(n: usize, seed: u64) -> (Mesh, Mesh) {
    let inner = Mesh::icosphere(Vec3::ZERO, 0.3, 2).expect("valid icosphere");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = (0..n)
        .map(|_| {
            let dir = loop {
                let v = Vec3::new(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                );
                let l = v.norm();
                if l > 1e-3 && l <= 1.0 {
                    break v / l;
                }
            };
            let r = if rng.random_bool(0.5) {
                rng.random_range(0.22..0.28)
            } else {
                rng.random_range(0.32..0.38)
            };
            dir * r
        })
        .collect();
    let outer = Mesh::new(points, Vec::new()).expect("point mesh");
    (outer, inner)
}

/// Concentric penetrating spheres: an outer garment of radius 0.28 inside an
/// inner body of radius 0.30.
pub fn penetrating_spheres() -> (Mesh, Mesh) {
    (
        Mesh::icosphere(Vec3::ZERO, 0.28, 3).expect("valid icosphere"),
        Mesh::icosphere(Vec3::ZERO, 0.30, 4).expect("valid icosphere"),
    )
}
