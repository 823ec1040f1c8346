use proptest::prelude::*;

use semsurf_core::extract::marching_cubes;
use semsurf_core::grid::{CHARACTER_MAX, CHARACTER_MIN};
use semsurf_core::losses::{collision_loss, hole_loss_values, Nearest};
use semsurf_core::metrics::{chamfer_points, fscore_points, voxel_iou, ChamferConvention};
use semsurf_core::proposal::{dense_evaluate, propose_and_evaluate, ProposalConfig};
use semsurf_core::render::{render_pixel, render_pixel_semantic, render_pixel_set, Camera, Ray};
use semsurf_core::semantics::{equivalent_sdf, equivalent_sdf_set};
use semsurf_core::*;

const K: usize = 3;

fn simplex(k: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1.0, k).prop_filter_map("non-zero mass", |w| {
        let s: f64 = w.iter().sum();
        (s > 1e-6).then(|| w.iter().map(|v| v / s).collect())
    })
}

fn label(k: usize) -> impl Strategy<Value = SemanticLabel> {
    (0..k).prop_map(|i| SemanticLabel::new(i).unwrap())
}

fn rival(p: &[f64], s: usize) -> f64 {
    p.iter().enumerate().filter(|(r, _)| *r != s).map(|(_, v)| *v).fold(0.0, f64::max)
}

fn full_set(k: usize) -> SemanticSet {
    let labels: Vec<SemanticLabel> = (0..k).map(|i| SemanticLabel::new(i).unwrap()).collect();
    SemanticSet::new("all", &labels).unwrap()
}

fn sphere_scene(spheres: &[(Vec3, f64, usize)], beta_sem: f64) -> ImplicitScene {
    let labels = LabelRegistry::canonical();
    let prims = spheres
        .iter()
        .map(|&(c, r, l)| Primitive::new(Shape::Sphere { radius: r }, c, SemanticLabel::new(l).unwrap(), [0.5, 0.5, 0.5]))
        .collect();
    ImplicitScene::new("random", labels, prims, beta_sem, 0.02, 50.0).unwrap()
}

fn sphere_strategy() -> impl Strategy<Value = (Vec3, f64, usize)> {
    (-0.2f64..0.2, -0.2f64..0.2, -0.3f64..0.3, 0.12f64..0.25, 0usize..K)
        .prop_map(|(x, y, z, r, l)| (Vec3::new(x, y, z), r, l))
}

proptest! {
    #[test]
    fn hard_constraint_outside(f in 1e-12f64..10.0, p in simplex(K), s in label(K)) {
        prop_assert!(equivalent_sdf(f, &p, s).unwrap() >= f);
    }

    #[test]
    fn boundary_transit_is_zero(f in -10.0f64..-1e-12, a in 0.01f64..0.5, s in 0usize..K, r_off in 1usize..K) {
        let r = (s + r_off) % K;
        let mut p = vec![0.0; K];
        p[s] = a;
        p[r] = a;
        let rest = 1.0 - 2.0 * a;
        let other = (0..K).find(|i| *i != s && *i != r).unwrap();
        p[other] = rest.min(a);
        let sum: f64 = p.iter().sum();
        p.iter_mut().for_each(|v| *v /= sum);
        let lbl = SemanticLabel::new(s).unwrap();
        prop_assert_eq!(equivalent_sdf(f, &p, lbl).unwrap(), 0.0);
    }

    #[test]
    fn sign_away_from_transit(f in -10.0f64..-1e-12, p in simplex(K), s in label(K)) {
        let d = rival(&p, s.id()) - p[s.id()];
        prop_assume!(d.abs() > 1e-9);
        let e = equivalent_sdf(f, &p, s).unwrap();
        prop_assert_eq!(e > 0.0, d > 0.0);
        prop_assert!(e != 0.0);
    }

    #[test]
    fn zero_level_keeps_its_sign(p in simplex(K), s in label(K)) {
        let e = equivalent_sdf(0.0, &p, s).unwrap();
        let d = rival(&p, s.id()) - p[s.id()];
        prop_assume!(d.abs() > 1e-9);
        prop_assert!(e >= 0.0);
        prop_assert_eq!(e > 0.0, d > 0.0);
    }

    #[test]
    fn singleton_set_matches_single_label(f in -10.0f64..10.0, p in simplex(K), s in label(K)) {
        let set = SemanticSet::single("s", s);
        prop_assert_eq!(
            equivalent_sdf_set(f, &p, &set).unwrap().to_bits(),
            equivalent_sdf(f, &p, s).unwrap().to_bits()
        );
    }

    #[test]
    fn full_set_preserves_sign(f in -10.0f64..10.0, p in simplex(K)) {
        let e = equivalent_sdf_set(f, &p, &full_set(K)).unwrap();
        prop_assert_eq!(e.signum(), f.signum());
        prop_assert_eq!(equivalent_sdf_set(0.0, &p, &full_set(K)).unwrap(), 0.0);
    }

    #[test]
    fn monotone_in_f(f in -10.0f64..10.0, df in 0.0f64..5.0, p in simplex(K), s in label(K)) {
        prop_assert!(equivalent_sdf(f + df, &p, s).unwrap() >= equivalent_sdf(f, &p, s).unwrap());
    }

    #[test]
    fn monotone_in_own_probability(f in -1.0f64..1.0, p in simplex(K), s in label(K), from in 1usize..K, t in 0.0f64..1.0) {
        let r = (s.id() + from) % K;
        let mut q = p.clone();
        let moved = p[r] * t;
        q[r] -= moved;
        q[s.id()] += moved;
        prop_assert!(equivalent_sdf(f, &q, s).unwrap() <= equivalent_sdf(f, &p, s).unwrap() + 1e-15);
    }

    #[test]
    fn set_equivalent_is_bounded_by_members(f in -10.0f64..10.0, p in simplex(K), mask in 1u8..7) {
        let members: Vec<SemanticLabel> = (0..K).filter(|i| mask & (1 << i) != 0).map(|i| SemanticLabel::new(i).unwrap()).collect();
        let set = SemanticSet::new("p", &members).unwrap();
        let e = equivalent_sdf_set(f, &p, &set).unwrap();
        // A set is carved no more than any of its members.
        let best_member = members.iter().map(|&m| equivalent_sdf(f, &p, m).unwrap()).fold(f64::INFINITY, f64::min);
        prop_assert!(e <= best_member + 1e-15);
        prop_assert!(e >= f);
    }

    #[test]
    fn field_samples_are_valid_and_pure(spheres in prop::collection::vec(sphere_strategy(), 1..4), x in -0.6f64..0.6, y in -0.6f64..0.6, z in -0.8f64..0.8) {
        let scene = sphere_scene(&spheres, 0.05);
        let p = Vec3::new(x, y, z);
        let a = scene.sample(p).unwrap();
        prop_assert!(a.is_valid());
        let b = scene.sample(p).unwrap();
        prop_assert_eq!(a.sdf.to_bits(), b.sdf.to_bits());
        prop_assert_eq!(a.sem_probs.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.sem_probs.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    }

    #[test]
    fn density_non_increasing_in_sdf(a in -1.0f64..1.0, b in -1.0f64..1.0) {
        let scene = sphere_scene(&[(Vec3::ZERO, 0.2, 0)], 0.05);
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(scene.density_of(lo) >= scene.density_of(hi));
        prop_assert!(scene.density_of(hi) >= 0.0);
    }
}

fn mesh_sign_key(m: &Mesh) -> (Vec<[u64; 3]>, Vec<[u32; 3]>) {
    (m.positions().iter().map(|p| p.to_array().map(f64::to_bits)).collect(), m.triangles().to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn sparse_matches_dense_on_resolvable_spheres(c in sphere_strategy(), s in 0usize..K) {
        // One sphere per label keeps every feature at least two coarse cells wide.
        let (center, radius, _) = c;
        let scene = sphere_scene(&[(center, radius.max(0.18), s)], 0.05);
        let fine = GridSpec::new([41, 41, 61], CHARACTER_MIN, CHARACTER_MAX).unwrap();
        let set = SemanticSet::single("s", SemanticLabel::new(s).unwrap());
        let dense = dense_evaluate(&scene, &set, fine).unwrap();
        let (sparse, stats) = propose_and_evaluate(&scene, &set, fine, &ProposalConfig::for_fine(&fine)).unwrap();
        let res = fine.resolution();
        // Coverage: both endpoints of every sign-changing fine edge are active.
        let active: std::collections::HashSet<usize> = sparse.indices().iter().copied().collect();
        for k in 0..res[2] {
            for j in 0..res[1] {
                for i in 0..res[0] {
                    let a = fine.index(i, j, k);
                    for (di, dj, dk) in [(1, 0, 0), (0, 1, 0), (0, 0, 1)] {
                        if i + di >= res[0] || j + dj >= res[1] || k + dk >= res[2] {
                            continue;
                        }
                        let b = fine.index(i + di, j + dj, k + dk);
                        if (dense.values()[a] < 0.0) != (dense.values()[b] < 0.0) {
                            prop_assert!(active.contains(&a) && active.contains(&b));
                        }
                    }
                }
            }
        }
        for (&idx, &v) in sparse.indices().iter().zip(sparse.values()) {
            prop_assert_eq!(v.to_bits(), dense.values()[idx].to_bits());
        }
        prop_assert_eq!(stats.dense_evaluations, fine.vertex_count());
        let a = marching_cubes(&dense, 0.0, None).unwrap();
        let b = marching_cubes(&sparse, 0.0, None).unwrap();
        prop_assert_eq!(mesh_sign_key(&a), mesh_sign_key(&b));
    }

    #[test]
    fn extracted_spheres_are_closed_and_on_the_level_set(r in 0.15f64..0.4, x in -0.05f64..0.05) {
        let spec = GridSpec::cube(33, -0.5, 0.5).unwrap();
        let c = Vec3::new(x, 0.0, 0.0);
        let grid = ScalarGrid::from_fn(spec, |p| (p - c).norm() - r);
        let m = marching_cubes(&grid, 0.0, None).unwrap();
        prop_assert!(m.is_closed());
        let h = spec.cell_diagonal();
        for p in m.positions() {
            prop_assert!(((*p - c).norm() - r).abs() < h);
        }
        // Outward orientation: positive signed volume.
        let vol: f64 = (0..m.triangle_count()).map(|t| {
            let [a, b, cc] = m.corners(t);
            a.dot(b.cross(cc)) / 6.0
        }).sum();
        prop_assert!(vol > 0.0);
    }
}

fn camera_ray(scene_extent: f64, az: f64, el: f64, px: usize, py: usize, n: usize) -> Ray {
    let mut cam = Camera::new(az, el, 16, 16).with_samples(n);
    cam.half_extent = scene_extent;
    cam.ray(px, py)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn render_identities(spheres in prop::collection::vec(sphere_strategy(), 1..4), az in 0.0f64..360.0, el in -60.0f64..60.0, px in 0usize..16, py in 0usize..16) {
        let scene = sphere_scene(&spheres, 0.05);
        let ray = camera_ray(0.8, az, el, px, py, 96);
        let (c, a) = render_pixel(&ray, &scene);
        prop_assert!((0.0..=1.0).contains(&a));
        let (cf, sf, af) = render_pixel_set(&ray, &scene, &full_set(K)).unwrap();
        prop_assert!((af - a).abs() <= 1e-6);
        for ch in 0..3 {
            prop_assert!((cf[ch] - c[ch]).abs() <= 1e-6);
        }
        let s_total: f64 = sf.iter().sum();
        prop_assert!((s_total - af).abs() <= 1e-9);
        for s in 0..K {
            let lbl = SemanticLabel::new(s).unwrap();
            let (c1, a1) = render_pixel_semantic(&ray, &scene, lbl).unwrap();
            let (c2, _, a2) = render_pixel_set(&ray, &scene, &SemanticSet::single("s", lbl)).unwrap();
            prop_assert_eq!(a1.to_bits(), a2.to_bits());
            prop_assert_eq!(c1.map(f64::to_bits), c2.map(f64::to_bits));
            prop_assert!((0.0..=1.0).contains(&a1));
        }
    }

    #[test]
    fn layer_and_complement_cover_the_whole(spheres in prop::collection::vec(sphere_strategy(), 1..4), az in 0.0f64..360.0, px in 0usize..16, py in 0usize..16, mask in 1u8..7) {
        let scene = sphere_scene(&spheres, 0.05);
        let ray = camera_ray(0.8, az, 0.0, px, py, 96);
        let inside: Vec<SemanticLabel> = (0..K).filter(|i| mask & (1 << i) != 0).map(|i| SemanticLabel::new(i).unwrap()).collect();
        let outside: Vec<SemanticLabel> = (0..K).filter(|i| mask & (1 << i) == 0).map(|i| SemanticLabel::new(i).unwrap()).collect();
        let (_, _, af) = render_pixel_set(&ray, &scene, &full_set(K)).unwrap();
        let (_, _, ap) = render_pixel_set(&ray, &scene, &SemanticSet::new("p", &inside).unwrap()).unwrap();
        let aq = if outside.is_empty() { 0.0 } else { render_pixel_set(&ray, &scene, &SemanticSet::new("q", &outside).unwrap()).unwrap().2 };
        prop_assert!(ap + aq >= af - 1e-3);
    }

    #[test]
    fn transmittance_never_increases(spheres in prop::collection::vec(sphere_strategy(), 1..4), az in 0.0f64..360.0, px in 0usize..16, py in 0usize..16) {
        let scene = sphere_scene(&spheres, 0.05);
        let full = camera_ray(0.8, az, 0.0, px, py, 64);
        let delta = full.delta();
        let mut prev = 0.0;
        // Truncated rays share the first m samples of the full ray.
        for m in 1..=full.samples {
            let mut r = full;
            r.samples = m;
            r.far = r.near + delta * m as f64;
            let (_, a) = render_pixel(&r, &scene);
            prop_assert!(a >= prev && a <= 1.0);
            prev = a;
        }
    }
}

fn point_cloud() -> impl Strategy<Value = Vec<Vec3>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0).prop_map(|(x, y, z)| Vec3::new(x, y, z)), 1..40)
}

proptest! {
    #[test]
    fn chamfer_is_symmetric_and_non_negative(a in point_cloud(), b in point_cloud()) {
        for conv in [ChamferConvention::Squared, ChamferConvention::Unsquared] {
            let ab = chamfer_points(&a, &b, conv).unwrap();
            let ba = chamfer_points(&b, &a, conv).unwrap();
            prop_assert!(ab >= 0.0);
            prop_assert!((ab - ba).abs() <= 1e-12 * ab.max(1.0));
            prop_assert_eq!(chamfer_points(&a, &a, conv).unwrap(), 0.0);
        }
    }

    #[test]
    fn fscore_in_unit_interval(a in point_cloud(), b in point_cloud(), tau in 0.0f64..2.0) {
        let f = fscore_points(&a, &b, tau).unwrap();
        prop_assert!((0.0..=1.0).contains(&f));
        prop_assert_eq!(fscore_points(&a, &a, tau).unwrap(), 1.0);
    }

    #[test]
    fn hole_loss_is_non_negative_with_non_negative_gradient(values in prop::collection::vec(-1.0f64..1.0, 27)) {
        let l = hole_loss_values([3, 3, 3], &values).unwrap();
        prop_assert!(l.value >= 0.0);
        prop_assert!(l.gradient.iter().all(|&g| g >= 0.0));
        for (g, v) in l.gradient.iter().zip(&values) {
            if *v <= 0.0 {
                prop_assert_eq!(*g, 0.0);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn voxel_iou_symmetric_in_unit_interval(ax in -0.5f64..0.5, ar in 0.2f64..0.6, bx in -0.5f64..0.5, br in 0.2f64..0.6) {
        let a = Mesh::icosphere(Vec3::new(ax, 0.0, 0.0), ar, 2).unwrap();
        let b = Mesh::icosphere(Vec3::new(bx, 0.1, 0.0), br, 2).unwrap();
        let ab = voxel_iou(&a, &b, 1.0 / 32.0).unwrap();
        let ba = voxel_iou(&b, &a, 1.0 / 32.0).unwrap();
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert_eq!(ab, ba);
    }

    #[test]
    fn collision_loss_vanishes_outside(r in 0.31f64..0.6, subdiv in 1u32..3) {
        let inner = Mesh::icosphere(Vec3::ZERO, 0.3, 2).unwrap();
        let outer = Mesh::icosphere(Vec3::ZERO, r, subdiv).unwrap();
        let (l, g) = collision_loss(&outer, &inner, Nearest::Vertex).unwrap();
        prop_assert_eq!(l, 0.0);
        prop_assert!(g.iter().all(|v| *v == Vec3::ZERO));
        let (ls, _) = collision_loss(&outer, &inner, Nearest::Surface).unwrap();
        prop_assert_eq!(ls, 0.0);
    }
}
