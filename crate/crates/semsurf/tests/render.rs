//! Rendering of the demo scenes.

use semsurf::scene::{nested_character, CLOTH, SKIN};
use semsurf_core::render::{render_buffers, render_pixel_semantic, Camera, RenderMode};

fn dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    (0..3).map(|c| (a[c] - b[c]).powi(2)).sum::<f64>().sqrt()
}

/// Body mode looks through the nearer cloth shell: the center pixel is
/// opaque and reads as skin rather than cloth.
#[test]
fn body_mode_sees_through_the_cloth() {
    let scene = nested_character();
    let body = scene.labels().get("body").unwrap();
    let cam = Camera::new(0.0, 0.0, 65, 97).with_samples(512);
    let (color, alpha) = render_pixel_semantic(&cam.ray(32, 48), &scene, body).unwrap();
    assert!(alpha > 0.99, "{alpha}");
    let straight = color.map(|c| c / alpha);
    assert!(dist(straight, SKIN) < dist(straight, CLOTH), "{straight:?}");
    let cloth = scene.labels().get("cloth").unwrap();
    let (cc, ca) = render_pixel_semantic(&cam.ray(32, 48), &scene, cloth).unwrap();
    let straight = cc.map(|c| c / ca);
    assert!(dist(straight, CLOTH) < 0.05 && dist(straight, CLOTH) < dist(straight, SKIN), "{straight:?}");
}

#[test]
fn buffers_are_consistent() {
    let scene = nested_character();
    let cam = Camera::new(45.0, 15.0, 24, 32).with_samples(192);
    let b = render_buffers(&cam, &scene, &RenderMode::Holistic).unwrap();
    for i in 0..b.pixel_count() {
        let sum: f64 = b.semantic_at(i).iter().sum();
        assert!((sum - b.alpha[i]).abs() < 1e-9);
        assert!(b.depth[i] >= cam.near && b.depth[i] <= cam.far);
        if b.alpha[i] >= 0.5 {
            assert!((b.normal[i].norm() - 1.0).abs() < 1e-9);
            assert!(b.argmax[i] < 3);
        } else {
            assert_eq!(b.normal[i].norm(), 0.0);
        }
    }
    let labels = b.argmax.iter().filter(|&&l| l < 3).map(|&l| l as usize);
    let mut seen = [false; 3];
    labels.for_each(|l| seen[l] = true);
    assert!(seen[1] && seen[2], "{seen:?}");
}
