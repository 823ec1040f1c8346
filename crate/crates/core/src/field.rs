//! Joint implicit fields: signed distance, density, color and semantic
//! probabilities at every point.
//!
//! [`ImplicitScene`] composes labeled analytic primitives. Its signed distance
//! is the union (minimum) of the primitive distances; the semantic
//! distribution is a temperature softmax over `-sdf_i / beta_sem` aggregated
//! per label; density follows `sigma_max * logistic(-sdf / beta_den)`; color is
//! the color of the closest primitive (lowest index on ties).

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use arrayvec::ArrayVec;

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::math::{self, Rotation, Vec3};
use crate::par;

/// Largest supported label registry.
pub const MAX_LABELS: usize = 16;

/// Per-label probabilities, one entry per registry label.
pub type SemProbs = ArrayVec<f64, MAX_LABELS>;

pub const DEFAULT_BETA_SEM: f64 = 0.05;
pub const DEFAULT_BETA_DEN: f64 = 0.02;
pub const DEFAULT_SIGMA_MAX: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SemanticLabel(u8);

impl SemanticLabel {
    pub fn new(id: usize) -> Result<Self> {
        if id >= MAX_LABELS {
            return Err(Error::invalid(alloc::format!(
                "label id {id} exceeds the maximum of {MAX_LABELS} labels"
            )));
        }
        Ok(SemanticLabel(id as u8))
    }

    #[inline]
    pub fn id(self) -> usize {
        self.0 as usize
    }
}

/// Ordered, duplicate-free label names. A label's id is its position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelRegistry {
    names: Vec<String>,
}

impl LabelRegistry {
    pub fn new<I, S>(names: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if names.is_empty() {
            return Err(Error::invalid("label registry must hold at least one label"));
        }
        if names.len() > MAX_LABELS {
            return Err(Error::invalid(alloc::format!(
                "{} labels exceed the maximum of {MAX_LABELS}",
                names.len()
            )));
        }
        for (i, n) in names.iter().enumerate() {
            if n.is_empty() {
                return Err(Error::invalid("label names must be non-empty"));
            }
            if names[..i].contains(n) {
                return Err(Error::invalid(alloc::format!("duplicate label name `{n}`")));
            }
        }
        Ok(LabelRegistry { names })
    }

    /// The canonical `body`, `cloth`, `hair` registry.
    pub fn canonical() -> Self {
        LabelRegistry::new(["body", "cloth", "hair"]).expect("canonical labels are valid")
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn get(&self, name: &str) -> Option<SemanticLabel> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| SemanticLabel(i as u8))
    }

    pub fn name(&self, label: SemanticLabel) -> Option<&str> {
        self.names.get(label.id()).map(String::as_str)
    }

    pub fn contains(&self, label: SemanticLabel) -> bool {
        label.id() < self.names.len()
    }

    pub fn labels(&self) -> impl Iterator<Item = SemanticLabel> + '_ {
        (0..self.names.len()).map(|i| SemanticLabel(i as u8))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldSample {
    pub sdf: f64,
    pub density: f64,
    pub color: [f64; 3],
    pub sem_probs: SemProbs,
}

impl FieldSample {
    /// Checks the sample invariants: finite values, non-negative density,
    /// colors in `[0, 1]`, probabilities on the simplex within `1e-9`.
    pub fn is_valid(&self) -> bool {
        let sum: f64 = self.sem_probs.iter().sum();
        self.sdf.is_finite()
            && self.density.is_finite()
            && self.density >= 0.0
            && self.color.iter().all(|c| (0.0..=1.0).contains(c))
            && self.sem_probs.iter().all(|p| p.is_finite() && *p >= 0.0)
            && (sum - 1.0).abs() <= 1e-9
    }
}

/// Anything that can be sampled as a joint field.
pub trait Field: Sync {
    fn label_count(&self) -> usize;

    /// Samples every channel at `x`. Callers guarantee `x` is finite.
    fn eval(&self, x: Vec3) -> FieldSample;

    fn sdf(&self, x: Vec3) -> f64 {
        self.eval(x).sdf
    }

    /// Signed distance at `x`, writing the semantic distribution into `probs`
    /// (`probs.len() == label_count()`).
    fn sdf_probs(&self, x: Vec3, probs: &mut [f64]) -> f64 {
        let s = self.eval(x);
        probs.copy_from_slice(&s.sem_probs);
        s.sdf
    }

    /// Central-difference gradient of the signed distance.
    fn sdf_gradient(&self, x: Vec3, h: f64) -> Vec3 {
        let dx = self.sdf(x + Vec3::X * h) - self.sdf(x - Vec3::X * h);
        let dy = self.sdf(x + Vec3::Y * h) - self.sdf(x - Vec3::Y * h);
        let dz = self.sdf(x + Vec3::Z * h) - self.sdf(x - Vec3::Z * h);
        Vec3::new(dx, dy, dz) / (2.0 * h)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    Sphere { radius: f64 },
    /// Axis-aligned box in the local frame.
    Box { half_extents: Vec3 },
    /// Segment from `-half_length` to `+half_length` along local z, swept by `radius`.
    Capsule { radius: f64, half_length: f64 },
    /// Ring in the local xy plane.
    Torus { major_radius: f64, minor_radius: f64 },
}

impl Shape {
    fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        let valid = match *self {
            Shape::Sphere { radius } => ok(radius),
            Shape::Box { half_extents: h } => ok(h.x) && ok(h.y) && ok(h.z),
            Shape::Capsule {
                radius,
                half_length,
            } => ok(radius) && ok(half_length),
            Shape::Torus {
                major_radius,
                minor_radius,
            } => ok(major_radius) && ok(minor_radius),
        };
        if valid {
            Ok(())
        } else {
            Err(Error::invalid(alloc::format!(
                "shape parameters must be finite and strictly positive: {self:?}"
            )))
        }
    }

    /// Exact signed distance in the shape's local frame.
    #[inline]
    pub fn sdf(&self, p: Vec3) -> f64 {
        match *self {
            Shape::Sphere { radius } => p.norm() - radius,
            Shape::Box { half_extents } => {
                let q = p.abs() - half_extents;
                q.component_max(Vec3::ZERO).norm() + q.max_elem().min(0.0)
            }
            Shape::Capsule {
                radius,
                half_length,
            } => {
                let z = p.z.clamp(-half_length, half_length);
                Vec3::new(p.x, p.y, p.z - z).norm() - radius
            }
            Shape::Torus {
                major_radius,
                minor_radius,
            } => {
                let ring = math::sqrt(p.x * p.x + p.y * p.y) - major_radius;
                math::sqrt(ring * ring + p.z * p.z) - minor_radius
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Primitive {
    pub shape: Shape,
    pub center: Vec3,
    pub rotation: Rotation,
    /// Hollows the shape into a shell of this half-thickness around its
    /// surface: `|sdf| - shell`.
    pub shell: Option<f64>,
    pub label: SemanticLabel,
    pub color: [f64; 3],
}

impl Primitive {
    pub fn new(shape: Shape, center: Vec3, label: SemanticLabel, color: [f64; 3]) -> Self {
        Primitive {
            shape,
            center,
            rotation: Rotation::IDENTITY,
            shell: None,
            label,
            color,
        }
    }

    pub fn with_rotation(mut self, rotation: Rotation) -> Self {
        self.rotation = rotation;
        self
    }

    pub fn with_shell(mut self, half_thickness: f64) -> Self {
        self.shell = Some(half_thickness);
        self
    }

    #[inline]
    pub fn sdf(&self, x: Vec3) -> f64 {
        let local = self.rotation.inverse_rotate(x - self.center);
        let d = self.shape.sdf(local);
        match self.shell {
            Some(t) => d.abs() - t,
            None => d,
        }
    }

    fn validate(&self, labels: &LabelRegistry) -> Result<()> {
        self.shape.validate()?;
        if !self.center.is_finite() {
            return Err(Error::invalid("primitive center must be finite"));
        }
        if let Some(t) = self.shell {
            if !(t.is_finite() && t > 0.0) {
                return Err(Error::invalid("shell half-thickness must be strictly positive"));
            }
        }
        if !labels.contains(self.label) {
            return Err(Error::invalid(alloc::format!(
                "primitive label id {} is not in the registry of {} labels",
                self.label.id(),
                labels.len()
            )));
        }
        if !self.color.iter().all(|c| (0.0..=1.0).contains(c)) {
            return Err(Error::invalid("primitive colors must lie in [0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImplicitScene {
    name: String,
    labels: LabelRegistry,
    primitives: Vec<Primitive>,
    beta_sem: f64,
    beta_den: f64,
    sigma_max: f64,
}

impl ImplicitScene {
    pub fn new(
        name: impl Into<String>,
        labels: LabelRegistry,
        primitives: Vec<Primitive>,
        beta_sem: f64,
        beta_den: f64,
        sigma_max: f64,
    ) -> Result<Self> {
        if primitives.is_empty() {
            return Err(Error::invalid("a scene needs at least one primitive"));
        }
        if !(beta_sem.is_finite() && beta_sem > 0.0) {
            return Err(Error::invalid("beta_sem must be strictly positive"));
        }
        if !(beta_den.is_finite() && beta_den > 0.0) {
            return Err(Error::invalid("beta_den must be strictly positive"));
        }
        if !(sigma_max.is_finite() && sigma_max >= 0.0) {
            return Err(Error::invalid("sigma_max must be non-negative"));
        }
        for p in &primitives {
            p.validate(&labels)?;
        }
        Ok(ImplicitScene {
            name: name.into(),
            labels,
            primitives,
            beta_sem,
            beta_den,
            sigma_max,
        })
    }

    /// Scene with the default temperatures and peak density.
    pub fn with_defaults(
        name: impl Into<String>,
        labels: LabelRegistry,
        primitives: Vec<Primitive>,
    ) -> Result<Self> {
        ImplicitScene::new(
            name,
            labels,
            primitives,
            DEFAULT_BETA_SEM,
            DEFAULT_BETA_DEN,
            DEFAULT_SIGMA_MAX,
        )
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn labels(&self) -> &LabelRegistry {
        &self.labels
    }

    pub fn primitives(&self) -> &[Primitive] {
        &self.primitives
    }

    pub fn beta_sem(&self) -> f64 {
        self.beta_sem
    }

    pub fn beta_den(&self) -> f64 {
        self.beta_den
    }

    pub fn sigma_max(&self) -> f64 {
        self.sigma_max
    }

    /// Samples the joint field, rejecting non-finite points.
    pub fn sample(&self, x: Vec3) -> Result<FieldSample> {
        if !x.is_finite() {
            return Err(Error::invalid(alloc::format!(
                "sample point ({}, {}, {}) is not finite",
                x.x,
                x.y,
                x.z
            )));
        }
        Ok(self.eval(x))
    }

    #[inline]
    pub fn density_of(&self, sdf: f64) -> f64 {
        self.sigma_max * math::logistic(-sdf / self.beta_den)
    }

    /// Core evaluation: fills per-primitive distances into `dist`, returns
    /// (min distance, argmin index) and writes probabilities into `probs`.
    #[inline]
    fn eval_into(&self, x: Vec3, dist: &mut [f64], probs: &mut [f64]) -> (f64, usize) {
        let mut best = f64::INFINITY;
        let mut arg = 0;
        for (i, (p, d)) in self.primitives.iter().zip(dist.iter_mut()).enumerate() {
            *d = p.sdf(x);
            if *d < best {
                best = *d;
                arg = i;
            }
        }
        probs.iter_mut().for_each(|v| *v = 0.0);
        let inv_t = 1.0 / self.beta_sem;
        let mut total = 0.0;
        for (p, &d) in self.primitives.iter().zip(dist.iter()) {
            let w = math::exp(-(d - best) * inv_t);
            probs[p.label.id()] += w;
            total += w;
        }
        for v in probs.iter_mut() {
            *v /= total;
        }
        (best, arg)
    }

    fn with_scratch<R>(&self, f: impl FnOnce(&mut [f64]) -> R) -> R {
        let n = self.primitives.len();
        if n <= 32 {
            let mut stack = [0.0f64; 32];
            f(&mut stack[..n])
        } else {
            let mut heap = vec![0.0; n];
            f(&mut heap)
        }
    }
}

impl Field for ImplicitScene {
    fn label_count(&self) -> usize {
        self.labels.len()
    }

    fn eval(&self, x: Vec3) -> FieldSample {
        let mut probs = SemProbs::new();
        for _ in 0..self.labels.len() {
            probs.push(0.0);
        }
        let (sdf, arg) = self.with_scratch(|dist| self.eval_into(x, dist, &mut probs));
        FieldSample {
            sdf,
            density: self.density_of(sdf),
            color: self.primitives[arg].color,
            sem_probs: probs,
        }
    }

    fn sdf(&self, x: Vec3) -> f64 {
        self.primitives
            .iter()
            .map(|p| p.sdf(x))
            .fold(f64::INFINITY, f64::min)
    }

    fn sdf_probs(&self, x: Vec3, probs: &mut [f64]) -> f64 {
        self.with_scratch(|dist| self.eval_into(x, dist, probs)).0
    }
}

/// Field samples stored on a lattice and read back by trilinear interpolation.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    spec: GridSpec,
    label_count: usize,
    samples: Vec<FieldSample>,
}

/// Default byte budget for dense sample grids (2 GiB).
pub const DEFAULT_MEMORY_BUDGET: usize = 2 << 30;

impl GridField {
    pub fn new(spec: GridSpec, samples: Vec<FieldSample>) -> Result<Self> {
        if samples.len() != spec.vertex_count() {
            return Err(Error::invalid(alloc::format!(
                "grid needs {} samples, got {}",
                spec.vertex_count(),
                samples.len()
            )));
        }
        let label_count = samples[0].sem_probs.len();
        if samples.iter().any(|s| s.sem_probs.len() != label_count) {
            return Err(Error::invalid("all samples must carry the same label count"));
        }
        Ok(GridField {
            spec,
            label_count,
            samples,
        })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn label_count(&self) -> usize {
        self.label_count
    }

    pub fn samples(&self) -> &[FieldSample] {
        &self.samples
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize, k: usize) -> &FieldSample {
        &self.samples[self.spec.index(i, j, k)]
    }

    /// Trilinear interpolation of every channel; probabilities are
    /// renormalized to sum to one afterwards.
    pub fn sample(&self, x: Vec3) -> Result<FieldSample> {
        if !x.is_finite() || !self.spec.contains(x) {
            return Err(Error::OutOfDomain {
                x: x.x,
                y: x.y,
                z: x.z,
            });
        }
        let res = self.spec.resolution();
        let min = self.spec.min();
        let h = self.spec.spacing();
        let mut base = [0usize; 3];
        let mut frac = [0.0f64; 3];
        for a in 0..3 {
            let u = (x[a] - min[a]) / h[a];
            let c = (math::floor(u) as usize).min(res[a] - 2);
            base[a] = c;
            frac[a] = (u - c as f64).clamp(0.0, 1.0);
        }
        let mut out = FieldSample {
            sdf: 0.0,
            density: 0.0,
            color: [0.0; 3],
            sem_probs: (0..self.label_count).map(|_| 0.0).collect(),
        };
        for corner in 0..8 {
            let (di, dj, dk) = (corner & 1, (corner >> 1) & 1, (corner >> 2) & 1);
            let w = weight(frac[0], di) * weight(frac[1], dj) * weight(frac[2], dk);
            if w == 0.0 {
                continue;
            }
            let s = self.at(base[0] + di, base[1] + dj, base[2] + dk);
            out.sdf += w * s.sdf;
            out.density += w * s.density;
            for c in 0..3 {
                out.color[c] += w * s.color[c];
            }
            for (o, p) in out.sem_probs.iter_mut().zip(s.sem_probs.iter()) {
                *o += w * p;
            }
        }
        let total: f64 = out.sem_probs.iter().sum();
        if total > 0.0 {
            out.sem_probs.iter_mut().for_each(|p| *p /= total);
        }
        out.color.iter_mut().for_each(|c| *c = c.clamp(0.0, 1.0));
        Ok(out)
    }
}

#[inline]
fn weight(t: f64, side: usize) -> f64 {
    if side == 0 {
        1.0 - t
    } else {
        t
    }
}

/// Samples `field` at every lattice vertex, refusing grids whose sample
/// storage would exceed `budget_bytes`.
pub fn sample_grid_dense<F: Field + ?Sized>(
    field: &F,
    spec: GridSpec,
    budget_bytes: usize,
) -> Result<GridField> {
    let required = spec
        .vertex_count()
        .checked_mul(core::mem::size_of::<FieldSample>())
        .unwrap_or(usize::MAX);
    if required > budget_bytes {
        return Err(Error::Resource {
            what: "dense sample grid",
            required,
            budget: budget_bytes,
        });
    }
    let samples = par::map_blocks(spec.vertex_count(), 2048, |range, out| {
        out.extend(range.map(|idx| field.eval(spec.position_of(idx))));
    });
    GridField::new(spec, samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn label(i: usize) -> SemanticLabel {
        SemanticLabel::new(i).unwrap()
    }

    fn unit_sphere_scene() -> ImplicitScene {
        ImplicitScene::with_defaults(
            "sphere",
            LabelRegistry::canonical(),
            vec![Primitive::new(
                Shape::Sphere { radius: 0.5 },
                Vec3::ZERO,
                label(0),
                [1.0, 0.0, 0.0],
            )],
        )
        .unwrap()
    }

    fn two_spheres(beta_sem: f64) -> ImplicitScene {
        ImplicitScene::new(
            "two",
            LabelRegistry::new(["body", "cloth"]).unwrap(),
            vec![
                Primitive::new(
                    Shape::Sphere { radius: 0.5 },
                    Vec3::new(-0.3, 0.0, 0.0),
                    label(0),
                    [1.0, 0.0, 0.0],
                ),
                Primitive::new(
                    Shape::Sphere { radius: 0.5 },
                    Vec3::new(0.3, 0.0, 0.0),
                    label(1),
                    [0.0, 0.0, 1.0],
                ),
            ],
            beta_sem,
            DEFAULT_BETA_DEN,
            DEFAULT_SIGMA_MAX,
        )
        .unwrap()
    }

    #[test]
    fn sphere_center_and_surface() {
        let s = unit_sphere_scene();
        assert_eq!(s.sample(Vec3::ZERO).unwrap().sdf, -0.5);
        assert_eq!(s.sample(Vec3::new(0.5, 0.0, 0.0)).unwrap().sdf, 0.0);
    }

    #[test]
    fn non_finite_point_is_rejected() {
        let s = unit_sphere_scene();
        assert!(matches!(
            s.sample(Vec3::new(f64::NAN, 0.0, 0.0)),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn symmetric_point_splits_probability_evenly() {
        let s = two_spheres(0.1);
        let p = s.sample(Vec3::ZERO).unwrap().sem_probs;
        assert_eq!(p.as_slice(), &[0.5, 0.5]);
    }

    #[test]
    fn off_center_probabilities_match_hand_softmax() {
        // f_body = |(0.5,0,0)| - 0.5 = 0, f_cloth = 0.1 - 0.5 = -0.4, beta = 0.1:
        // weights e^{0} and e^{4} relative to the minimum.
        let s = two_spheres(0.1);
        let x = Vec3::new(0.2, 0.0, 0.0);
        let sample = s.sample(x).unwrap();
        let f_body: f64 = 0.0;
        let f_cloth: f64 = -0.4;
        let wb = libm::exp(-f_body / 0.1);
        let wc = libm::exp(-f_cloth / 0.1);
        let expect = [wb / (wb + wc), wc / (wb + wc)];
        assert!((sample.sem_probs[0] - expect[0]).abs() < 1e-12);
        assert!((sample.sem_probs[1] - expect[1]).abs() < 1e-12);
        assert!((sample.sem_probs[0] - 0.01798620996209156).abs() < 1e-12);
        assert_eq!(sample.color, [0.0, 0.0, 1.0]);
        assert!((sample.sdf + 0.4).abs() < 1e-15);
    }

    #[test]
    fn color_tie_goes_to_lowest_index() {
        let s = two_spheres(0.1);
        assert_eq!(s.sample(Vec3::ZERO).unwrap().color, [1.0, 0.0, 0.0]);
    }

    #[test]
    fn samples_are_valid_and_pure() {
        let s = two_spheres(0.05);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..2000 {
            let x = Vec3::new(
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
            );
            let a = s.sample(x).unwrap();
            assert!(a.is_valid(), "{a:?}");
            let b = s.sample(x).unwrap();
            assert_eq!(a.sdf.to_bits(), b.sdf.to_bits());
            assert_eq!(a, b);
        }
    }

    #[test]
    fn density_is_non_increasing_in_sdf() {
        let s = unit_sphere_scene();
        let mut prev = f64::INFINITY;
        for i in 0..2000 {
            let f = -1.0 + i as f64 * 1e-3;
            let d = s.density_of(f);
            assert!(d <= prev);
            assert!(d >= 0.0);
            prev = d;
        }
    }

    // Closed-form oracles written independently of `Shape::sdf`.
    fn box_oracle(p: Vec3, h: Vec3) -> f64 {
        let inside = (0..3).all(|a| p[a].abs() <= h[a]);
        if inside {
            -(0..3).map(|a| h[a] - p[a].abs()).fold(f64::INFINITY, f64::min)
        } else {
            let c = Vec3::new(
                p.x.clamp(-h.x, h.x),
                p.y.clamp(-h.y, h.y),
                p.z.clamp(-h.z, h.z),
            );
            (p - c).norm()
        }
    }

    fn capsule_oracle(p: Vec3, r: f64, h: f64) -> f64 {
        let a = Vec3::new(0.0, 0.0, -h);
        let b = Vec3::new(0.0, 0.0, h);
        let ab = b - a;
        let t = ((p - a).dot(ab) / ab.dot(ab)).clamp(0.0, 1.0);
        (p - (a + ab * t)).norm() - r
    }

    fn torus_oracle(p: Vec3, big: f64, small: f64) -> f64 {
        let rho = libm::hypot(p.x, p.y);
        // Closest point of the core circle, measured in the (rho, z) half-plane.
        libm::hypot(rho - big, p.z) - small
    }

    #[test]
    fn primitive_sdfs_match_closed_forms() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let sphere = Shape::Sphere { radius: 0.4 };
        let bx = Shape::Box {
            half_extents: Vec3::new(0.3, 0.2, 0.5),
        };
        let cap = Shape::Capsule {
            radius: 0.15,
            half_length: 0.3,
        };
        let tor = Shape::Torus {
            major_radius: 0.35,
            minor_radius: 0.1,
        };
        for _ in 0..10_000 {
            let p = Vec3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            );
            assert!((sphere.sdf(p) - (libm::sqrt(p.dot(p)) - 0.4)).abs() < 1e-12);
            assert!((bx.sdf(p) - box_oracle(p, Vec3::new(0.3, 0.2, 0.5))).abs() < 1e-12);
            assert!((cap.sdf(p) - capsule_oracle(p, 0.15, 0.3)).abs() < 1e-12);
            assert!((tor.sdf(p) - torus_oracle(p, 0.35, 0.1)).abs() < 1e-12);
        }
    }

    #[test]
    fn rigid_transform_and_shell() {
        let rot = Rotation::from_axis_angle(Vec3::Y, core::f64::consts::FRAC_PI_2).unwrap();
        let p = Primitive::new(
            Shape::Capsule {
                radius: 0.1,
                half_length: 0.4,
            },
            Vec3::new(0.1, 0.0, 0.0),
            label(0),
            [0.5; 3],
        )
        .with_rotation(rot);
        // Rotated about y, the capsule axis now runs along x.
        assert!((p.sdf(Vec3::new(0.6, 0.0, 0.0)) - 0.0).abs() < 1e-12);
        assert!((p.sdf(Vec3::new(0.1, 0.0, 0.3)) - 0.2).abs() < 1e-12);

        let shell = Primitive::new(Shape::Sphere { radius: 0.37 }, Vec3::ZERO, label(1), [0.5; 3])
            .with_shell(0.03);
        assert!(shell.sdf(Vec3::new(0.37, 0.0, 0.0)) < 0.0);
        assert!(shell.sdf(Vec3::ZERO) > 0.0);
        assert!((shell.sdf(Vec3::new(0.0, 0.34, 0.0))).abs() < 1e-12);
        assert!((shell.sdf(Vec3::new(0.0, 0.0, -0.40))).abs() < 1e-12);
    }

    #[test]
    fn scene_validation() {
        let labels = LabelRegistry::canonical();
        assert!(ImplicitScene::with_defaults("e", labels.clone(), vec![]).is_err());
        let bad = Primitive::new(Shape::Sphere { radius: -1.0 }, Vec3::ZERO, label(0), [0.0; 3]);
        assert!(ImplicitScene::with_defaults("b", labels.clone(), vec![bad]).is_err());
        let foreign = Primitive::new(Shape::Sphere { radius: 1.0 }, Vec3::ZERO, label(5), [0.0; 3]);
        assert!(ImplicitScene::with_defaults("f", labels.clone(), vec![foreign]).is_err());
        let ok = Primitive::new(Shape::Sphere { radius: 1.0 }, Vec3::ZERO, label(0), [0.0; 3]);
        assert!(ImplicitScene::new("t", labels, vec![ok], 0.0, 0.1, 1.0).is_err());
        assert!(LabelRegistry::new(["a", "a"]).is_err());
        assert!(LabelRegistry::new(Vec::<String>::new()).is_err());
    }

    #[test]
    fn dense_grid_corners_and_center() {
        let s = unit_sphere_scene();
        let g = sample_grid_dense(&s, GridSpec::cube(2, -1.0, 1.0).unwrap(), DEFAULT_MEMORY_BUDGET)
            .unwrap();
        assert_eq!(g.samples().len(), 8);
        for (idx, smp) in g.samples().iter().enumerate() {
            let p = g.spec().position_of(idx);
            assert!(p.x.abs() == 1.0 && p.y.abs() == 1.0 && p.z.abs() == 1.0);
            assert_eq!(smp, &s.eval(p));
        }
        let g3 = sample_grid_dense(&s, GridSpec::cube(3, -1.0, 1.0).unwrap(), DEFAULT_MEMORY_BUDGET)
            .unwrap();
        assert_eq!(g3.at(1, 1, 1).sdf, -0.5);
    }

    #[test]
    fn dense_grid_negative_count_matches_brute_force() {
        let s = unit_sphere_scene();
        let spec = GridSpec::cube(65, -1.0, 1.0).unwrap();
        let g = sample_grid_dense(&s, spec, DEFAULT_MEMORY_BUDGET).unwrap();
        let got = g.samples().iter().filter(|x| x.sdf < 0.0).count();
        let mut oracle = 0;
        for k in 0..65 {
            for j in 0..65 {
                for i in 0..65 {
                    let p = [i, j, k].map(|c| -1.0 + 2.0 * c as f64 / 64.0);
                    if libm::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]) < 0.5 {
                        oracle += 1;
                    }
                }
            }
        }
        assert_eq!(got, oracle);
        assert_eq!(got, 17071);
    }

    #[test]
    fn dense_grid_respects_memory_budget() {
        let s = unit_sphere_scene();
        let err = sample_grid_dense(&s, GridSpec::cube(64, -1.0, 1.0).unwrap(), 1024).unwrap_err();
        match err {
            Error::Resource { budget, .. } => assert_eq!(budget, 1024),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn grid_field_interpolation() {
        let s = two_spheres(0.1);
        let spec = GridSpec::cube(5, -1.0, 1.0).unwrap();
        let g = sample_grid_dense(&s, spec, DEFAULT_MEMORY_BUDGET).unwrap();
        // Lattice vertex returns the stored sample.
        let p = spec.position(1, 2, 3);
        let got = g.sample(p).unwrap();
        let stored = g.at(1, 2, 3);
        assert!((got.sdf - stored.sdf).abs() < 1e-15);
        assert!(g.sample(Vec3::new(1.5, 0.0, 0.0)).is_err());
    }

    #[test]
    fn grid_field_edge_midpoint_and_cell_center() {
        let spec = GridSpec::cube(2, 0.0, 1.0).unwrap();
        let sdfs = [0.2, -0.2, 0.7, -0.1, 0.05, 0.3, -0.6, 0.9];
        let samples: Vec<FieldSample> = sdfs
            .iter()
            .enumerate()
            .map(|(i, &f)| {
                let a = i as f64 / 10.0;
                FieldSample {
                    sdf: f,
                    density: 1.0 + i as f64,
                    color: [a, 0.5, 1.0 - a],
                    sem_probs: [a, 1.0 - a].into_iter().collect(),
                }
            })
            .collect();
        let g = GridField::new(spec, samples).unwrap();
        // Edge between vertex 0 (0.2) and vertex 1 (-0.2).
        let mid = g.sample(Vec3::new(0.5, 0.0, 0.0)).unwrap();
        assert!(mid.sdf.abs() < 1e-15);
        // Cell center: the plain average of the eight corners.
        let c = g.sample(Vec3::splat(0.5)).unwrap();
        let mean_sdf = sdfs.iter().sum::<f64>() / 8.0;
        assert!((c.sdf - mean_sdf).abs() < 1e-15);
        assert!((c.sdf - 0.15625).abs() < 1e-15);
        assert!((c.density - 4.5).abs() < 1e-12);
        assert!((c.sem_probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
