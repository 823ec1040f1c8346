//! Semantic-equivalent signed distance transforms.
//!
//! For a label `s`, `max(f, max_{r != s} p_r - p_s)` keeps the sign of the
//! original distance wherever `f > 0`, and inside the shape it turns
//! positive exactly where another label outweighs `s`. The set form replaces
//! `p_s` by the best member of the set and the competitor by the best
//! non-member; a maximum over an empty set of competitors is taken as 0.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::field::{FieldSample, GridField, LabelRegistry, SemanticLabel, MAX_LABELS};
use crate::grid::ScalarGrid;
use crate::par;

/// Tolerance for accepting a probability vector as a simplex point.
pub const SIMPLEX_TOLERANCE: f64 = 1e-6;

/// A named, non-empty set of labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SemanticSet {
    name: String,
    members: u32,
}

impl SemanticSet {
    pub fn new(name: impl Into<String>, members: &[SemanticLabel]) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::invalid("a semantic set needs at least one member"));
        }
        let mut bits = 0u32;
        for m in members {
            let bit = 1u32 << m.id();
            if bits & bit != 0 {
                return Err(Error::invalid(alloc::format!(
                    "label {} listed twice in semantic set",
                    m.id()
                )));
            }
            bits |= bit;
        }
        Ok(SemanticSet {
            name: name.into(),
            members: bits,
        })
    }

    pub fn single(name: impl Into<String>, label: SemanticLabel) -> Self {
        SemanticSet {
            name: name.into(),
            members: 1 << label.id(),
        }
    }

    /// Every label of the registry.
    pub fn full(name: impl Into<String>, registry: &LabelRegistry) -> Self {
        SemanticSet {
            name: name.into(),
            members: (1u32 << registry.len()) - 1,
        }
    }

    /// Resolves label names against a registry.
    pub fn from_names(name: impl Into<String>, registry: &LabelRegistry, labels: &[&str]) -> Result<Self> {
        let members = labels
            .iter()
            .map(|n| {
                registry
                    .get(n)
                    .ok_or_else(|| Error::invalid(alloc::format!("unknown label `{n}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        SemanticSet::new(name, &members)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    #[inline]
    pub fn contains(&self, label: SemanticLabel) -> bool {
        self.members & (1 << label.id()) != 0
    }

    #[inline]
    fn contains_id(&self, id: usize) -> bool {
        self.members & (1 << id) != 0
    }

    pub fn members(&self) -> impl Iterator<Item = SemanticLabel> + '_ {
        (0..MAX_LABELS)
            .filter(|&i| self.contains_id(i))
            .map(|i| SemanticLabel::new(i).expect("member ids are below MAX_LABELS"))
    }

    pub fn len(&self) -> usize {
        self.members.count_ones() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.members == 0
    }

    /// True when every member is in `registry`.
    pub fn fits(&self, registry: &LabelRegistry) -> bool {
        self.members >> registry.len() == 0
    }

    pub fn is_full(&self, registry: &LabelRegistry) -> bool {
        self.fits(registry) && self.len() == registry.len()
    }

    fn check_fits(&self, k: usize) -> Result<()> {
        if k < 32 && self.members >> k != 0 {
            return Err(Error::invalid(alloc::format!(
                "semantic set `{}` names labels outside a registry of {k}",
                self.name
            )));
        }
        Ok(())
    }

    /// Sum of member probabilities.
    #[inline]
    pub fn mass(&self, probs: &[f64]) -> f64 {
        let mut total = 0.0;
        for (i, p) in probs.iter().enumerate() {
            if self.contains_id(i) {
                total += p;
            }
        }
        total
    }
}

/// Which equivalent SDF to build.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Selector {
    Label(SemanticLabel),
    Set(SemanticSet),
}

impl Selector {
    pub fn apply(&self, f: f64, p: &[f64]) -> Result<f64> {
        match self {
            Selector::Label(s) => equivalent_sdf(f, p, *s),
            Selector::Set(set) => equivalent_sdf_set(f, p, set),
        }
    }
}

/// Validates `p` as a simplex point within [`SIMPLEX_TOLERANCE`], clamps tiny
/// negatives and renormalizes into `out`.
fn normalized(p: &[f64], out: &mut [f64; MAX_LABELS]) -> Result<usize> {
    if p.is_empty() || p.len() > MAX_LABELS {
        return Err(Error::invalid(alloc::format!(
            "probability vector length {} outside 1..={MAX_LABELS}",
            p.len()
        )));
    }
    let mut sum = 0.0;
    for (o, &v) in out.iter_mut().zip(p) {
        if !v.is_finite() || v < -SIMPLEX_TOLERANCE {
            return Err(Error::invalid("probabilities must be finite and non-negative"));
        }
        *o = v.max(0.0);
        sum += *o;
    }
    if (sum - 1.0).abs() > SIMPLEX_TOLERANCE {
        return Err(Error::invalid(alloc::format!(
            "probabilities sum to {sum}, not 1 within {SIMPLEX_TOLERANCE}"
        )));
    }
    for o in out.iter_mut().take(p.len()) {
        *o /= sum;
    }
    Ok(p.len())
}

/// Equivalent SDF of a single label: `max(f, max_{r != s} p_r - p_s)`.
pub fn equivalent_sdf(f: f64, p: &[f64], s: SemanticLabel) -> Result<f64> {
    let mut q = [0.0; MAX_LABELS];
    let k = normalized(p, &mut q)?;
    if s.id() >= k {
        return Err(Error::invalid(alloc::format!(
            "label {} outside a registry of {k}",
            s.id()
        )));
    }
    if !f.is_finite() {
        return Err(Error::invalid("signed distance must be finite"));
    }
    let mut rival = 0.0f64;
    for (r, &v) in q[..k].iter().enumerate() {
        if r != s.id() {
            rival = rival.max(v);
        }
    }
    Ok(f.max(rival - q[s.id()]))
}

/// Equivalent SDF of a label set: `max(f, max_{s not in P} p_s - max_{s in P} p_s)`
/// with the maximum over an empty complement defined as 0.
pub fn equivalent_sdf_set(f: f64, p: &[f64], set: &SemanticSet) -> Result<f64> {
    let mut q = [0.0; MAX_LABELS];
    let k = normalized(p, &mut q)?;
    set.check_fits(k)?;
    if set.is_empty() {
        return Err(Error::invalid("semantic set is empty"));
    }
    if !f.is_finite() {
        return Err(Error::invalid("signed distance must be finite"));
    }
    Ok(f.max(set_margin(&q[..k], set)))
}

/// `max_{s not in P} p_s - max_{s in P} p_s`, no validation.
#[inline]
pub(crate) fn set_margin(q: &[f64], set: &SemanticSet) -> f64 {
    let mut inside = 0.0f64;
    let mut outside = 0.0f64;
    for (i, &v) in q.iter().enumerate() {
        if set.contains_id(i) {
            inside = inside.max(v);
        } else {
            outside = outside.max(v);
        }
    }
    outside - inside
}

/// Fast path used by extraction: inputs come straight from a validated
/// field, so the simplex check is skipped but the renormalization is kept.
#[inline]
pub(crate) fn equivalent_sdf_trusted(f: f64, p: &[f64], set: &SemanticSet) -> f64 {
    let mut q = [0.0; MAX_LABELS];
    let mut sum = 0.0;
    for (o, &v) in q.iter_mut().zip(p) {
        *o = v.max(0.0);
        sum += *o;
    }
    for o in q.iter_mut().take(p.len()) {
        *o /= sum;
    }
    f.max(set_margin(&q[..p.len()], set))
}

/// Applies the selector to every sample of a grid; same lattice, same order.
pub fn equivalent_sdf_grid(samples: &GridField, selector: &Selector) -> Result<ScalarGrid> {
    let s = samples.samples();
    let values = par::map_blocks(s.len(), 4096, |range, out: &mut Vec<Result<f64>>| {
        out.extend(range.map(|i| apply_sample(&s[i], selector)));
    });
    let values = values.into_iter().collect::<Result<Vec<f64>>>()?;
    ScalarGrid::new(*samples.spec(), values)
}

fn apply_sample(s: &FieldSample, selector: &Selector) -> Result<f64> {
    selector.apply(s.sdf, &s.sem_probs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{sample_grid_dense, ImplicitScene, Primitive, Shape, DEFAULT_MEMORY_BUDGET};
    use crate::grid::GridSpec;
    use crate::math::Vec3;
    use alloc::vec;

    fn l(i: usize) -> SemanticLabel {
        SemanticLabel::new(i).unwrap()
    }

    #[test]
    fn positive_distance_is_a_floor() {
        for p in [[1.0, 0.0, 0.0], [0.2, 0.3, 0.5], [0.0, 0.0, 1.0]] {
            assert!(equivalent_sdf(0.2, &p, l(0)).unwrap() >= 0.2);
        }
    }

    #[test]
    fn hand_evaluated_cases() {
        assert_eq!(equivalent_sdf(-0.3, &[1.0, 0.0, 0.0], l(0)).unwrap(), -0.3);
        assert_eq!(equivalent_sdf(-0.3, &[0.9, 0.05, 0.05], l(0)).unwrap(), -0.3);
        let v = equivalent_sdf(-0.3, &[0.4, 0.6, 0.0], l(0)).unwrap();
        assert!((v - 0.2).abs() < 1e-15);

        let all = SemanticSet::new("all", &[l(0), l(1), l(2)]).unwrap();
        let third = 1.0 / 3.0;
        let v = equivalent_sdf_set(-0.4, &[third, third, third], &all).unwrap();
        assert!((v + third).abs() < 1e-15);

        let bc = SemanticSet::new("bc", &[l(0), l(1)]).unwrap();
        let v = equivalent_sdf_set(-0.5, &[0.1, 0.2, 0.7], &bc).unwrap();
        assert!((v - 0.5).abs() < 1e-15);

        for p in [[0.1, 0.2, 0.7], [1.0, 0.0, 0.0]] {
            assert!(equivalent_sdf_set(0.0, &p, &bc).unwrap() >= 0.0);
        }
        assert_eq!(equivalent_sdf_set(0.0, &[0.9, 0.05, 0.05], &bc).unwrap(), 0.0);
    }

    #[test]
    fn invalid_inputs() {
        assert!(equivalent_sdf(0.1, &[0.5, 0.6], l(0)).is_err());
        assert!(equivalent_sdf(0.1, &[0.5, 0.5], l(2)).is_err());
        assert!(equivalent_sdf(0.1, &[1.5, -0.5], l(0)).is_err());
        assert!(SemanticSet::new("e", &[]).is_err());
        assert!(SemanticSet::new("d", &[l(1), l(1)]).is_err());
        let far = SemanticSet::single("far", l(5));
        assert!(equivalent_sdf_set(0.1, &[0.5, 0.5], &far).is_err());
    }

    #[test]
    fn slightly_off_simplex_is_renormalized() {
        let v = equivalent_sdf(-1.0, &[0.5 + 4e-7, 0.5], l(1)).unwrap();
        assert!(v > 0.0 && v < 1e-6);
    }

    fn two_sphere_scene() -> ImplicitScene {
        ImplicitScene::with_defaults(
            "two",
            LabelRegistry::new(["body", "cloth"]).unwrap(),
            vec![
                Primitive::new(Shape::Sphere { radius: 0.3 }, Vec3::new(-0.18, 0.0, 0.0), l(0), [1.0, 0.8, 0.7]),
                Primitive::new(Shape::Sphere { radius: 0.3 }, Vec3::new(0.18, 0.0, 0.0), l(1), [0.2, 0.3, 0.9]),
            ],
        )
        .unwrap()
    }

    #[test]
    fn grid_transform_matches_elementwise_loop() {
        let scene = two_sphere_scene();
        let spec = GridSpec::cube(9, -0.6, 0.6).unwrap();
        let samples = sample_grid_dense(&scene, spec, DEFAULT_MEMORY_BUDGET).unwrap();
        let sel = Selector::Label(l(0));
        let grid = equivalent_sdf_grid(&samples, &sel).unwrap();
        for (idx, s) in samples.samples().iter().enumerate() {
            let p = &s.sem_probs;
            let oracle = s.sdf.max(p[1] - p[0]);
            assert!((grid.values()[idx] - oracle).abs() < 1e-15);
        }
    }

    #[test]
    fn one_hot_grid_is_clamped_from_below() {
        let spec = GridSpec::cube(3, 0.0, 1.0).unwrap();
        let samples: Vec<FieldSample> = (0..27)
            .map(|i| FieldSample {
                sdf: -2.0 + i as f64 * 0.15,
                density: 0.0,
                color: [0.0; 3],
                sem_probs: [0.0, 1.0, 0.0].into_iter().collect(),
            })
            .collect();
        let g = GridField::new(spec, samples.clone()).unwrap();
        let out = equivalent_sdf_grid(&g, &Selector::Label(l(1))).unwrap();
        for (s, v) in samples.iter().zip(out.values()) {
            assert_eq!(*v, s.sdf.max(-1.0));
        }
    }

    #[test]
    fn full_set_grid_keeps_sign_pattern() {
        let scene = two_sphere_scene();
        let spec = GridSpec::cube(11, -0.6, 0.6).unwrap();
        let samples = sample_grid_dense(&scene, spec, DEFAULT_MEMORY_BUDGET).unwrap();
        let full = SemanticSet::full("all", scene.labels());
        let out = equivalent_sdf_grid(&samples, &Selector::Set(full)).unwrap();
        for (s, v) in samples.samples().iter().zip(out.values()) {
            assert_eq!(s.sdf.partial_cmp(&0.0), v.partial_cmp(&0.0));
        }
    }

    #[test]
    fn set_helpers() {
        let reg = LabelRegistry::canonical();
        let s = SemanticSet::from_names("bh", &reg, &["body", "hair"]).unwrap();
        assert_eq!(s.members().map(|m| m.id()).collect::<Vec<_>>(), vec![0, 2]);
        assert!(s.fits(&reg));
        assert!(!s.is_full(&reg));
        assert!(SemanticSet::full("x", &reg).is_full(&reg));
        assert!(SemanticSet::from_names("q", &reg, &["wings"]).is_err());
        assert_eq!(s.mass(&[0.2, 0.3, 0.5]), 0.7);
    }
}
