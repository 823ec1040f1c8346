//! Coarse-to-fine active-domain proposal.
//!
//! A coarse lattice is sampled first; every coarse vertex whose `k^3`
//! neighborhood (clamped at the borders) holds a negative value is marked.
//! The mask is carried to the fine lattice by nearest-neighbor lookup, and the
//! expensive fine evaluation runs only on the marked vertices. Unmarked
//! vertices read back as a fixed positive sentinel.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::field::{Field, MAX_LABELS};
use crate::grid::{GridSpec, ScalarGrid};
use crate::math::Vec3;
use crate::par;
use crate::semantics::{equivalent_sdf_trusted, SemanticSet};

pub const DEFAULT_KERNEL: usize = 3;
pub const DEFAULT_SENTINEL: f64 = 1.0;
/// Coarse lattice resolution is the fine one divided by this, per axis.
pub const DEFAULT_COARSE_DIVISOR: usize = 4;

/// Bitset over the vertices of a lattice.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActiveMask {
    resolution: [usize; 3],
    bits: Vec<u64>,
    count: usize,
}

impl ActiveMask {
    pub fn empty(resolution: [usize; 3]) -> Self {
        let n = resolution.iter().product::<usize>();
        ActiveMask {
            resolution,
            bits: vec![0; n.div_ceil(64)],
            count: 0,
        }
    }

    pub fn full(resolution: [usize; 3]) -> Self {
        let mut m = ActiveMask::empty(resolution);
        for i in 0..m.len() {
            m.set(i);
        }
        m
    }

    pub fn from_flags(resolution: [usize; 3], flags: &[bool]) -> Result<Self> {
        let mut m = ActiveMask::empty(resolution);
        if flags.len() != m.len() {
            return Err(Error::invalid("mask flag count does not match the resolution"));
        }
        for (i, &f) in flags.iter().enumerate() {
            if f {
                m.set(i);
            }
        }
        Ok(m)
    }

    #[inline]
    pub fn resolution(&self) -> [usize; 3] {
        self.resolution
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.resolution.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    /// Number of set bits.
    #[inline]
    pub fn count(&self) -> usize {
        self.count
    }

    #[inline]
    pub fn get(&self, idx: usize) -> bool {
        self.bits[idx / 64] >> (idx % 64) & 1 == 1
    }

    pub fn set(&mut self, idx: usize) {
        let w = &mut self.bits[idx / 64];
        let b = 1u64 << (idx % 64);
        if *w & b == 0 {
            *w |= b;
            self.count += 1;
        }
    }

    /// Set vertex indices in ascending order.
    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.iter().enumerate().flat_map(|(w, &word)| {
            let mut rest = word;
            core::iter::from_fn(move || {
                if rest == 0 {
                    return None;
                }
                let b = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                Some(w * 64 + b)
            })
        })
    }
}

/// Marks every coarse vertex whose clamped `k x k x k` neighborhood holds a
/// strictly negative value.
pub fn occupancy_mask(coarse: &ScalarGrid, k: usize) -> Result<ActiveMask> {
    if k == 0 || k % 2 == 0 {
        return Err(Error::invalid(alloc::format!(
            "dilation kernel must be odd and positive, got {k}"
        )));
    }
    let res = coarse.spec().resolution();
    let mut flags: Vec<u8> = coarse.values().iter().map(|&v| u8::from(v < 0.0)).collect();
    let radius = (k - 1) / 2;
    if radius > 0 {
        for axis in 0..3 {
            flags = dilate_axis(&flags, res, axis, radius);
        }
    }
    let mut mask = ActiveMask::empty(res);
    for (i, &f) in flags.iter().enumerate() {
        if f != 0 {
            mask.set(i);
        }
    }
    Ok(mask)
}

/// Separable 1D max filter along `axis` with a clamped window.
fn dilate_axis(src: &[u8], res: [usize; 3], axis: usize, radius: usize) -> Vec<u8> {
    let stride = match axis {
        0 => 1,
        1 => res[0],
        _ => res[0] * res[1],
    };
    let n = res[axis];
    let mut out = vec![0u8; src.len()];
    for start in 0..src.len() {
        // Only process line starts.
        if (start / stride) % n != 0 {
            continue;
        }
        // Running count of set flags inside the window.
        let mut inside = 0usize;
        for t in 0..radius.min(n - 1) + 1 {
            inside += src[start + t * stride] as usize;
        }
        for i in 0..n {
            if inside > 0 {
                out[start + i * stride] = 1;
            }
            let enter = i + radius + 1;
            if enter < n {
                inside += src[start + enter * stride] as usize;
            }
            if i >= radius {
                inside -= src[start + (i - radius) * stride] as usize;
            }
        }
    }
    out
}

/// Nearest coarse index for each fine index along one axis; exact halves go
/// to the lower index.
fn nearest_lookup(fine_n: usize, coarse_n: usize) -> Vec<usize> {
    let (nf, nc) = ((fine_n - 1) as i64, (coarse_n - 1) as i64);
    (0..fine_n as i64)
        .map(|i| {
            // ceil((2 i nc - nf) / (2 nf)), i.e. round-half-down of i*nc/nf.
            let num = 2 * i * nc - nf;
            let den = 2 * nf;
            let c = -((-num).div_euclid(den));
            c.clamp(0, nc) as usize
        })
        .collect()
}

/// Nearest-neighbor upsampling of a coarse mask onto a fine lattice with the
/// same bounds.
pub fn upsample_mask(mask: &ActiveMask, coarse: &GridSpec, fine: &GridSpec) -> Result<ActiveMask> {
    if !coarse.same_bounds(fine) {
        return Err(Error::invalid("coarse and fine lattices must share their bounds"));
    }
    if mask.resolution() != coarse.resolution() {
        return Err(Error::invalid("mask resolution does not match the coarse lattice"));
    }
    let (cr, fr) = (coarse.resolution(), fine.resolution());
    let lx = nearest_lookup(fr[0], cr[0]);
    let ly = nearest_lookup(fr[1], cr[1]);
    let lz = nearest_lookup(fr[2], cr[2]);
    let mut out = ActiveMask::empty(fr);
    let mut idx = 0;
    for &ck in &lz {
        for &cj in &ly {
            let row = cr[0] * (cj + cr[1] * ck);
            for &ci in &lx {
                if mask.get(row + ci) {
                    out.set(idx);
                }
                idx += 1;
            }
        }
    }
    Ok(out)
}

/// Equivalent-SDF values on the active vertices of a fine lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseScalarGrid {
    spec: GridSpec,
    indices: Vec<usize>,
    values: Vec<f64>,
    sentinel: f64,
}

impl SparseScalarGrid {
    pub fn new(spec: GridSpec, indices: Vec<usize>, values: Vec<f64>, sentinel: f64) -> Result<Self> {
        if !(sentinel > 0.0 && sentinel.is_finite()) {
            return Err(Error::invalid("sentinel must be strictly positive"));
        }
        if indices.len() != values.len() {
            return Err(Error::invalid("sparse grid needs one value per active index"));
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("active indices must be strictly increasing"));
        }
        if indices.last().is_some_and(|&i| i >= spec.vertex_count()) {
            return Err(Error::invalid("active index out of range"));
        }
        Ok(SparseScalarGrid {
            spec,
            indices,
            values,
            sentinel,
        })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn sentinel(&self) -> f64 {
        self.sentinel
    }

    pub fn active_count(&self) -> usize {
        self.indices.len()
    }

    /// Stored value, or the sentinel for an inactive vertex.
    #[inline]
    pub fn value(&self, idx: usize) -> f64 {
        match self.indices.binary_search(&idx) {
            Ok(pos) => self.values[pos],
            Err(_) => self.sentinel,
        }
    }

    /// Sentinel-filled dense copy.
    pub fn to_dense(&self) -> ScalarGrid {
        let mut values = vec![self.sentinel; self.spec.vertex_count()];
        for (&i, &v) in self.indices.iter().zip(&self.values) {
            values[i] = v;
        }
        ScalarGrid::new(self.spec, values).expect("vertex count matches spec")
    }
}

/// Evaluates the equivalent SDF of `set` at one point, reusing `probs`.
#[inline]
pub(crate) fn layer_value<F: Field + ?Sized>(field: &F, x: Vec3, set: &SemanticSet, probs: &mut [f64]) -> f64 {
    let f = field.sdf_probs(x, probs);
    equivalent_sdf_trusted(f, probs, set)
}

fn check_set<F: Field + ?Sized>(field: &F, set: &SemanticSet) -> Result<usize> {
    let k = field.label_count();
    if k == 0 || k > MAX_LABELS {
        return Err(Error::invalid("field label count outside the supported range"));
    }
    if set.is_empty() || set.members().any(|m| m.id() >= k) {
        return Err(Error::invalid(alloc::format!(
            "semantic set `{}` does not fit a registry of {k} labels",
            set.name()
        )));
    }
    Ok(k)
}

/// Dense equivalent-SDF grid: one field evaluation per lattice vertex.
pub fn dense_evaluate<F: Field + ?Sized>(field: &F, set: &SemanticSet, spec: GridSpec) -> Result<ScalarGrid> {
    let k = check_set(field, set)?;
    let values = par::map_blocks(spec.vertex_count(), 4096, |range, out| {
        let mut probs = [0.0; MAX_LABELS];
        out.extend(range.map(|idx| layer_value(field, spec.position_of(idx), set, &mut probs[..k])));
    });
    ScalarGrid::new(spec, values)
}

/// Evaluates the equivalent SDF only on the active vertices of `fine`.
pub fn sparse_evaluate<F: Field + ?Sized>(
    field: &F,
    set: &SemanticSet,
    fine: GridSpec,
    active: &ActiveMask,
    sentinel: f64,
) -> Result<SparseScalarGrid> {
    let k = check_set(field, set)?;
    if active.resolution() != fine.resolution() {
        return Err(Error::invalid("active mask resolution does not match the fine lattice"));
    }
    if !(sentinel > 0.0 && sentinel.is_finite()) {
        return Err(Error::invalid("sentinel must be strictly positive"));
    }
    let indices: Vec<usize> = active.indices().collect();
    let values = par::map_blocks(indices.len(), 4096, |range, out| {
        let mut probs = [0.0; MAX_LABELS];
        out.extend(range.map(|i| layer_value(field, fine.position_of(indices[i]), set, &mut probs[..k])));
    });
    SparseScalarGrid::new(fine, indices, values, sentinel)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProposalConfig {
    pub coarse_resolution: [usize; 3],
    pub kernel: usize,
    pub sentinel: f64,
}

impl ProposalConfig {
    /// Coarse lattice at a quarter of the fine resolution, `k = 3`, sentinel `+1`.
    pub fn for_fine(fine: &GridSpec) -> Self {
        ProposalConfig {
            coarse_resolution: default_coarse_resolution(fine.resolution()),
            kernel: DEFAULT_KERNEL,
            sentinel: DEFAULT_SENTINEL,
        }
    }
}

pub fn default_coarse_resolution(fine: [usize; 3]) -> [usize; 3] {
    fine.map(|n| (n / DEFAULT_COARSE_DIVISOR).max(2))
}

/// Field-evaluation accounting for one proposal pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ProposalStats {
    pub coarse_evaluations: usize,
    pub fine_evaluations: usize,
    /// Evaluations a dense pass over the fine lattice would need.
    pub dense_evaluations: usize,
}

impl ProposalStats {
    pub fn total_evaluations(&self) -> usize {
        self.coarse_evaluations + self.fine_evaluations
    }

    /// Dense evaluations divided by proposal evaluations (coarse + fine).
    pub fn reduction_ratio(&self) -> f64 {
        let t = self.total_evaluations();
        if t == 0 {
            f64::INFINITY
        } else {
            self.dense_evaluations as f64 / t as f64
        }
    }

    pub fn accumulate(&mut self, other: &ProposalStats) {
        self.coarse_evaluations += other.coarse_evaluations;
        self.fine_evaluations += other.fine_evaluations;
        self.dense_evaluations += other.dense_evaluations;
    }
}

/// Full coarse-to-fine pass for one semantic set: coarse equivalent SDF,
/// dilated occupancy mask, nearest-neighbor upsampling, sparse evaluation.
pub fn propose_and_evaluate<F: Field + ?Sized>(
    field: &F,
    set: &SemanticSet,
    fine: GridSpec,
    config: &ProposalConfig,
) -> Result<(SparseScalarGrid, ProposalStats)> {
    let coarse = fine.with_resolution(config.coarse_resolution)?;
    let coarse_values = dense_evaluate(field, set, coarse)?;
    let mask = occupancy_mask(&coarse_values, config.kernel)?;
    let active = upsample_mask(&mask, &coarse, &fine)?;
    let sparse = sparse_evaluate(field, set, fine, &active, config.sentinel)?;
    let stats = ProposalStats {
        coarse_evaluations: coarse.vertex_count(),
        fine_evaluations: sparse.active_count(),
        dense_evaluations: fine.vertex_count(),
    };
    Ok((sparse, stats))
}
