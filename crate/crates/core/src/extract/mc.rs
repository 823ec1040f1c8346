use alloc::vec;
use alloc::vec::Vec;

use hashbrown::HashMap;

use super::table::{self, edge_axis, CaseTriangles, EDGES};
use crate::error::{Error, Result};
use crate::grid::{GridSpec, ScalarGrid};
use crate::math::Vec3;
use crate::mesh::Mesh;
use crate::par;
use crate::proposal::SparseScalarGrid;

/// A scalar lattice that marching cubes can walk.
pub trait ScalarSource: Sync {
    fn spec(&self) -> &GridSpec;

    fn value(&self, idx: usize) -> f64;

    /// Cells (by lower-corner vertex index, ascending) that may straddle
    /// `iso`. `None` means every cell.
    fn candidate_cells(&self, iso: f64) -> Option<Vec<usize>>;
}

impl ScalarSource for ScalarGrid {
    fn spec(&self) -> &GridSpec {
        ScalarGrid::spec(self)
    }

    #[inline]
    fn value(&self, idx: usize) -> f64 {
        self.values()[idx]
    }

    fn candidate_cells(&self, _iso: f64) -> Option<Vec<usize>> {
        None
    }
}

impl ScalarSource for SparseScalarGrid {
    fn spec(&self) -> &GridSpec {
        SparseScalarGrid::spec(self)
    }

    #[inline]
    fn value(&self, idx: usize) -> f64 {
        SparseScalarGrid::value(self, idx)
    }

    fn candidate_cells(&self, iso: f64) -> Option<Vec<usize>> {
        if self.sentinel() <= iso {
            // Inactive vertices would count as inside; fall back to all cells.
            return None;
        }
        let spec = *SparseScalarGrid::spec(self);
        let [nx, ny, nz] = spec.resolution();
        let mut cells = Vec::new();
        for (&idx, &v) in self.indices().iter().zip(self.values()) {
            if !(v < iso) {
                continue;
            }
            let [i, j, k] = spec.coords(idx);
            for dk in 0..2 {
                for dj in 0..2 {
                    for di in 0..2 {
                        if i < di || j < dj || k < dk {
                            continue;
                        }
                        let (ci, cj, ck) = (i - di, j - dj, k - dk);
                        if ci + 1 < nx && cj + 1 < ny && ck + 1 < nz {
                            cells.push(spec.index(ci, cj, ck));
                        }
                    }
                }
            }
        }
        cells.sort_unstable();
        cells.dedup();
        Some(cells)
    }
}

/// Keys identify output vertices exactly: `4 * v + axis` for the crossing on
/// the edge leaving lattice vertex `v` along `axis`, or `4 * v + 3` when the
/// crossing lands exactly on vertex `v`.
type Key = u64;

struct CellOut {
    /// Crossing keys in edge order.
    keys: CaseKeys,
    /// Triangles as positions in `keys`.
    tris: CaseTriangles,
}

type CaseKeys = arrayvec::ArrayVec<Key, 12>;

struct Ctx<'a, S: ?Sized> {
    src: &'a S,
    iso: f64,
    table: Vec<CaseTriangles>,
    offsets: [usize; 8],
}

impl<S: ScalarSource + ?Sized> Ctx<'_, S> {
    fn cell(&self, base: usize) -> Option<CellOut> {
        let mut vals = [0.0; 8];
        let mut case = 0u8;
        for c in 0..8 {
            vals[c] = self.src.value(base + self.offsets[c]);
            if vals[c] < self.iso {
                case |= 1 << c;
            }
        }
        let tris = &self.table[case as usize];
        if tris.is_empty() {
            return None;
        }
        let mut slot = [u8::MAX; 12];
        let mut keys = CaseKeys::new();
        for (e, &[a, b]) in EDGES.iter().enumerate() {
            if (case >> a & 1) == (case >> b & 1) {
                continue;
            }
            let (va, vb) = (base + self.offsets[a as usize], base + self.offsets[b as usize]);
            let outside = if case >> a & 1 == 0 { (va, vals[a as usize]) } else { (vb, vals[b as usize]) };
            let key = if outside.1 == self.iso {
                4 * outside.0 as Key + 3
            } else {
                4 * va as Key + edge_axis(e) as Key
            };
            slot[e] = keys.len() as u8;
            keys.push(key);
        }
        let mut out = CaseTriangles::new();
        for t in tris {
            out.push(t.map(|e| slot[e as usize]));
        }
        Some(CellOut { keys, tris: out })
    }
}

/// Marching cubes at level `iso`. Output vertices are ordered by cell and
/// then by edge; shared edges produce one vertex. Degenerate triangles are
/// dropped. `deformation`, when given, displaces each lattice vertex (by at
/// most half a cell per axis) before interpolation.
pub fn marching_cubes<S: ScalarSource + ?Sized>(src: &S, iso: f64, deformation: Option<&[Vec3]>) -> Result<Mesh> {
    let spec = *src.spec();
    if !iso.is_finite() {
        return Err(Error::invalid("iso level must be finite"));
    }
    if let Some(d) = deformation {
        check_deformation(&spec, d)?;
    }
    let [nx, ny, nz] = spec.resolution();
    let mut offsets = [0usize; 8];
    for (c, o) in offsets.iter_mut().enumerate() {
        *o = spec.index(c & 1, c >> 1 & 1, c >> 2 & 1);
    }
    let ctx = Ctx {
        src,
        iso,
        table: table::build(),
        offsets,
    };

    let cells: Vec<CellOut> = match src.candidate_cells(iso) {
        None => {
            let rows = (ny - 1) * (nz - 1);
            par::map_blocks(rows, 16, |range, out| {
                for r in range {
                    let (j, k) = (r % (ny - 1), r / (ny - 1));
                    for i in 0..nx - 1 {
                        if let Some(c) = ctx.cell(spec.index(i, j, k)) {
                            out.push(c);
                        }
                    }
                }
            })
        }
        Some(list) => par::map_blocks(list.len(), 1024, |range, out| {
            out.extend(range.filter_map(|i| ctx.cell(list[i])));
        }),
    };

    // Stitch: assign vertex ids in cell order, then edge order.
    let mut ids: HashMap<Key, u32> = HashMap::new();
    let mut positions: Vec<Vec3> = Vec::new();
    let mut triangles: Vec<[u32; 3]> = Vec::new();
    for cell in &cells {
        let mut local = [0u32; 12];
        for (s, &key) in cell.keys.iter().enumerate() {
            local[s] = *ids.entry(key).or_insert_with(|| {
                positions.push(key_position(src, &spec, iso, key, deformation));
                (positions.len() - 1) as u32
            });
        }
        for t in &cell.tris {
            triangles.push(t.map(|s| local[s as usize]));
        }
    }
    Ok(clean(positions, triangles))
}

fn check_deformation(spec: &GridSpec, d: &[Vec3]) -> Result<()> {
    if d.len() != spec.vertex_count() {
        return Err(Error::invalid("deformation needs one displacement per lattice vertex"));
    }
    let half = spec.spacing() * 0.5;
    for v in d {
        if !v.is_finite() || (0..3).any(|a| v[a].abs() > half[a]) {
            return Err(Error::invalid("deformation must stay within half a cell per axis"));
        }
    }
    Ok(())
}

fn key_position<S: ScalarSource + ?Sized>(src: &S, spec: &GridSpec, iso: f64, key: Key, def: Option<&[Vec3]>) -> Vec3 {
    let v = (key / 4) as usize;
    let axis = (key % 4) as usize;
    let at = |idx: usize| {
        let p = spec.position_of(idx);
        match def {
            Some(d) => p + d[idx],
            None => p,
        }
    };
    if axis == 3 {
        return at(v);
    }
    let [i, j, k] = spec.coords(v);
    let w = match axis {
        0 => spec.index(i + 1, j, k),
        1 => spec.index(i, j + 1, k),
        _ => spec.index(i, j, k + 1),
    };
    let (fa, fb) = (src.value(v), src.value(w));
    let t = (iso - fa) / (fb - fa);
    at(v).lerp(at(w), t)
}

/// Drops triangles with repeated indices or zero area, then unused vertices.
fn clean(positions: Vec<Vec3>, triangles: Vec<[u32; 3]>) -> Mesh {
    let kept: Vec<[u32; 3]> = triangles
        .into_iter()
        .filter(|&[a, b, c]| {
            if a == b || b == c || a == c {
                return false;
            }
            let (pa, pb, pc) = (positions[a as usize], positions[b as usize], positions[c as usize]);
            (pb - pa).cross(pc - pa) != Vec3::ZERO
        })
        .collect();
    let mut remap = vec![u32::MAX; positions.len()];
    for t in &kept {
        for &i in t {
            remap[i as usize] = 0;
        }
    }
    let mut out = Vec::new();
    for (i, r) in remap.iter_mut().enumerate() {
        if *r == 0 {
            *r = out.len() as u32;
            out.push(positions[i]);
        }
    }
    let tris = kept.into_iter().map(|t| t.map(|i| remap[i as usize])).collect();
    Mesh::new(out, tris).expect("marching cubes output is well formed")
}
