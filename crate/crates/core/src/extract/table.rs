//! Marching-cubes case table, built by tracing the surface across the six
//! faces of the cube.
//!
//! Corner `c` sits at `(c & 1, c >> 1 & 1, c >> 2 & 1)`. Edges are grouped by
//! axis: edges `4a..4a + 4` run along axis `a` from the four corners whose
//! bit `a` is clear, in ascending corner order. A corner is inside when its
//! value is below the iso level.
//!
//! On each face the crossing edges are paired into segments; on a face with
//! two diagonally opposite inside corners each inside corner is cut off on
//! its own. Neighboring cells make the same choice on their shared face, so
//! the extracted surface is watertight. Segments are oriented so the chained
//! loops wind counter-clockwise seen from outside, and each loop is
//! fan-triangulated.

use alloc::vec::Vec;

use arrayvec::ArrayVec;

/// Corners joined by each edge, lower corner first.
pub(crate) const EDGES: [[u8; 2]; 12] = [
    [0, 1],
    [2, 3],
    [4, 5],
    [6, 7],
    [0, 2],
    [1, 3],
    [4, 6],
    [5, 7],
    [0, 4],
    [1, 5],
    [2, 6],
    [3, 7],
];

#[inline]
pub(crate) fn edge_axis(e: usize) -> usize {
    e / 4
}

/// Face corners in cyclic order, with the outward face normal.
const FACES: [([u8; 4], [i8; 3]); 6] = [
    ([0, 2, 6, 4], [-1, 0, 0]),
    ([1, 3, 7, 5], [1, 0, 0]),
    ([0, 1, 5, 4], [0, -1, 0]),
    ([2, 3, 7, 6], [0, 1, 0]),
    ([0, 1, 3, 2], [0, 0, -1]),
    ([4, 5, 7, 6], [0, 0, 1]),
];

pub(crate) type CaseTriangles = ArrayVec<[u8; 3], 8>;

fn corner_pos(c: u8) -> [f64; 3] {
    [(c & 1) as f64, (c >> 1 & 1) as f64, (c >> 2 & 1) as f64]
}

fn edge_between(a: u8, b: u8) -> usize {
    let (lo, hi) = (a.min(b), a.max(b));
    EDGES.iter().position(|&[x, y]| x == lo && y == hi).expect("adjacent corners")
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn midpoint(e: usize) -> [f64; 3] {
    let [a, b] = EDGES[e].map(corner_pos);
    [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0, (a[2] + b[2]) / 2.0]
}

/// Directed segment `e1 -> e2` on a face, oriented against `inside`.
fn orient(e1: usize, e2: usize, inside_corner: u8, normal: [i8; 3]) -> (usize, usize) {
    let m1 = midpoint(e1);
    let d = sub(midpoint(e2), m1);
    let w = sub(corner_pos(inside_corner), m1);
    let c = cross(d, w);
    let s = c[0] * normal[0] as f64 + c[1] * normal[1] as f64 + c[2] * normal[2] as f64;
    if s < 0.0 {
        (e1, e2)
    } else {
        (e2, e1)
    }
}

fn case_triangles(case: u8) -> CaseTriangles {
    let inside = |c: u8| case >> c & 1 == 1;
    let mut next = [u8::MAX; 12];
    for (corners, normal) in FACES {
        let ins: ArrayVec<usize, 4> = (0..4).filter(|&i| inside(corners[i])).collect();
        match ins.len() {
            0 | 4 => {}
            2 if (ins[1] - ins[0]) == 2 => {
                // Diagonal pair: cut each inside corner off separately.
                for &i in &ins {
                    let c = corners[i];
                    let e1 = edge_between(c, corners[(i + 1) % 4]);
                    let e2 = edge_between(c, corners[(i + 3) % 4]);
                    let (a, b) = orient(e1, e2, c, normal);
                    next[a] = b as u8;
                }
            }
            _ => {
                let crossing: ArrayVec<(usize, u8), 2> = (0..4)
                    .filter(|&i| inside(corners[i]) != inside(corners[(i + 1) % 4]))
                    .map(|i| {
                        let (p, q) = (corners[i], corners[(i + 1) % 4]);
                        (edge_between(p, q), if inside(p) { p } else { q })
                    })
                    .collect();
                let (a, b) = orient(crossing[0].0, crossing[1].0, crossing[0].1, normal);
                next[a] = b as u8;
            }
        }
    }
    let mut tris = CaseTriangles::new();
    let mut seen = [false; 12];
    for start in 0..12 {
        if next[start] == u8::MAX || seen[start] {
            continue;
        }
        let mut lp: ArrayVec<u8, 12> = ArrayVec::new();
        let mut e = start;
        while !seen[e] {
            seen[e] = true;
            lp.push(e as u8);
            e = next[e] as usize;
        }
        debug_assert_eq!(e, start, "face segments must close into loops");
        for i in 1..lp.len() - 1 {
            tris.push([lp[0], lp[i], lp[i + 1]]);
        }
    }
    tris
}

/// Triangles for all 256 corner-sign cases, as edge-index triples.
pub(crate) fn build() -> Vec<CaseTriangles> {
    (0..=255u8).map(case_triangles).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trivial_cases_are_empty() {
        let t = build();
        assert!(t[0].is_empty());
        assert!(t[255].is_empty());
    }

    #[test]
    fn single_corner_gives_one_triangle() {
        let t = build();
        for c in 0..8 {
            assert_eq!(t[1 << c].len(), 1);
            assert_eq!(t[255 ^ (1 << c)].len(), 1);
        }
    }

    #[test]
    fn every_crossing_edge_is_used_and_only_those() {
        let t = build();
        for case in 0..256usize {
            let mut used = [false; 12];
            for tri in &t[case] {
                for &e in tri {
                    used[e as usize] = true;
                }
            }
            for (e, &[a, b]) in EDGES.iter().enumerate() {
                let crossing = (case >> a & 1) != (case >> b & 1);
                assert_eq!(used[e], crossing, "case {case} edge {e}");
            }
        }
    }

    #[test]
    fn triangle_counts_match_loop_structure() {
        // Two inside corners sharing an edge: one quad, two triangles.
        let t = build();
        assert_eq!(t[0b0000_0011].len(), 2);
        // Opposite corners of the cube: two separate triangles.
        assert_eq!(t[0b1000_0001].len(), 2);
        // Whole bottom face inside: one quad.
        assert_eq!(t[0b0000_1111].len(), 2);
        for case in &t {
            assert!(case.len() <= 5);
        }
    }

    #[test]
    fn complement_reverses_orientation() {
        let t = build();
        // The crossing edges of a case and its complement coincide; the
        // surfaces should be equal with opposite winding when no face is
        // ambiguous. Check on all cases without a diagonal face pair.
        for case in 1..255usize {
            let ambiguous = FACES.iter().any(|(c, _)| {
                let ins: ArrayVec<usize, 4> = (0..4).filter(|&i| case >> c[i] & 1 == 1).collect();
                ins.len() == 2 && ins[1] - ins[0] == 2
            });
            if ambiguous {
                continue;
            }
            let mut a: Vec<[u8; 3]> = t[case].iter().map(|&x| canonical(x)).collect();
            let mut b: Vec<[u8; 3]> = t[255 - case].iter().map(|&[x, y, z]| canonical([x, z, y])).collect();
            // Fan triangulations may differ; compare directed boundary edges instead.
            a = boundary(&a);
            b = boundary(&b);
            a.sort();
            b.sort();
            assert_eq!(a, b, "case {case}");
        }
    }

    fn canonical(t: [u8; 3]) -> [u8; 3] {
        let r = t.iter().enumerate().min_by_key(|&(_, v)| *v).unwrap().0;
        [t[r], t[(r + 1) % 3], t[(r + 2) % 3]]
    }

    fn boundary(tris: &[[u8; 3]]) -> Vec<[u8; 3]> {
        let mut directed: Vec<[u8; 3]> = Vec::new();
        for t in tris {
            for k in 0..3 {
                directed.push([t[k], t[(k + 1) % 3], 0]);
            }
        }
        directed
            .iter()
            .filter(|d| !directed.contains(&[d[1], d[0], 0]))
            .copied()
            .collect()
    }
}
