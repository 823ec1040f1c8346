//! Order-preserving map helpers. With the `parallel` feature the work is
//! spread over the current rayon pool; the output order is always the index
//! order, so results never depend on the schedule.

use alloc::vec::Vec;

#[cfg(feature = "parallel")]
pub(crate) fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).map(f).collect()
}

/// Maps fixed-size blocks of `0..n` and concatenates the results in order.
pub(crate) fn map_blocks<T, F>(n: usize, block: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(core::ops::Range<usize>, &mut Vec<T>) + Sync + Send,
{
    let block = block.max(1);
    let blocks = n.div_ceil(block);
    let parts = map_indexed(blocks, |b| {
        let start = b * block;
        let mut out = Vec::new();
        f(start..(start + block).min(n), &mut out);
        out
    });
    let mut all = Vec::with_capacity(parts.iter().map(Vec::len).sum());
    for mut p in parts {
        all.append(&mut p);
    }
    all
}
