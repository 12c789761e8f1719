//! Deterministic reductions over lattice-sized arrays.
//!
//! Floating-point addition is not associative, so naive parallel reductions
//! give results that depend on the thread count. Every reduction here uses a
//! fixed shape instead: the index range is cut into blocks of [`BLOCK`]
//! elements, each block is reduced by a pairwise tree over its values in
//! index order, and the per-block results are combined by a second pairwise
//! tree. The shape depends only on the length, so sums are bit-identical
//! across thread counts and between the parallel and sequential builds, and
//! the pairwise trees keep rounding error at O(log n) ulps.

use crate::par::map_blocks;

/// Elements per reduction block.
pub const BLOCK: usize = 4096;

/// Pairwise-tree sum of a slice; shape depends only on the length.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 8 {
        let mut s = 0.0;
        for &x in v {
            s += x;
        }
        return s;
    }
    let mid = v.len() / 2;
    pairwise_sum(&v[..mid]) + pairwise_sum(&v[mid..])
}

/// Maximum of a slice, `NaN`-propagating.
fn slice_max(v: &[f64]) -> f64 {
    let mut m = f64::NEG_INFINITY;
    for &x in v {
        if x.is_nan() {
            return f64::NAN;
        }
        if x > m {
            m = x;
        }
    }
    m
}

/// Deterministic sum of `f(i)` over `0..total`.
pub fn sum_mapped<F>(total: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    if total == 0 {
        return 0.0;
    }
    let blocks = map_blocks(total, BLOCK, |start, end| {
        let vals: Vec<f64> = (start..end).map(&f).collect();
        pairwise_sum(&vals)
    });
    pairwise_sum(&blocks)
}

/// Deterministic maximum of `f(i)` over `0..total` (`-inf` when empty).
pub fn max_mapped<F>(total: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    if total == 0 {
        return f64::NEG_INFINITY;
    }
    let blocks = map_blocks(total, BLOCK, |start, end| {
        let vals: Vec<f64> = (start..end).map(&f).collect();
        slice_max(&vals)
    });
    slice_max(&blocks)
}

/// Deterministic minimum of `f(i)` over `0..total` (`+inf` when empty).
pub fn min_mapped<F>(total: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    -max_mapped(total, |i| -f(i))
}
