//! Execution helpers that dispatch to rayon under the `parallel` feature
//! and run sequentially without it.
//!
//! Every helper visits work items in a schedule-independent pattern: chunk
//! boundaries depend only on lengths, and each chunk's output depends only
//! on its own inputs. Combined with the fixed-shape reductions in
//! [`crate::reduce`], numerical results are bit-identical across thread
//! counts and between the parallel and sequential builds.

use crate::C64;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Chunk length used by the lattice loops.
pub const CHUNK: usize = 4096;

/// Run `f(chunk_index, chunk)` over contiguous mutable chunks of `buf`.
pub fn for_each_chunk_mut<T, F>(buf: &mut [T], chunk: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync,
{
    #[cfg(feature = "parallel")]
    buf.par_chunks_mut(chunk)
        .enumerate()
        .for_each(|(i, c)| f(i, c));
    #[cfg(not(feature = "parallel"))]
    buf.chunks_mut(chunk).enumerate().for_each(|(i, c)| f(i, c));
}

/// Map disjoint blocks of `0..total` to values, in block order.
///
/// `f` receives `(start, end)` of each block; the result vector holds one
/// value per block, ordered by block index regardless of scheduling.
pub fn map_blocks<R, F>(total: usize, block: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize, usize) -> R + Sync,
{
    let n_blocks = total.div_ceil(block.max(1));
    let run = |i: usize| {
        let start = i * block;
        let end = (start + block).min(total);
        f(start, end)
    };
    #[cfg(feature = "parallel")]
    {
        (0..n_blocks).into_par_iter().map(run).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n_blocks).map(run).collect()
    }
}

/// Map a list of independent inputs to outputs, preserving order.
pub fn map_indexed<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(usize, &T) -> R + Sync,
{
    #[cfg(feature = "parallel")]
    {
        items.par_iter().enumerate().map(|(i, t)| f(i, t)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().enumerate().map(|(i, t)| f(i, t)).collect()
    }
}

/// Visit the spectra of a state-shaped bundle (`theta` plus `dim` velocity
/// components) in aligned mutable chunks.
///
/// `f(start, theta_chunk, u_chunks)` sees the chunk starting at flat lattice
/// index `start` in every buffer simultaneously.
pub fn for_each_state_chunk<F>(theta: &mut [C64], u: &mut [Vec<C64>], f: F)
where
    F: Fn(usize, &mut [C64], &mut [&mut [C64]]) + Sync,
{
    let chunk = CHUNK;
    match u {
        [] => for_each_chunk_mut(theta, chunk, |i, tc| f(i * chunk, tc, &mut [])),
        [u0] => {
            #[cfg(feature = "parallel")]
            theta
                .par_chunks_mut(chunk)
                .zip(u0.par_chunks_mut(chunk))
                .enumerate()
                .for_each(|(i, (tc, c0))| f(i * chunk, tc, &mut [c0]));
            #[cfg(not(feature = "parallel"))]
            theta
                .chunks_mut(chunk)
                .zip(u0.chunks_mut(chunk))
                .enumerate()
                .for_each(|(i, (tc, c0))| f(i * chunk, tc, &mut [c0]));
        }
        [u0, u1] => {
            #[cfg(feature = "parallel")]
            theta
                .par_chunks_mut(chunk)
                .zip(u0.par_chunks_mut(chunk))
                .zip(u1.par_chunks_mut(chunk))
                .enumerate()
                .for_each(|(i, ((tc, c0), c1))| f(i * chunk, tc, &mut [c0, c1]));
            #[cfg(not(feature = "parallel"))]
            theta
                .chunks_mut(chunk)
                .zip(u0.chunks_mut(chunk))
                .zip(u1.chunks_mut(chunk))
                .enumerate()
                .for_each(|(i, ((tc, c0), c1))| f(i * chunk, tc, &mut [c0, c1]));
        }
        [u0, u1, u2] => {
            #[cfg(feature = "parallel")]
            theta
                .par_chunks_mut(chunk)
                .zip(u0.par_chunks_mut(chunk))
                .zip(u1.par_chunks_mut(chunk))
                .zip(u2.par_chunks_mut(chunk))
                .enumerate()
                .for_each(|(i, (((tc, c0), c1), c2))| f(i * chunk, tc, &mut [c0, c1, c2]));
            #[cfg(not(feature = "parallel"))]
            theta
                .chunks_mut(chunk)
                .zip(u0.chunks_mut(chunk))
                .zip(u1.chunks_mut(chunk))
                .zip(u2.chunks_mut(chunk))
                .enumerate()
                .for_each(|(i, (((tc, c0), c1), c2))| f(i * chunk, tc, &mut [c0, c1, c2]));
        }
        _ => unreachable!("grids are capped at three spatial dimensions"),
    }
}

/// Visit two complex fields in aligned mutable chunks.
pub fn for_each_pair_chunk<F>(a: &mut [C64], b: &mut [C64], f: F)
where
    F: Fn(usize, &mut [C64], &mut [C64]) + Sync,
{
    let chunk = CHUNK;
    #[cfg(feature = "parallel")]
    a.par_chunks_mut(chunk)
        .zip(b.par_chunks_mut(chunk))
        .enumerate()
        .for_each(|(i, (ca, cb))| f(i * chunk, ca, cb));
    #[cfg(not(feature = "parallel"))]
    a.chunks_mut(chunk)
        .zip(b.chunks_mut(chunk))
        .enumerate()
        .for_each(|(i, (ca, cb))| f(i * chunk, ca, cb));
}

/// Visit four `f64` tables in aligned mutable chunks (kernel table builds).
pub fn for_each_quad_chunk<F>(a: &mut [f64], b: &mut [f64], c: &mut [f64], d: &mut [f64], f: F)
where
    F: Fn(usize, &mut [f64], &mut [f64], &mut [f64], &mut [f64]) + Sync,
{
    let chunk = CHUNK;
    #[cfg(feature = "parallel")]
    a.par_chunks_mut(chunk)
        .zip(b.par_chunks_mut(chunk))
        .zip(c.par_chunks_mut(chunk))
        .zip(d.par_chunks_mut(chunk))
        .enumerate()
        .for_each(|(i, (((ca, cb), cc), cd))| f(i * chunk, ca, cb, cc, cd));
    #[cfg(not(feature = "parallel"))]
    a.chunks_mut(chunk)
        .zip(b.chunks_mut(chunk))
        .zip(c.chunks_mut(chunk))
        .zip(d.chunks_mut(chunk))
        .enumerate()
        .for_each(|(i, (((ca, cb), cc), cd))| f(i * chunk, ca, cb, cc, cd));
}
