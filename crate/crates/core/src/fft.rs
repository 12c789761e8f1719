//! Forward/inverse discrete Fourier transforms on the lattice.
//!
//! Convention: unnormalized forward, inverse scaled by M⁻ᴺ, so
//! `inverse(forward(x)) = x` to roundoff. Multi-dimensional transforms run
//! one axis at a time; the last axis is contiguous and transforms in place,
//! other axes gather lines into a scratch buffer, transform, and scatter
//! back. All passes are data-parallel over disjoint lines with results
//! independent of scheduling.

use std::sync::Arc;

use crate::grid::{Grid, GridError, SpectralState};
use crate::par;
use crate::C64;

/// In-place unnormalized forward DFT along every axis.
pub fn fft_forward_inplace(grid: &Grid, data: &mut [C64]) {
    transform(grid, data, true);
}

/// In-place normalized (M⁻ᴺ) inverse DFT along every axis.
pub fn fft_inverse_inplace(grid: &Grid, data: &mut [C64]) {
    transform(grid, data, false);
    let scale = 1.0 / grid.total() as f64;
    par::for_each_chunk_mut(data, par::CHUNK, |_, chunk| {
        for v in chunk.iter_mut() {
            *v *= scale;
        }
    });
}

fn transform(grid: &Grid, data: &mut [C64], forward: bool) {
    assert_eq!(data.len(), grid.total(), "field shape must match the grid");
    let plan = if forward {
        grid.plan_forward()
    } else {
        grid.plan_inverse()
    };
    let m = grid.modes();
    let dim = grid.dim();
    let mut tmp = vec![C64::new(0.0, 0.0); if dim > 1 { grid.total() } else { 0 }];
    for axis in 0..dim {
        if axis == dim - 1 {
            // Contiguous lines: transform in place.
            par::for_each_chunk_mut(data, m, |_, line| {
                let mut scratch =
                    vec![C64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
                plan.process_with_scratch(line, &mut scratch);
            });
        } else {
            gather_transform(grid, data, &mut tmp, axis, &plan);
            scatter(grid, &tmp, data, axis);
        }
    }
}

/// Copy every line along `axis` into `tmp` (line-major) and transform it.
fn gather_transform(
    grid: &Grid,
    src: &[C64],
    tmp: &mut [C64],
    axis: usize,
    plan: &Arc<dyn rustfft::Fft<f64>>,
) {
    let m = grid.modes();
    let dim = grid.dim();
    let stride = grid.stride(axis);
    par::for_each_chunk_mut(tmp, m, |line, chunk| {
        // Decompose the line number over the complement axes (axis order).
        let mut rem = line;
        let mut base = 0usize;
        for a in (0..dim).rev() {
            if a == axis {
                continue;
            }
            base += (rem % m) * grid.stride(a);
            rem /= m;
        }
        for (i, v) in chunk.iter_mut().enumerate() {
            *v = src[base + i * stride];
        }
        let mut scratch = vec![C64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
        plan.process_with_scratch(chunk, &mut scratch);
    });
}

/// Scatter line-major `tmp` (lines along `axis`) back into lattice order.
fn scatter(grid: &Grid, tmp: &[C64], dst: &mut [C64], axis: usize) {
    let m = grid.modes();
    let dim = grid.dim();
    debug_assert!(axis < dim - 1, "last axis transforms in place");
    par::for_each_chunk_mut(dst, m, |q, chunk| {
        // Chunk q holds coords c[0..dim-1] of the leading axes; the last
        // axis (the least-significant digit of the line number, since
        // axis < dim-1) varies with the in-chunk offset j.
        let mut c = [0usize; 3];
        let mut rem = q;
        for a in (0..dim - 1).rev() {
            c[a] = rem % m;
            rem /= m;
        }
        let pos = c[axis];
        let mut line0 = 0usize;
        for a in 0..dim {
            if a == axis {
                continue;
            }
            line0 = line0 * m + if a == dim - 1 { 0 } else { c[a] };
        }
        for (j, v) in chunk.iter_mut().enumerate() {
            *v = tmp[(line0 + j) * m + pos];
        }
    });
}

/// Forward-transform real physical fields into a [`SpectralState`].
pub fn forward(
    grid: &Arc<Grid>,
    theta: &[f64],
    u: &[Vec<f64>],
    time: f64,
) -> Result<SpectralState, GridError> {
    if u.len() != grid.dim() {
        return Err(GridError::ShapeMismatch {
            expected: grid.dim(),
            got: u.len(),
        });
    }
    let theta_hat = forward_field(grid, theta)?;
    let mut u_hat = Vec::with_capacity(u.len());
    for comp in u {
        u_hat.push(forward_field(grid, comp)?);
    }
    SpectralState::from_parts(grid, time, theta_hat, u_hat)
}

/// Forward-transform one real field.
pub fn forward_field(grid: &Grid, field: &[f64]) -> Result<Vec<C64>, GridError> {
    if field.len() != grid.total() {
        return Err(GridError::ShapeMismatch {
            expected: grid.total(),
            got: field.len(),
        });
    }
    let mut buf: Vec<C64> = field.iter().map(|&x| C64::new(x, 0.0)).collect();
    fft_forward_inplace(grid, &mut buf);
    Ok(buf)
}

/// Inverse-transform a state to real physical fields.
///
/// The imaginary residue of each field must stay below 10⁻¹² relative to its
/// magnitude — the lattice expression of Hermitian symmetry — or the
/// transform is rejected.
pub fn inverse(state: &SpectralState) -> Result<(Vec<f64>, Vec<Vec<f64>>), GridError> {
    let grid = &state.grid;
    let theta = inverse_field(grid, &state.theta_hat, "theta_hat")?;
    const NAMES: [&str; 3] = ["u_hat[0]", "u_hat[1]", "u_hat[2]"];
    let mut u = Vec::with_capacity(grid.dim());
    for (a, comp) in state.u_hat.iter().enumerate() {
        u.push(inverse_field(grid, comp, NAMES[a])?);
    }
    Ok((theta, u))
}

/// Inverse-transform one Hermitian spectrum to a real field.
pub fn inverse_field(
    grid: &Grid,
    spec: &[C64],
    name: &'static str,
) -> Result<Vec<f64>, GridError> {
    if spec.len() != grid.total() {
        return Err(GridError::ShapeMismatch {
            expected: grid.total(),
            got: spec.len(),
        });
    }
    let buf = inverse_field_complex(grid, spec);
    let scale = crate::grid::max_abs_complex(&buf);
    let residue = crate::reduce::max_mapped(buf.len(), |i| buf[i].im.abs());
    if scale > 0.0 && !(residue / scale <= 1e-12) {
        return Err(GridError::NotHermitian {
            field: name,
            max_rel: residue / scale,
        });
    }
    Ok(buf.into_iter().map(|z| z.re).collect())
}

/// Inverse-transform a spectrum keeping the complex physical values.
pub fn inverse_field_complex(grid: &Grid, spec: &[C64]) -> Vec<C64> {
    let mut buf = spec.to_vec();
    fft_inverse_inplace(grid, &mut buf);
    buf
}

/// Multiply a spectrum by the derivative symbol ∂^α ↦ Π_a (iξ_a).
///
/// `alpha` lists one axis per differentiation, e.g. `[0, 0, 1]` = ∂²_{x₀}∂_{x₁}.
pub fn apply_derivative(grid: &Grid, spec: &[C64], alpha: &[usize]) -> Vec<C64> {
    let mut out = spec.to_vec();
    if alpha.is_empty() {
        return out;
    }
    // i^r rotates the quadrant; the magnitude is the real product of ξ's.
    let rot = match alpha.len() % 4 {
        0 => C64::new(1.0, 0.0),
        1 => C64::new(0.0, 1.0),
        2 => C64::new(-1.0, 0.0),
        _ => C64::new(0.0, -1.0),
    };
    par::for_each_chunk_mut(&mut out, par::CHUNK, |ci, chunk| {
        let base = ci * par::CHUNK;
        for (i, v) in chunk.iter_mut().enumerate() {
            let idx = base + i;
            let mut factor = 1.0;
            for &a in alpha {
                factor *= grid.xi(idx, a);
            }
            *v *= rot * factor;
        }
    });
    out
}
