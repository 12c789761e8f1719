//! Shared fixtures for the oracle suite: deterministic rng, admissible
//! parameter draws, band-limited random states, the per-mode linear system
//! assembled directly from the PDE, and an adaptive Dormand–Prince 5(4)
//! integrator used as the independent stiff-ODE reference.
#![allow(dead_code)]

use std::sync::Arc;

use kspec_core::grid::{Grid, SpectralState};
use kspec_core::model::{validate_params, ModelParams, PressureLaw};
use kspec_core::{fft, C64};

/// Deterministic xorshift64* uniform draw in [0, 1).
pub fn xorshift(seed: u64) -> impl FnMut() -> f64 {
    let mut state = seed.max(1);
    move || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64
    }
}

/// Params from the starred constants (α*, β*, κ*, ρ*, γ*): the polynomial
/// pressure ½γ r² gives P′(ρ*)/ρ* = γ for every ρ*.
pub fn params(alpha: f64, beta: f64, kappa: f64, rho: f64, gamma: f64) -> ModelParams {
    let pressure = PressureLaw::Polynomial {
        coeffs: vec![0.0, 0.0, gamma / 2.0],
    };
    validate_params(alpha * rho, beta * rho, kappa, rho, pressure).unwrap()
}

/// Random admissible parameter draw.
pub fn random_params(rng: &mut impl FnMut() -> f64) -> ModelParams {
    let alpha = 0.05 + 1.5 * rng();
    let beta = -0.45 * alpha + 1.5 * rng();
    let kappa = 0.05 + 2.0 * rng();
    let rho = 0.3 + 2.0 * rng();
    let gamma = 0.1 + 1.5 * rng();
    params(alpha, beta, kappa, rho, gamma)
}

/// Random Hermitian state, band-limited to |k_a| <= k_cut.
pub fn random_state(grid: &Arc<Grid>, seed: u64, k_cut: i64, amp: f64) -> SpectralState {
    let mut rng = xorshift(seed);
    let n = grid.total();
    let draw = |rng: &mut dyn FnMut() -> f64| -> Vec<f64> {
        (0..n).map(|_| amp * (2.0 * rng() - 1.0)).collect()
    };
    let theta = draw(&mut rng);
    let u: Vec<Vec<f64>> = (0..grid.dim()).map(|_| draw(&mut rng)).collect();
    let mut state = fft::forward(grid, &theta, &u, 0.0).unwrap();
    for idx in 0..n {
        if (0..grid.dim()).any(|a| grid.k(idx, a).abs() > k_cut) {
            state.theta_hat[idx] = C64::new(0.0, 0.0);
            for comp in &mut state.u_hat {
                comp[idx] = C64::new(0.0, 0.0);
            }
        }
    }
    state
}

/// The (1+d)×(1+d) per-mode linear system of the PDE, assembled directly
/// from the equations (independent of the symbol module):
///   dθ̂/dt  = −ρ* i ξ·û
///   dû_a/dt = −α*|ξ|² û_a − β* ξ_a (ξ·û) − i ξ_a (κ*|ξ|² + γ*) θ̂
pub fn mode_matrix(xi: &[f64], p: &ModelParams) -> Vec<C64> {
    let d = xi.len();
    let n = d + 1;
    let xi_sq: f64 = xi.iter().map(|x| x * x).sum();
    let mut a = vec![C64::new(0.0, 0.0); n * n];
    for (j, &xj) in xi.iter().enumerate() {
        a[1 + j] = C64::new(0.0, -p.rho_star * xj);
        a[(1 + j) * n] = C64::new(0.0, -xj * (p.kappa_star * xi_sq + p.gamma_star));
        for (k, &xk) in xi.iter().enumerate() {
            let mut v = -p.beta_star * xj * xk;
            if j == k {
                v -= p.alpha_star * xi_sq;
            }
            a[(1 + j) * n + (1 + k)] = C64::new(v, 0.0);
        }
    }
    a
}

/// Dense row-major matrix–vector product.
pub fn mat_vec(a: &[C64], v: &[C64]) -> Vec<C64> {
    let n = v.len();
    (0..n)
        .map(|r| {
            let mut acc = C64::new(0.0, 0.0);
            for c in 0..n {
                acc += a[r * n + c] * v[c];
            }
            acc
        })
        .collect()
}

/// Adaptive Dormand–Prince 5(4) for complex systems: integrates y' = f(y)
/// from 0 to `t_end` with per-component error control.
pub fn dp54<F: Fn(&[C64]) -> Vec<C64>>(
    f: F,
    y0: &[C64],
    t_end: f64,
    rtol: f64,
    atol: f64,
) -> Vec<C64> {
    const A: [[f64; 6]; 6] = [
        [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [
            19372.0 / 6561.0,
            -25360.0 / 2187.0,
            64448.0 / 6561.0,
            -212.0 / 729.0,
            0.0,
            0.0,
        ],
        [
            9017.0 / 3168.0,
            -355.0 / 33.0,
            46732.0 / 5247.0,
            49.0 / 176.0,
            -5103.0 / 18656.0,
            0.0,
        ],
        [
            35.0 / 384.0,
            0.0,
            500.0 / 1113.0,
            125.0 / 192.0,
            -2187.0 / 6784.0,
            11.0 / 84.0,
        ],
    ];
    const B4: [f64; 7] = [
        5179.0 / 57600.0,
        0.0,
        7571.0 / 16695.0,
        393.0 / 640.0,
        -92097.0 / 339200.0,
        187.0 / 2100.0,
        1.0 / 40.0,
    ];
    let n = y0.len();
    let mut y = y0.to_vec();
    let mut t = 0.0;
    if t_end == 0.0 {
        return y;
    }
    let mut h = (t_end / 100.0).min(1e-3).max(1e-12);
    let mut k1 = f(&y);
    let mut steps = 0usize;
    while t < t_end {
        steps += 1;
        assert!(steps < 50_000_000, "oracle integrator exceeded step budget");
        if t + h > t_end {
            h = t_end - t;
        }
        let mut k = vec![k1.clone()];
        for s in 0..6 {
            let mut ys = y.clone();
            for (j, kj) in k.iter().enumerate() {
                let c = A[s][j] * h;
                for i in 0..n {
                    ys[i] += kj[i] * c;
                }
            }
            k.push(f(&ys));
        }
        // k[6] is f at the 5th-order solution (FSAL); y5 uses A[5] weights.
        let mut y5 = y.clone();
        for (j, kj) in k.iter().enumerate().take(6) {
            let c = A[5][j] * h;
            for i in 0..n {
                y5[i] += kj[i] * c;
            }
        }
        let mut err: f64 = 0.0;
        for i in 0..n {
            let mut e4 = C64::new(0.0, 0.0);
            for (j, kj) in k.iter().enumerate() {
                e4 += kj[i] * B4[j];
            }
            let y4i = y[i] + e4 * h;
            let scale = atol + rtol * y[i].norm().max(y5[i].norm());
            err = err.max((y5[i] - y4i).norm() / scale);
        }
        if err <= 1.0 {
            t += h;
            y = y5;
            k1 = k.pop().unwrap();
        }
        let factor = if err > 0.0 {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        } else {
            5.0
        };
        h = (h * factor).max(1e-13);
    }
    y
}

/// Max relative spectral distance between two states (sup over all spectra,
/// relative to the larger state's sup magnitude).
pub fn state_distance(a: &SpectralState, b: &SpectralState) -> f64 {
    let mut num: f64 = 0.0;
    let mut den: f64 = 0.0;
    let pairs = std::iter::once((&a.theta_hat, &b.theta_hat))
        .chain(a.u_hat.iter().zip(&b.u_hat));
    for (sa, sb) in pairs {
        for (va, vb) in sa.iter().zip(sb) {
            num = num.max((va - vb).norm());
            den = den.max(va.norm().max(vb.norm()));
        }
    }
    if den == 0.0 {
        num
    } else {
        num / den
    }
}
