//! Field-level application of the solution operator S(t) and its Duhamel
//! companions Φ₁(t), Φ₂(t) to spectral states, with the low/high frequency
//! split S(t)Φ₀ / S(t)Φ∞.
//!
//! Per mode the action is multiplication by the dense symbol of Eq. (s); at
//! field level that reduces to four real scalar tables (m₀, d, m_u, h) — one
//! value per lattice mode — contracted against (θ̂, ξ·û). Tables are cached
//! per (t, kind) keyed by the exact bit pattern of t, since fixed-step
//! integration reuses the same three tables every step.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use thiserror::Error;

use crate::grid::{CutoffProfile, Grid, GridError, SpectralState};
use crate::model::ModelParams;
use crate::par;
use crate::symbol::{kernel_weights, KernelKind};
use crate::C64;

/// Errors from field-level propagation.
#[derive(Debug, Error)]
pub enum PropagatorError {
    /// Underlying state/grid failure (shape, Hermitian symmetry, finiteness).
    #[error(transparent)]
    Grid(#[from] GridError),
    /// Propagation time must be finite and nonnegative.
    #[error("propagation time must be finite and nonnegative, got {t}")]
    BadTime { t: f64 },
}

/// The four kernel tables of one matrix function at one time, over the
/// lattice. Entries are real: every kernel is a symmetric function of the
/// eigenvalue pair (conjugate or real), so storing `f64` both halves memory
/// and makes Hermitian symmetry of the application exact.
#[derive(Debug)]
pub struct KernelTables {
    /// θ-row diagonal kernel.
    pub m0: Vec<f64>,
    /// Off-diagonal divided-difference kernel.
    pub d: Vec<f64>,
    /// Compressible (longitudinal) velocity kernel.
    pub mu: Vec<f64>,
    /// Solenoidal (transverse) velocity kernel.
    pub h: Vec<f64>,
}

/// Cached applier of S(t), Φ₁(t), Φ₂(t) on one grid.
pub struct Propagator {
    grid: Arc<Grid>,
    params: ModelParams,
    cache: RwLock<HashMap<(u64, KernelKind), Arc<KernelTables>>>,
}

impl Propagator {
    /// New propagator over `grid` with validated `params`.
    pub fn new(grid: Arc<Grid>, params: ModelParams) -> Propagator {
        Propagator {
            grid,
            params,
            cache: RwLock::new(HashMap::new()),
        }
    }

    /// The grid this propagator is bound to.
    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    /// The model parameters.
    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    /// Number of cached kernel tables.
    pub fn cache_len(&self) -> usize {
        self.cache.read().unwrap().len()
    }

    /// Fetch (building on miss) the kernel tables for one (kind, t).
    pub fn tables(&self, kind: KernelKind, t: f64) -> Arc<KernelTables> {
        let key = (t.to_bits(), kind);
        if let Some(hit) = self.cache.read().unwrap().get(&key) {
            return Arc::clone(hit);
        }
        let built = Arc::new(self.build_tables(kind, t));
        let mut guard = self.cache.write().unwrap();
        Arc::clone(guard.entry(key).or_insert(built))
    }

    fn build_tables(&self, kind: KernelKind, t: f64) -> KernelTables {
        let total = self.grid.total();
        let mut m0 = vec![0.0; total];
        let mut d = vec![0.0; total];
        let mut mu = vec![0.0; total];
        let mut h = vec![0.0; total];
        let grid = &self.grid;
        let params = &self.params;
        par::for_each_quad_chunk(&mut m0, &mut d, &mut mu, &mut h, |start, a, b, c, e| {
            for i in 0..a.len() {
                let w = kernel_weights(kind, t, grid.xi_norm_sq(start + i), params);
                a[i] = w.m0;
                b[i] = w.d;
                c[i] = w.mu;
                e[i] = w.h;
            }
        });
        KernelTables { m0, d, mu, h }
    }

    /// Apply S(t): per-mode multiplication by the propagator symbol.
    ///
    /// The input must be Hermitian; by the conjugate symmetry of the symbol
    /// (real kernels, imaginary couplings odd in ξ) the output is too.
    /// Output time is `state.time + t`. `t = 0` short-circuits to a clone.
    pub fn apply_semigroup(
        &self,
        state: &SpectralState,
        t: f64,
    ) -> Result<SpectralState, PropagatorError> {
        state.check_hermitian(1e-12)?;
        self.apply_kernel_unchecked(KernelKind::Propagator, state, t)
    }

    /// Apply one matrix function (S, Φ₁, or Φ₂) without the Hermitian
    /// pre-check — the integrator's inner loop applies kernels to fields
    /// already guaranteed symmetric.
    pub fn apply_kernel(
        &self,
        kind: KernelKind,
        state: &SpectralState,
        t: f64,
    ) -> Result<SpectralState, PropagatorError> {
        self.apply_kernel_unchecked(kind, state, t)
    }

    fn apply_kernel_unchecked(
        &self,
        kind: KernelKind,
        state: &SpectralState,
        t: f64,
    ) -> Result<SpectralState, PropagatorError> {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(PropagatorError::BadTime { t });
        }
        if !Arc::ptr_eq(&state.grid, &self.grid) && !state.grid.same_layout(&self.grid) {
            return Err(GridError::GridMismatch.into());
        }
        let mut out = state.clone();
        out.time = state.time + t;
        if t == 0.0 && kind == KernelKind::Propagator {
            // Identity path: bitwise unchanged, no multiply round-off.
            return Ok(out);
        }
        let tables = self.tables(kind, t);
        apply_tables(&self.grid, &tables, &self.params, &mut out);
        Ok(out)
    }

    /// Apply S(t) to the low-pass and high-pass parts separately, returning
    /// (S(t)Φ₀ state, S(t)Φ∞ state). Their sum is S(t) applied to the whole
    /// state, by linearity.
    pub fn apply_split_semigroup(
        &self,
        state: &SpectralState,
        t: f64,
        profile: &CutoffProfile,
    ) -> Result<(SpectralState, SpectralState), PropagatorError> {
        state.check_hermitian(1e-12)?;
        let (low, high) = crate::grid::low_high_split(state, profile);
        let s_low = self.apply_kernel_unchecked(KernelKind::Propagator, &low, t)?;
        let s_high = self.apply_kernel_unchecked(KernelKind::Propagator, &high, t)?;
        Ok((s_low, s_high))
    }
}

/// Contract the kernel tables against (θ̂, û) in place:
/// θ̂′ = m₀θ̂ − iρ*d(ξ·û),
/// û′ = −i(γ*+κ*|ξ|²)d ξ θ̂ + h û + (m_u−h)(ξ·û/|ξ|²) ξ.
///
/// Modes carrying a Nyquist component (k = −M/2 on any axis) are projected
/// to zero: there ξ(−k) ≠ −ξ(k) on the lattice, so the odd symbol terms
/// cannot respect conjugate pairing, and zeroing is the only convention
/// that preserves Hermitian symmetry, linearity, and the exact semigroup
/// law simultaneously. The dealias mask removes those modes from the
/// dynamics anyway, so this is a no-op on admissible states.
fn apply_tables(grid: &Grid, tables: &KernelTables, params: &ModelParams, state: &mut SpectralState) {
    let rho = params.rho_star;
    let gamma = params.gamma_star;
    let kappa = params.kappa_star;
    let dim = grid.dim();
    let nyquist = -(grid.modes() as i64) / 2;
    let theta = &mut state.theta_hat;
    let u = &mut state.u_hat;
    par::for_each_state_chunk(theta, u, |start, th, uc| {
        let mut xi = [0.0; 3];
        for i in 0..th.len() {
            let idx = start + i;
            if (0..dim).any(|a| grid.k(idx, a) == nyquist) {
                th[i] = C64::new(0.0, 0.0);
                for comp in uc.iter_mut() {
                    comp[i] = C64::new(0.0, 0.0);
                }
                continue;
            }
            grid.xi_vector(idx, &mut xi);
            let xi_sq = grid.xi_norm_sq(idx);
            let m0 = tables.m0[idx];
            let d = tables.d[idx];
            let mu = tables.mu[idx];
            let h = tables.h[idx];
            let mut xi_dot_u = C64::new(0.0, 0.0);
            for (a, comp) in uc.iter().enumerate() {
                xi_dot_u += comp[i] * xi[a];
            }
            let th_old = th[i];
            th[i] = th_old * m0 + C64::new(0.0, -rho * d) * xi_dot_u;
            let fu = C64::new(0.0, -(gamma + kappa * xi_sq) * d) * th_old;
            let long = if xi_sq > 0.0 {
                xi_dot_u * ((mu - h) / xi_sq)
            } else {
                C64::new(0.0, 0.0)
            };
            for (a, comp) in uc.iter_mut().enumerate() {
                comp[i] = fu * xi[a] + comp[i] * h + long * xi[a];
            }
        }
    });
}
