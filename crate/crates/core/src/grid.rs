//! Periodic lattice, wavenumber bookkeeping, dealiasing, and the smooth
//! low/high frequency splitter.
//!
//! A [`Grid`] is a cubic box of side `box_length` with `modes` points per
//! axis in `dim` ≤ 3 dimensions. Spectra live on the integer wavenumber
//! lattice k ∈ [−M/2, M/2)ᴺ in DFT order, with ξ = 2πk/L. The grid owns the
//! FFT plans and the precomputed per-mode tables (|ξ|², integer radius²,
//! dealias mask) that the rest of the crate indexes by flat lattice index.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use thiserror::Error;

use crate::reduce;
use crate::C64;

/// Errors from lattice construction and state validation.
#[derive(Debug, Error)]
pub enum GridError {
    /// Spatial dimensions outside the supported range 1..=3.
    #[error("unsupported dimension {0}; this lattice supports 1 to 3 axes")]
    UnsupportedDim(usize),
    /// Mode counts must be even (the DFT order pairs ±k) and at least 4.
    #[error("modes per axis must be even and at least 4, got {0}")]
    BadModes(usize),
    /// Box length must be positive and finite.
    #[error("box length must be positive and finite, got {0}")]
    BadBoxLength(f64),
    /// Cutoff radius must be positive and finite.
    #[error("cutoff epsilon must be positive and finite, got {0}")]
    BadCutoff(f64),
    /// A field buffer does not match the lattice size.
    #[error("field has {got} entries but the lattice has {expected}")]
    ShapeMismatch { expected: usize, got: usize },
    /// Two states were combined across structurally different grids.
    #[error("states live on different grids")]
    GridMismatch,
    /// Hermitian symmetry (or reality of the inverse transform) failed.
    #[error("{field} violates Hermitian symmetry: max relative defect {max_rel:.3e}")]
    NotHermitian { field: &'static str, max_rel: f64 },
    /// A NaN or infinity appeared in a field.
    #[error("{field} contains a non-finite value at flat index {index}")]
    NonFinite { field: &'static str, index: usize },
}

/// Cubic periodic lattice with spectral bookkeeping.
pub struct Grid {
    dim: usize,
    modes: usize,
    box_length: f64,
    total: usize,
    strides: [usize; 3],
    k_axis: Vec<i64>,
    xi_axis: Vec<f64>,
    xi_sq: Vec<f64>,
    k_radius_sq: Vec<i64>,
    dealias: Vec<bool>,
    fft_fwd: Arc<dyn Fft<f64>>,
    fft_inv: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("dim", &self.dim)
            .field("modes", &self.modes)
            .field("box_length", &self.box_length)
            .finish()
    }
}

impl Grid {
    /// Build a `dim`-dimensional lattice with `modes` points per axis in a
    /// box of side `box_length`.
    pub fn new(dim: usize, modes: usize, box_length: f64) -> Result<Arc<Grid>, GridError> {
        if dim == 0 || dim > 3 {
            return Err(GridError::UnsupportedDim(dim));
        }
        if modes < 4 || modes % 2 != 0 {
            return Err(GridError::BadModes(modes));
        }
        if !(box_length.is_finite() && box_length > 0.0) {
            return Err(GridError::BadBoxLength(box_length));
        }
        let m = modes;
        let total = m.pow(dim as u32);
        let mut strides = [1usize; 3];
        for a in 0..dim {
            strides[a] = m.pow((dim - 1 - a) as u32);
        }
        // DFT-order integer wavenumbers: 0,1,…,M/2−1,−M/2,…,−1.
        let k_axis: Vec<i64> = (0..m)
            .map(|c| if c < m / 2 { c as i64 } else { c as i64 - m as i64 })
            .collect();
        let xi_axis: Vec<f64> = k_axis
            .iter()
            .map(|&k| 2.0 * std::f64::consts::PI * (k as f64) / box_length)
            .collect();

        let cutoff = (m as f64) / 3.0;
        let mut xi_sq = vec![0.0f64; total];
        let mut k_radius_sq = vec![0i64; total];
        let mut dealias = vec![false; total];
        for idx in 0..total {
            let mut x2 = 0.0;
            let mut k2 = 0i64;
            let mut keep = true;
            for a in 0..dim {
                let c = (idx / strides[a]) % m;
                let xi = xi_axis[c];
                let k = k_axis[c];
                x2 += xi * xi;
                k2 += k * k;
                if (k.abs() as f64) >= cutoff {
                    keep = false;
                }
            }
            xi_sq[idx] = x2;
            k_radius_sq[idx] = k2;
            dealias[idx] = keep;
        }

        let mut planner = FftPlanner::new();
        let fft_fwd = planner.plan_fft_forward(m);
        let fft_inv = planner.plan_fft_inverse(m);

        Ok(Arc::new(Grid {
            dim,
            modes: m,
            box_length,
            total,
            strides,
            k_axis,
            xi_axis,
            xi_sq,
            k_radius_sq,
            dealias,
            fft_fwd,
            fft_inv,
        }))
    }

    /// Number of spatial dimensions.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Modes per axis.
    pub fn modes(&self) -> usize {
        self.modes
    }

    /// Box side length L.
    pub fn box_length(&self) -> f64 {
        self.box_length
    }

    /// Total mode count Mᴺ.
    pub fn total(&self) -> usize {
        self.total
    }

    /// Lattice spacing L/M.
    pub fn spacing(&self) -> f64 {
        self.box_length / self.modes as f64
    }

    /// Volume element (L/M)ᴺ of the lattice quadrature.
    pub fn volume_element(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// Flat-index stride of `axis`.
    pub fn stride(&self, axis: usize) -> usize {
        self.strides[axis]
    }

    /// Per-axis coordinate (DFT position) of a flat index.
    #[inline]
    pub fn coord(&self, idx: usize, axis: usize) -> usize {
        (idx / self.strides[axis]) % self.modes
    }

    /// Integer wavenumber component k_axis at a flat index.
    #[inline]
    pub fn k(&self, idx: usize, axis: usize) -> i64 {
        self.k_axis[self.coord(idx, axis)]
    }

    /// Continuous wavenumber component ξ_axis = 2πk/L at a flat index.
    #[inline]
    pub fn xi(&self, idx: usize, axis: usize) -> f64 {
        self.xi_axis[self.coord(idx, axis)]
    }

    /// Fill `out[..dim]` with the wavevector ξ at a flat index.
    #[inline]
    pub fn xi_vector(&self, idx: usize, out: &mut [f64; 3]) {
        for a in 0..self.dim {
            out[a] = self.xi(idx, a);
        }
    }

    /// |ξ|² at a flat index (precomputed, bitwise symmetric under k ↦ −k).
    #[inline]
    pub fn xi_norm_sq(&self, idx: usize) -> f64 {
        self.xi_sq[idx]
    }

    /// Integer radius² Σ k_a² at a flat index.
    #[inline]
    pub fn k_radius_sq(&self, idx: usize) -> i64 {
        self.k_radius_sq[idx]
    }

    /// Largest integer radius |k| present on the lattice.
    pub fn k_radius_max(&self) -> f64 {
        let m = self.modes as f64 / 2.0;
        (m * m * self.dim as f64).sqrt()
    }

    /// Flat index of the mode with per-axis coordinates negated (mod M).
    #[inline]
    pub fn neg_index(&self, idx: usize) -> usize {
        let mut out = 0;
        for a in 0..self.dim {
            let c = self.coord(idx, a);
            let nc = (self.modes - c) % self.modes;
            out += nc * self.strides[a];
        }
        out
    }

    /// Flat index of integer wavevector `k` (wrapped into the lattice).
    pub fn index_of(&self, k: &[i64]) -> usize {
        let m = self.modes as i64;
        let mut out = 0;
        for a in 0..self.dim {
            let c = ((k[a] % m) + m) % m;
            out += c as usize * self.strides[a];
        }
        out
    }

    /// 2/3-rule dealias mask: true iff |k_axis| < M/3 on every axis.
    pub fn dealias_mask(&self) -> &[bool] {
        &self.dealias
    }

    /// Zero all masked modes of a spectrum in place.
    pub fn apply_dealias(&self, spec: &mut [C64]) {
        let mask = &self.dealias;
        crate::par::for_each_chunk_mut(spec, crate::par::CHUNK, |ci, chunk| {
            let base = ci * crate::par::CHUNK;
            for (i, v) in chunk.iter_mut().enumerate() {
                if !mask[base + i] {
                    *v = Complex64::new(0.0, 0.0);
                }
            }
        });
    }

    /// Forward (unnormalized) one-axis FFT plan.
    pub(crate) fn plan_forward(&self) -> Arc<dyn Fft<f64>> {
        Arc::clone(&self.fft_fwd)
    }

    /// Inverse (unnormalized) one-axis FFT plan.
    pub(crate) fn plan_inverse(&self) -> Arc<dyn Fft<f64>> {
        Arc::clone(&self.fft_inv)
    }

    /// Structural equality: same dim, modes, and box length bits.
    pub fn same_layout(&self, other: &Grid) -> bool {
        self.dim == other.dim
            && self.modes == other.modes
            && self.box_length.to_bits() == other.box_length.to_bits()
    }
}

/// Spectral unknowns (θ̂, û) at one instant.
#[derive(Clone)]
pub struct SpectralState {
    /// Lattice the spectra live on.
    pub grid: Arc<Grid>,
    /// Simulation time of this snapshot.
    pub time: f64,
    /// Density-perturbation spectrum θ̂.
    pub theta_hat: Vec<C64>,
    /// Velocity spectra û, one per spatial dimension.
    pub u_hat: Vec<Vec<C64>>,
}

impl fmt::Debug for SpectralState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectralState")
            .field("grid", &self.grid)
            .field("time", &self.time)
            .finish()
    }
}

impl SpectralState {
    /// All-zero state at time 0.
    pub fn zeros(grid: &Arc<Grid>) -> SpectralState {
        let n = grid.total();
        SpectralState {
            grid: Arc::clone(grid),
            time: 0.0,
            theta_hat: vec![C64::new(0.0, 0.0); n],
            u_hat: vec![vec![C64::new(0.0, 0.0); n]; grid.dim()],
        }
    }

    /// Build from raw spectra, checking shapes.
    pub fn from_parts(
        grid: &Arc<Grid>,
        time: f64,
        theta_hat: Vec<C64>,
        u_hat: Vec<Vec<C64>>,
    ) -> Result<SpectralState, GridError> {
        let n = grid.total();
        if theta_hat.len() != n {
            return Err(GridError::ShapeMismatch {
                expected: n,
                got: theta_hat.len(),
            });
        }
        if u_hat.len() != grid.dim() {
            return Err(GridError::ShapeMismatch {
                expected: grid.dim(),
                got: u_hat.len(),
            });
        }
        for u in &u_hat {
            if u.len() != n {
                return Err(GridError::ShapeMismatch {
                    expected: n,
                    got: u.len(),
                });
            }
        }
        Ok(SpectralState {
            grid: Arc::clone(grid),
            time,
            theta_hat,
            u_hat,
        })
    }

    /// Zero-mode (mean × Mᴺ) coefficients of θ̂ and û.
    pub fn zero_mode(&self) -> (C64, Vec<C64>) {
        (
            self.theta_hat[0],
            self.u_hat.iter().map(|u| u[0]).collect(),
        )
    }

    /// Largest coefficient magnitude across all fields (NaN-propagating).
    pub fn max_abs(&self) -> f64 {
        let mut m = max_abs_complex(&self.theta_hat);
        for u in &self.u_hat {
            let mu = max_abs_complex(u);
            if mu.is_nan() || mu > m {
                m = mu;
            }
            if m.is_nan() {
                break;
            }
        }
        m
    }

    /// Error if any coefficient is NaN or infinite.
    pub fn check_finite(&self) -> Result<(), GridError> {
        check_field_finite("theta_hat", &self.theta_hat)?;
        for (a, u) in self.u_hat.iter().enumerate() {
            const NAMES: [&str; 3] = ["u_hat[0]", "u_hat[1]", "u_hat[2]"];
            check_field_finite(NAMES[a], u)?;
        }
        Ok(())
    }

    /// Largest relative Hermitian-symmetry defect across all fields.
    pub fn hermitian_defect(&self) -> f64 {
        let mut worst = hermitian_defect_field(&self.grid, &self.theta_hat);
        for u in &self.u_hat {
            worst = worst.max(hermitian_defect_field(&self.grid, u));
        }
        worst
    }

    /// Error unless every field is Hermitian to `tol` (relative).
    pub fn check_hermitian(&self, tol: f64) -> Result<(), GridError> {
        let d = hermitian_defect_field(&self.grid, &self.theta_hat);
        if !(d <= tol) {
            return Err(GridError::NotHermitian {
                field: "theta_hat",
                max_rel: d,
            });
        }
        for (a, u) in self.u_hat.iter().enumerate() {
            const NAMES: [&str; 3] = ["u_hat[0]", "u_hat[1]", "u_hat[2]"];
            let d = hermitian_defect_field(&self.grid, u);
            if !(d <= tol) {
                return Err(GridError::NotHermitian {
                    field: NAMES[a],
                    max_rel: d,
                });
            }
        }
        Ok(())
    }

    /// Zero all dealiased-out modes in every field.
    pub fn dealias(&mut self) {
        let grid = Arc::clone(&self.grid);
        grid.apply_dealias(&mut self.theta_hat);
        for u in &mut self.u_hat {
            grid.apply_dealias(u);
        }
    }
}

/// Deterministic max of |z| over a complex field.
pub fn max_abs_complex(field: &[C64]) -> f64 {
    reduce::max_mapped(field.len(), |i| field[i].norm())
}

fn check_field_finite(name: &'static str, field: &[C64]) -> Result<(), GridError> {
    let m = max_abs_complex(field);
    if m.is_finite() {
        return Ok(());
    }
    // Cold path: locate the first offending entry for the diagnostic.
    let index = field
        .iter()
        .position(|z| !z.re.is_finite() || !z.im.is_finite())
        .unwrap_or(0);
    Err(GridError::NonFinite { field: name, index })
}

fn hermitian_defect_field(grid: &Grid, field: &[C64]) -> f64 {
    let scale = max_abs_complex(field);
    if scale == 0.0 {
        return 0.0;
    }
    let defect = reduce::max_mapped(field.len(), |i| {
        let j = grid.neg_index(i);
        (field[i] - field[j].conj()).norm()
    });
    defect / scale
}

/// Smooth radial cutoff: 1 for |ξ| ≤ ε, 0 for |ξ| ≥ 2ε, C^∞ bridge between.
#[derive(Debug, Clone, Copy)]
pub struct CutoffProfile {
    epsilon: f64,
}

impl CutoffProfile {
    /// Profile with transition band (ε, 2ε).
    pub fn new(epsilon: f64) -> Result<CutoffProfile, GridError> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(GridError::BadCutoff(epsilon));
        }
        Ok(CutoffProfile { epsilon })
    }

    /// Inner radius ε.
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// φ(r): the smooth cutoff evaluated at radius r ≥ 0.
    pub fn value(&self, r: f64) -> f64 {
        bridge((r - self.epsilon) / self.epsilon)
    }
}

/// The C^∞ bridge σ(s): 1 for s ≤ 0, 0 for s ≥ 1, monotone between.
///
/// σ(s) = 1/(1 + exp(s/(1−s) − (1−s)/s)) on (0,1); the exponent runs to ±∞
/// at the endpoints, so the clamped branches are the continuous limits.
pub fn bridge(s: f64) -> f64 {
    if s <= 0.0 {
        1.0
    } else if s >= 1.0 {
        0.0
    } else {
        1.0 / (1.0 + (s / (1.0 - s) - (1.0 - s) / s).exp())
    }
}

/// Split a state into low and high frequency parts with a shared profile.
///
/// `low = φ(|ξ|)·state` and `high = (1−φ)·state` to within one ulp, with
/// `low + high` reconstituting the input bitwise: φ is evaluated once per
/// mode and the parts are complementary by construction.
pub fn low_high_split(
    state: &SpectralState,
    profile: &CutoffProfile,
) -> (SpectralState, SpectralState) {
    let grid = &state.grid;
    let mut low = state.clone();
    let mut high = state.clone();
    split_field(grid, profile, &state.theta_hat, &mut low.theta_hat, &mut high.theta_hat);
    for a in 0..grid.dim() {
        split_field(grid, profile, &state.u_hat[a], &mut low.u_hat[a], &mut high.u_hat[a]);
    }
    (low, high)
}

/// Split x into (w·x, (1−w)·x) with exact sum, for w ∈ [0,1].
///
/// With l₀ = fl(w·x), |l₀| ≤ |x|, one of the two subtractions below is exact
/// by Sterbenz's lemma (the operands are within a factor of two) and the
/// other then recovers its exact complement, so l + h = x bitwise.
#[inline]
fn complementary_parts(x: f64, w: f64) -> (f64, f64) {
    let l0 = w * x;
    let h = x - l0;
    let l = x - h;
    (l, h)
}

fn split_field(
    grid: &Grid,
    profile: &CutoffProfile,
    src: &[C64],
    low: &mut [C64],
    high: &mut [C64],
) {
    crate::par::for_each_pair_chunk(low, high, |base, lo, hi| {
        for i in 0..lo.len() {
            let idx = base + i;
            let w = profile.value(grid.xi_norm_sq(idx).sqrt());
            let (lre, hre) = complementary_parts(src[idx].re, w);
            let (lim, him) = complementary_parts(src[idx].im, w);
            lo[i] = C64::new(lre, lim);
            hi[i] = C64::new(hre, him);
        }
    });
}

#[cfg(test)]
mod tests {
    use super::*;

    fn test_grid(dim: usize, modes: usize, len: f64) -> Arc<Grid> {
        Grid::new(dim, modes, len).unwrap()
    }

    #[test]
    fn constructor_rejects_bad_inputs() {
        assert!(matches!(Grid::new(0, 8, 1.0), Err(GridError::UnsupportedDim(0))));
        assert!(matches!(Grid::new(4, 8, 1.0), Err(GridError::UnsupportedDim(4))));
        assert!(matches!(Grid::new(3, 7, 1.0), Err(GridError::BadModes(7))));
        assert!(matches!(Grid::new(3, 2, 1.0), Err(GridError::BadModes(2))));
        assert!(matches!(Grid::new(3, 8, 0.0), Err(GridError::BadBoxLength(_))));
        assert!(matches!(Grid::new(3, 8, f64::NAN), Err(GridError::BadBoxLength(_))));
    }

    #[test]
    fn wavenumber_map_is_antisymmetric() {
        let g = test_grid(2, 16, 5.0);
        for idx in 0..g.total() {
            let neg = g.neg_index(idx);
            assert_eq!(g.neg_index(neg), idx);
            for a in 0..2 {
                let k = g.k(idx, a);
                let kn = g.k(neg, a);
                if k == -(g.modes() as i64) / 2 {
                    // Nyquist is its own negative on the lattice.
                    assert_eq!(kn, k);
                } else {
                    assert_eq!(kn, -k);
                    if k != 0 {
                        assert_eq!(g.xi(neg, a).to_bits(), (-g.xi(idx, a)).to_bits());
                    }
                }
            }
            assert_eq!(g.xi_norm_sq(neg).to_bits(), g.xi_norm_sq(idx).to_bits());
        }
    }

    #[test]
    fn xi_zero_at_origin() {
        let g = test_grid(3, 8, 2.0);
        assert_eq!(g.xi_norm_sq(0), 0.0);
        assert_eq!(g.k_radius_sq(0), 0);
        assert_eq!(g.index_of(&[0, 0, 0]), 0);
    }

    #[test]
    fn dealias_kept_sets_match_two_thirds_rule() {
        // M=12 keeps {−3..3}; M=8 keeps {−2..2} per axis.
        for (m, lo, hi) in [(12usize, -3i64, 3i64), (8, -2, 2)] {
            let g = test_grid(1, m, 1.0);
            let kept: Vec<i64> = (0..g.total())
                .filter(|&i| g.dealias_mask()[i])
                .map(|i| g.k(i, 0))
                .collect();
            let mut sorted = kept.clone();
            sorted.sort_unstable();
            let expect: Vec<i64> = (lo..=hi).collect();
            assert_eq!(sorted, expect);
        }
    }

    #[test]
    fn dealias_fraction_in_3d_near_two_thirds_cubed() {
        let g = test_grid(3, 24, 1.0);
        let kept = g.dealias_mask().iter().filter(|&&b| b).count();
        // Per axis M=24 keeps {−7..7} = 15 of 24 modes.
        assert_eq!(kept, 15usize.pow(3));
        let frac = kept as f64 / g.total() as f64;
        assert!((frac - (2.0f64 / 3.0).powi(3)).abs() < 0.1);
    }

    #[test]
    fn nyquist_always_masked() {
        let g = test_grid(2, 8, 1.0);
        for idx in 0..g.total() {
            if (0..2).any(|a| g.k(idx, a) == -4) {
                assert!(!g.dealias_mask()[idx]);
            }
        }
    }

    #[test]
    fn index_of_wraps_negative_wavenumbers() {
        let g = test_grid(3, 8, 1.0);
        let idx = g.index_of(&[-1, 2, -4]);
        assert_eq!(g.k(idx, 0), -1);
        assert_eq!(g.k(idx, 1), 2);
        assert_eq!(g.k(idx, 2), -4);
    }

    #[test]
    fn bridge_shape() {
        assert_eq!(bridge(-1.0), 1.0);
        assert_eq!(bridge(0.0), 1.0);
        assert_eq!(bridge(1.0), 0.0);
        assert_eq!(bridge(2.0), 0.0);
        let mid = bridge(0.5);
        assert!((mid - 0.5).abs() < 1e-15);
        // Monotone decreasing across the bridge.
        let mut prev = 1.0;
        for i in 1..100 {
            let v = bridge(i as f64 / 100.0);
            assert!(v <= prev && (0.0..=1.0).contains(&v));
            prev = v;
        }
        // Approaches the clamps continuously.
        assert!(bridge(1e-3) > 1.0 - 1e-10);
        assert!(bridge(1.0 - 1e-3) < 1e-10);
    }

    #[test]
    fn cutoff_profile_support() {
        let phi = CutoffProfile::new(2.0).unwrap();
        assert_eq!(phi.value(0.0), 1.0);
        assert_eq!(phi.value(2.0), 1.0);
        assert_eq!(phi.value(4.0), 0.0);
        assert_eq!(phi.value(10.0), 0.0);
        let v = phi.value(3.0);
        assert!(v > 0.0 && v < 1.0);
        assert!(CutoffProfile::new(0.0).is_err());
    }

    fn random_state(grid: &Arc<Grid>, seed: u64) -> SpectralState {
        // Small deterministic pseudo-random spectra (not Hermitian).
        let mut s = SpectralState::zeros(grid);
        let mut x = seed.wrapping_mul(0x9E3779B97F4A7C15).wrapping_add(1);
        let mut next = move || {
            x ^= x << 13;
            x ^= x >> 7;
            x ^= x << 17;
            (x as f64 / u64::MAX as f64) - 0.5
        };
        for v in s.theta_hat.iter_mut() {
            *v = C64::new(next(), next());
        }
        for u in s.u_hat.iter_mut() {
            for v in u.iter_mut() {
                *v = C64::new(next(), next());
            }
        }
        s
    }

    #[test]
    fn split_reconstitutes_bitwise() {
        let g = test_grid(3, 8, 4.0);
        let state = random_state(&g, 7);
        let phi = CutoffProfile::new(2.0).unwrap();
        let (low, high) = low_high_split(&state, &phi);
        for i in 0..g.total() {
            let sum = low.theta_hat[i] + high.theta_hat[i];
            assert_eq!(sum.re.to_bits(), state.theta_hat[i].re.to_bits());
            assert_eq!(sum.im.to_bits(), state.theta_hat[i].im.to_bits());
            for a in 0..3 {
                let sum = low.u_hat[a][i] + high.u_hat[a][i];
                assert_eq!(sum.re.to_bits(), state.u_hat[a][i].re.to_bits());
                assert_eq!(sum.im.to_bits(), state.u_hat[a][i].im.to_bits());
            }
        }
    }

    #[test]
    fn split_with_huge_epsilon_leaves_no_high_part() {
        let g = test_grid(2, 8, 1.0);
        let state = random_state(&g, 3);
        // Nyquist radius is |ξ|max; ε beyond it ⇒ φ ≡ 1.
        let eps = 2.0 * std::f64::consts::PI * 8.0;
        let phi = CutoffProfile::new(eps).unwrap();
        let (low, high) = low_high_split(&state, &phi);
        for i in 0..g.total() {
            assert_eq!(high.theta_hat[i], C64::new(0.0, 0.0));
            assert_eq!(low.theta_hat[i], state.theta_hat[i]);
        }
    }

    #[test]
    fn split_with_tiny_epsilon_keeps_only_zero_mode() {
        let g = test_grid(1, 8, 1.0);
        let state = random_state(&g, 11);
        // Smallest nonzero |ξ| = 2π/L = 2π; pick 2ε below it.
        let phi = CutoffProfile::new(1.0).unwrap();
        let (low, _high) = low_high_split(&state, &phi);
        for i in 0..g.total() {
            if i == 0 {
                assert_eq!(low.theta_hat[i], state.theta_hat[i]);
            } else {
                assert_eq!(low.theta_hat[i], C64::new(0.0, 0.0));
            }
        }
    }

    #[test]
    fn hermitian_check_flags_asymmetric_state() {
        let g = test_grid(2, 8, 1.0);
        let mut s = SpectralState::zeros(&g);
        let idx = g.index_of(&[1, 2]);
        s.theta_hat[idx] = C64::new(1.0, 0.5);
        // Without the conjugate partner the defect is order 1.
        assert!(s.check_hermitian(1e-12).is_err());
        let neg = g.neg_index(idx);
        s.theta_hat[neg] = s.theta_hat[idx].conj();
        assert!(s.check_hermitian(1e-12).is_ok());
        assert_eq!(s.hermitian_defect(), 0.0);
    }

    #[test]
    fn finite_check_locates_nan() {
        let g = test_grid(1, 8, 1.0);
        let mut s = SpectralState::zeros(&g);
        s.u_hat[0][5] = C64::new(f64::NAN, 0.0);
        match s.check_finite() {
            Err(GridError::NonFinite { field, index }) => {
                assert_eq!(field, "u_hat[0]");
                assert_eq!(index, 5);
            }
            other => panic!("expected NonFinite, got {other:?}"),
        }
    }

    #[test]
    fn state_shape_validation() {
        let g = test_grid(2, 8, 1.0);
        let bad = SpectralState::from_parts(&g, 0.0, vec![C64::new(0.0, 0.0); 3], vec![]);
        assert!(matches!(bad, Err(GridError::ShapeMismatch { .. })));
    }

    #[test]
    fn dealias_zeroes_masked_modes_only() {
        let g = test_grid(2, 8, 1.0);
        let mut s = random_state(&g, 5);
        let original = s.theta_hat.clone();
        s.dealias();
        for i in 0..g.total() {
            if g.dealias_mask()[i] {
                assert_eq!(s.theta_hat[i], original[i]);
            } else {
                assert_eq!(s.theta_hat[i], C64::new(0.0, 0.0));
            }
        }
    }
}
