//! Per-mode exact mathematics of the linearization: eigenvalues λ±, the
//! propagator matrix, its exponential-quadrature companions Φ₁/Φ₂, the
//! low/high frequency asymptotic expansions, and the resolvent symbol.
//!
//! Everything here is a pure function of one wavevector; the lattice-level
//! loops live in the propagator module. The ODE solved per mode is
//!
//! ∂ₜθ̂ = −ρ* iξ·û + f̂,
//! ∂ₜû = −(α*|ξ|² û + β* ξ(ξ·û)) − i(γ* + κ*|ξ|²)ξ θ̂ + ĝ,
//!
//! whose eigenvalues on the compressible subspace are the roots of
//! z² + (α*+β*)|ξ|² z + (ρ*κ*|ξ|⁴ + ρ*γ*|ξ|²) = 0, with the solenoidal part
//! relaxing at rate α*|ξ|².
//!
//! All matrix functions needed by the integrator — the exponential and the
//! Duhamel weights φ₁, φ₂ — share one structural form, built from the four
//! scalar kernels (m₀, d, m_u, h) of [`KernelWeights`]. Each kernel is a
//! symmetric function of the eigenvalue pair, hence real in every regime,
//! and is stored as `f64`: that makes Hermitian symmetry of the lattice
//! application exact by construction.

use thiserror::Error;

use crate::model::ModelParams;
use crate::C64;

/// Below this |λ₊−λ₋|·t the divided differences switch to a Taylor series
/// about the midpoint exponential.
pub const DD_SERIES_THRESHOLD: f64 = 1e-6;

/// Exponent below which e^z underflows double precision to exact zero.
const EXP_UNDERFLOW: f64 = -745.0;

/// Errors from regime preconditions and resolvent solves.
#[derive(Debug, Error)]
pub enum SymbolError {
    /// |ξ| is on the wrong side of the discriminant crossover radius.
    #[error("|xi| = {xi:.6e} is on the wrong side of the crossover radius {crossover:.6e} for the {regime} expansion")]
    WrongRegime {
        xi: f64,
        crossover: f64,
        regime: &'static str,
    },
    /// λ lies outside the resolvent sector.
    #[error("lambda = {lambda} lies outside the sector")]
    OutsideSector { lambda: C64 },
    /// The per-mode system is numerically singular.
    #[error("resolvent system at lambda = {lambda} has condition number {cond:.3e}")]
    SingularSystem { lambda: C64, cond: f64 },
    /// Sector parameters outside their admissible ranges.
    #[error("sector requires 0 < epsilon < pi/2 and lambda0 >= 1, got epsilon={epsilon}, lambda0={lambda0}")]
    BadSector { epsilon: f64, lambda0: f64 },
}

/// Discriminant classification of the eigenvalue pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// Discriminant well above zero: two real roots.
    RealDistinct,
    /// Discriminant well below zero: complex-conjugate pair.
    ComplexPair,
    /// Discriminant within rounding of zero (double root).
    NearDegenerate,
}

impl Regime {
    /// Stable label for CSV output.
    pub fn label(&self) -> &'static str {
        match self {
            Regime::RealDistinct => "real-distinct",
            Regime::ComplexPair => "complex-pair",
            Regime::NearDegenerate => "near-degenerate",
        }
    }
}

/// Eigenvalues λ± of the compressible block at one |ξ|².
#[derive(Debug, Clone, Copy)]
pub struct EigenPair {
    /// Root −((α*+β*)/2)|ξ|² + √(δ*|ξ|⁴ − ρ*γ*|ξ|²).
    pub lambda_plus: C64,
    /// Root −((α*+β*)/2)|ξ|² − √(δ*|ξ|⁴ − ρ*γ*|ξ|²).
    pub lambda_minus: C64,
    /// Discriminant classification.
    pub regime: Regime,
}

/// Both roots of z² + (α*+β*)|ξ|²z + (ρ*κ*|ξ|⁴ + ρ*γ*|ξ|²) = 0.
///
/// Real-distinct roots come from the numerically stable quadratic method:
/// the well-conditioned large root first, the other via the product.
pub fn eigenpair(xi_sq: f64, p: &ModelParams) -> EigenPair {
    let b = (p.alpha_star + p.beta_star) * xi_sq;
    let c = p.rho_star * p.kappa_star * xi_sq * xi_sq + p.rho_star * p.gamma_star * xi_sq;
    let disc = b * b / 4.0 - c;
    let scale = b * b / 4.0 + c;
    let regime = if disc.abs() <= 1e-12 * scale {
        Regime::NearDegenerate
    } else if disc > 0.0 {
        Regime::RealDistinct
    } else {
        Regime::ComplexPair
    };
    if disc >= 0.0 {
        let big = b / 2.0 + disc.sqrt();
        let (lp, lm) = if big == 0.0 {
            (0.0, 0.0)
        } else {
            (-c / big, -big)
        };
        EigenPair {
            lambda_plus: C64::new(lp, 0.0),
            lambda_minus: C64::new(lm, 0.0),
            regime,
        }
    } else {
        let im = (-disc).sqrt();
        EigenPair {
            lambda_plus: C64::new(-b / 2.0, im),
            lambda_minus: C64::new(-b / 2.0, -im),
            regime,
        }
    }
}

/// Which side of the crossover an asymptotic expansion targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AsymptoticRegime {
    /// |ξ| → 0: diffusive envelope with acoustic oscillation ±i√(ρ*γ*)|ξ|.
    Low,
    /// |ξ| → ∞: envelope split by ±√(δ*)|ξ|² (or oscillation for δ* < 0).
    High,
}

/// Radius where δ*|ξ|⁴ and ρ*γ*|ξ|² balance (the discriminant sign-change
/// radius when δ* > 0).
pub fn crossover_radius(p: &ModelParams) -> f64 {
    (p.rho_star * p.gamma_star / p.delta_star.abs()).sqrt()
}

/// Leading-order eigenvalues in the requested limit, as (λ₊, λ₋).
pub fn asymptotic_lambda(
    xi_norm: f64,
    regime: AsymptoticRegime,
    p: &ModelParams,
) -> Result<(C64, C64), SymbolError> {
    let rc = crossover_radius(p);
    let envelope = -0.5 * (p.alpha_star + p.beta_star) * xi_norm * xi_norm;
    match regime {
        AsymptoticRegime::Low => {
            if xi_norm >= rc {
                return Err(SymbolError::WrongRegime {
                    xi: xi_norm,
                    crossover: rc,
                    regime: "low",
                });
            }
            let osc = (p.rho_star * p.gamma_star).sqrt() * xi_norm;
            Ok((C64::new(envelope, osc), C64::new(envelope, -osc)))
        }
        AsymptoticRegime::High => {
            if xi_norm <= rc {
                return Err(SymbolError::WrongRegime {
                    xi: xi_norm,
                    crossover: rc,
                    regime: "high",
                });
            }
            if p.delta_star > 0.0 {
                let split = p.delta_star.sqrt() * xi_norm * xi_norm;
                Ok((
                    C64::new(envelope + split, 0.0),
                    C64::new(envelope - split, 0.0),
                ))
            } else {
                let osc = (-p.delta_star).sqrt() * xi_norm * xi_norm;
                Ok((C64::new(envelope, osc), C64::new(envelope, -osc)))
            }
        }
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

fn cexp(z: C64) -> C64 {
    if z.re < EXP_UNDERFLOW {
        // Below double-precision underflow: the entry is exact 0.
        C64::new(0.0, 0.0)
    } else {
        z.exp()
    }
}

/// φ_k(z) = Σ_{n≥0} zⁿ/(n+k)!, so φ₀ = e^z and z·φ_{k+1} = φ_k − 1/k!.
///
/// Series for |z| < 1/2, closed form (e^z − Σ_{n<k} zⁿ/n!)/z^k otherwise.
pub fn phi(k: usize, z: C64) -> C64 {
    if z.norm() < 0.5 {
        let mut term = C64::new(1.0 / factorial(k), 0.0);
        let mut acc = term;
        for n in 0..24 {
            term = term * z / ((n + k + 1) as f64);
            acc += term;
        }
        acc
    } else if k == 0 {
        cexp(z)
    } else {
        let mut partial = C64::new(0.0, 0.0);
        let mut term = C64::new(1.0, 0.0);
        for n in 0..k {
            partial += term;
            term = term * z / ((n + 1) as f64);
        }
        (cexp(z) - partial) / z.powu(k as u32)
    }
}

/// Coefficients cᵢ of φ_k^{(r)} = Σᵢ cᵢ φ_{k+i}, from φ_k′ = φ_k − k·φ_{k+1}.
fn derivative_coeffs(k: usize, r: usize) -> Vec<f64> {
    let mut c = vec![1.0];
    for _ in 0..r {
        let mut next = vec![0.0; c.len() + 1];
        for (i, &ci) in c.iter().enumerate() {
            next[i] += ci;
            next[i + 1] -= (k + i) as f64 * ci;
        }
        c = next;
    }
    c
}

/// First-order divided difference φ_k[a,b] = (φ_k(a) − φ_k(b))/(a − b).
///
/// Near coincidence the quotient cancels catastrophically; the even Taylor
/// expansion about the midpoint m = (a+b)/2 with half-difference δ,
/// φ_k[a,b] = Σ_j φ_k^{(2j+1)}(m)·δ^{2j}/(2j+1)!, is used instead (three
/// terms; the truncation error is O(δ⁶), far below roundoff at the
/// threshold).
pub fn phi_divided_difference(k: usize, a: C64, b: C64) -> C64 {
    let diff = a - b;
    if diff.norm() >= DD_SERIES_THRESHOLD {
        return (phi(k, a) - phi(k, b)) / diff;
    }
    let mid = (a + b) * 0.5;
    let delta_sq = (diff * 0.5) * (diff * 0.5);
    let mut acc = C64::new(0.0, 0.0);
    let mut weight = C64::new(1.0, 0.0);
    for j in 0..3 {
        let coeffs = derivative_coeffs(k, 2 * j + 1);
        let mut deriv = C64::new(0.0, 0.0);
        for (i, &ci) in coeffs.iter().enumerate() {
            deriv += phi(k + i, mid) * ci;
        }
        acc += deriv * weight / factorial(2 * j + 1);
        weight *= delta_sq;
    }
    acc
}

/// The matrix function of the mode generator a kernel table evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelKind {
    /// G(t) = e^{tA}: the semigroup itself.
    Propagator,
    /// Φ₁(t) = t·φ₁(tA) = ∫₀ᵗ G(t−s) ds: first Duhamel weight.
    Phi1,
    /// Φ₂(t) = t·φ₂(tA): second-order ETD correction weight.
    Phi2,
}

impl KernelKind {
    /// Index k of the underlying φ_k.
    pub fn order(self) -> usize {
        match self {
            KernelKind::Propagator => 0,
            KernelKind::Phi1 => 1,
            KernelKind::Phi2 => 2,
        }
    }

    fn prefactor(self, t: f64) -> f64 {
        match self {
            KernelKind::Propagator => 1.0,
            KernelKind::Phi1 | KernelKind::Phi2 => t,
        }
    }
}

/// The four structural scalar kernels of a matrix function F(tA) at one
/// mode: θ-row diagonal m₀, coupling divided-difference d, compressible
/// block m_u, and solenoidal factor h.
///
/// The assembled matrix is
///   F[0][0] = m₀,   F[0][1+k] = −i ρ* d ξ_k,
///   F[1+j][0] = −i (γ* + κ*|ξ|²) d ξ_j,
///   F[1+j][1+k] = h (δ_jk − P_jk) + m_u P_jk,  P = ξξᵀ/|ξ|².
#[derive(Debug, Clone, Copy)]
pub struct KernelWeights {
    /// w·(φ_k(λ₊t) − λ₊t·φ_k[λ₊t, λ₋t]).
    pub m0: f64,
    /// w·t·φ_k[λ₊t, λ₋t].
    pub d: f64,
    /// w·(φ_k(λ₊t) + λ₋t·φ_k[λ₊t, λ₋t]).
    pub mu: f64,
    /// w·φ_k(−α*|ξ|²t).
    pub h: f64,
}

/// Evaluate the four kernels of `kind` at one mode.
///
/// Each kernel is a symmetric rational-exponential function of (λ₊, λ₋),
/// hence real: in the complex-pair regime the two eigenvalue contributions
/// are conjugate, in the real regime everything is real. The imaginary
/// residue of the complex evaluation is rounding noise and is dropped.
pub fn kernel_weights(kind: KernelKind, t: f64, xi_sq: f64, p: &ModelParams) -> KernelWeights {
    let k = kind.order();
    let w = kind.prefactor(t);
    let eig = eigenpair(xi_sq, p);
    let a = eig.lambda_plus * t;
    let b = eig.lambda_minus * t;
    let phi_a = phi(k, a);
    let dd = phi_divided_difference(k, a, b);
    let m0 = (phi_a - a * dd) * w;
    let d = dd * (w * t);
    let mu = (phi_a + b * dd) * w;
    let h = phi(k, C64::new(-p.alpha_star * xi_sq * t, 0.0)) * w;
    KernelWeights {
        m0: m0.re,
        d: d.re,
        mu: mu.re,
        h: h.re,
    }
}

/// Dense per-mode (N+1)×(N+1) complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolMatrix {
    /// Row/column count (dim + 1).
    pub size: usize,
    /// Row-major entries.
    pub entries: Vec<C64>,
}

impl SymbolMatrix {
    /// Identity of the given size.
    pub fn identity(size: usize) -> SymbolMatrix {
        let mut entries = vec![C64::new(0.0, 0.0); size * size];
        for r in 0..size {
            entries[r * size + r] = C64::new(1.0, 0.0);
        }
        SymbolMatrix { size, entries }
    }

    /// Entry at (row, col).
    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.entries[row * self.size + col]
    }

    /// Mutable entry at (row, col).
    pub fn set(&mut self, row: usize, col: usize, v: C64) {
        self.entries[row * self.size + col] = v;
    }

    /// Matrix product self·other.
    pub fn mul(&self, other: &SymbolMatrix) -> SymbolMatrix {
        assert_eq!(self.size, other.size);
        let n = self.size;
        let mut out = SymbolMatrix {
            size: n,
            entries: vec![C64::new(0.0, 0.0); n * n],
        };
        for r in 0..n {
            for c in 0..n {
                let mut acc = C64::new(0.0, 0.0);
                for k in 0..n {
                    acc += self.get(r, k) * other.get(k, c);
                }
                out.set(r, c, acc);
            }
        }
        out
    }

    /// Matrix-vector product self·v.
    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(v.len(), self.size);
        (0..self.size)
            .map(|r| {
                let mut acc = C64::new(0.0, 0.0);
                for c in 0..self.size {
                    acc += self.get(r, c) * v[c];
                }
                acc
            })
            .collect()
    }

    /// Max entry-wise distance to another matrix.
    pub fn distance(&self, other: &SymbolMatrix) -> f64 {
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

/// Assemble the dense matrix of `kind` from its kernels at one wavevector.
pub fn kernel_matrix(kind: KernelKind, t: f64, xi: &[f64], p: &ModelParams) -> SymbolMatrix {
    let dim = xi.len();
    let size = dim + 1;
    let xi_sq: f64 = xi.iter().map(|x| x * x).sum();
    let kw = kernel_weights(kind, t, xi_sq, p);
    let mut m = SymbolMatrix {
        size,
        entries: vec![C64::new(0.0, 0.0); size * size],
    };
    m.set(0, 0, C64::new(kw.m0, 0.0));
    let fu = p.gamma_star + p.kappa_star * xi_sq;
    for j in 0..dim {
        m.set(0, 1 + j, C64::new(0.0, -p.rho_star * kw.d * xi[j]));
        m.set(1 + j, 0, C64::new(0.0, -fu * kw.d * xi[j]));
        for k in 0..dim {
            // Projection P = ξξᵀ/|ξ|², defined as 0 at ξ = 0.
            let proj = if xi_sq > 0.0 { xi[j] * xi[k] / xi_sq } else { 0.0 };
            let diag = if j == k { kw.h } else { 0.0 };
            m.set(1 + j, 1 + k, C64::new(diag + (kw.mu - kw.h) * proj, 0.0));
        }
    }
    m
}

/// The propagator matrix G(t, ξ) solving the mode ODE of Eq. (s).
///
/// t = 0 and ξ = 0 short-circuit to the identity: both are removable
/// singularities of the continuous formulas whose ODE limit is the
/// identity.
pub fn propagator_symbol(t: f64, xi: &[f64], p: &ModelParams) -> SymbolMatrix {
    let xi_sq: f64 = xi.iter().map(|x| x * x).sum();
    if t == 0.0 || xi_sq == 0.0 {
        return SymbolMatrix::identity(xi.len() + 1);
    }
    kernel_matrix(KernelKind::Propagator, t, xi, p)
}

/// Sector Σ_{ε,λ₀} = {λ : |arg λ| < π − ε, |λ| ≥ λ₀}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sector {
    /// Angular inset ε from the negative real axis.
    pub epsilon_angle: f64,
    /// Inner radius λ₀.
    pub lambda0: f64,
}

impl Sector {
    /// Validate 0 < ε < π/2 and λ₀ ≥ 1.
    pub fn new(epsilon_angle: f64, lambda0: f64) -> Result<Sector, SymbolError> {
        if !(epsilon_angle > 0.0
            && epsilon_angle < std::f64::consts::FRAC_PI_2
            && lambda0 >= 1.0
            && lambda0.is_finite())
        {
            return Err(SymbolError::BadSector {
                epsilon: epsilon_angle,
                lambda0,
            });
        }
        Ok(Sector {
            epsilon_angle,
            lambda0,
        })
    }

    /// Membership: |arg λ| < π − ε and |λ| ≥ λ₀.
    pub fn contains(&self, lambda: C64) -> bool {
        lambda.arg().abs() < std::f64::consts::PI - self.epsilon_angle
            && lambda.norm() >= self.lambda0
    }
}

/// Constant coefficients (γ₀, γ₁, γ₂) of the resolvent system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolventConstants {
    /// Coefficient of λû in the momentum rows.
    pub gamma0: f64,
    /// Coefficient of iξρ̂ (pressure coupling).
    pub gamma1: f64,
    /// Coefficient of div û in the mass row and of the capillary coupling.
    pub gamma2: f64,
}

/// Per-mode solve of the resolvent system, with its condition number.
#[derive(Debug, Clone)]
pub struct ResolventEntry {
    /// The inverse matrix R(λ, ξ).
    pub matrix: SymbolMatrix,
    /// Condition number of the forward block system.
    pub cond: f64,
}

/// Forward matrix A(λ, ξ) of the system of Eq. (r1):
/// row 0: λρ̂ + γ₂ iξ·û = f̂;
/// rows j: γ₀λû_j + μ*|ξ|²û_j + ν*ξ_j(ξ·û) + i(γ₁ + κ*γ₂|ξ|²)ξ_jρ̂ = ĝ_j.
pub fn resolvent_forward_matrix(
    lambda: C64,
    xi: &[f64],
    consts: &ResolventConstants,
    p: &ModelParams,
) -> SymbolMatrix {
    let dim = xi.len();
    let size = dim + 1;
    let xi_sq: f64 = xi.iter().map(|x| x * x).sum();
    let mut a = SymbolMatrix {
        size,
        entries: vec![C64::new(0.0, 0.0); size * size],
    };
    a.set(0, 0, lambda);
    let rho_coeff = consts.gamma1 + p.kappa_star * consts.gamma2 * xi_sq;
    for j in 0..dim {
        a.set(0, 1 + j, C64::new(0.0, consts.gamma2 * xi[j]));
        a.set(1 + j, 0, C64::new(0.0, rho_coeff * xi[j]));
        for k in 0..dim {
            let mut v = C64::new(p.nu_star * xi[j] * xi[k], 0.0);
            if j == k {
                v += consts.gamma0 * lambda + p.mu_star * xi_sq;
            }
            a.set(1 + j, 1 + k, v);
        }
    }
    a
}

/// Invert the resolvent system at one mode via its transverse/longitudinal
/// block structure.
///
/// The transverse part is the scalar γ₀λ + μ*|ξ|² with multiplicity N−1;
/// the longitudinal part is the 2×2 system on (ρ̂, û_∥). The condition
/// number over all blocks is reported, and exceeding 10¹² is an error
/// rather than a silent inversion.
pub fn resolvent_symbol(
    lambda: C64,
    xi: &[f64],
    consts: &ResolventConstants,
    sector: &Sector,
    p: &ModelParams,
) -> Result<ResolventEntry, SymbolError> {
    if !sector.contains(lambda) {
        return Err(SymbolError::OutsideSector { lambda });
    }
    let dim = xi.len();
    let size = dim + 1;
    let xi_sq: f64 = xi.iter().map(|x| x * x).sum();
    let r = xi_sq.sqrt();

    let transverse = consts.gamma0 * lambda + p.mu_star * xi_sq;
    // Longitudinal 2×2 on (ρ̂, û_∥): [[A, B], [C, D]].
    let a11 = lambda;
    let a12 = C64::new(0.0, consts.gamma2 * r);
    let a21 = C64::new(0.0, (consts.gamma1 + p.kappa_star * consts.gamma2 * xi_sq) * r);
    let a22 = consts.gamma0 * lambda + (p.mu_star + p.nu_star) * xi_sq;
    let det2 = a11 * a22 - a12 * a21;

    // Singular values of the 2×2 block in closed form.
    let t2 = a11.norm_sqr() + a12.norm_sqr() + a21.norm_sqr() + a22.norm_sqr();
    let dt = det2.norm();
    let gap = (t2 * t2 - 4.0 * dt * dt).max(0.0).sqrt();
    let sigma_max = ((t2 + gap) / 2.0).sqrt();
    let sigma_min = if sigma_max > 0.0 { dt / sigma_max } else { 0.0 };
    let mut smax = sigma_max;
    let mut smin = sigma_min;
    if dim > 1 {
        let tn = transverse.norm();
        smax = smax.max(tn);
        smin = smin.min(tn);
    }
    let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(cond <= 1e12) {
        return Err(SymbolError::SingularSystem { lambda, cond });
    }

    let mut m = SymbolMatrix {
        size,
        entries: vec![C64::new(0.0, 0.0); size * size],
    };
    m.set(0, 0, a22 / det2);
    for j in 0..dim {
        // −B/det2 and −C/det2 carried along the unit vector ξ/r: the r
        // factors cancel against the iξ_j couplings.
        m.set(0, 1 + j, C64::new(0.0, -consts.gamma2 * xi[j]) / det2);
        m.set(
            1 + j,
            0,
            C64::new(
                0.0,
                -(consts.gamma1 + p.kappa_star * consts.gamma2 * xi_sq) * xi[j],
            ) / det2,
        );
        for k in 0..dim {
            let proj = if xi_sq > 0.0 { xi[j] * xi[k] / xi_sq } else { 0.0 };
            let mut v = (a11 / det2 - 1.0 / transverse) * proj;
            if j == k {
                v += 1.0 / transverse;
            }
            m.set(1 + j, 1 + k, v);
        }
    }
    Ok(ResolventEntry { matrix: m, cond })
}
