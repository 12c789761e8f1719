//! Physical parameters, pressure laws, and exponent bookkeeping.
//!
//! Everything downstream of this module assumes the admissibility
//! conditions validated here: positive shear viscosity, positive combined
//! viscosity, positive capillarity, a pressure law increasing at the
//! reference density, and a non-degenerate discriminant
//! `delta_star = (alpha+beta)^2/4 - rho*kappa`.

use num_rational::Rational64;
use thiserror::Error;

/// Relative threshold under which `delta_star` counts as degenerate.
///
/// The propagator formulas divide by `lambda_+ - lambda_-`, whose scale at
/// high frequency is `sqrt(|delta_star|) |xi|^2`; a delta this small makes
/// the whole symbol numerically meaningless rather than merely stiff.
pub const DELTA_DEGENERACY_REL: f64 = 1e-12;

/// Pressure law `P(r)` with closed-form derivatives up to third order.
#[derive(Debug, Clone, PartialEq)]
pub enum PressureLaw {
    /// `P(r) = A * r^gamma_exp` with `A > 0`, `gamma_exp >= 1`.
    Polytropic { a: f64, gamma_exp: f64 },
    /// User-supplied coefficient table: `P(r) = sum_i coeffs[i] * r^i`.
    Polynomial { coeffs: Vec<f64> },
}

impl PressureLaw {
    /// Pressure `P(r)`.
    pub fn p(&self, r: f64) -> f64 {
        match self {
            Self::Polytropic { a, gamma_exp } => a * r.powf(*gamma_exp),
            Self::Polynomial { coeffs } => horner(coeffs, r, 0),
        }
    }

    /// First derivative `P'(r)`.
    pub fn dp(&self, r: f64) -> f64 {
        match self {
            Self::Polytropic { a, gamma_exp } => a * gamma_exp * r.powf(gamma_exp - 1.0),
            Self::Polynomial { coeffs } => horner(coeffs, r, 1),
        }
    }

    /// Second derivative `P''(r)`.
    pub fn d2p(&self, r: f64) -> f64 {
        match self {
            Self::Polytropic { a, gamma_exp } => {
                a * gamma_exp * (gamma_exp - 1.0) * r.powf(gamma_exp - 2.0)
            }
            Self::Polynomial { coeffs } => horner(coeffs, r, 2),
        }
    }

    /// Third derivative `P'''(r)`.
    pub fn d3p(&self, r: f64) -> f64 {
        match self {
            Self::Polytropic { a, gamma_exp } => {
                a * gamma_exp * (gamma_exp - 1.0) * (gamma_exp - 2.0) * r.powf(gamma_exp - 3.0)
            }
            Self::Polynomial { coeffs } => horner(coeffs, r, 3),
        }
    }
}

/// Evaluate the `d`-th derivative of `sum_i c[i] r^i`.
fn horner(coeffs: &[f64], r: f64, d: u32) -> f64 {
    let mut total = 0.0;
    for (i, &c) in coeffs.iter().enumerate() {
        let i = i as i64;
        let e = i - d as i64;
        if e < 0 {
            continue;
        }
        let mut fac = 1.0;
        for k in 0..d as i64 {
            fac *= (i - k) as f64;
        }
        total += c * fac * r.powi(e as i32);
    }
    total
}

/// Validated physical parameters with the derived linearization coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub mu_star: f64,
    pub nu_star: f64,
    pub kappa_star: f64,
    pub rho_star: f64,
    pub pressure: PressureLaw,
    /// `mu_star / rho_star`.
    pub alpha_star: f64,
    /// `nu_star / rho_star`.
    pub beta_star: f64,
    /// `P'(rho_star) / rho_star`.
    pub gamma_star: f64,
    /// `(alpha+beta)^2/4 - rho*kappa`; its sign selects the high-frequency
    /// eigenvalue regime and it must stay away from zero.
    pub delta_star: f64,
}

/// Rejection reasons for [`validate_params`].
#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("viscosity condition violated: mu_star = {mu} and mu_star + nu_star = {sum} must both be positive")]
    ViolatesViscosity { mu: f64, sum: f64 },
    #[error("capillarity condition violated: kappa_star = {kappa} must be positive")]
    ViolatesCapillarity { kappa: f64 },
    #[error("pressure condition violated: P'(rho_star) = {dp} must be positive")]
    ViolatesPressure { dp: f64 },
    #[error("degenerate discriminant: delta_star = {delta} vanishes within {rel} relative")]
    DegenerateDiscriminant { delta: f64, rel: f64 },
    #[error("non-finite input: {name} = {value}")]
    NonFinite { name: &'static str, value: f64 },
    #[error("density out of range: rho_star + theta = {rho} falls below rho_star/4 = {floor}")]
    RangeViolation { rho: f64, floor: f64 },
}

/// Validate raw coefficients and derive the linearization constants.
pub fn validate_params(
    mu_star: f64,
    nu_star: f64,
    kappa_star: f64,
    rho_star: f64,
    pressure: PressureLaw,
) -> Result<ModelParams, ModelError> {
    for (name, value) in [
        ("mu_star", mu_star),
        ("nu_star", nu_star),
        ("kappa_star", kappa_star),
        ("rho_star", rho_star),
    ] {
        if !value.is_finite() {
            return Err(ModelError::NonFinite { name, value });
        }
    }
    if rho_star <= 0.0 {
        return Err(ModelError::NonFinite {
            name: "rho_star",
            value: rho_star,
        });
    }
    if mu_star <= 0.0 || mu_star + nu_star <= 0.0 {
        return Err(ModelError::ViolatesViscosity {
            mu: mu_star,
            sum: mu_star + nu_star,
        });
    }
    if kappa_star <= 0.0 {
        return Err(ModelError::ViolatesCapillarity { kappa: kappa_star });
    }
    let dp = pressure.dp(rho_star);
    if !(dp > 0.0) {
        return Err(ModelError::ViolatesPressure { dp });
    }
    let alpha_star = mu_star / rho_star;
    let beta_star = nu_star / rho_star;
    let gamma_star = dp / rho_star;
    let half_sum_sq = (alpha_star + beta_star) * (alpha_star + beta_star) / 4.0;
    let delta_star = half_sum_sq - rho_star * kappa_star;
    let scale = half_sum_sq + rho_star * kappa_star;
    if delta_star.abs() < DELTA_DEGENERACY_REL * scale {
        return Err(ModelError::DegenerateDiscriminant {
            delta: delta_star,
            rel: DELTA_DEGENERACY_REL,
        });
    }
    Ok(ModelParams {
        mu_star,
        nu_star,
        kappa_star,
        rho_star,
        pressure,
        alpha_star,
        beta_star,
        gamma_star,
        delta_star,
    })
}

/// An exponent that may carry an exact rational representation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exponent {
    pub value: f64,
    pub exact: Option<Rational64>,
}

impl Exponent {
    /// Exact rational exponent `num/den`.
    pub fn rational(num: i64, den: i64) -> Self {
        let r = Rational64::new(num, den);
        Self {
            value: *r.numer() as f64 / *r.denom() as f64,
            exact: Some(r),
        }
    }

    /// Floating-point exponent without an exact form.
    pub fn real(value: f64) -> Self {
        Self { value, exact: None }
    }
}

impl std::str::FromStr for Exponent {
    type Err = String;

    /// Parse `"24/11"`, `"8"`, or `"2.5"`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if let Some((n, d)) = s.split_once('/') {
            let n: i64 = n.trim().parse().map_err(|e| format!("{e}"))?;
            let d: i64 = d.trim().parse().map_err(|e| format!("{e}"))?;
            if d == 0 {
                return Err("zero denominator".into());
            }
            return Ok(Self::rational(n, d));
        }
        if let Ok(n) = s.parse::<i64>() {
            return Ok(Self::rational(n, 1));
        }
        let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
        Ok(Self::real(v))
    }
}

/// Validated exponent quadruple for the global small-data framework.
#[derive(Debug, Clone, PartialEq)]
pub struct ExponentSet {
    pub p: Exponent,
    pub q1: Exponent,
    pub q2: Exponent,
    pub tau: Exponent,
    /// Spatial dimension the set was validated against.
    pub dim: usize,
    /// `N/(2 q1) - tau`.
    pub ell_1: f64,
    /// `N/(2 q2) + 1 - tau`.
    pub ell_2: f64,
}

/// Rejection reasons for [`validate_exponents`], one per condition.
#[derive(Debug, Error, PartialEq)]
pub enum ExponentError {
    #[error("dimension N = {0} is too small; the framework needs N >= 3")]
    DimensionTooSmall(usize),
    #[error("p = {0} violates 2 < p < infinity")]
    POutOfRange(f64),
    #[error("ordering q1 < N < q2 violated: q1 = {q1}, N = {n}, q2 = {q2}")]
    QOrdering { q1: f64, n: usize, q2: f64 },
    #[error("scaling relation 1/q1 = 1/q2 + 1/N violated: 1/q1 = {lhs}, 1/q2 + 1/N = {rhs}")]
    ScalingRelation { lhs: f64, rhs: f64 },
    #[error("integrability condition 2/p + N/q2 < 1 violated: value = {0}")]
    IntegrabilityWindow(f64),
    #[error("weight condition 1/p < tau < N/q2 + 1/p violated: tau = {tau}, window = ({lo}, {hi})")]
    TauWindow { tau: f64, lo: f64, hi: f64 },
    #[error("data-norm condition q1/2 > 1 violated: q1 = {0}")]
    DataNormExponent(f64),
    #[error("non-finite exponent: {0}")]
    NonFinite(&'static str),
}

/// Validate the quadruple `(p, q1, q2, tau)` against the small-data
/// framework's conditions in dimension `n`:
/// `2 < p < inf`, `q1 < N < q2`, `1/q1 = 1/q2 + 1/N`, `2/p + N/q2 < 1`,
/// `1/p < tau < N/q2 + 1/p`, and `q1/2 > 1`.
pub fn validate_exponents(
    p: Exponent,
    q1: Exponent,
    q2: Exponent,
    tau: Exponent,
    n: usize,
) -> Result<ExponentSet, ExponentError> {
    if n < 3 {
        return Err(ExponentError::DimensionTooSmall(n));
    }
    for (name, e) in [("p", p), ("q1", q1), ("q2", q2), ("tau", tau)] {
        if !e.value.is_finite() {
            return Err(ExponentError::NonFinite(name));
        }
    }
    let (pv, q1v, q2v, tv) = (p.value, q1.value, q2.value, tau.value);
    if !(pv > 2.0) || !pv.is_finite() {
        return Err(ExponentError::POutOfRange(pv));
    }
    let nf = n as f64;
    if !(q1v < nf && nf < q2v) {
        return Err(ExponentError::QOrdering {
            q1: q1v,
            n,
            q2: q2v,
        });
    }
    // Equality constraint: exact rational arithmetic when both sides carry
    // exact forms, 1e-12 absolute otherwise.
    let exact_ok = match (q1.exact, q2.exact) {
        (Some(r1), Some(r2)) => {
            Some(r1.recip() == r2.recip() + Rational64::new(1, n as i64))
        }
        _ => None,
    };
    let lhs = 1.0 / q1v;
    let rhs = 1.0 / q2v + 1.0 / nf;
    let relation_holds = exact_ok.unwrap_or((lhs - rhs).abs() < 1e-12);
    if !relation_holds {
        return Err(ExponentError::ScalingRelation { lhs, rhs });
    }
    let integ = 2.0 / pv + nf / q2v;
    if !(integ < 1.0) {
        return Err(ExponentError::IntegrabilityWindow(integ));
    }
    let lo = 1.0 / pv;
    let hi = nf / q2v + 1.0 / pv;
    if !(lo < tv && tv < hi) {
        return Err(ExponentError::TauWindow { tau: tv, lo, hi });
    }
    if !(q1v / 2.0 > 1.0) {
        return Err(ExponentError::DataNormExponent(q1v));
    }
    Ok(ExponentSet {
        p,
        q1,
        q2,
        tau,
        dim: n,
        ell_1: nf / (2.0 * q1v) - tv,
        ell_2: nf / (2.0 * q2v) + 1.0 - tv,
    })
}

/// Taylor remainder coefficient `Q(theta) = int_0^1 P''(rho* + tau theta)(1 - tau) dtau`,
/// satisfying `P(rho* + theta) = P(rho*) + P'(rho*) theta + Q(theta) theta^2`.
///
/// Evaluated by adaptive Simpson quadrature to absolute tolerance `1e-12`.
pub fn taylor_pressure_coefficient(theta: f64, params: &ModelParams) -> Result<f64, ModelError> {
    let rho = params.rho_star + theta;
    let floor = params.rho_star / 4.0;
    if rho < floor {
        return Err(ModelError::RangeViolation { rho, floor });
    }
    let f = |tau: f64| params.pressure.d2p(params.rho_star + tau * theta) * (1.0 - tau);
    Ok(adaptive_simpson(&f, 0.0, 1.0, 1e-12))
}

/// Adaptive Simpson quadrature with absolute tolerance `tol`.
fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        (m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb))
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        m: f64,
        fm: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let (lm, flm, left) = simpson(f, a, fa, m, fm);
        let (rm, frm, right) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, fa, m, fm, lm, flm, left, tol / 2.0, depth - 1)
            + recurse(f, m, fm, b, fb, rm, frm, right, tol / 2.0, depth - 1)
    }
    let fa = f(a);
    let fb = f(b);
    let (m, fm, whole) = simpson(f, a, fa, b, fb);
    recurse(f, a, fa, b, fb, m, fm, whole, tol, 40)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_pressure() -> PressureLaw {
        // P(r) = 0.5 r^2 so that P'(1) = 1.
        PressureLaw::Polytropic {
            a: 0.5,
            gamma_exp: 2.0,
        }
    }

    #[test]
    fn rejects_zero_shear_viscosity() {
        let err = validate_params(0.0, 1.0, 1.0, 1.0, unit_pressure()).unwrap_err();
        assert!(matches!(err, ModelError::ViolatesViscosity { .. }));
    }

    #[test]
    fn rejects_degenerate_discriminant() {
        // mu = nu = kappa = rho = 1: (1/4)(2/1)^2 = 1 = rho kappa.
        let err = validate_params(
            1.0,
            1.0,
            1.0,
            1.0,
            PressureLaw::Polytropic {
                a: 0.5,
                gamma_exp: 2.0,
            },
        )
        .unwrap_err();
        assert!(matches!(err, ModelError::DegenerateDiscriminant { .. }));
    }

    #[test]
    fn accepts_reference_parameters_and_derives_coefficients() {
        let p = validate_params(1.0, 0.0, 1.0, 1.0, unit_pressure()).unwrap();
        assert_eq!(p.alpha_star, 1.0);
        assert_eq!(p.beta_star, 0.0);
        assert_eq!(p.gamma_star, 1.0);
        assert!((p.delta_star - (-0.75)).abs() < 1e-15);
    }

    #[test]
    fn rejects_nonpositive_pressure_slope() {
        let law = PressureLaw::Polynomial {
            coeffs: vec![1.0, -1.0],
        };
        let err = validate_params(1.0, 1.0, 1.0, 1.0, law).unwrap_err();
        assert!(matches!(err, ModelError::ViolatesPressure { .. }));
    }

    #[test]
    fn polynomial_derivatives_match_finite_differences() {
        let law = PressureLaw::Polynomial {
            coeffs: vec![0.3, -0.2, 0.5, 0.1, 0.05],
        };
        let h = 1e-5;
        for &r in &[0.25, 0.7, 1.0, 2.3, 4.0] {
            let fd1 = (law.p(r + h) - law.p(r - h)) / (2.0 * h);
            let fd2 = (law.p(r + h) - 2.0 * law.p(r) + law.p(r - h)) / (h * h);
            let fd3 = (law.dp(r + h) - 2.0 * law.dp(r) + law.dp(r - h)) / (h * h);
            assert!((law.dp(r) - fd1).abs() < 1e-6 * (1.0 + fd1.abs()));
            assert!((law.d2p(r) - fd2).abs() < 1e-4 * (1.0 + fd2.abs()));
            assert!((law.d3p(r) - fd3).abs() < 1e-4 * (1.0 + fd3.abs()));
        }
    }

    #[test]
    fn polytropic_derivatives_match_finite_differences() {
        let law = PressureLaw::Polytropic {
            a: 1.3,
            gamma_exp: 1.4,
        };
        let h = 1e-6;
        for &r in &[0.25, 0.5, 1.0, 2.0, 4.0] {
            let fd1 = (law.p(r + h) - law.p(r - h)) / (2.0 * h);
            assert!((law.dp(r) - fd1).abs() < 1e-6 * (1.0 + fd1.abs()));
        }
    }

    #[test]
    fn accepts_reference_exponents() {
        let set = validate_exponents(
            Exponent::rational(4, 1),
            Exponent::rational(24, 11),
            Exponent::rational(8, 1),
            Exponent::rational(1, 2),
            3,
        )
        .unwrap();
        assert!((set.ell_1 - 0.1875).abs() < 1e-15);
        assert!((set.ell_2 - 0.6875).abs() < 1e-15);
    }

    #[test]
    fn rejects_broken_scaling_relation() {
        let err = validate_exponents(
            Exponent::rational(4, 1),
            Exponent::rational(2, 1),
            Exponent::rational(8, 1),
            Exponent::rational(1, 2),
            3,
        )
        .unwrap_err();
        assert!(matches!(err, ExponentError::ScalingRelation { .. }));
    }

    #[test]
    fn rejects_dimension_two() {
        let err = validate_exponents(
            Exponent::rational(4, 1),
            Exponent::rational(24, 11),
            Exponent::rational(8, 1),
            Exponent::rational(1, 2),
            2,
        )
        .unwrap_err();
        assert_eq!(err, ExponentError::DimensionTooSmall(2));
    }

    #[test]
    fn taylor_coefficient_constant_second_derivative() {
        // P = r^2 has P'' = 2, so Q = int_0^1 2 (1 - tau) dtau = 1 for any theta.
        let p = validate_params(
            1.0,
            0.0,
            1.0,
            1.0,
            PressureLaw::Polynomial {
                coeffs: vec![0.0, 0.0, 1.0],
            },
        )
        .unwrap();
        assert!((taylor_pressure_coefficient(0.7, &p).unwrap() - 1.0).abs() < 1e-12);
        // theta = 0 gives P''(rho*)/2.
        assert!((taylor_pressure_coefficient(0.0, &p).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn taylor_coefficient_cubic_pressure() {
        // P = r^3, rho* = 1, theta = 1: Q = int_0^1 6(1+tau)(1-tau) dtau = 4,
        // matching the Taylor identity (P(2) - P(1) - P'(1))/1 = (8 - 1 - 3).
        let p = validate_params(
            1.0,
            0.0,
            0.5,
            1.0,
            PressureLaw::Polynomial {
                coeffs: vec![0.0, 0.0, 0.0, 1.0],
            },
        )
        .unwrap();
        let q = taylor_pressure_coefficient(1.0, &p).unwrap();
        assert!((q - 4.0).abs() < 1e-11, "q = {q}");
    }

    #[test]
    fn taylor_coefficient_range_violation() {
        let p = validate_params(1.0, 0.0, 1.0, 1.0, unit_pressure()).unwrap();
        let err = taylor_pressure_coefficient(-0.8, &p).unwrap_err();
        assert!(matches!(err, ModelError::RangeViolation { .. }));
    }

    #[test]
    fn taylor_identity_on_sampled_thetas() {
        let p = validate_params(
            1.0,
            0.0,
            1.0,
            1.0,
            PressureLaw::Polytropic {
                a: 0.8,
                gamma_exp: 1.7,
            },
        )
        .unwrap();
        for i in 0..40 {
            let theta = -0.74 + 3.7 * (i as f64) / 39.0;
            if theta.abs() < 1e-3 {
                continue;
            }
            let q = taylor_pressure_coefficient(theta, &p).unwrap();
            let lhs = p.pressure.p(p.rho_star + theta);
            let rhs = p.pressure.p(p.rho_star)
                + p.pressure.dp(p.rho_star) * theta
                + q * theta * theta;
            assert!(
                (lhs - rhs).abs() < 1e-10 * (1.0 + lhs.abs()),
                "theta = {theta}: {lhs} vs {rhs}"
            );
        }
    }

    #[test]
    fn exponent_parsing() {
        let e: Exponent = "24/11".parse().unwrap();
        assert_eq!(e.exact, Some(Rational64::new(24, 11)));
        let e: Exponent = "8".parse().unwrap();
        assert_eq!(e.exact, Some(Rational64::new(8, 1)));
        let e: Exponent = "2.5".parse().unwrap();
        assert_eq!(e.value, 2.5);
        assert!(e.exact.is_none());
    }
}
