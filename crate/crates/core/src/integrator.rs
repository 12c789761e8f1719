//! Time advancement of Eq. (nsk4) by the Duhamel representation with
//! exponential quadrature (ETD1 / ETD2RK), plus a Picard-iteration mode
//! mirroring the contraction-mapping construction on path space.
//!
//! The linear flow is the exact propagator, so stiffness is removed and the
//! time step is fixed. The Φ₁, Φ₂ quadrature kernels come from the same
//! eigenstructure and divided-difference safeguards as the propagator.

use std::sync::Arc;

use thiserror::Error;

use crate::grid::{Grid, GridError, SpectralState};
use crate::model::{ExponentSet, ModelParams};
use crate::nonlinear::{self, GForm, NonlinearError, RhsFields};
use crate::norms::{self, NormError, Timeline};
use crate::par;
use crate::propagator::{Propagator, PropagatorError};
use crate::symbol::KernelKind;
use crate::C64;

/// Errors from configuration and stepping.
#[derive(Debug, Error)]
pub enum IntegratorError {
    /// State/transform failure.
    #[error(transparent)]
    Grid(#[from] GridError),
    /// Propagator failure.
    #[error(transparent)]
    Propagator(#[from] PropagatorError),
    /// Nonlinearity failure, including the range condition.
    #[error(transparent)]
    Nonlinear(#[from] NonlinearError),
    /// Norm recording failure.
    #[error(transparent)]
    Norm(#[from] NormError),
    /// Invalid configuration.
    #[error("invalid integrator config: {reason}")]
    Config { reason: String },
    /// A state stopped being finite.
    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64 },
    /// Picard residuals failed to decrease three times in a row.
    #[error("Picard iteration not contracting; residuals {residuals:?}")]
    NoContraction { residuals: Vec<f64> },
}

/// Exponential time-differencing scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// First order: X₊ = G(Δt)X + Φ₁(Δt)N(X).
    Etd1,
    /// Second order: ETD1 predictor X*, then X₊ = X* + Φ₂(Δt)(N(X*) − N(X)).
    Etd2Rk,
}

/// Picard-mode options.
#[derive(Debug, Clone, Copy)]
pub struct PicardConfig {
    /// Maximum number of path-space iterations.
    pub max_iters: usize,
    /// Convergence threshold on the successive-trajectory sup-distance.
    pub contraction_tol: f64,
}

/// Fixed-step integration configuration.
#[derive(Debug, Clone)]
pub struct IntegratorConfig {
    /// Time step (positive, ≤ t_end).
    pub dt: f64,
    /// Final time; the run takes round(t_end/dt) steps of size dt.
    pub t_end: f64,
    /// Quadrature scheme.
    pub scheme: Scheme,
    /// Drop the nonlinearity (exact linear evolution).
    pub linear_only: bool,
    /// Which algebraic form of 𝐠 to evaluate.
    pub g_form: GForm,
    /// Picard mode options (None → direct stepping only).
    pub picard: Option<PicardConfig>,
    /// Store a state snapshot every this many steps.
    pub snapshot_stride: usize,
    /// Record norms every this many steps.
    pub norm_stride: usize,
}

impl IntegratorConfig {
    /// Defaults: ETD2RK, conservative 𝐠, full nonlinearity, stride 1.
    pub fn new(dt: f64, t_end: f64) -> Self {
        Self {
            dt,
            t_end,
            scheme: Scheme::Etd2Rk,
            linear_only: false,
            g_form: GForm::Conservative,
            picard: None,
            snapshot_stride: 1,
            norm_stride: 1,
        }
    }

    fn validate(&self) -> Result<(), IntegratorError> {
        let fail = |reason: &str| {
            Err(IntegratorError::Config {
                reason: reason.to_string(),
            })
        };
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return fail("dt must be positive and finite");
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return fail("t_end must be positive and finite");
        }
        if self.dt > self.t_end {
            return fail("dt must not exceed t_end");
        }
        if self.snapshot_stride == 0 || self.norm_stride == 0 {
            return fail("strides must be at least 1");
        }
        if let Some(p) = &self.picard {
            if p.max_iters == 0 {
                return fail("picard max_iters must be at least 1");
            }
            if !(p.contraction_tol > 0.0) {
                return fail("picard contraction_tol must be positive");
            }
        }
        Ok(())
    }
}

/// Why a run stopped before t_end.
#[derive(Debug, Clone, PartialEq)]
pub enum HaltReason {
    /// The physical density left the admissible window.
    RangeViolation { t: f64, min: f64, max: f64 },
    /// NaN/Inf appeared in the state.
    NonFinite { t: f64 },
}

/// A completed (possibly halted) run: snapshots plus the norm timeline.
#[derive(Debug, Clone)]
pub struct Trajectory {
    /// Snapshot times (strictly increasing).
    pub times: Vec<f64>,
    /// State snapshots at `snapshot_stride`.
    pub states: Vec<SpectralState>,
    /// Recorded norms at `norm_stride`.
    pub timeline: Timeline,
    /// Early-stop diagnostic, if the run halted.
    pub halt: Option<HaltReason>,
    /// |θ̂(0)(T) − θ̂(0)(0)|: absolute mean drift over the run.
    pub mass_drift: f64,
}

/// Elementwise dst += src over both spectra.
fn add_assign(dst: &mut SpectralState, src: &SpectralState) {
    par::for_each_state_chunk(&mut dst.theta_hat, &mut dst.u_hat, |start, th, uc| {
        for i in 0..th.len() {
            th[i] += src.theta_hat[start + i];
        }
        for (c, comp) in uc.iter_mut().enumerate() {
            for i in 0..comp.len() {
                comp[i] += src.u_hat[c][start + i];
            }
        }
    });
}

/// Elementwise difference of nonlinearity bundles: a − b.
fn rhs_difference(a: &RhsFields, b: &RhsFields) -> RhsFields {
    let f_hat = a
        .f_hat
        .iter()
        .zip(&b.f_hat)
        .map(|(x, y)| x - y)
        .collect();
    let g_hat = a
        .g_hat
        .iter()
        .zip(&b.g_hat)
        .map(|(ca, cb)| ca.iter().zip(cb).map(|(x, y)| x - y).collect())
        .collect();
    RhsFields {
        f_hat,
        g_hat,
        dealiased: a.dealiased && b.dealiased,
    }
}

/// Sup distance between two states' spectra.
fn state_distance(a: &SpectralState, b: &SpectralState) -> f64 {
    let mut worst = 0.0f64;
    for (x, y) in a.theta_hat.iter().zip(&b.theta_hat) {
        worst = worst.max((x - y).norm());
    }
    for (ca, cb) in a.u_hat.iter().zip(&b.u_hat) {
        for (x, y) in ca.iter().zip(cb) {
            worst = worst.max((x - y).norm());
        }
    }
    worst
}

/// Spectra of the full right-hand side ∂ₜ(θ̂, û) = A(ξ)(θ̂, û) + (f̂, ĝ).
///
/// The linear generator rows are the Fourier symbols of Eq. (l1):
/// ∂ₜθ̂ = −iρ*(ξ·û) + f̂ and
/// ∂ₜû_j = −α*|ξ|²û_j − β*ξ_j(ξ·û) − i(γ* + κ*|ξ|²)ξ_jθ̂ + ĝ_j.
/// Nyquist-carrying rows are projected out, as in the propagator.
pub fn time_derivative_spectra(
    state: &SpectralState,
    params: &ModelParams,
    rhs: Option<&RhsFields>,
) -> (Vec<C64>, Vec<Vec<C64>>) {
    let grid = &state.grid;
    let dim = grid.dim();
    let total = grid.total();
    let nyq = -(grid.modes() as i64) / 2;
    let even = grid.modes() % 2 == 0;
    let mut dth = vec![C64::new(0.0, 0.0); total];
    let mut du = vec![vec![C64::new(0.0, 0.0); total]; dim];
    par::for_each_state_chunk(&mut dth, &mut du, |start, th, uc| {
        let mut xi = [0.0; 3];
        for i in 0..th.len() {
            let idx = start + i;
            if even && (0..dim).any(|a| grid.k(idx, a) == nyq) {
                continue;
            }
            grid.xi_vector(idx, &mut xi);
            let xi_sq = grid.xi_norm_sq(idx);
            let mut xi_dot_u = C64::new(0.0, 0.0);
            for (a, x) in xi.iter().enumerate().take(dim) {
                xi_dot_u += state.u_hat[a][idx] * *x;
            }
            th[i] = C64::new(0.0, -params.rho_star) * xi_dot_u;
            let coupling = C64::new(0.0, -(params.gamma_star + params.kappa_star * xi_sq))
                * state.theta_hat[idx];
            for (a, comp) in uc.iter_mut().enumerate() {
                comp[i] = state.u_hat[a][idx] * (-params.alpha_star * xi_sq)
                    - xi_dot_u * (params.beta_star * xi[a])
                    + coupling * xi[a];
            }
        }
    });
    if let Some(rhs) = rhs {
        for (v, f) in dth.iter_mut().zip(&rhs.f_hat) {
            *v += f;
        }
        for (comp, g) in du.iter_mut().zip(&rhs.g_hat) {
            for (v, gv) in comp.iter_mut().zip(g) {
                *v += gv;
            }
        }
    }
    (dth, du)
}

/// The exponential-quadrature stepper: shared kernel cache plus physics.
pub struct Stepper {
    propagator: Propagator,
    params: ModelParams,
    scheme: Scheme,
    linear_only: bool,
    g_form: GForm,
}

impl Stepper {
    /// Build a stepper for one grid/parameter pair.
    pub fn new(
        grid: &Arc<Grid>,
        params: ModelParams,
        scheme: Scheme,
        linear_only: bool,
        g_form: GForm,
    ) -> Self {
        Self {
            propagator: Propagator::new(Arc::clone(grid), params.clone()),
            params,
            scheme,
            linear_only,
            g_form,
        }
    }

    /// The model parameters this stepper advances.
    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    /// The shared propagator (kernel-table cache).
    pub fn propagator(&self) -> &Propagator {
        &self.propagator
    }

    /// Nonlinearity of a state under this stepper's 𝐠 form.
    pub fn rhs(&self, state: &SpectralState) -> Result<RhsFields, IntegratorError> {
        Ok(nonlinear::compute_rhs(state, &self.params, self.g_form)?)
    }

    /// One Duhamel step of size dt: X ↦ G(Δt)X + quadrature of the source.
    pub fn duhamel_step(
        &self,
        state: &SpectralState,
        dt: f64,
    ) -> Result<SpectralState, IntegratorError> {
        let mut next = self
            .propagator
            .apply_kernel(KernelKind::Propagator, state, dt)?;
        if self.linear_only {
            // Range condition is still part of well-posedness.
            let (min, max) = nonlinear::theta_extremes(state)?;
            let rho = self.params.rho_star;
            check_window(rho + min, rho + max, rho / 4.0, 4.0 * rho)?;
            return Ok(next);
        }
        let rhs = self.rhs(state)?;
        let n_state = SpectralState::from_parts(
            &state.grid,
            state.time,
            rhs.f_hat.clone(),
            rhs.g_hat.clone(),
        )?;
        let phi1 = self.propagator.apply_kernel(KernelKind::Phi1, &n_state, dt)?;
        add_assign(&mut next, &phi1);
        if self.scheme == Scheme::Etd2Rk {
            let rhs_star = self.rhs(&next)?;
            let delta = rhs_difference(&rhs_star, &rhs);
            let d_state =
                SpectralState::from_parts(&state.grid, state.time, delta.f_hat, delta.g_hat)?;
            let corr = self.propagator.apply_kernel(KernelKind::Phi2, &d_state, dt)?;
            add_assign(&mut next, &corr);
        }
        Ok(next)
    }
}

/// Check extremes of ρ*+θ against an admissibility window.
fn check_window(min: f64, max: f64, floor: f64, ceiling: f64) -> Result<(), IntegratorError> {
    if min.is_finite() && max.is_finite() && min >= floor && max <= ceiling {
        Ok(())
    } else {
        Err(IntegratorError::Nonlinear(NonlinearError::RangeViolation {
            min,
            max,
            floor,
            ceiling,
        }))
    }
}

/// The q labels and values used by the recorded norm set.
fn norm_labels(exps: &ExponentSet) -> [(&'static str, f64); 5] {
    [
        ("q1half", exps.q1.value / 2.0),
        ("q1", exps.q1.value),
        ("q2", exps.q2.value),
        ("2", 2.0),
        ("inf", f64::INFINITY),
    ]
}

/// Record the full tracked-norm sample for one state.
///
/// Series: `th_L*`/`u_L*`, `grad_th_L*`/`grad_u_L*`, `th_W{1..3}_*`,
/// `u_W{1..3}_*` over the five q labels, plus the time-derivative norms
/// `dt_th_W1_{q1,q2}` and `dt_u_L{q1,q2}` from the PDE right-hand side.
fn record_sample(
    timeline: &mut Timeline,
    state: &SpectralState,
    params: &ModelParams,
    exps: &ExponentSet,
    rhs: Option<&RhsFields>,
) -> Result<(), IntegratorError> {
    let grid = &state.grid;
    let dim = grid.dim();
    let labels = norm_labels(exps);
    let mut vals: Vec<(String, f64)> = Vec::new();

    // θ and u: accumulate Σ_{|α|≤m} per label, order by order.
    let mut acc_th = [0.0f64; 5];
    let mut acc_u = [0.0f64; 5];
    for order in 0..=3usize {
        let mut grad_th_fields: Vec<Vec<f64>> = Vec::new();
        let mut grad_u_fields: Vec<Vec<f64>> = Vec::new();
        for alpha in norms::axis_multisets(dim, order) {
            let th_field = norms::derivative_field(grid, &state.theta_hat, &alpha)?;
            let mut u_fields = Vec::with_capacity(dim);
            for comp in &state.u_hat {
                u_fields.push(norms::derivative_field(grid, comp, &alpha)?);
            }
            for (li, (_, q)) in labels.iter().enumerate() {
                acc_th[li] += norms::lebesgue_norm(grid, &th_field, *q)?;
                acc_u[li] += norms::lebesgue_norm_vec(grid, &u_fields, *q)?;
            }
            if order == 1 {
                grad_th_fields.push(th_field);
                grad_u_fields.extend(u_fields);
            }
        }
        for (li, (label, q)) in labels.iter().enumerate() {
            match order {
                0 => {
                    vals.push((norms::lq_name("th", label), acc_th[li]));
                    vals.push((norms::lq_name("u", label), acc_u[li]));
                }
                _ => {
                    vals.push((norms::sobolev_name("th", order, label), acc_th[li]));
                    vals.push((norms::sobolev_name("u", order, label), acc_u[li]));
                }
            }
            if order == 1 {
                vals.push((
                    norms::lq_name("grad_th", label),
                    norms::lebesgue_norm_vec(grid, &grad_th_fields, *q)?,
                ));
                vals.push((
                    norms::lq_name("grad_u", label),
                    norms::lebesgue_norm_vec(grid, &grad_u_fields, *q)?,
                ));
            }
        }
    }

    // Time-derivative norms from ∂ₜX = AX + N(X).
    let (dth, du) = time_derivative_spectra(state, params, rhs);
    for (label, q) in labels.iter().filter(|(l, _)| *l == "q1" || *l == "q2") {
        vals.push((
            norms::sobolev_name("dt_th", 1, label),
            norms::sobolev_norm(grid, &dth, 1, *q)?,
        ));
        vals.push((
            norms::lq_name("dt_u", label),
            norms::sobolev_norm_vec(grid, &du, 0, *q)?,
        ));
    }

    timeline.push(state.time, &vals)?;
    Ok(())
}

/// Advance `initial` to t_end, recording norms and snapshots.
///
/// Returns the trajectory; a mid-run range violation or non-finite state
/// halts early with the diagnostic in [`Trajectory::halt`] and the data up
/// to the last valid state intact. Configuration and initial-state
/// problems (including the stricter entry window ρ*/2 < ρ*+θ₀ < 2ρ*) are
/// hard errors.
pub fn run_simulation(
    initial: &SpectralState,
    params: &ModelParams,
    exps: &ExponentSet,
    config: &IntegratorConfig,
) -> Result<Trajectory, IntegratorError> {
    config.validate()?;
    initial.check_hermitian(1e-12)?;
    initial.check_finite()?;
    let (min0, max0) = nonlinear::theta_extremes(initial)?;
    // Entry window of the local theory: ρ*/2 < ρ*+θ₀ < 2ρ*.
    check_window(
        params.rho_star + min0,
        params.rho_star + max0,
        params.rho_star / 2.0,
        2.0 * params.rho_star,
    )?;

    let stepper = Stepper::new(
        &initial.grid,
        params.clone(),
        config.scheme,
        config.linear_only,
        config.g_form,
    );
    let n_steps = (config.t_end / config.dt).round().max(1.0) as usize;
    let mass0 = initial.theta_hat[0];

    let mut timeline = Timeline::new();
    let rhs0 = if config.linear_only {
        None
    } else {
        Some(stepper.rhs(initial)?)
    };
    record_sample(&mut timeline, initial, params, exps, rhs0.as_ref())?;
    let mut times = vec![initial.time];
    let mut states = vec![initial.clone()];
    let mut state = initial.clone();
    let mut halt = None;

    for step in 1..=n_steps {
        match stepper.duhamel_step(&state, config.dt) {
            Ok(next) => {
                if next.check_finite().is_err() {
                    halt = Some(HaltReason::NonFinite { t: next.time });
                    break;
                }
                state = next;
            }
            Err(IntegratorError::Nonlinear(NonlinearError::RangeViolation {
                min, max, ..
            })) => {
                halt = Some(HaltReason::RangeViolation {
                    t: state.time,
                    min,
                    max,
                });
                break;
            }
            Err(other) => return Err(other),
        }
        if step % config.norm_stride == 0 || step == n_steps {
            let rhs = if config.linear_only {
                None
            } else {
                match stepper.rhs(&state) {
                    Ok(r) => Some(r),
                    Err(IntegratorError::Nonlinear(NonlinearError::RangeViolation {
                        min,
                        max,
                        ..
                    })) => {
                        halt = Some(HaltReason::RangeViolation {
                            t: state.time,
                            min,
                            max,
                        });
                        break;
                    }
                    Err(other) => return Err(other),
                }
            };
            record_sample(&mut timeline, &state, params, exps, rhs.as_ref())?;
        }
        if step % config.snapshot_stride == 0 || step == n_steps {
            state.check_hermitian(1e-12)?;
            times.push(state.time);
            states.push(state.clone());
        }
    }

    let mass_drift = (state.theta_hat[0] - mass0).norm();
    Ok(Trajectory {
        times,
        states,
        timeline,
        halt,
        mass_drift,
    })
}

/// Path-space Picard iteration over [0, T]: trajectory_{k+1} solves the
/// linear system with sources frozen from trajectory_k, via the same
/// exponential quadrature as [`run_simulation`].
///
/// Returns the fixed-point trajectory and the residual sequence
/// (sup-distance between successive trajectories, one entry per iteration).
pub fn picard_iterate(
    initial: &SpectralState,
    horizon: f64,
    params: &ModelParams,
    exps: &ExponentSet,
    config: &IntegratorConfig,
) -> Result<(Trajectory, Vec<f64>), IntegratorError> {
    config.validate()?;
    let picard = config.picard.unwrap_or(PicardConfig {
        max_iters: 20,
        contraction_tol: 1e-12,
    });
    initial.check_hermitian(1e-12)?;
    let (min0, max0) = nonlinear::theta_extremes(initial)?;
    check_window(
        params.rho_star + min0,
        params.rho_star + max0,
        params.rho_star / 2.0,
        2.0 * params.rho_star,
    )?;

    let stepper = Stepper::new(
        &initial.grid,
        params.clone(),
        config.scheme,
        config.linear_only,
        config.g_form,
    );
    let n_steps = (horizon / config.dt).round().max(1.0) as usize;

    // Iterate 0: the pure linear evolution.
    let mut current: Vec<SpectralState> = Vec::with_capacity(n_steps + 1);
    current.push(initial.clone());
    for m in 0..n_steps {
        let next = stepper
            .propagator
            .apply_kernel(KernelKind::Propagator, &current[m], config.dt)?;
        current.push(next);
    }

    let mut residuals = Vec::new();
    let mut non_decreasing = 0usize;
    for _iter in 0..picard.max_iters {
        // One sweep: re-solve with sources from `current`.
        let mut next_traj: Vec<SpectralState> = Vec::with_capacity(n_steps + 1);
        next_traj.push(initial.clone());
        let mut sources: Vec<Option<RhsFields>> = Vec::with_capacity(n_steps + 1);
        if config.linear_only {
            sources.resize_with(n_steps + 1, || None);
        } else {
            for s in &current {
                sources.push(Some(stepper.rhs(s)?));
            }
        }
        for m in 0..n_steps {
            let mut next = stepper.propagator.apply_kernel(
                KernelKind::Propagator,
                &next_traj[m],
                config.dt,
            )?;
            if let Some(rhs) = &sources[m] {
                let n_state = SpectralState::from_parts(
                    &initial.grid,
                    next_traj[m].time,
                    rhs.f_hat.clone(),
                    rhs.g_hat.clone(),
                )?;
                let phi1 = stepper
                    .propagator
                    .apply_kernel(KernelKind::Phi1, &n_state, config.dt)?;
                add_assign(&mut next, &phi1);
                if config.scheme == Scheme::Etd2Rk {
                    let right = sources[m + 1].as_ref().expect("source built per state");
                    let delta = rhs_difference(right, rhs);
                    let d_state = SpectralState::from_parts(
                        &initial.grid,
                        next_traj[m].time,
                        delta.f_hat,
                        delta.g_hat,
                    )?;
                    let corr = stepper
                        .propagator
                        .apply_kernel(KernelKind::Phi2, &d_state, config.dt)?;
                    add_assign(&mut next, &corr);
                }
            }
            next.check_finite()?;
            next_traj.push(next);
        }
        let residual = current
            .iter()
            .zip(&next_traj)
            .map(|(a, b)| state_distance(a, b))
            .fold(0.0, f64::max);
        if let Some(&prev) = residuals.last() {
            if residual >= prev {
                non_decreasing += 1;
            } else {
                non_decreasing = 0;
            }
        }
        residuals.push(residual);
        current = next_traj;
        if residual < picard.contraction_tol {
            break;
        }
        if non_decreasing >= 3 {
            return Err(IntegratorError::NoContraction { residuals });
        }
    }

    // Package the fixed point as a Trajectory with full norm recording.
    let mut timeline = Timeline::new();
    let mut times = Vec::with_capacity(current.len());
    for s in &current {
        let rhs = if config.linear_only {
            None
        } else {
            Some(stepper.rhs(s)?)
        };
        record_sample(&mut timeline, s, params, exps, rhs.as_ref())?;
        times.push(s.time);
    }
    let mass_drift = (current.last().unwrap().theta_hat[0] - current[0].theta_hat[0]).norm();
    let traj = Trajectory {
        times,
        states: current,
        timeline,
        halt: None,
        mass_drift,
    };
    Ok((traj, residuals))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{validate_exponents, validate_params, Exponent, PressureLaw};
    use crate::propagator::Propagator;

    fn params(mu: f64, nu: f64, kappa: f64, rho: f64, gamma: f64) -> ModelParams {
        let pressure = PressureLaw::Polynomial {
            coeffs: vec![0.0, 0.0, gamma / 2.0],
        };
        validate_params(mu * rho, nu * rho, kappa, rho, pressure).unwrap()
    }

    fn exps() -> ExponentSet {
        validate_exponents(
            Exponent::rational(4, 1),
            Exponent::rational(24, 11),
            Exponent::rational(8, 1),
            Exponent::rational(1, 2),
            3,
        )
        .unwrap()
    }

    /// Smooth band-limited data: Gaussian bumps in θ and u.
    fn gaussian_state(grid: &Arc<Grid>, amp: f64) -> SpectralState {
        let total = grid.total();
        let l = grid.spacing() * grid.modes() as f64;
        let sigma = l / 10.0;
        let bump = |i: usize, shift: f64| {
            let mut r2 = 0.0;
            for a in 0..grid.dim() {
                let x = grid.coord(i, a) as f64 * grid.spacing() - l / 2.0 - shift;
                r2 += x * x;
            }
            (-r2 / (2.0 * sigma * sigma)).exp()
        };
        let theta: Vec<f64> = (0..total).map(|i| amp * bump(i, 0.0)).collect();
        let u: Vec<Vec<f64>> = (0..grid.dim())
            .map(|c| {
                (0..total)
                    .map(|i| 0.6 * amp * bump(i, 0.3 * (c as f64 + 1.0)))
                    .collect()
            })
            .collect();
        let mut s = fft::forward(grid, &theta, &u, 0.0).unwrap();
        s.dealias();
        s
    }

    #[test]
    fn linear_only_step_equals_semigroup() {
        let grid = Grid::new(1, 32, 2.0 * std::f64::consts::PI).unwrap();
        let p = params(1.0, 0.5, 0.8, 1.0, 1.0);
        let state = gaussian_state(&grid, 0.1);
        let stepper = Stepper::new(&grid, p.clone(), Scheme::Etd1, true, GForm::Conservative);
        let dt = 0.37;
        let got = stepper.duhamel_step(&state, dt).unwrap();
        let prop = Propagator::new(Arc::clone(&grid), p);
        let want = prop.apply_semigroup(&state, dt).unwrap();
        assert_eq!(got.theta_hat, want.theta_hat);
        assert_eq!(got.u_hat, want.u_hat);
    }

    #[test]
    fn small_step_consistency_order() {
        // ‖X₁ − X₀ − dt(AX₀ + N(X₀))‖ = O(dt²) on low-mode data.
        let grid = Grid::new(1, 32, 2.0 * std::f64::consts::PI).unwrap();
        let p = params(1.0, 0.5, 0.8, 1.0, 1.0);
        let mut state = gaussian_state(&grid, 0.01);
        // Keep only |k| ≤ 2 so dt·λ stays small across the fit window.
        for idx in 0..grid.total() {
            if grid.k(idx, 0).abs() > 2 {
                state.theta_hat[idx] = C64::new(0.0, 0.0);
                state.u_hat[0][idx] = C64::new(0.0, 0.0);
            }
        }
        let stepper = Stepper::new(&grid, p.clone(), Scheme::Etd1, false, GForm::Conservative);
        let rhs = stepper.rhs(&state).unwrap();
        let (dth, du) = time_derivative_spectra(&state, &p, Some(&rhs));
        let mut logs = Vec::new();
        for e in 6..=12 {
            let dt = 2f64.powi(-e);
            let next = stepper.duhamel_step(&state, dt).unwrap();
            let mut worst = 0.0f64;
            for idx in 0..grid.total() {
                let want = state.theta_hat[idx] + dth[idx] * dt;
                worst = worst.max((next.theta_hat[idx] - want).norm());
                let want_u = state.u_hat[0][idx] + du[0][idx] * dt;
                worst = worst.max((next.u_hat[0][idx] - want_u).norm());
            }
            logs.push((dt.ln(), worst.ln()));
        }
        // Least-squares slope of log residual vs log dt.
        let n = logs.len() as f64;
        let (sx, sy): (f64, f64) = logs.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
        let (sxx, sxy): (f64, f64) = logs
            .iter()
            .fold((0.0, 0.0), |a, p| (a.0 + p.0 * p.0, a.1 + p.0 * p.1));
        let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        assert!(slope >= 1.9, "consistency order {slope}");
    }

    #[test]
    fn step_halving_orders() {
        let grid = Grid::new(1, 32, 2.0 * std::f64::consts::PI).unwrap();
        let p = params(1.0, 0.5, 0.8, 1.0, 1.0);
        let state = gaussian_state(&grid, 0.05);
        let t_end = 0.5;
        for (scheme, order) in [(Scheme::Etd1, 1.0), (Scheme::Etd2Rk, 2.0)] {
            let run = |dt: f64| {
                let stepper = Stepper::new(&grid, p.clone(), scheme, false, GForm::Conservative);
                let mut s = state.clone();
                let n = (t_end / dt).round() as usize;
                for _ in 0..n {
                    s = stepper.duhamel_step(&s, dt).unwrap();
                }
                s
            };
            let (a, b, c) = (run(1.0 / 16.0), run(1.0 / 32.0), run(1.0 / 64.0));
            let e1 = state_distance(&a, &b);
            let e2 = state_distance(&b, &c);
            let measured = (e1 / e2).log2();
            assert!(
                (measured - order).abs() < 0.5,
                "{scheme:?}: halving order {measured}, want {order}"
            );
        }
    }

    #[test]
    fn run_simulation_zero_data_stays_zero() {
        let grid = Grid::new(1, 32, 5.0).unwrap();
        let p = params(1.0, 0.5, 0.8, 1.0, 1.0);
        let traj = run_simulation(
            &SpectralState::zeros(&grid),
            &p,
            &exps(),
            &IntegratorConfig::new(0.1, 1.0),
        )
        .unwrap();
        assert!(traj.halt.is_none());
        assert_eq!(traj.states.len(), 11);
        for s in &traj.states {
            assert_eq!(s.max_abs(), 0.0);
        }
        assert_eq!(traj.mass_drift, 0.0);
    }

    #[test]
    fn run_simulation_linear_only_matches_semigroup() {
        let grid = Grid::new(1, 32, 2.0 * std::f64::consts::PI).unwrap();
        let p = params(1.0, 0.5, 0.8, 1.0, 1.0);
        let state = gaussian_state(&grid, 0.1);
        let mut config = IntegratorConfig::new(0.125, 1.0);
        config.linear_only = true;
        let traj = run_simulation(&state, &p, &exps(), &config).unwrap();
        let prop = Propagator::new(Arc::clone(&grid), p);
        for (t, s) in traj.times.iter().zip(&traj.states) {
            let want = prop.apply_semigroup(&state, *t).unwrap();
            let scale = want.max_abs().max(1e-300);
            assert!(
                state_distance(s, &want) <= 1e-12 * scale,
                "mismatch at t={t}"
            );
        }
    }

    #[test]
    fn linear_limit_composition_close_to_exact() {
        // n steps of dt equal S(n·dt) to 1e-11 relative.
        let grid = Grid::new(2, 16, 4.0).unwrap();
        let p = params(0.8, 0.7, 1.2, 1.0, 0.9);
        let state = gaussian_state(&grid, 0.2);
        let stepper = Stepper::new(&grid, p.clone(), Scheme::Etd2Rk, true, GForm::Conservative);
        let dt = 0.05;
        let mut s = state.clone();
        for _ in 0..20 {
            s = stepper.duhamel_step(&s, dt).unwrap();
        }
        let prop = Propagator::new(Arc::clone(&grid), p);
        let want = prop.apply_semigroup(&state, 1.0).unwrap();
        assert!(state_distance(&s, &want) <= 1e-11 * want.max_abs());
    }

    #[test]
    fn mass_is_conserved_exactly() {
        let grid = Grid::new(2, 16, 6.0).unwrap();
        let p = params(1.0, 0.5, 0.8, 1.0, 1.0);
        let mut state = gaussian_state(&grid, 0.05);
        // Give θ a nonzero mean to make the check meaningful.
        state.theta_hat[0] = C64::new(3.7, 0.0);
        let traj = run_simulation(&state, &p, &exps(), &IntegratorConfig::new(0.1, 2.0)).unwrap();
        assert!(traj.halt.is_none());
        assert_eq!(traj.mass_drift, 0.0);
    }

    #[test]
    fn emitted_states_are_hermitian_and_timeline_complete() {
        let grid = Grid::new(2, 12, 6.0).unwrap();
        let p = params(1.0, 0.5, 0.8, 1.0, 1.0);
        let state = gaussian_state(&grid, 0.05);
        let traj = run_simulation(&state, &p, &exps(), &IntegratorConfig::new(0.1, 0.5)).unwrap();
        for s in &traj.states {
            s.check_hermitian(1e-12).unwrap();
        }
        // Timeline carries everything script_N needs.
        let n = norms::script_n(&traj.timeline, &exps(), 0.5).unwrap();
        assert!(n.is_finite() && n > 0.0);
        assert_eq!(traj.timeline.len(), 6);
    }

    #[test]
    fn initial_window_is_enforced() {
        let grid = Grid::new(1, 16, 5.0).unwrap();
        let p = params(1.0, 0.5, 0.8, 1.0, 1.0);
        let total = grid.total();
        // ρ*+θ dips to 0.4 < ρ*/2: legal for the evolution window, illegal
        // as initial data.
        let theta: Vec<f64> = (0..total)
            .map(|i| {
                let x = grid.coord(i, 0) as f64 * grid.spacing();
                -0.6 * (2.0 * std::f64::consts::PI * x / 5.0).cos().powi(2)
            })
            .collect();
        let state = fft::forward(&grid, &theta, &[vec![0.0; total]], 0.0).unwrap();
        let err = run_simulation(&state, &p, &exps(), &IntegratorConfig::new(0.1, 0.5));
        assert!(matches!(
            err,
            Err(IntegratorError::Nonlinear(NonlinearError::RangeViolation { .. }))
        ));
    }

    #[test]
    fn config_validation_rejects_bad_inputs() {
        let grid = Grid::new(1, 16, 5.0).unwrap();
        let p = params(1.0, 0.5, 0.8, 1.0, 1.0);
        let zero = SpectralState::zeros(&grid);
        for bad in [
            IntegratorConfig::new(-0.1, 1.0),
            IntegratorConfig::new(2.0, 1.0),
            IntegratorConfig {
                snapshot_stride: 0,
                ..IntegratorConfig::new(0.1, 1.0)
            },
        ] {
            assert!(matches!(
                run_simulation(&zero, &p, &exps(), &bad),
                Err(IntegratorError::Config { .. })
            ));
        }
    }

    #[test]
    fn picard_trivial_convergence() {
        let grid = Grid::new(1, 16, 5.0).unwrap();
        let p = params(1.0, 0.5, 0.8, 1.0, 1.0);
        let config = IntegratorConfig::new(0.1, 1.0);
        // Zero data: one iteration, residual zero.
        let (traj, residuals) =
            picard_iterate(&SpectralState::zeros(&grid), 1.0, &p, &exps(), &config).unwrap();
        assert_eq!(residuals.len(), 1);
        assert_eq!(residuals[0], 0.0);
        assert!(traj.states.iter().all(|s| s.max_abs() == 0.0));

        // Linear-only: nonlinearity absent, converges immediately.
        let state = gaussian_state(&grid, 0.1);
        let mut lin = IntegratorConfig::new(0.1, 1.0);
        lin.linear_only = true;
        let (_, residuals) = picard_iterate(&state, 1.0, &p, &exps(), &lin).unwrap();
        assert_eq!(residuals.len(), 1);
        assert_eq!(residuals[0], 0.0);
    }

    #[test]
    fn picard_agrees_with_direct_stepping() {
        let grid = Grid::new(1, 32, 2.0 * std::f64::consts::PI).unwrap();
        let p = params(1.0, 0.5, 0.8, 1.0, 1.0);
        let state = gaussian_state(&grid, 0.01);
        let mut config = IntegratorConfig::new(1.0 / 16.0, 1.0);
        config.picard = Some(PicardConfig {
            max_iters: 30,
            contraction_tol: 1e-13,
        });
        let (traj, residuals) = picard_iterate(&state, 1.0, &p, &exps(), &config).unwrap();
        // Residuals decrease geometrically once the iteration engages.
        assert!(residuals.len() >= 2);
        for w in residuals.windows(2) {
            if w[0] > 0.0 {
                assert!(w[1] < w[0], "residuals {residuals:?}");
            }
        }
        let direct = run_simulation(&state, &p, &exps(), &config).unwrap();
        let sup_ref = direct
            .states
            .iter()
            .map(|s| s.max_abs())
            .fold(0.0, f64::max);
        let worst = traj
            .states
            .iter()
            .zip(&direct.states)
            .map(|(a, b)| state_distance(a, b))
            .fold(0.0, f64::max);
        assert!(worst <= 1e-6 * sup_ref, "picard vs direct {worst}");
    }

    #[test]
    fn small_data_norm_stays_bounded() {
        // Scaled-down version of the W^{1,0}_{q₂} boundedness observation.
        let grid = Grid::new(1, 32, 20.0).unwrap();
        let p = params(1.0, 0.5, 0.8, 1.0, 1.0);
        let mut state = gaussian_state(&grid, 1.0);
        // Normalize to a small data functional.
        let i0 = norms::data_norm_i(&state, &exps()).unwrap();
        let scale = 1e-3 / i0;
        for v in state.theta_hat.iter_mut() {
            *v *= scale;
        }
        for comp in state.u_hat.iter_mut() {
            for v in comp.iter_mut() {
                *v *= scale;
            }
        }
        let traj = run_simulation(&state, &p, &exps(), &IntegratorConfig::new(0.2, 10.0)).unwrap();
        assert!(traj.halt.is_none());
        let q2 = 8.0;
        let mut sup = 0.0f64;
        for s in &traj.states {
            let w = norms::sobolev_norm(&grid, &s.theta_hat, 1, q2).unwrap()
                + norms::sobolev_norm_vec(&grid, &s.u_hat, 0, q2).unwrap();
            sup = sup.max(w);
        }
        assert!(sup <= 10.0 * 1e-3, "sup {sup}");
    }
}
