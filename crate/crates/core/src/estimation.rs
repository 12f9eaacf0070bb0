//! Precision bounds for the detector efficiency η and the qubit frequency ω.
//!
//! The probe is |+⟩ evolved for a time t under dephasing with feedback gain λ
//! at homodyne angle θ; its coherence is e^{−iωt−γt}/2 with
//! γ = 1 + λ² − 2 sinθ λ √η. Every bound here is per probe (N = 1) unless a
//! probe count is passed explicitly.

use std::f64::consts::{E, FRAC_PI_2};

use rayon::prelude::*;

use crate::dynamics::{analytic_dephasing_matrix, effective_rate};
use crate::error::{Error, Result};
use crate::fisher::{FnFamily, ParamFamily};
use crate::optimize::{grid_then_refine, logspace, Minimum, NelderMeadOptions};
use crate::qubit::DensityMatrix;

/// Parameter index of ω in [`probe_family`].
pub const OMEGA: usize = 0;
/// Parameter index of η in [`probe_family`].
pub const ETA: usize = 1;

const GRID_T: usize = 80;
const GRID_LAMBDA: usize = 40;

/// The dephasing probe ρ(ω, η) at fixed (λ, θ, t), evaluated at (ω, η).
pub fn probe_family(omega: f64, eta: f64, lambda: f64, theta: f64, t: f64) -> Result<impl ParamFamily> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::InvalidInput(format!("η must lie in (0, 1], got {eta}")));
    }
    if !(t >= 0.0) {
        return Err(Error::InvalidInput(format!("t must be non-negative, got {t}")));
    }
    FnFamily::new(["omega", "eta"], vec![omega, eta], move |x: &[f64]| {
        if x[1] < 0.0 {
            return Err(Error::InvalidInput("η stepped below zero".into()));
        }
        DensityMatrix::new(analytic_dephasing_matrix(x[1], lambda, theta, x[0], t))
    })
}

fn check_eta_open_closed(eta: f64) -> Result<()> {
    if eta == 0.0 {
        return Err(Error::Divergent(
            "η = 0: the efficiency information is unbounded and its variance bound vanishes".into(),
        ));
    }
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::InvalidInput(format!("η must lie in (0, 1], got {eta}")));
    }
    Ok(())
}

fn check_time(t: f64) -> Result<()> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::InvalidInput(format!("t must be positive, got {t}")));
    }
    Ok(())
}

/// Closed-form QFI of η:
/// sin²θ λ² t² e^{−2γt} / (η (1 − e^{−2γt})).
///
/// A noiseless probe (γ = 0, reached at η = 1, λ sinθ = 1) is pure and its
/// efficiency information is unbounded; that case is reported as divergent.
pub fn qfi_eta_closed(eta: f64, lambda: f64, theta: f64, t: f64) -> Result<f64> {
    check_eta_open_closed(eta)?;
    check_time(t)?;
    let s = theta.sin();
    if lambda * s == 0.0 {
        return Ok(0.0);
    }
    let gt = effective_rate(eta, lambda, theta) * t;
    if gt <= 0.0 {
        return Err(Error::Divergent(format!(
            "γt = {gt:e}: the probe stays pure and the η information diverges"
        )));
    }
    Ok(s * s * lambda * lambda * t * t * (-2.0 * gt).exp() / (eta * -(-2.0 * gt).exp_m1()))
}

/// Per-probe variance bound on η, η(e^{2γt} − 1)/(λ² sin²θ t²).
/// Infinite where the probe carries no η information.
pub fn eta_variance_bound(eta: f64, lambda: f64, theta: f64, t: f64) -> f64 {
    let s = theta.sin();
    let gt = effective_rate(eta, lambda, theta) * t;
    let v = eta * (2.0 * gt).exp_m1() / (lambda * lambda * s * s * t * t);
    if v.is_nan() || lambda * s == 0.0 {
        f64::INFINITY
    } else {
        v
    }
}

/// Per-probe variance bound on ω, e^{2γt}/t².
pub fn omega_variance_bound(eta: f64, lambda: f64, theta: f64, t: f64) -> f64 {
    let gt = effective_rate(eta, lambda, theta) * t;
    (2.0 * gt).exp() / (t * t)
}

/// Homodyne angle maximising the η information: sinθ = sign(λ).
pub fn optimal_theta(lambda: f64) -> Result<f64> {
    if lambda == 0.0 || lambda.is_nan() {
        return Err(Error::InvalidInput(
            "λ = 0 carries no η information at any angle".into(),
        ));
    }
    Ok(if lambda > 0.0 { FRAC_PI_2 } else { -FRAC_PI_2 })
}

/// Approximate optimal interrogation time at λ = 1, t = 1/(2 − 2√η).
pub fn approx_optimal_time(eta: f64) -> Result<f64> {
    if eta == 1.0 {
        return Err(Error::Divergent("η = 1: the optimal time diverges".into()));
    }
    if !(0.0..1.0).contains(&eta) {
        return Err(Error::InvalidInput(format!("η must lie in [0, 1), got {eta}")));
    }
    Ok(1.0 / (2.0 - 2.0 * eta.sqrt()))
}

/// Approximate per-probe bound N·δη² ≥ 4η(1 − √η)²(e² − 1).
pub fn approx_bound(eta: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::InvalidInput(format!("η must lie in [0, 1], got {eta}")));
    }
    let d = 1.0 - eta.sqrt();
    Ok(4.0 * eta * d * d * (E * E - 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    ExactNumeric,
    ApproxAnalytic,
}

/// An optimized (or closed-form) precision bound and where it is attained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrecisionReport {
    pub eta: f64,
    pub optimal_t: f64,
    pub optimal_lambda: f64,
    pub theta: f64,
    /// N·δη² (or N·(δω² + δη²)) at the reported point.
    pub bound_value: f64,
    pub method: Method,
    /// `false` when the local refinement hit its iteration cap; the value is
    /// still the best one found.
    pub converged: bool,
}

/// The closed-form approximation packaged as a report.
pub fn approx_report(eta: f64) -> Result<PrecisionReport> {
    Ok(PrecisionReport {
        eta,
        optimal_t: approx_optimal_time(eta)?,
        optimal_lambda: 1.0,
        theta: FRAC_PI_2,
        bound_value: approx_bound(eta)?,
        method: Method::ApproxAnalytic,
        converged: true,
    })
}

fn check_open_unit(eta: f64) -> Result<()> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::InvalidInput(format!(
            "numerical optimisation needs η in (0, 1), got {eta}"
        )));
    }
    Ok(())
}

/// Minimize `objective(λ, t)` over λ and t > 0: log-spaced grid over
/// t ∈ [1e-3, 10/(1 − √η)] and λ ∈ [0.25, 4], then Nelder–Mead in (λ, ln t).
fn optimize_gain_and_time(eta: f64, objective: impl Fn(f64, f64) -> f64) -> Minimum {
    let t_axis: Vec<f64> = logspace(1e-3, 10.0 / (1.0 - eta.sqrt()), GRID_T)
        .into_iter()
        .map(f64::ln)
        .collect();
    let lambda_axis = logspace(0.25, 4.0, GRID_LAMBDA);
    let opts = NelderMeadOptions {
        f_tol: 1e-13,
        x_tol: 1e-9,
        initial_step: 0.05,
        max_iterations: 20_000,
    };
    let mut m = grid_then_refine(|x: &[f64]| objective(x[0], x[1].exp()), &[lambda_axis, t_axis], &opts);
    m.x[1] = m.x[1].exp();
    m
}

/// Exact per-probe bound min_{t,λ} η(e^{2γt} − 1)/(λ²t²) at θ = π/2.
pub fn exact_bound(eta: f64) -> Result<PrecisionReport> {
    check_open_unit(eta)?;
    let m = optimize_gain_and_time(eta, |lambda, t| eta_variance_bound(eta, lambda, FRAC_PI_2, t));
    Ok(PrecisionReport {
        eta,
        optimal_t: m.x[1],
        optimal_lambda: m.x[0],
        theta: FRAC_PI_2,
        bound_value: m.value,
        method: Method::ExactNumeric,
        converged: m.converged,
    })
}

/// Joint per-probe bound δω² + δη² from the inverse QFI matrix:
/// (1/t²)[e^{2γt} + η(e^{2γt} − 1)/(λ² sin²θ)].
pub fn simultaneous_bound(eta: f64, lambda: f64, theta: f64, t: f64) -> Result<f64> {
    check_eta_open_closed(eta)?;
    check_time(t)?;
    if lambda * theta.sin() == 0.0 {
        return Err(Error::Divergent(
            "no η information (λ sinθ = 0): the η variance is unbounded".into(),
        ));
    }
    Ok(omega_variance_bound(eta, lambda, theta, t) + eta_variance_bound(eta, lambda, theta, t))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimultaneousReport {
    pub eta: f64,
    pub simultaneous_bound: f64,
    /// 2·[min δω² + min δη²]: each parameter gets half of the probes.
    pub independent_bound: f64,
    /// (t, λ) minimising the joint bound.
    pub simultaneous_at: (f64, f64),
    /// (t, λ) minimising δω² alone.
    pub omega_at: (f64, f64),
    /// (t, λ) minimising δη² alone.
    pub eta_at: (f64, f64),
    pub omega_bound: f64,
    pub eta_bound: f64,
    pub converged: bool,
}

/// Simultaneous vs independent estimation of (ω, η) at θ = π/2, per probe.
pub fn simultaneous_vs_independent(eta: f64) -> Result<SimultaneousReport> {
    check_open_unit(eta)?;
    let sim = optimize_gain_and_time(eta, |lambda, t| {
        omega_variance_bound(eta, lambda, FRAC_PI_2, t) + eta_variance_bound(eta, lambda, FRAC_PI_2, t)
    });
    let omega = optimize_gain_and_time(eta, |lambda, t| omega_variance_bound(eta, lambda, FRAC_PI_2, t));
    let eta_only = exact_bound(eta)?;
    Ok(SimultaneousReport {
        eta,
        simultaneous_bound: sim.value,
        independent_bound: 2.0 * (omega.value + eta_only.bound_value),
        simultaneous_at: (sim.x[1], sim.x[0]),
        omega_at: (omega.x[1], omega.x[0]),
        eta_at: (eta_only.optimal_t, eta_only.optimal_lambda),
        omega_bound: omega.value,
        eta_bound: eta_only.bound_value,
        converged: sim.converged && omega.converged && eta_only.converged,
    })
}

/// One row per η: the exact and approximate efficiency bounds, in grid order.
pub fn scan_eta_bounds(etas: &[f64]) -> Vec<Result<(PrecisionReport, PrecisionReport)>> {
    etas.par_iter()
        .map(|&eta| Ok((exact_bound(eta)?, approx_report(eta)?)))
        .collect()
}

/// One [`simultaneous_vs_independent`] per η, in grid order.
pub fn scan_simultaneous(etas: &[f64]) -> Vec<Result<SimultaneousReport>> {
    etas.par_iter().map(|&eta| simultaneous_vs_independent(eta)).collect()
}
