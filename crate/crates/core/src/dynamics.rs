//! Unconditional qubit evolution under decoherence plus Markovian homodyne feedback.
//!
//! Two channels are modelled. Dephasing couples through L = σz/√2. Dissipation
//! couples through L = σ−/√2 together with an auxiliary channel on L†, which is
//! rewritten as the pair of Hermitian couplings
//! L± = i^{(1∓1)/2}(L ± L†)/√2, each monitored and fed back independently.
//! In every case the feedback operator is F = λL (or F± = λL±) and the
//! Hamiltonian is H = ωσz/2.

use crate::error::{Error, Result};
use crate::qubit::{ComplexMat2, DensityMatrix};
use crate::C64;

/// Default RK4 step.
pub const DEFAULT_DT: f64 = 1e-4;
/// Tolerance on trace and positivity along numerically integrated paths.
pub const INTEGRATION_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ChannelKind {
    Dephasing,
    Dissipative,
}

impl std::str::FromStr for ChannelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dephasing" => Ok(Self::Dephasing),
            "dissipative" => Ok(Self::Dissipative),
            other => Err(Error::InvalidInput(format!("unknown channel kind '{other}'"))),
        }
    }
}

/// Physical scenario: channel type, detector efficiency η, feedback gain λ,
/// homodyne angle θ and qubit frequency ω.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeedbackChannel {
    pub kind: ChannelKind,
    pub eta: f64,
    pub lambda: f64,
    pub theta: f64,
    pub omega: f64,
}

impl FeedbackChannel {
    pub fn new(kind: ChannelKind, eta: f64, lambda: f64, theta: f64, omega: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&eta) {
            return Err(Error::InvalidInput(format!(
                "detection efficiency must lie in [0, 1], got {eta}"
            )));
        }
        for (name, v) in [("lambda", lambda), ("theta", theta), ("omega", omega)] {
            if !v.is_finite() {
                return Err(Error::InvalidInput(format!("{name} must be finite, got {v}")));
            }
        }
        Ok(Self {
            kind,
            eta,
            lambda,
            theta,
            omega,
        })
    }

    pub fn dephasing(eta: f64, lambda: f64, theta: f64, omega: f64) -> Result<Self> {
        Self::new(ChannelKind::Dephasing, eta, lambda, theta, omega)
    }

    pub fn dissipative(eta: f64, lambda: f64, theta: f64, omega: f64) -> Result<Self> {
        Self::new(ChannelKind::Dissipative, eta, lambda, theta, omega)
    }

    /// Effective decoherence rate γ = 1 + λ² − 2 sinθ λ √η.
    pub fn gamma(&self) -> f64 {
        effective_rate(self.eta, self.lambda, self.theta)
    }

    /// H = ωσz/2
    pub fn hamiltonian(&self) -> ComplexMat2 {
        ComplexMat2::pauli_z().scale_re(0.5 * self.omega)
    }

    /// Monitored couplings: one for dephasing, the pair L± for dissipation.
    pub fn couplings(&self) -> Vec<ComplexMat2> {
        match self.kind {
            ChannelKind::Dephasing => vec![dephasing_coupling()],
            ChannelKind::Dissipative => {
                let (plus, minus) = hermitian_pair(&dissipative_coupling());
                vec![plus, minus]
            }
        }
    }

    /// Feedback operator paired with `coupling`: F = λL.
    pub fn feedback_operator(&self, coupling: &ComplexMat2) -> ComplexMat2 {
        coupling.scale_re(self.lambda)
    }
}

/// γ(η, λ, θ) = 1 + λ² − 2 sinθ λ √η
pub fn effective_rate(eta: f64, lambda: f64, theta: f64) -> f64 {
    1.0 + lambda * lambda - 2.0 * theta.sin() * lambda * eta.sqrt()
}

/// L = σz/√2
pub fn dephasing_coupling() -> ComplexMat2 {
    ComplexMat2::pauli_z().scale_re(std::f64::consts::FRAC_1_SQRT_2)
}

/// L = σ−/√2
pub fn dissipative_coupling() -> ComplexMat2 {
    ComplexMat2::sigma_minus().scale_re(std::f64::consts::FRAC_1_SQRT_2)
}

/// L+ = (L + L†)/√2 and L− = i(L − L†)/√2, so that D[L] + D[L†] = D[L+] + D[L−].
pub fn hermitian_pair(l: &ComplexMat2) -> (ComplexMat2, ComplexMat2) {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let ld = l.adjoint();
    let plus = (*l + ld).scale_re(s);
    let minus = (*l - ld).scale(C64::new(0.0, s));
    (plus, minus)
}

/// D[L]ρ = LρL† − (L†Lρ + ρL†L)/2
pub fn lindblad_dissipator(l: &ComplexMat2, rho: &ComplexMat2) -> ComplexMat2 {
    let ld = l.adjoint();
    let ldl = ld * *l;
    *l * *rho * ld - (ldl * *rho + *rho * ldl).scale_re(0.5)
}

/// −i√η [F, L e^{iθ} ρ + ρ L† e^{−iθ}]
pub fn feedback_term(
    f: &ComplexMat2,
    l: &ComplexMat2,
    eta: f64,
    theta: f64,
    rho: &ComplexMat2,
) -> ComplexMat2 {
    let phase = C64::from_polar(1.0, theta);
    let inner = *l * *rho * phase + *rho * l.adjoint() * phase.conj();
    f.commutator(&inner).scale(C64::new(0.0, -eta.sqrt()))
}

/// Right-hand side of the unconditional master equation with feedback,
/// −i[H,ρ] + Σ_c (D[L_c]ρ − i√η[F_c, L_c e^{iθ}ρ + ρL_c† e^{−iθ}] + D[F_c]ρ).
pub fn feedback_generator(channel: &FeedbackChannel, rho: &ComplexMat2) -> ComplexMat2 {
    let h = channel.hamiltonian();
    let mut out = h.commutator(rho).scale(C64::new(0.0, -1.0));
    for l in channel.couplings() {
        let f = channel.feedback_operator(&l);
        out += lindblad_dissipator(&l, rho)
            + feedback_term(&f, &l, channel.eta, channel.theta, rho)
            + lindblad_dissipator(&f, rho);
    }
    out
}

/// Closed-form dephasing evolution from |+⟩: ρ00 = ρ11 = 1/2,
/// ρ01(t) = e^{−iωt − γt}/2.
pub fn evolve_analytic_dephasing(channel: &FeedbackChannel, t: f64) -> Result<DensityMatrix> {
    if channel.kind != ChannelKind::Dephasing {
        return Err(Error::InvalidInput(
            "closed-form evolution exists for the dephasing channel only".into(),
        ));
    }
    if !(t >= 0.0) {
        return Err(Error::InvalidInput(format!("time must be non-negative, got {t}")));
    }
    DensityMatrix::new(analytic_dephasing_matrix(
        channel.eta,
        channel.lambda,
        channel.theta,
        channel.omega,
        t,
    ))
}

/// Unvalidated closed-form matrix; the probe family used by Fisher-information routines.
pub fn analytic_dephasing_matrix(eta: f64, lambda: f64, theta: f64, omega: f64, t: f64) -> ComplexMat2 {
    let gamma = effective_rate(eta, lambda, theta);
    let half = C64::from(0.5);
    let coh = C64::from_polar(0.5 * (-gamma * t).exp(), -omega * t);
    ComplexMat2::new(half, coh, coh.conj(), half)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolutionSpec {
    pub channel: FeedbackChannel,
    pub initial: DensityMatrix,
    pub t_final: f64,
    pub dt: f64,
}

impl EvolutionSpec {
    pub fn new(channel: FeedbackChannel, initial: DensityMatrix, t_final: f64, dt: f64) -> Result<Self> {
        let spec = Self {
            channel,
            initial,
            t_final,
            dt,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_final >= 0.0) || !self.t_final.is_finite() {
            return Err(Error::InvalidInput(format!(
                "t_final must be finite and non-negative, got {}",
                self.t_final
            )));
        }
        if !(self.dt > 0.0) {
            return Err(Error::InvalidInput(format!("dt must be positive, got {}", self.dt)));
        }
        if self.t_final > 0.0 && self.dt > self.t_final {
            return Err(Error::InvalidInput(format!(
                "dt = {} exceeds t_final = {}",
                self.dt, self.t_final
            )));
        }
        Ok(())
    }

    /// Number of uniform steps; the actual step is `t_final / steps` (≤ dt).
    pub fn steps(&self) -> usize {
        if self.t_final == 0.0 {
            0
        } else {
            (self.t_final / self.dt - 1e-9).ceil().max(1.0) as usize
        }
    }
}

/// A sampled time series of states.
#[derive(Debug, Clone, PartialEq)]
pub struct Evolution {
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
}

impl Evolution {
    pub fn last(&self) -> &DensityMatrix {
        self.states.last().expect("evolution holds at least the initial state")
    }
}

fn rk4_step(channel: &FeedbackChannel, rho: &ComplexMat2, h: f64) -> ComplexMat2 {
    let k1 = feedback_generator(channel, rho);
    let k2 = feedback_generator(channel, &(*rho + k1.scale_re(0.5 * h)));
    let k3 = feedback_generator(channel, &(*rho + k2.scale_re(0.5 * h)));
    let k4 = feedback_generator(channel, &(*rho + k3.scale_re(h)));
    *rho + (k1 + k2.scale_re(2.0) + k3.scale_re(2.0) + k4).scale_re(h / 6.0)
}

/// Fixed-step RK4 integration of [`feedback_generator`], every step retained.
pub fn evolve_numeric(spec: &EvolutionSpec) -> Result<Evolution> {
    spec.validate()?;
    let n = spec.steps();
    let h = if n == 0 { 0.0 } else { spec.t_final / n as f64 };
    let mut times = Vec::with_capacity(n + 1);
    let mut states = Vec::with_capacity(n + 1);
    times.push(0.0);
    states.push(spec.initial);

    let mut rho = *spec.initial.matrix();
    for step in 1..=n {
        rho = rk4_step(&spec.channel, &rho, h);
        let time = if step == n { spec.t_final } else { step as f64 * h };
        let state = DensityMatrix::with_tolerance(rho, INTEGRATION_TOL).map_err(|e| {
            Error::InvariantViolation {
                step,
                time,
                reason: e.to_string(),
            }
        })?;
        times.push(time);
        states.push(state);
    }
    Ok(Evolution { times, states })
}
