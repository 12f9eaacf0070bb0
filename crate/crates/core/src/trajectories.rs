//! Conditioned qubit evolution under continuous homodyne monitoring.
//!
//! Each monitored coupling L_c (one for dephasing, L± for dissipation) has an
//! independent Wiener increment dW_c and photocurrent
//! I_c = √η⟨L_c e^{iθ} + L_c† e^{−iθ}⟩ + dW_c/dt. The conditioned state is
//! advanced by Euler–Maruyama on the Itô stochastic master equation. After every
//! step the state is re-Hermitized and its trace renormalized; positivity is
//! tracked (see [`TrajectoryRecord::min_eigenvalue`]) but never enforced.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::dynamics::{feedback_generator, lindblad_dissipator, EvolutionSpec, FeedbackChannel};
use crate::error::{Error, Result};
use crate::qubit::{BlochVector, ComplexMat2, DensityMatrix};
use crate::C64;

/// Tolerance on trace and Hermiticity of conditioned states.
pub const SDE_TOL: f64 = 1e-8;

/// Trajectories per aggregation chunk. Fixed so that ensemble sums do not
/// depend on thread scheduling.
const CHUNK: usize = 32;

/// Measurement superoperator H[A]ρ = Aρ + ρA† − tr(Aρ + ρA†)ρ.
pub fn measurement_superop(a: &ComplexMat2, rho: &ComplexMat2) -> ComplexMat2 {
    let x = *a * *rho + *rho * a.adjoint();
    x - rho.scale(x.trace())
}

/// Noiseless part of the photocurrent for coupling `l`: √η⟨L e^{iθ} + L† e^{−iθ}⟩.
pub fn photocurrent_signal(l: &ComplexMat2, eta: f64, theta: f64, rho: &ComplexMat2) -> f64 {
    let phase = C64::from_polar(1.0, theta);
    let x = *l * phase + l.adjoint() * phase.conj();
    eta.sqrt() * (x * *rho).trace().re
}

fn check_increments(channel: &FeedbackChannel, dt: f64, dw: &[f64]) -> Result<Vec<ComplexMat2>> {
    if !(dt > 0.0) {
        return Err(Error::InvalidInput(format!("dt must be positive, got {dt}")));
    }
    let couplings = channel.couplings();
    if dw.len() != couplings.len() {
        return Err(Error::InvalidInput(format!(
            "channel has {} monitored outputs but {} increments were supplied",
            couplings.len(),
            dw.len()
        )));
    }
    Ok(couplings)
}

fn finish_step(m: ComplexMat2) -> Result<DensityMatrix> {
    if !m.is_finite() {
        return Err(Error::InvalidState("conditioned state became non-finite".into()));
    }
    let h = m.hermitian_part();
    let tr = h.trace().re;
    Ok(DensityMatrix::from_matrix_unchecked(h.scale_re(1.0 / tr)))
}

/// One Euler–Maruyama step of the monitored evolution without feedback:
/// dρ = −i[H,ρ]dt + Σ_c D[L_c]ρ dt + Σ_c √η dW_c H[L_c e^{iθ}]ρ.
///
/// The feedback gain of `channel` is ignored. `dw` holds one increment per
/// monitored output.
pub fn sme_step(rho: &DensityMatrix, channel: &FeedbackChannel, dt: f64, dw: &[f64]) -> Result<DensityMatrix> {
    let couplings = check_increments(channel, dt, dw)?;
    let r = rho.matrix();
    let phase = C64::from_polar(1.0, channel.theta);
    let mut drift = channel.hamiltonian().commutator(r).scale(C64::new(0.0, -1.0));
    let mut noise = ComplexMat2::zero();
    for (l, &dwc) in couplings.iter().zip(dw) {
        drift += lindblad_dissipator(l, r);
        noise += measurement_superop(&l.scale(phase), r).scale_re(channel.eta.sqrt() * dwc);
    }
    finish_step(*r + drift.scale_re(dt) + noise)
}

/// One Euler–Maruyama step with the photocurrent fed back as H_fb = I(t)F:
/// the drift is the unconditional feedback generator and the innovation of
/// output c is dW_c H[√η L_c e^{iθ} − iF_c]ρ.
pub fn sme_step_feedback(
    rho: &DensityMatrix,
    channel: &FeedbackChannel,
    dt: f64,
    dw: &[f64],
) -> Result<DensityMatrix> {
    let couplings = check_increments(channel, dt, dw)?;
    let r = rho.matrix();
    let phase = C64::from_polar(1.0, channel.theta);
    let mut noise = ComplexMat2::zero();
    for (l, &dwc) in couplings.iter().zip(dw) {
        let f = channel.feedback_operator(l);
        let a = l.scale(phase * channel.eta.sqrt()) - f.scale(C64::new(0.0, 1.0));
        noise += measurement_superop(&a, r).scale_re(dwc);
    }
    finish_step(*r + feedback_generator(channel, r).scale_re(dt) + noise)
}

/// A single conditioned trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
    /// I_k over [t_k, t_{k+1}); for the dissipative channel this is the L+ output.
    pub photocurrent: Vec<f64>,
    /// L− output of the dissipative channel.
    pub photocurrent_minus: Option<Vec<f64>>,
    pub wiener_seed: u64,
    /// Smallest eigenvalue met along the path (negative values flag positivity loss).
    pub min_eigenvalue: f64,
}

impl TrajectoryRecord {
    pub fn bloch(&self) -> Vec<BlochVector> {
        self.states.iter().map(DensityMatrix::to_bloch).collect()
    }

    /// CSV with columns t, rx, ry, rz, I (plus I_minus for two outputs).
    /// The final row has no photocurrent sample.
    pub fn write_csv(&self, path: &Path) -> std::io::Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        let two = self.photocurrent_minus.is_some();
        if two {
            writeln!(w, "t,rx,ry,rz,I,I_minus")?;
        } else {
            writeln!(w, "t,rx,ry,rz,I")?;
        }
        for (k, (t, s)) in self.times.iter().zip(&self.states).enumerate() {
            let r = s.to_bloch();
            write!(w, "{t:.15e},{:.15e},{:.15e},{:.15e},", r.x + 0.0, r.y + 0.0, r.z + 0.0)?;
            if let Some(i) = self.photocurrent.get(k) {
                write!(w, "{i:.15e}")?;
            }
            if let Some(minus) = &self.photocurrent_minus {
                write!(w, ",")?;
                if let Some(i) = minus.get(k) {
                    write!(w, "{i:.15e}")?;
                }
            }
            writeln!(w)?;
        }
        w.flush()
    }
}

/// Per-step observation handed to trajectory visitors.
struct StepView<'a> {
    step: usize,
    time: f64,
    state: &'a DensityMatrix,
    /// Photocurrents and their signal parts for the interval starting at this
    /// step; `None` at the final time.
    currents: Option<(&'a [f64], &'a [f64])>,
}

fn run_trajectory(
    channel: &FeedbackChannel,
    initial: &DensityMatrix,
    t_final: f64,
    dt: f64,
    seed: u64,
    mut visit: impl FnMut(StepView<'_>),
) -> Result<()> {
    let spec = EvolutionSpec::new(*channel, *initial, t_final, dt)?;
    let n = spec.steps();
    let h = if n == 0 { 0.0 } else { t_final / n as f64 };
    let sqrt_h = h.sqrt();
    let couplings = channel.couplings();
    let outputs = couplings.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut rho = *initial;
    let mut dw = vec![0.0; outputs];
    let mut currents = vec![0.0; outputs];
    let mut signals = vec![0.0; outputs];
    for step in 0..n {
        for c in 0..outputs {
            let xi: f64 = StandardNormal.sample(&mut rng);
            dw[c] = sqrt_h * xi;
            signals[c] = photocurrent_signal(&couplings[c], channel.eta, channel.theta, rho.matrix());
            currents[c] = signals[c] + dw[c] / h;
        }
        visit(StepView {
            step,
            time: step as f64 * h,
            state: &rho,
            currents: Some((&currents, &signals)),
        });
        rho = sme_step_feedback(&rho, channel, h, &dw).map_err(|e| Error::InvariantViolation {
            step: step + 1,
            time: (step + 1) as f64 * h,
            reason: e.to_string(),
        })?;
    }
    visit(StepView {
        step: n,
        time: t_final,
        state: &rho,
        currents: None,
    });
    Ok(())
}

/// Simulate one conditioned trajectory with feedback gain `channel.lambda`
/// (λ = 0 gives the bare monitored evolution). Deterministic in `seed`.
pub fn simulate_trajectory(
    channel: &FeedbackChannel,
    initial: &DensityMatrix,
    t_final: f64,
    dt: f64,
    seed: u64,
) -> Result<TrajectoryRecord> {
    let two = channel.couplings().len() == 2;
    let mut rec = TrajectoryRecord {
        times: Vec::new(),
        states: Vec::new(),
        photocurrent: Vec::new(),
        photocurrent_minus: two.then(Vec::new),
        wiener_seed: seed,
        min_eigenvalue: f64::INFINITY,
    };
    run_trajectory(channel, initial, t_final, dt, seed, |v| {
        rec.times.push(v.time);
        rec.states.push(*v.state);
        rec.min_eigenvalue = rec.min_eigenvalue.min(v.state.min_eigenvalue());
        if let Some((currents, _)) = v.currents {
            rec.photocurrent.push(currents[0]);
            if let Some(minus) = rec.photocurrent_minus.as_mut() {
                minus.push(currents[1]);
            }
        }
    })?;
    Ok(rec)
}

/// Pooled statistics of the scaled photocurrent z = I·√dt over all outputs,
/// steps and trajectories.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PhotocurrentStats {
    pub samples: u64,
    pub mean: f64,
    pub std: f64,
    /// Mean of the noiseless signal part, scaled the same way.
    pub mean_signal: f64,
    /// Pearson correlation of z with each Bloch component at the start of
    /// the interval (0 for a component that never varies).
    pub corr_bloch: [f64; 3],
}

impl PhotocurrentStats {
    pub fn std_err(&self) -> f64 {
        self.std / (self.samples as f64).sqrt()
    }

    /// |mean| < k·SE
    pub fn zero_mean(&self, k: f64) -> bool {
        self.mean.abs() < k * self.std_err()
    }

    /// |mean − mean_signal| < k·SE
    pub fn tracks_signal(&self, k: f64) -> bool {
        (self.mean - self.mean_signal).abs() < k * self.std_err()
    }

    /// |corr| < k/√n for every Bloch component
    pub fn uncorrelated(&self, k: f64) -> bool {
        let limit = k / (self.samples as f64).sqrt();
        self.corr_bloch.iter().all(|c| c.abs() < limit)
    }
}

/// Ensemble mean Bloch trajectory with standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleStats {
    pub times: Vec<f64>,
    pub mean: Vec<BlochVector>,
    /// Standard error of each mean component (0 for a single trajectory).
    pub std_err: Vec<[f64; 3]>,
    pub n_traj: usize,
    pub photocurrent: PhotocurrentStats,
    pub min_eigenvalue: f64,
}

#[derive(Debug, Clone)]
struct Accumulator {
    times: Vec<f64>,
    sum: Vec<[f64; 3]>,
    sum_sq: Vec<[f64; 3]>,
    n: usize,
    z: [f64; 2],
    r: [[f64; 2]; 3],
    zr: [f64; 3],
    signal: f64,
    samples: u64,
    min_eig: f64,
}

impl Accumulator {
    fn new() -> Self {
        Self {
            times: Vec::new(),
            sum: Vec::new(),
            sum_sq: Vec::new(),
            n: 0,
            z: [0.0; 2],
            r: [[0.0; 2]; 3],
            zr: [0.0; 3],
            signal: 0.0,
            samples: 0,
            min_eig: f64::INFINITY,
        }
    }

    fn merge(&mut self, o: &Accumulator) {
        if self.sum.is_empty() {
            self.times = o.times.clone();
            self.sum = vec![[0.0; 3]; o.sum.len()];
            self.sum_sq = vec![[0.0; 3]; o.sum.len()];
        }
        for (k, (a, b)) in o.sum.iter().zip(&o.sum_sq).enumerate() {
            for c in 0..3 {
                self.sum[k][c] += a[c];
                self.sum_sq[k][c] += b[c];
            }
        }
        self.n += o.n;
        for i in 0..2 {
            self.z[i] += o.z[i];
        }
        for c in 0..3 {
            self.r[c][0] += o.r[c][0];
            self.r[c][1] += o.r[c][1];
            self.zr[c] += o.zr[c];
        }
        self.signal += o.signal;
        self.samples += o.samples;
        self.min_eig = self.min_eig.min(o.min_eig);
    }
}

fn accumulate_chunk(
    channel: &FeedbackChannel,
    initial: &DensityMatrix,
    t_final: f64,
    dt: f64,
    seeds: std::ops::Range<u64>,
    sample_every: usize,
) -> Result<Accumulator> {
    let steps = EvolutionSpec::new(*channel, *initial, t_final, dt)?.steps().max(1);
    let sqrt_dt = (t_final / steps as f64).sqrt();
    let mut acc = Accumulator::new();
    for seed in seeds {
        let first = acc.n == 0;
        let mut slot = 0;
        run_trajectory(channel, initial, t_final, dt, seed, |v| {
            let bloch = v.state.to_bloch().as_array();
            if let Some((currents, signals)) = v.currents {
                for (i, s) in currents.iter().zip(signals) {
                    let z = i * sqrt_dt;
                    acc.z[0] += z;
                    acc.z[1] += z * z;
                    for c in 0..3 {
                        acc.r[c][0] += bloch[c];
                        acc.r[c][1] += bloch[c] * bloch[c];
                        acc.zr[c] += z * bloch[c];
                    }
                    acc.signal += s * sqrt_dt;
                    acc.samples += 1;
                }
            }
            acc.min_eig = acc.min_eig.min(v.state.min_eigenvalue());
            if v.step % sample_every == 0 || v.currents.is_none() {
                let r = bloch;
                if first {
                    acc.times.push(v.time);
                    acc.sum.push([0.0; 3]);
                    acc.sum_sq.push([0.0; 3]);
                }
                for c in 0..3 {
                    acc.sum[slot][c] += r[c];
                    acc.sum_sq[slot][c] += r[c] * r[c];
                }
                slot += 1;
            }
        })?;
        acc.n += 1;
    }
    Ok(acc)
}

/// Ensemble statistics sampled at every step. See [`ensemble_stats_sampled`].
pub fn ensemble_stats(
    channel: &FeedbackChannel,
    initial: &DensityMatrix,
    t_final: f64,
    dt: f64,
    n_traj: usize,
    base_seed: u64,
) -> Result<EnsembleStats> {
    ensemble_stats_sampled(channel, initial, t_final, dt, n_traj, base_seed, 1)
}

/// Run `n_traj` trajectories seeded `base_seed + index` and aggregate their
/// Bloch vectors every `sample_every` steps (the final time is always kept).
///
/// Trajectories run in parallel; partial sums are formed over fixed chunks and
/// combined in index order, so results are reproducible bit for bit.
pub fn ensemble_stats_sampled(
    channel: &FeedbackChannel,
    initial: &DensityMatrix,
    t_final: f64,
    dt: f64,
    n_traj: usize,
    base_seed: u64,
    sample_every: usize,
) -> Result<EnsembleStats> {
    if n_traj == 0 {
        return Err(Error::InvalidInput("ensemble needs at least one trajectory".into()));
    }
    if sample_every == 0 {
        return Err(Error::InvalidInput("sample_every must be at least 1".into()));
    }
    EvolutionSpec::new(*channel, *initial, t_final, dt)?;

    let chunks: Vec<std::ops::Range<u64>> = (0..n_traj)
        .step_by(CHUNK)
        .map(|start| {
            let end = (start + CHUNK).min(n_traj);
            base_seed.wrapping_add(start as u64)..base_seed.wrapping_add(end as u64)
        })
        .collect();
    let partials: Vec<Accumulator> = chunks
        .into_par_iter()
        .map(|seeds| accumulate_chunk(channel, initial, t_final, dt, seeds, sample_every))
        .collect::<Result<_>>()?;

    let mut total = Accumulator::new();
    for p in &partials {
        total.merge(p);
    }

    let n = total.n as f64;
    let mut mean = Vec::with_capacity(total.sum.len());
    let mut std_err = Vec::with_capacity(total.sum.len());
    for (s, sq) in total.sum.iter().zip(&total.sum_sq) {
        let m = [s[0] / n, s[1] / n, s[2] / n];
        let mut se = [0.0; 3];
        if total.n > 1 {
            for c in 0..3 {
                let var = ((sq[c] - n * m[c] * m[c]) / (n - 1.0)).max(0.0);
                se[c] = (var / n).sqrt();
            }
        }
        mean.push(BlochVector::from_array(m));
        std_err.push(se);
    }

    let ns = total.samples as f64;
    let photocurrent = if total.samples == 0 {
        PhotocurrentStats::default()
    } else {
        let mz = total.z[0] / ns;
        let vz = (total.z[1] / ns - mz * mz).max(0.0);
        let mut corr = [0.0; 3];
        for c in 0..3 {
            let mr = total.r[c][0] / ns;
            let vr = (total.r[c][1] / ns - mr * mr).max(0.0);
            // a component constant up to rounding has no variance to correlate
            if vz > 0.0 && vr > 1e-12 {
                corr[c] = (total.zr[c] / ns - mz * mr) / (vz * vr).sqrt();
            }
        }
        PhotocurrentStats {
            samples: total.samples,
            mean: mz,
            std: (vz * ns / (ns - 1.0).max(1.0)).sqrt(),
            mean_signal: total.signal / ns,
            corr_bloch: corr,
        }
    };

    Ok(EnsembleStats {
        times: total.times,
        mean,
        std_err,
        n_traj: total.n,
        photocurrent,
        min_eigenvalue: total.min_eig,
    })
}
