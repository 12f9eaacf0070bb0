//! Classical and quantum Fisher information for qubit parameter families.
//!
//! All derivatives of ρ(x) are central finite differences with the per-parameter
//! step reported by [`ParamFamily::step`]. Four independent routes to the QFI
//! are provided and are expected to agree on full-rank states:
//!
//! - [`qfi_pure`]: 4[⟨∂ψ|∂ψ⟩ − |⟨∂ψ|ψ⟩|²] on the dominant eigenvector;
//! - [`qfi_mixed_eigen`]: the spectral sum over eigenvalues and eigenvector derivatives;
//! - [`qfi_2d`]: Tr[(∂ρ)²] + Tr[(ρ∂ρ)²]/det ρ;
//! - [`qfi_matrix_bloch`]: ∂ᵢr·∂ⱼr + (r·∂ᵢr)(r·∂ⱼr)/(1 − |r|²).
//!
//! The spectral form uses |⟨k|∂k'⟩|², and the SLD is assembled from
//! |ψm⟩⟨ψn| outer products; both are checked against the 2×2 formula and the
//! SLD defining equation in the tests.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::qubit::{braket, canonical_phase, eig_hermitian, BlochVector, ComplexMat2, DensityMatrix, Ket, Povm};
use crate::C64;

/// Purity above which a state is treated as pure.
pub const PURITY_TOL: f64 = 1e-10;
/// Determinant below which the 2×2 formula defers to the pure-state route.
pub const DET_TOL: f64 = 1e-12;
const PROB_TOL: f64 = 1e-14;

/// A differentiable family x ↦ ρ(x) evaluated around a fixed point.
pub trait ParamFamily: Sync {
    fn names(&self) -> &[String];

    /// Point at which derivatives are taken.
    fn point(&self) -> &[f64];

    fn state_at(&self, x: &[f64]) -> Result<DensityMatrix>;

    /// Finite-difference step for parameter `i`.
    fn step(&self, i: usize) -> f64 {
        1e-5 * self.point()[i].abs().max(1.0)
    }

    fn dim(&self) -> usize {
        self.point().len()
    }

    fn index_of(&self, name: &str) -> Option<usize> {
        self.names().iter().position(|n| n == name)
    }

    fn state(&self) -> Result<DensityMatrix> {
        self.state_at(self.point())
    }
}

/// [`ParamFamily`] backed by a closure.
pub struct FnFamily<F> {
    names: Vec<String>,
    point: Vec<f64>,
    steps: Option<Vec<f64>>,
    f: F,
}

impl<F> FnFamily<F>
where
    F: Fn(&[f64]) -> Result<DensityMatrix> + Sync,
{
    pub fn new<S: Into<String>>(names: impl IntoIterator<Item = S>, point: Vec<f64>, f: F) -> Result<Self> {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if names.len() != point.len() || names.is_empty() {
            return Err(Error::InvalidInput(format!(
                "{} parameter names for a {}-dimensional point",
                names.len(),
                point.len()
            )));
        }
        Ok(Self {
            names,
            point,
            steps: None,
            f,
        })
    }

    pub fn with_steps(mut self, steps: Vec<f64>) -> Result<Self> {
        if steps.len() != self.point.len() || steps.iter().any(|h| !(*h > 0.0)) {
            return Err(Error::InvalidInput("need one positive step per parameter".into()));
        }
        self.steps = Some(steps);
        Ok(self)
    }

    /// Move the evaluation point.
    pub fn at(mut self, point: Vec<f64>) -> Result<Self> {
        if point.len() != self.names.len() {
            return Err(Error::InvalidInput("point dimension mismatch".into()));
        }
        self.point = point;
        Ok(self)
    }
}

impl<F> ParamFamily for FnFamily<F>
where
    F: Fn(&[f64]) -> Result<DensityMatrix> + Sync,
{
    fn names(&self) -> &[String] {
        &self.names
    }

    fn point(&self) -> &[f64] {
        &self.point
    }

    fn state_at(&self, x: &[f64]) -> Result<DensityMatrix> {
        (self.f)(x)
    }

    fn step(&self, i: usize) -> f64 {
        match &self.steps {
            Some(s) => s[i],
            None => 1e-5 * self.point[i].abs().max(1.0),
        }
    }
}

fn check_param<P: ParamFamily + ?Sized>(family: &P, i: usize) -> Result<()> {
    if i >= family.dim() {
        return Err(Error::InvalidInput(format!(
            "parameter index {i} out of range for a {}-parameter family",
            family.dim()
        )));
    }
    Ok(())
}

fn shifted<P: ParamFamily + ?Sized>(family: &P, i: usize, sign: f64) -> Result<DensityMatrix> {
    let mut x = family.point().to_vec();
    x[i] += sign * family.step(i);
    family.state_at(&x)
}

/// ρ(x) and the central difference ∂ᵢρ.
pub fn derivative<P: ParamFamily + ?Sized>(family: &P, i: usize) -> Result<(DensityMatrix, ComplexMat2)> {
    check_param(family, i)?;
    let rho = family.state()?;
    let plus = shifted(family, i, 1.0)?;
    let minus = shifted(family, i, -1.0)?;
    let h = family.step(i);
    let d = (*plus.matrix() - *minus.matrix()).scale_re(0.5 / h);
    Ok((rho, d))
}

fn bloch_derivative<P: ParamFamily + ?Sized>(family: &P, i: usize) -> Result<[f64; 3]> {
    check_param(family, i)?;
    let plus = shifted(family, i, 1.0)?.to_bloch().as_array();
    let minus = shifted(family, i, -1.0)?.to_bloch().as_array();
    let h = family.step(i);
    Ok([0, 1, 2].map(|c| (plus[c] - minus[c]) / (2.0 * h)))
}

/// Multiply `v` by the phase that makes ⟨reference|v⟩ real and non-negative.
fn align_to(v: Ket, reference: &Ket) -> Ket {
    let overlap = braket(reference, &v);
    if overlap.norm() == 0.0 {
        return v;
    }
    let phase = overlap.conj() / overlap.norm();
    [v[0] * phase, v[1] * phase]
}

/// Classical Fisher information f = Σ_k p_k (∂ ln p_k)² = Σ_k (∂p_k)²/p_k.
///
/// Outcomes with p_k and ∂p_k both below 1e-14 contribute nothing; a vanishing
/// probability with non-vanishing derivative is reported as divergent.
pub fn classical_fi(probabilities: &[f64], derivatives: &[f64]) -> Result<f64> {
    if probabilities.len() != derivatives.len() || probabilities.is_empty() {
        return Err(Error::InvalidInput(
            "probabilities and derivatives must be non-empty and of equal length".into(),
        ));
    }
    if probabilities.iter().any(|p| !(*p >= -PROB_TOL)) {
        return Err(Error::InvalidInput("probabilities must be non-negative".into()));
    }
    let total: f64 = probabilities.iter().sum();
    if (total - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidInput(format!("probabilities sum to {total}, not 1")));
    }
    let mut f = 0.0;
    for (k, (&p, &dp)) in probabilities.iter().zip(derivatives).enumerate() {
        if p < PROB_TOL {
            if dp.abs() < PROB_TOL {
                continue;
            }
            return Err(Error::Divergent(format!(
                "outcome {k} has zero probability but derivative {dp:e}"
            )));
        }
        f += dp * dp / p;
    }
    Ok(f)
}

/// Classical Fisher information of `povm` on the family, derivatives of
/// outcome probabilities by central differences.
pub fn classical_fi_povm<P: ParamFamily + ?Sized>(family: &P, i: usize, povm: &Povm) -> Result<f64> {
    check_param(family, i)?;
    let p = povm.probabilities(&family.state()?);
    let plus = povm.probabilities(&shifted(family, i, 1.0)?);
    let minus = povm.probabilities(&shifted(family, i, -1.0)?);
    let h = family.step(i);
    let dp: Vec<f64> = plus.iter().zip(&minus).map(|(a, b)| (a - b) / (2.0 * h)).collect();
    classical_fi(&p, &dp)
}

fn dominant_vector(rho: &DensityMatrix) -> Ket {
    eig_hermitian(rho.matrix())
        .expect("density matrices are Hermitian")
        .vectors[0]
}

/// QFI of a pure-state family, 4[⟨∂ψ|∂ψ⟩ − |⟨∂ψ|ψ⟩|²], with |ψ⟩ the dominant
/// eigenvector of ρ(x). Neighbouring eigenvectors are phase-aligned to the
/// central one before differencing.
pub fn qfi_pure<P: ParamFamily + ?Sized>(family: &P, i: usize) -> Result<f64> {
    check_param(family, i)?;
    let rho = family.state()?;
    let purity = rho.purity();
    if purity < 1.0 - PURITY_TOL {
        return Err(Error::InvalidInput(format!(
            "state is not pure (purity {purity})"
        )));
    }
    let psi = canonical_phase(dominant_vector(&rho));
    let plus = align_to(dominant_vector(&shifted(family, i, 1.0)?), &psi);
    let minus = align_to(dominant_vector(&shifted(family, i, -1.0)?), &psi);
    let h = family.step(i);
    let dpsi: Ket = [
        (plus[0] - minus[0]) / (2.0 * h),
        (plus[1] - minus[1]) / (2.0 * h),
    ];
    let f = 4.0 * (braket(&dpsi, &dpsi).re - braket(&dpsi, &psi).norm_sqr());
    Ok(f.max(0.0))
}

/// Spectral QFI
/// Σ_{λk>0} (∂λk)²/λk + Σ_{k≠k', λk+λk'>0} 2(λk − λk')²/(λk + λk') |⟨k|∂k'⟩|².
///
/// Pure states are routed to [`qfi_pure`].
pub fn qfi_mixed_eigen<P: ParamFamily + ?Sized>(family: &P, i: usize) -> Result<f64> {
    check_param(family, i)?;
    let rho = family.state()?;
    if rho.purity() > 1.0 - PURITY_TOL {
        return qfi_pure(family, i);
    }
    let e0 = eig_hermitian(rho.matrix())?;
    let ep = eig_hermitian(shifted(family, i, 1.0)?.matrix())?;
    let em = eig_hermitian(shifted(family, i, -1.0)?.matrix())?;
    let h = family.step(i);

    let mut dvec = [[C64::new(0.0, 0.0); 2]; 2];
    let mut dval = [0.0; 2];
    for k in 0..2 {
        dval[k] = (ep.values[k] - em.values[k]) / (2.0 * h);
        let p = align_to(ep.vectors[k], &e0.vectors[k]);
        let m = align_to(em.vectors[k], &e0.vectors[k]);
        dvec[k] = [(p[0] - m[0]) / (2.0 * h), (p[1] - m[1]) / (2.0 * h)];
    }

    let lam = e0.values;
    let mut f = 0.0;
    for k in 0..2 {
        if lam[k] > 0.0 {
            f += dval[k] * dval[k] / lam[k];
        }
    }
    for k in 0..2 {
        for kp in 0..2 {
            let s = lam[k] + lam[kp];
            if k == kp || s <= 0.0 {
                continue;
            }
            let diff = lam[k] - lam[kp];
            f += 2.0 * diff * diff / s * braket(&e0.vectors[k], &dvec[kp]).norm_sqr();
        }
    }
    Ok(f)
}

/// Qubit QFI Tr[(∂ρ)²] + Tr[(ρ∂ρ)²]/det ρ. Rank-deficient states defer to
/// [`qfi_pure`].
pub fn qfi_2d<P: ParamFamily + ?Sized>(family: &P, i: usize) -> Result<f64> {
    let (rho, d) = derivative(family, i)?;
    let det = rho.matrix().det().re;
    if det <= DET_TOL {
        if rho.purity() > 1.0 - PURITY_TOL {
            return qfi_pure(family, i);
        }
        return Err(Error::InvalidState(format!(
            "singular state: det ρ = {det:e} but purity {}",
            rho.purity()
        )));
    }
    let rd = *rho.matrix() * d;
    Ok((d * d).trace().re + (rd * rd).trace().re / det)
}

/// Symmetric logarithmic derivative assembled in the eigenbasis of ρ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sld {
    pub operator: ComplexMat2,
    /// Matrix elements skipped because p_m + p_n ≤ 1e-12.
    pub dropped: usize,
}

/// L = Σ_{m,n} 2⟨ψm|∂ρ|ψn⟩/(p_m + p_n) |ψm⟩⟨ψn|.
pub fn sld<P: ParamFamily + ?Sized>(family: &P, i: usize) -> Result<Sld> {
    let (rho, d) = derivative(family, i)?;
    let e = rho.eigen();
    let mut operator = ComplexMat2::zero();
    let mut dropped = 0;
    for m in 0..2 {
        for n in 0..2 {
            let s = e.values[m] + e.values[n];
            if s <= DET_TOL {
                dropped += 1;
                continue;
            }
            let elem = d.sandwich(&e.vectors[m], &e.vectors[n]) * (2.0 / s);
            operator += ComplexMat2::outer(&e.vectors[m], &e.vectors[n]).scale(elem);
        }
    }
    Ok(Sld { operator, dropped })
}

/// ‖∂ρ − (Lρ + ρL)/2‖ (max entry).
pub fn sld_residual(rho: &DensityMatrix, drho: &ComplexMat2, sld: &ComplexMat2) -> f64 {
    let sym = sld.anticommutator(rho.matrix()).scale_re(0.5);
    drho.max_abs_diff(&sym)
}

/// Symmetric QFI matrix with parameter names.
#[derive(Debug, Clone, PartialEq)]
pub struct QfiMatrix {
    pub names: Vec<String>,
    pub matrix: DMatrix<f64>,
}

impl QfiMatrix {
    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix[(i, j)]
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (&self.matrix - self.matrix.transpose()).amax() <= tol
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.matrix
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_off_diagonal(&self) -> f64 {
        let n = self.dim();
        let mut m: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    m = m.max(self.matrix[(i, j)].abs());
                }
            }
        }
        m
    }
}

/// Multi-parameter QFI matrix from the Bloch vector:
/// F_ij = ∂ᵢr·∂ⱼr + (r·∂ᵢr)(r·∂ⱼr)/(1 − |r|²).
///
/// Requires an interior (mixed) state, |r| < 1 − 1e-8.
pub fn qfi_matrix_bloch<P: ParamFamily + ?Sized>(family: &P, params: &[usize]) -> Result<QfiMatrix> {
    if params.is_empty() {
        return Err(Error::InvalidInput("need at least one parameter".into()));
    }
    let r = family.state()?.to_bloch();
    let norm = r.norm();
    if norm >= 1.0 - 1e-8 {
        return Err(Error::InvalidState(format!(
            "Bloch vector length {norm} is on the pure-state boundary"
        )));
    }
    let dr: Vec<BlochVector> = params
        .iter()
        .map(|&i| bloch_derivative(family, i).map(BlochVector::from_array))
        .collect::<Result<_>>()?;
    let denom = 1.0 - norm * norm;
    let m = params.len();
    let matrix = DMatrix::from_fn(m, m, |a, b| {
        dr[a].dot(&dr[b]) + r.dot(&dr[a]) * r.dot(&dr[b]) / denom
    });
    Ok(QfiMatrix {
        names: params.iter().map(|&i| family.names()[i].clone()).collect(),
        matrix,
    })
}

/// Scalar Cramér–Rao bound 1/(N F).
pub fn crb(fisher: f64, probes: u64) -> Result<f64> {
    if probes == 0 {
        return Err(Error::InvalidInput("probe count must be at least 1".into()));
    }
    if fisher.is_nan() || fisher < 0.0 {
        return Err(Error::InvalidInput(format!("Fisher information {fisher} is not non-negative")));
    }
    if fisher == 0.0 {
        return Err(Error::Divergent("zero Fisher information: the variance bound is infinite".into()));
    }
    Ok(1.0 / (probes as f64 * fisher))
}

/// Matrix Cramér–Rao bound F⁻¹/N. A singular F reports the parameters that
/// carry no information instead of inverting.
pub fn crb_matrix(fisher: &QfiMatrix, probes: u64) -> Result<DMatrix<f64>> {
    if probes == 0 {
        return Err(Error::InvalidInput("probe count must be at least 1".into()));
    }
    let m = fisher.matrix.clone();
    let eig = m.clone().symmetric_eigen();
    let scale = eig.eigenvalues.amax().max(f64::MIN_POSITIVE);
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if min <= 1e-12 * scale {
        let mut divergent: Vec<String> = (0..fisher.dim())
            .filter(|&i| m[(i, i)] <= 1e-12 * scale)
            .map(|i| fisher.names[i].clone())
            .collect();
        if divergent.is_empty() {
            divergent = fisher.names.clone();
        }
        return Err(Error::SingularFisher { divergent });
    }
    let inv = eig.eigenvectors.clone()
        * DMatrix::from_diagonal(&eig.eigenvalues.map(|v| 1.0 / v))
        * eig.eigenvectors.transpose();
    let inv = (&inv + inv.transpose()) * 0.5;
    Ok(inv / probes as f64)
}
