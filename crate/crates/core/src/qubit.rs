//! 2×2 complex linear algebra and qubit state representations.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use crate::error::{Error, Result};
use crate::C64;

/// Default tolerance for density-matrix invariants (trace, Hermiticity, positivity).
pub const STATE_TOL: f64 = 1e-12;
/// Tolerance on Hermiticity accepted by [`eig_hermitian`].
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Below this eigenvalue gap the spectrum is treated as degenerate.
pub const DEGENERACY_GAP: f64 = 1e-12;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

/// Column vector in C².
pub type Ket = [C64; 2];

/// Inner product ⟨a|b⟩.
pub fn braket(a: &Ket, b: &Ket) -> C64 {
    a[0].conj() * b[0] + a[1].conj() * b[1]
}

pub fn ket_norm(a: &Ket) -> f64 {
    (a[0].norm_sqr() + a[1].norm_sqr()).sqrt()
}

/// Fix the global phase so that the largest-magnitude component is real and positive.
pub fn canonical_phase(v: Ket) -> Ket {
    let pivot = if v[0].norm() >= v[1].norm() { v[0] } else { v[1] };
    if pivot.norm() == 0.0 {
        return v;
    }
    let phase = pivot.conj() / pivot.norm();
    [v[0] * phase, v[1] * phase]
}

/// A 2×2 complex matrix, row-major.
#[derive(Clone, Copy, PartialEq)]
pub struct ComplexMat2 {
    pub a00: C64,
    pub a01: C64,
    pub a10: C64,
    pub a11: C64,
}

impl fmt::Debug for ComplexMat2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[[{}, {}], [{}, {}]]",
            self.a00, self.a01, self.a10, self.a11
        )
    }
}

impl ComplexMat2 {
    pub const fn new(a00: C64, a01: C64, a10: C64, a11: C64) -> Self {
        Self { a00, a01, a10, a11 }
    }

    pub const fn zero() -> Self {
        Self::new(ZERO, ZERO, ZERO, ZERO)
    }

    pub const fn identity() -> Self {
        Self::new(ONE, ZERO, ZERO, ONE)
    }

    pub const fn pauli_x() -> Self {
        Self::new(ZERO, ONE, ONE, ZERO)
    }

    pub const fn pauli_y() -> Self {
        Self::new(ZERO, C64::new(0.0, -1.0), I, ZERO)
    }

    pub const fn pauli_z() -> Self {
        Self::new(ONE, ZERO, ZERO, C64::new(-1.0, 0.0))
    }

    /// Lowering operator σ− = |0⟩⟨1|, so that σ−|1⟩ = |0⟩.
    pub const fn sigma_minus() -> Self {
        Self::new(ZERO, ONE, ZERO, ZERO)
    }

    /// Raising operator σ+ = |1⟩⟨0|.
    pub const fn sigma_plus() -> Self {
        Self::new(ZERO, ZERO, ONE, ZERO)
    }

    pub fn diag(d0: f64, d1: f64) -> Self {
        Self::new(d0.into(), ZERO, ZERO, d1.into())
    }

    /// |a⟩⟨b|
    pub fn outer(a: &Ket, b: &Ket) -> Self {
        Self::new(
            a[0] * b[0].conj(),
            a[0] * b[1].conj(),
            a[1] * b[0].conj(),
            a[1] * b[1].conj(),
        )
    }

    pub fn adjoint(&self) -> Self {
        Self::new(
            self.a00.conj(),
            self.a10.conj(),
            self.a01.conj(),
            self.a11.conj(),
        )
    }

    pub fn trace(&self) -> C64 {
        self.a00 + self.a11
    }

    pub fn det(&self) -> C64 {
        self.a00 * self.a11 - self.a01 * self.a10
    }

    pub fn scale(&self, s: C64) -> Self {
        Self::new(self.a00 * s, self.a01 * s, self.a10 * s, self.a11 * s)
    }

    pub fn scale_re(&self, s: f64) -> Self {
        Self::new(self.a00 * s, self.a01 * s, self.a10 * s, self.a11 * s)
    }

    pub fn commutator(&self, other: &Self) -> Self {
        *self * *other - *other * *self
    }

    pub fn anticommutator(&self, other: &Self) -> Self {
        *self * *other + *other * *self
    }

    pub fn apply(&self, v: &Ket) -> Ket {
        [
            self.a00 * v[0] + self.a01 * v[1],
            self.a10 * v[0] + self.a11 * v[1],
        ]
    }

    /// ⟨a|M|b⟩
    pub fn sandwich(&self, a: &Ket, b: &Ket) -> C64 {
        braket(a, &self.apply(b))
    }

    pub fn frobenius_norm(&self) -> f64 {
        (self.a00.norm_sqr() + self.a01.norm_sqr() + self.a10.norm_sqr() + self.a11.norm_sqr())
            .sqrt()
    }

    /// Largest entrywise deviation from Hermiticity.
    pub fn hermiticity_error(&self) -> f64 {
        let off = (self.a01 - self.a10.conj()).norm();
        off.max(self.a00.im.abs()).max(self.a11.im.abs())
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_error() <= tol
    }

    /// (M + M†)/2
    pub fn hermitian_part(&self) -> Self {
        (*self + self.adjoint()).scale_re(0.5)
    }

    pub fn is_finite(&self) -> bool {
        [self.a00, self.a01, self.a10, self.a11]
            .iter()
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let d = *self - *other;
        d.a00
            .norm()
            .max(d.a01.norm())
            .max(d.a10.norm())
            .max(d.a11.norm())
    }
}

impl Add for ComplexMat2 {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(
            self.a00 + o.a00,
            self.a01 + o.a01,
            self.a10 + o.a10,
            self.a11 + o.a11,
        )
    }
}

impl AddAssign for ComplexMat2 {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl Sub for ComplexMat2 {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(
            self.a00 - o.a00,
            self.a01 - o.a01,
            self.a10 - o.a10,
            self.a11 - o.a11,
        )
    }
}

impl Neg for ComplexMat2 {
    type Output = Self;
    fn neg(self) -> Self {
        self.scale_re(-1.0)
    }
}

impl Mul for ComplexMat2 {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Self::new(
            self.a00 * o.a00 + self.a01 * o.a10,
            self.a00 * o.a01 + self.a01 * o.a11,
            self.a10 * o.a00 + self.a11 * o.a10,
            self.a10 * o.a01 + self.a11 * o.a11,
        )
    }
}

impl Mul<C64> for ComplexMat2 {
    type Output = Self;
    fn mul(self, s: C64) -> Self {
        self.scale(s)
    }
}

impl Mul<f64> for ComplexMat2 {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        self.scale_re(s)
    }
}

/// Spectral decomposition of a Hermitian 2×2 matrix.
#[derive(Debug, Clone, Copy)]
pub struct HermitianEigen {
    /// Sorted descending.
    pub values: [f64; 2],
    /// Orthonormal; `vectors[i]` belongs to `values[i]`.
    pub vectors: [Ket; 2],
}

impl HermitianEigen {
    /// Σ λ_i |v_i⟩⟨v_i|
    pub fn reconstruct(&self) -> ComplexMat2 {
        ComplexMat2::outer(&self.vectors[0], &self.vectors[0]).scale_re(self.values[0])
            + ComplexMat2::outer(&self.vectors[1], &self.vectors[1]).scale_re(self.values[1])
    }
}

/// Eigen-decomposition of a Hermitian 2×2 matrix in closed form.
///
/// Eigenvectors carry the canonical phase of [`canonical_phase`]. In the
/// degenerate case (gap below [`DEGENERACY_GAP`]) the computational basis is
/// returned.
pub fn eig_hermitian(m: &ComplexMat2) -> Result<HermitianEigen> {
    let deviation = m.hermiticity_error();
    if !(deviation <= HERMITIAN_TOL) {
        return Err(Error::NotHermitian { deviation });
    }
    let a = m.a00.re;
    let d = m.a11.re;
    let b = (m.a01 + m.a10.conj()) * 0.5;

    let mean = 0.5 * (a + d);
    let half_gap = (0.25 * (a - d) * (a - d) + b.norm_sqr()).sqrt();
    let values = [mean + half_gap, mean - half_gap];

    if 2.0 * half_gap < DEGENERACY_GAP {
        return Ok(HermitianEigen {
            values,
            vectors: [[ONE, ZERO], [ZERO, ONE]],
        });
    }

    let l0 = values[0];
    // Two algebraically equivalent null vectors of (M − λ0); keep the better conditioned one.
    let cand_a: Ket = [b, C64::from(l0 - a)];
    let cand_b: Ket = [C64::from(l0 - d), b.conj()];
    let v = if ket_norm(&cand_a) >= ket_norm(&cand_b) {
        cand_a
    } else {
        cand_b
    };
    let n = ket_norm(&v);
    let v0 = canonical_phase([v[0] / n, v[1] / n]);
    let v1 = canonical_phase([-v0[1].conj(), v0[0].conj()]);
    Ok(HermitianEigen {
        values,
        vectors: [v0, v1],
    })
}

/// Real Bloch vector r with ρ = (I + r·σ)/2.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BlochVector {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl BlochVector {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn dot(&self, o: &Self) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    /// r·σ
    pub fn dot_sigma(&self) -> ComplexMat2 {
        ComplexMat2::pauli_x().scale_re(self.x)
            + ComplexMat2::pauli_y().scale_re(self.y)
            + ComplexMat2::pauli_z().scale_re(self.z)
    }
}

/// A validated single-qubit density matrix.
///
/// Construction checks unit trace, Hermiticity and positive semidefiniteness.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMatrix(ComplexMat2);

impl DensityMatrix {
    /// Validate at the default tolerance [`STATE_TOL`].
    pub fn new(m: ComplexMat2) -> Result<Self> {
        Self::with_tolerance(m, STATE_TOL)
    }

    pub fn with_tolerance(m: ComplexMat2, tol: f64) -> Result<Self> {
        check_state(&m, tol)?;
        Ok(Self(m))
    }

    /// Wrap without validation. Used for conditioned states whose positivity
    /// is tracked separately rather than enforced.
    pub(crate) fn from_matrix_unchecked(m: ComplexMat2) -> Self {
        Self(m)
    }

    pub fn pure(psi: &Ket) -> Result<Self> {
        let n = ket_norm(psi);
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::InvalidInput("state vector has zero norm".into()));
        }
        let v = [psi[0] / n, psi[1] / n];
        Ok(Self(ComplexMat2::outer(&v, &v)))
    }

    pub fn maximally_mixed() -> Self {
        Self(ComplexMat2::identity().scale_re(0.5))
    }

    /// |+⟩⟨+| with |+⟩ = (|0⟩ + |1⟩)/√2.
    pub fn plus() -> Self {
        let h = C64::from(0.5);
        Self(ComplexMat2::new(h, h, h, h))
    }

    pub fn matrix(&self) -> &ComplexMat2 {
        &self.0
    }

    pub fn into_matrix(self) -> ComplexMat2 {
        self.0
    }

    pub fn coherence(&self) -> C64 {
        self.0.a01
    }

    pub fn purity(&self) -> f64 {
        (self.0 * self.0).trace().re
    }

    /// Eigen-decomposition with eigenvalues clipped into [0, 1].
    pub fn eigen(&self) -> HermitianEigen {
        let mut e = eig_hermitian(&self.0).expect("density matrix is Hermitian by construction");
        for v in &mut e.values {
            *v = v.clamp(0.0, 1.0);
        }
        e
    }

    /// Smallest eigenvalue without clipping.
    pub fn min_eigenvalue(&self) -> f64 {
        raw_min_eigenvalue(&self.0)
    }

    pub fn expect(&self, op: &ComplexMat2) -> C64 {
        (*op * self.0).trace()
    }

    pub fn to_bloch(&self) -> BlochVector {
        BlochVector::new(
            2.0 * self.0.a01.re,
            -2.0 * self.0.a01.im,
            self.0.a00.re - self.0.a11.re,
        )
    }

    pub fn from_bloch(r: &BlochVector) -> Result<Self> {
        let norm = r.norm();
        if !(norm <= 1.0 + STATE_TOL) {
            return Err(Error::OutsideBlochBall { norm });
        }
        Ok(Self((ComplexMat2::identity() + r.dot_sigma()).scale_re(0.5)))
    }
}

fn raw_min_eigenvalue(m: &ComplexMat2) -> f64 {
    let a = m.a00.re;
    let d = m.a11.re;
    let b = (m.a01 + m.a10.conj()) * 0.5;
    0.5 * (a + d) - (0.25 * (a - d) * (a - d) + b.norm_sqr()).sqrt()
}

/// Check the density-matrix invariants of `m` at tolerance `tol`.
pub fn check_state(m: &ComplexMat2, tol: f64) -> Result<()> {
    if !m.is_finite() {
        return Err(Error::InvalidState("non-finite entries".into()));
    }
    let tr = m.trace();
    if (tr - ONE).norm() > tol {
        return Err(Error::InvalidState(format!("trace {tr} differs from 1")));
    }
    let herm = m.hermiticity_error();
    if herm > tol {
        return Err(Error::InvalidState(format!(
            "not Hermitian (deviation {herm:e})"
        )));
    }
    let min_eig = raw_min_eigenvalue(m);
    if min_eig < -tol {
        return Err(Error::InvalidState(format!(
            "negative eigenvalue {min_eig:e}"
        )));
    }
    Ok(())
}

/// Positive operator-valued measure on a qubit.
#[derive(Debug, Clone, PartialEq)]
pub struct Povm {
    effects: Vec<ComplexMat2>,
}

impl Povm {
    pub const COMPLETENESS_TOL: f64 = 1e-10;

    pub fn new(effects: Vec<ComplexMat2>) -> Result<Self> {
        if effects.is_empty() {
            return Err(Error::InvalidInput("POVM needs at least one effect".into()));
        }
        let mut total = ComplexMat2::zero();
        for (k, e) in effects.iter().enumerate() {
            let eig = eig_hermitian(e).map_err(|_| {
                Error::InvalidInput(format!("POVM effect {k} is not Hermitian"))
            })?;
            if eig.values[1] < -Self::COMPLETENESS_TOL {
                return Err(Error::InvalidInput(format!(
                    "POVM effect {k} has negative eigenvalue {}",
                    eig.values[1]
                )));
            }
            total += *e;
        }
        let dev = total.max_abs_diff(&ComplexMat2::identity());
        if dev > Self::COMPLETENESS_TOL {
            return Err(Error::InvalidInput(format!(
                "POVM effects sum to identity only within {dev:e}"
            )));
        }
        Ok(Self { effects })
    }

    /// Two-outcome projective measurement along the unit axis `n`: E± = (I ± n·σ)/2.
    pub fn projective(axis: &BlochVector) -> Result<Self> {
        let norm = axis.norm();
        if !(norm > 0.0) {
            return Err(Error::InvalidInput("measurement axis is zero".into()));
        }
        let n = BlochVector::new(axis.x / norm, axis.y / norm, axis.z / norm);
        let ns = n.dot_sigma();
        Self::new(vec![
            (ComplexMat2::identity() + ns).scale_re(0.5),
            (ComplexMat2::identity() - ns).scale_re(0.5),
        ])
    }

    pub fn effects(&self) -> &[ComplexMat2] {
        &self.effects
    }

    /// Outcome probabilities p_k = tr(E_k ρ).
    pub fn probabilities(&self, rho: &DensityMatrix) -> Vec<f64> {
        self.effects.iter().map(|e| rho.expect(e).re).collect()
    }
}
