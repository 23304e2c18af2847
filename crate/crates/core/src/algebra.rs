//! Qubit linear algebra: 2×2 complex matrices, density matrices, Bloch
//! vectors and the distance measures used as figures of merit.
//!
//! Besides the dense 2×2 form every Hermitian operator has a real
//! coordinate vector `c` in the Pauli basis, `A = ½ Σ_μ c_μ σ_μ` with
//! `σ_0 = 1`, so that `c_μ = Tr{σ_μ A}`. For a density matrix `c_0 = 1` and
//! `(c_1, c_2, c_3)` is the Bloch vector. The Hilbert-Schmidt inner product of
//! two Hermitian operators reads `⟨A, B⟩ = ½ Σ_μ a_μ b_μ` in these coordinates.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use thiserror::Error;

pub type C64 = Complex64;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

/// Numerical slack used when validating states.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Max-abs entrywise deviation from Hermiticity.
    pub hermitian: f64,
    /// Allowed deviation of the trace from one.
    pub trace: f64,
    /// Smallest admissible eigenvalue (a small negative number).
    pub eigen_floor: f64,
    /// Allowed excess of a Bloch vector norm above one.
    pub bloch_norm: f64,
    /// Radicands down to `-radicand` are clamped to zero in the fidelity.
    pub radicand: f64,
}

pub const HERMITIAN_TOL: f64 = 1e-12;
pub const TRACE_TOL: f64 = 1e-12;
pub const EIGEN_FLOOR: f64 = -1e-12;
pub const BLOCH_NORM_TOL: f64 = 1e-12;
pub const RADICAND_TOL: f64 = 1e-12;

impl Tolerances {
    pub const STRICT: Tolerances = Tolerances {
        hermitian: HERMITIAN_TOL,
        trace: TRACE_TOL,
        eigen_floor: EIGEN_FLOOR,
        bloch_norm: BLOCH_NORM_TOL,
        radicand: RADICAND_TOL,
    };

    /// Slack for states produced by long propagations.
    pub const PROPAGATED: Tolerances =
        Tolerances { hermitian: 1e-10, trace: 1e-10, eigen_floor: -1e-10, bloch_norm: 1e-10, radicand: 1e-10 };
}

impl Default for Tolerances {
    fn default() -> Self {
        Self::STRICT
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AlgebraError {
    #[error("matrix has non-finite entries")]
    NonFinite,
    #[error("matrix is not Hermitian (deviation {0:e})")]
    NotHermitian(f64),
    #[error("trace is {0}, expected 1")]
    Trace(f64),
    #[error("matrix is not positive semidefinite (eigenvalue {0:e})")]
    NotPositive(f64),
    #[error("Bloch vector norm {0} exceeds 1")]
    BlochNorm(f64),
    #[error("negative radicand {0:e} in fidelity")]
    Radicand(f64),
}

/// A general 2×2 complex matrix, row-major.
#[derive(Clone, Copy, PartialEq)]
pub struct Mat2(pub [[C64; 2]; 2]);

impl fmt::Debug for Mat2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let m = &self.0;
        write!(f, "[[{}, {}], [{}, {}]]", m[0][0], m[0][1], m[1][0], m[1][1])
    }
}

impl Mat2 {
    pub const ZERO: Mat2 = Mat2([[ZERO, ZERO], [ZERO, ZERO]]);
    pub const IDENTITY: Mat2 = Mat2([[ONE, ZERO], [ZERO, ONE]]);
    pub const SIGMA_X: Mat2 = Mat2([[ZERO, ONE], [ONE, ZERO]]);
    pub const SIGMA_Y: Mat2 = Mat2([[ZERO, C64::new(0.0, -1.0)], [I, ZERO]]);
    pub const SIGMA_Z: Mat2 = Mat2([[ONE, ZERO], [ZERO, C64::new(-1.0, 0.0)]]);
    /// `|0⟩⟨1|`, the relaxation jump operator.
    pub const LOWERING: Mat2 = Mat2([[ZERO, ONE], [ZERO, ZERO]]);

    /// `[1, σ_x, σ_y, σ_z]`.
    pub const PAULI: [Mat2; 4] = [Self::IDENTITY, Self::SIGMA_X, Self::SIGMA_Y, Self::SIGMA_Z];

    pub fn new(a: C64, b: C64, c: C64, d: C64) -> Self {
        Mat2([[a, b], [c, d]])
    }

    pub fn dagger(&self) -> Self {
        let m = &self.0;
        Mat2([[m[0][0].conj(), m[1][0].conj()], [m[0][1].conj(), m[1][1].conj()]])
    }

    pub fn trace(&self) -> C64 {
        self.0[0][0] + self.0[1][1]
    }

    pub fn det(&self) -> C64 {
        self.0[0][0] * self.0[1][1] - self.0[0][1] * self.0[1][0]
    }

    pub fn scale(&self, s: C64) -> Self {
        let m = &self.0;
        Mat2([[m[0][0] * s, m[0][1] * s], [m[1][0] * s, m[1][1] * s]])
    }

    pub fn scale_re(&self, s: f64) -> Self {
        self.scale(C64::new(s, 0.0))
    }

    pub fn commutator(&self, other: &Mat2) -> Mat2 {
        *self * *other - *other * *self
    }

    pub fn anticommutator(&self, other: &Mat2) -> Mat2 {
        *self * *other + *other * *self
    }

    /// `⟨A, B⟩ = Tr{A† B}`.
    pub fn inner(&self, other: &Mat2) -> C64 {
        (self.dagger() * *other).trace()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Entrywise max-abs distance to the adjoint.
    pub fn hermiticity_defect(&self) -> f64 {
        (*self - self.dagger()).max_abs()
    }

    /// Eigenvalues `(λ_-, λ_+)` of the Hermitian part, ascending.
    pub fn hermitian_eigenvalues(&self) -> (f64, f64) {
        let m = &self.0;
        let a = m[0][0].re;
        let d = m[1][1].re;
        let off = 0.5 * (m[0][1] + m[1][0].conj());
        let mean = 0.5 * (a + d);
        let radius = (0.25 * (a - d) * (a - d) + off.norm_sqr()).sqrt();
        (mean - radius, mean + radius)
    }

    /// Pauli coordinates `c_μ = Re Tr{σ_μ A}` of the Hermitian part.
    pub fn pauli_coords(&self) -> PauliCoords {
        let m = &self.0;
        PauliCoords([(m[0][0] + m[1][1]).re, (m[0][1] + m[1][0]).re, (m[1][0] - m[0][1]).im, (m[0][0] - m[1][1]).re])
    }
}

impl Add for Mat2 {
    type Output = Mat2;
    fn add(self, rhs: Mat2) -> Mat2 {
        let (a, b) = (&self.0, &rhs.0);
        Mat2([[a[0][0] + b[0][0], a[0][1] + b[0][1]], [a[1][0] + b[1][0], a[1][1] + b[1][1]]])
    }
}

impl Sub for Mat2 {
    type Output = Mat2;
    fn sub(self, rhs: Mat2) -> Mat2 {
        let (a, b) = (&self.0, &rhs.0);
        Mat2([[a[0][0] - b[0][0], a[0][1] - b[0][1]], [a[1][0] - b[1][0], a[1][1] - b[1][1]]])
    }
}

impl Neg for Mat2 {
    type Output = Mat2;
    fn neg(self) -> Mat2 {
        self.scale_re(-1.0)
    }
}

impl Mul for Mat2 {
    type Output = Mat2;
    fn mul(self, rhs: Mat2) -> Mat2 {
        let (a, b) = (&self.0, &rhs.0);
        Mat2([
            [a[0][0] * b[0][0] + a[0][1] * b[1][0], a[0][0] * b[0][1] + a[0][1] * b[1][1]],
            [a[1][0] * b[0][0] + a[1][1] * b[1][0], a[1][0] * b[0][1] + a[1][1] * b[1][1]],
        ])
    }
}

/// Real Pauli-basis coordinates of a Hermitian operator.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PauliCoords(pub [f64; 4]);

impl PauliCoords {
    pub fn to_matrix(&self) -> Mat2 {
        let [c0, cx, cy, cz] = self.0;
        Mat2::new(
            C64::new(0.5 * (c0 + cz), 0.0),
            C64::new(0.5 * cx, -0.5 * cy),
            C64::new(0.5 * cx, 0.5 * cy),
            C64::new(0.5 * (c0 - cz), 0.0),
        )
    }

    /// Hilbert-Schmidt inner product `Tr{A B}`.
    pub fn inner(&self, other: &PauliCoords) -> f64 {
        0.5 * self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum::<f64>()
    }

    pub fn sub(&self, other: &PauliCoords) -> PauliCoords {
        let mut out = [0.0; 4];
        for (o, (a, b)) in out.iter_mut().zip(self.0.iter().zip(&other.0)) {
            *o = a - b;
        }
        PauliCoords(out)
    }

    pub fn vector(&self) -> [f64; 3] {
        [self.0[1], self.0[2], self.0[3]]
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }
}

/// A point in (or on) the unit Bloch ball.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochVector([f64; 3]);

impl BlochVector {
    pub fn new(r: [f64; 3]) -> Result<Self, AlgebraError> {
        Self::new_with(r, &Tolerances::STRICT)
    }

    pub fn new_with(r: [f64; 3], tol: &Tolerances) -> Result<Self, AlgebraError> {
        if !r.iter().all(|x| x.is_finite()) {
            return Err(AlgebraError::NonFinite);
        }
        let norm = norm3(&r);
        if norm > 1.0 + tol.bloch_norm {
            return Err(AlgebraError::BlochNorm(norm));
        }
        Ok(BlochVector(r))
    }

    pub fn components(&self) -> [f64; 3] {
        self.0
    }

    pub fn norm(&self) -> f64 {
        norm3(&self.0)
    }

    pub fn distance(&self, other: &BlochVector) -> f64 {
        norm3(&[self.0[0] - other.0[0], self.0[1] - other.0[1], self.0[2] - other.0[2]])
    }
}

fn norm3(r: &[f64; 3]) -> f64 {
    (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt()
}

/// A validated qubit state: Hermitian, unit trace, positive semidefinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMatrix(Mat2);

impl DensityMatrix {
    pub fn new(m: Mat2) -> Result<Self, AlgebraError> {
        Self::new_with(m, &Tolerances::STRICT)
    }

    pub fn new_with(m: Mat2, tol: &Tolerances) -> Result<Self, AlgebraError> {
        if !m.is_finite() {
            return Err(AlgebraError::NonFinite);
        }
        let herm = m.hermiticity_defect();
        if herm > tol.hermitian {
            return Err(AlgebraError::NotHermitian(herm));
        }
        let tr = m.trace();
        if (tr - ONE).norm() > tol.trace {
            return Err(AlgebraError::Trace(tr.re));
        }
        let (low, _) = m.hermitian_eigenvalues();
        if low < tol.eigen_floor {
            return Err(AlgebraError::NotPositive(low));
        }
        Ok(DensityMatrix(m))
    }

    /// Projector onto a normalized copy of `ket`.
    pub fn pure(ket: [C64; 2]) -> Result<Self, AlgebraError> {
        let n = (ket[0].norm_sqr() + ket[1].norm_sqr()).sqrt();
        if !n.is_finite() || n == 0.0 {
            return Err(AlgebraError::NonFinite);
        }
        let (a, b) = (ket[0] / n, ket[1] / n);
        Self::new(Mat2::new(a * a.conj(), a * b.conj(), b * a.conj(), b * b.conj()))
    }

    /// `|0⟩⟨0|`, the steady state of relaxation.
    pub fn ground() -> Self {
        DensityMatrix(Mat2::new(ONE, ZERO, ZERO, ZERO))
    }

    /// `|1⟩⟨1|`.
    pub fn excited() -> Self {
        DensityMatrix(Mat2::new(ZERO, ZERO, ZERO, ONE))
    }

    /// `|+⟩⟨+|` with `|+⟩ = (|0⟩ + |1⟩)/√2`.
    pub fn plus() -> Self {
        let h = C64::new(0.5, 0.0);
        DensityMatrix(Mat2::new(h, h, h, h))
    }

    pub fn maximally_mixed() -> Self {
        DensityMatrix(Mat2::IDENTITY.scale_re(0.5))
    }

    /// `ρ = ½(1 + r·σ)`.
    pub fn from_bloch(r: &BlochVector) -> Self {
        let [x, y, z] = r.0;
        DensityMatrix(PauliCoords([1.0, x, y, z]).to_matrix())
    }

    pub fn try_from_bloch(r: [f64; 3]) -> Result<Self, AlgebraError> {
        Ok(Self::from_bloch(&BlochVector::new(r)?))
    }

    /// Rebuilds a state from Pauli coordinates, normalizing `c_0`-drift is
    /// not attempted; the coordinates must already describe a valid state.
    pub fn from_coords(c: &PauliCoords, tol: &Tolerances) -> Result<Self, AlgebraError> {
        Self::new_with(c.to_matrix(), tol)
    }

    pub fn matrix(&self) -> &Mat2 {
        &self.0
    }

    pub fn coords(&self) -> PauliCoords {
        self.0.pauli_coords()
    }

    /// `r_k = Tr{σ_k ρ}`.
    pub fn to_bloch(&self) -> BlochVector {
        BlochVector(self.coords().vector())
    }

    pub fn purity(&self) -> f64 {
        purity(self)
    }
}

/// Adjoint state `χ_m(t)`: Hermitian, arbitrary trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoState(Mat2);

impl CoState {
    pub fn new(m: Mat2) -> Result<Self, AlgebraError> {
        Self::new_with(m, &Tolerances::STRICT)
    }

    pub fn new_with(m: Mat2, tol: &Tolerances) -> Result<Self, AlgebraError> {
        if !m.is_finite() {
            return Err(AlgebraError::NonFinite);
        }
        let herm = m.hermiticity_defect();
        if herm > tol.hermitian {
            return Err(AlgebraError::NotHermitian(herm));
        }
        Ok(CoState(m))
    }

    pub fn from_coords(c: &PauliCoords) -> Self {
        CoState(c.to_matrix())
    }

    pub fn zero() -> Self {
        CoState(Mat2::ZERO)
    }

    pub fn matrix(&self) -> &Mat2 {
        &self.0
    }

    pub fn coords(&self) -> PauliCoords {
        self.0.pauli_coords()
    }
}

/// `½‖a − b‖_tr`.
pub fn trace_distance(a: &DensityMatrix, b: &DensityMatrix) -> f64 {
    let (lo, hi) = (a.0 - b.0).hermitian_eigenvalues();
    (0.5 * (lo.abs() + hi.abs())).min(1.0)
}

/// `½⟨a − b, a − b⟩`.
pub fn hilbert_schmidt_distance(a: &DensityMatrix, b: &DensityMatrix) -> f64 {
    let d = a.0 - b.0;
    (0.5 * d.0.iter().flatten().map(|z| z.norm_sqr()).sum::<f64>()).min(1.0)
}

/// Root fidelity `Tr√(√a b √a)` from the qubit closed form
/// `F = Tr{ab} + 2√(det a · det b)`.
pub fn root_fidelity(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64, AlgebraError> {
    root_fidelity_with(a, b, &Tolerances::STRICT)
}

pub fn root_fidelity_with(a: &DensityMatrix, b: &DensityMatrix, tol: &Tolerances) -> Result<f64, AlgebraError> {
    let dets = a.0.det().re * b.0.det().re;
    let dets = clamp_radicand(dets, tol)?;
    let f = (a.0 * b.0).trace().re + 2.0 * dets.sqrt();
    Ok(clamp_radicand(f, tol)?.sqrt().min(1.0))
}

fn clamp_radicand(x: f64, tol: &Tolerances) -> Result<f64, AlgebraError> {
    if x >= 0.0 {
        Ok(x)
    } else if x >= -tol.radicand {
        Ok(0.0)
    } else {
        Err(AlgebraError::Radicand(x))
    }
}

/// `D_B = √(2 − 2 Tr√(√a b √a))`.
pub fn bures_distance(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64, AlgebraError> {
    bures_distance_with(a, b, &Tolerances::STRICT)
}

pub fn bures_distance_with(a: &DensityMatrix, b: &DensityMatrix, tol: &Tolerances) -> Result<f64, AlgebraError> {
    let sqrt_f = root_fidelity_with(a, b, tol)?;
    Ok((2.0 - 2.0 * sqrt_f).max(0.0).sqrt())
}

pub fn purity(a: &DensityMatrix) -> f64 {
    a.0 .0.iter().flatten().map(|z| z.norm_sqr()).sum()
}

/// Helstrom success probability `½(1 + D_tr)`.
pub fn success_probability(a: &DensityMatrix, b: &DensityMatrix) -> f64 {
    0.5 * (1.0 + trace_distance(a, b))
}
