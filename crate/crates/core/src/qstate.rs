//! Two-level and two-qubit state primitives.
//!
//! All two-qubit objects use the computational ordering `(HH, HV, VH, VV)`
//! with the signal photon as the first (left) tensor factor. `H` maps to
//! `|0>` and `V` to `|1>`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix2, Matrix4, SymmetricEigen, Vector2, Vector4};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Tolerance used when validating Hermiticity, trace and positivity.
pub const PHYSICAL_TOL: f64 = 1e-9;

#[inline]
pub(crate) fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Polarization labels.
///
/// `R = (H + iV)/sqrt2` and `L = (H - iV)/sqrt2`; `D = (H + V)/sqrt2`,
/// `A = (H - V)/sqrt2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Polarization {
    H,
    V,
    D,
    A,
    R,
    L,
}

impl Polarization {
    pub const ALL: [Polarization; 6] = [
        Polarization::H,
        Polarization::V,
        Polarization::D,
        Polarization::A,
        Polarization::R,
        Polarization::L,
    ];

    /// The tomographically complete single-qubit set used for acquisition.
    pub const TOMOGRAPHIC: [Polarization; 4] = [
        Polarization::H,
        Polarization::V,
        Polarization::D,
        Polarization::R,
    ];

    pub fn symbol(self) -> char {
        match self {
            Polarization::H => 'H',
            Polarization::V => 'V',
            Polarization::D => 'D',
            Polarization::A => 'A',
            Polarization::R => 'R',
            Polarization::L => 'L',
        }
    }

    pub fn ket(self) -> Ket2 {
        let s = FRAC_1_SQRT_2;
        let (a, b) = match self {
            Polarization::H => (c(1.0, 0.0), c(0.0, 0.0)),
            Polarization::V => (c(0.0, 0.0), c(1.0, 0.0)),
            Polarization::D => (c(s, 0.0), c(s, 0.0)),
            Polarization::A => (c(s, 0.0), c(-s, 0.0)),
            Polarization::R => (c(s, 0.0), c(0.0, s)),
            Polarization::L => (c(s, 0.0), c(0.0, -s)),
        };
        Ket2(Vector2::new(a, b))
    }
}

impl fmt::Display for Polarization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.symbol())
    }
}

impl FromStr for Polarization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "H" | "h" => Ok(Polarization::H),
            "V" | "v" => Ok(Polarization::V),
            "D" | "d" => Ok(Polarization::D),
            "A" | "a" => Ok(Polarization::A),
            "R" | "r" => Ok(Polarization::R),
            "L" | "l" => Ok(Polarization::L),
            other => Err(Error::UnknownPolarization(other.to_string())),
        }
    }
}

/// Look up the ket for a polarization label (`H`, `V`, `D`, `A`, `R`, `L`).
pub fn polarization_ket(label: &str) -> Result<Ket2> {
    label.parse::<Polarization>().map(Polarization::ket)
}

/// Single-qubit (polarization) ket.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ket2(pub(crate) Vector2<C64>);

impl Ket2 {
    /// Builds a ket from raw amplitudes, normalizing them.
    pub fn new(a0: C64, a1: C64) -> Result<Self> {
        let v = Vector2::new(a0, a1);
        let n = v.norm();
        if !n.is_finite() || n == 0.0 {
            return Err(Error::param(
                "amplitudes",
                "ket must have finite nonzero norm",
            ));
        }
        Ok(Ket2(v / c(n, 0.0)))
    }

    pub fn amplitudes(&self) -> [C64; 2] {
        [self.0[0], self.0[1]]
    }

    pub fn vector(&self) -> &Vector2<C64> {
        &self.0
    }

    /// `<self|other>`
    pub fn inner(&self, other: &Ket2) -> C64 {
        self.0.dotc(&other.0)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.norm_squared()
    }

    /// Ket with complex-conjugated amplitudes.
    pub fn conj(&self) -> Ket2 {
        Ket2(self.0.map(|z| z.conj()))
    }
}

/// Two-qubit ket in `(HH, HV, VH, VV)` order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoQubitKet(pub(crate) Vector4<C64>);

impl TwoQubitKet {
    /// Builds a ket from raw amplitudes, normalizing them.
    pub fn new(amplitudes: [C64; 4]) -> Result<Self> {
        let v = Vector4::from(amplitudes);
        let n = v.norm();
        if !n.is_finite() || n == 0.0 {
            return Err(Error::param(
                "amplitudes",
                "ket must have finite nonzero norm",
            ));
        }
        Ok(TwoQubitKet(v / c(n, 0.0)))
    }

    pub(crate) fn from_vector_unchecked(v: Vector4<C64>) -> Self {
        TwoQubitKet(v)
    }

    pub fn amplitudes(&self) -> [C64; 4] {
        [self.0[0], self.0[1], self.0[2], self.0[3]]
    }

    pub fn vector(&self) -> &Vector4<C64> {
        &self.0
    }

    pub fn inner(&self, other: &TwoQubitKet) -> C64 {
        self.0.dotc(&other.0)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.norm_squared()
    }

    /// `|<self|other>|^2`, insensitive to global phase.
    pub fn overlap(&self, other: &TwoQubitKet) -> f64 {
        self.inner(other).norm_sqr()
    }

    /// `|psi><psi|`
    pub fn projector(&self) -> Matrix4<C64> {
        self.0 * self.0.adjoint()
    }
}

/// The four Bell states. Declaration order is the fixed tie-break order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BellState {
    PhiPlus,
    PhiMinus,
    PsiPlus,
    PsiMinus,
}

impl BellState {
    pub const ALL: [BellState; 4] = [
        BellState::PhiPlus,
        BellState::PhiMinus,
        BellState::PsiPlus,
        BellState::PsiMinus,
    ];

    pub fn ket(self) -> TwoQubitKet {
        let s = FRAC_1_SQRT_2;
        let z = c(0.0, 0.0);
        let p = c(s, 0.0);
        let m = c(-s, 0.0);
        let v = match self {
            BellState::PhiPlus => [p, z, z, p],
            BellState::PhiMinus => [p, z, z, m],
            BellState::PsiPlus => [z, p, p, z],
            BellState::PsiMinus => [z, p, m, z],
        };
        TwoQubitKet(Vector4::from(v))
    }

    /// ASCII name used in file names and CSV headers.
    pub fn name(self) -> &'static str {
        match self {
            BellState::PhiPlus => "PhiPlus",
            BellState::PhiMinus => "PhiMinus",
            BellState::PsiPlus => "PsiPlus",
            BellState::PsiMinus => "PsiMinus",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for BellState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BellState {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "Φ+" | "Phi+" | "PhiPlus" | "phi+" => Ok(BellState::PhiPlus),
            "Φ-" | "Φ−" | "Phi-" | "PhiMinus" | "phi-" => Ok(BellState::PhiMinus),
            "Ψ+" | "Psi+" | "PsiPlus" | "psi+" => Ok(BellState::PsiPlus),
            "Ψ-" | "Ψ−" | "Psi-" | "PsiMinus" | "psi-" => Ok(BellState::PsiMinus),
            other => Err(Error::UnknownBellState(other.to_string())),
        }
    }
}

/// Look up a Bell state by label (`Φ+`, `Phi+`, `PhiPlus`, ...).
pub fn bell_state(label: &str) -> Result<TwoQubitKet> {
    label.parse::<BellState>().map(BellState::ket)
}

/// 2x2 complex operator acting on one polarization qubit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Operator2(pub(crate) Matrix2<C64>);

impl Operator2 {
    pub fn from_matrix(m: Matrix2<C64>) -> Self {
        Operator2(m)
    }

    pub fn identity() -> Self {
        Operator2(Matrix2::identity())
    }

    pub fn pauli_x() -> Self {
        let (o, z) = (c(1.0, 0.0), c(0.0, 0.0));
        Operator2(Matrix2::new(z, o, o, z))
    }

    pub fn pauli_y() -> Self {
        let z = c(0.0, 0.0);
        Operator2(Matrix2::new(z, c(0.0, -1.0), c(0.0, 1.0), z))
    }

    pub fn pauli_z() -> Self {
        let (o, z) = (c(1.0, 0.0), c(0.0, 0.0));
        Operator2(Matrix2::new(o, z, z, -o))
    }

    pub fn matrix(&self) -> &Matrix2<C64> {
        &self.0
    }

    pub fn adjoint(&self) -> Self {
        Operator2(self.0.adjoint())
    }

    pub fn apply(&self, ket: &Ket2) -> Ket2 {
        Ket2(self.0 * ket.0)
    }

    /// `<bra|self|ket>`
    pub fn element(&self, bra: &Ket2, ket: &Ket2) -> C64 {
        bra.0.dotc(&(self.0 * ket.0))
    }

    pub fn pow(&self, n: u32) -> Self {
        let mut out = Matrix2::identity();
        for _ in 0..n {
            out *= self.0;
        }
        Operator2(out)
    }

    /// Max entrywise `|U^dagger U - I|`.
    pub fn unitarity_residual(&self) -> f64 {
        max_abs_entry(&(self.0.adjoint() * self.0 - Matrix2::identity()))
    }

    pub fn max_abs_diff(&self, other: &Operator2) -> f64 {
        max_abs_entry(&(self.0 - other.0))
    }
}

impl std::ops::Mul for Operator2 {
    type Output = Operator2;

    fn mul(self, rhs: Operator2) -> Operator2 {
        Operator2(self.0 * rhs.0)
    }
}

impl std::ops::Mul for &Operator2 {
    type Output = Operator2;

    fn mul(self, rhs: &Operator2) -> Operator2 {
        Operator2(self.0 * rhs.0)
    }
}

/// 4x4 complex operator on the two-qubit space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Operator4(pub(crate) Matrix4<C64>);

impl Operator4 {
    pub fn from_matrix(m: Matrix4<C64>) -> Self {
        Operator4(m)
    }

    pub fn identity() -> Self {
        Operator4(Matrix4::identity())
    }

    pub fn matrix(&self) -> &Matrix4<C64> {
        &self.0
    }

    pub fn adjoint(&self) -> Self {
        Operator4(self.0.adjoint())
    }

    pub fn apply(&self, ket: &TwoQubitKet) -> TwoQubitKet {
        TwoQubitKet(self.0 * ket.0)
    }

    pub fn max_abs_diff(&self, other: &Operator4) -> f64 {
        max_abs_entry(&(self.0 - other.0))
    }
}

impl std::ops::Mul for Operator4 {
    type Output = Operator4;

    fn mul(self, rhs: Operator4) -> Operator4 {
        Operator4(self.0 * rhs.0)
    }
}

/// Kronecker product; the left factor acts on the signal qubit.
pub trait Tensor<Rhs = Self> {
    type Output;

    fn tensor(&self, rhs: &Rhs) -> Self::Output;
}

impl Tensor for Operator2 {
    type Output = Operator4;

    fn tensor(&self, rhs: &Operator2) -> Operator4 {
        Operator4(self.0.kronecker(&rhs.0))
    }
}

impl Tensor for Ket2 {
    type Output = TwoQubitKet;

    fn tensor(&self, rhs: &Ket2) -> TwoQubitKet {
        let a = &self.0;
        let b = &rhs.0;
        TwoQubitKet(Vector4::new(
            a[0] * b[0],
            a[0] * b[1],
            a[1] * b[0],
            a[1] * b[1],
        ))
    }
}

pub fn tensor<T: Tensor>(a: &T, b: &T) -> T::Output {
    a.tensor(b)
}

/// Which photon a reduction or projection refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subsystem {
    Signal,
    Idler,
}

/// Two-qubit density matrix: Hermitian, unit trace, positive semidefinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMatrix(pub(crate) Matrix4<C64>);

impl DensityMatrix {
    /// Validates the matrix against the physicality tolerances.
    pub fn new(m: Matrix4<C64>) -> Result<Self> {
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NotPhysical("non-finite entry".into()));
        }
        let herm = hermiticity_residual(&m);
        if herm > PHYSICAL_TOL {
            return Err(Error::NotPhysical(format!(
                "not Hermitian (max deviation {herm:.3e})"
            )));
        }
        let tr = m.trace();
        if (tr.re - 1.0).abs() > PHYSICAL_TOL || tr.im.abs() > PHYSICAL_TOL {
            return Err(Error::NotPhysical(format!(
                "trace {:.12} {:+.3e}i is not 1",
                tr.re, tr.im
            )));
        }
        let eig = eigen_hermitian(&m)?;
        let min = eig.values[3];
        if min < -PHYSICAL_TOL {
            return Err(Error::NotPhysical(format!("negative eigenvalue {min:.3e}")));
        }
        Ok(DensityMatrix(m))
    }

    /// Wraps a matrix that is physical by construction.
    pub(crate) fn new_unchecked(m: Matrix4<C64>) -> Self {
        DensityMatrix(m)
    }

    pub fn from_pure(psi: &TwoQubitKet) -> Self {
        DensityMatrix(psi.projector())
    }

    pub fn maximally_mixed() -> Self {
        DensityMatrix(Matrix4::identity() * c(0.25, 0.0))
    }

    pub fn matrix(&self) -> &Matrix4<C64> {
        &self.0
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    /// `Tr(rho Pi)` for a projector onto `psi`, i.e. `<psi|rho|psi>`.
    pub fn expectation(&self, psi: &TwoQubitKet) -> f64 {
        psi.0.dotc(&(self.0 * psi.0)).re
    }

    /// Trace distance `0.5 * sum |lambda_i(rho - sigma)|`.
    pub fn trace_distance(&self, other: &DensityMatrix) -> Result<f64> {
        let eig = eigen_hermitian(&(self.0 - other.0))?;
        Ok(0.5 * eig.values.iter().map(|v| v.abs()).sum::<f64>())
    }

    pub fn purity(&self) -> f64 {
        (self.0 * self.0).trace().re
    }
}

/// Fidelity of a density matrix with a pure target, `<psi|rho|psi>`.
pub fn fidelity(rho: &DensityMatrix, psi: &TwoQubitKet) -> f64 {
    rho.expectation(psi)
}

/// Reduced single-qubit density matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QubitDensity(pub(crate) Matrix2<C64>);

impl QubitDensity {
    pub fn matrix(&self) -> &Matrix2<C64> {
        &self.0
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    pub fn max_abs_diff(&self, other: &Matrix2<C64>) -> f64 {
        max_abs_entry(&(self.0 - other))
    }
}

/// Traces out `subsystem`, returning the state of the other photon.
pub fn partial_trace(rho: &DensityMatrix, subsystem: Subsystem) -> QubitDensity {
    let m = &rho.0;
    let mut out = Matrix2::zeros();
    for a in 0..2 {
        for b in 0..2 {
            out[(a, b)] = match subsystem {
                // index = 2*signal + idler
                Subsystem::Signal => m[(a, b)] + m[(2 + a, 2 + b)],
                Subsystem::Idler => m[(2 * a, 2 * b)] + m[(2 * a + 1, 2 * b + 1)],
            };
        }
    }
    QubitDensity(out)
}

/// Eigen-decomposition of a 4x4 Hermitian matrix.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    /// Real eigenvalues, descending.
    pub values: [f64; 4],
    /// Orthonormal eigenvectors as columns, matching `values`.
    pub vectors: Matrix4<C64>,
}

impl HermitianEigen {
    /// `sum_i lambda_i |v_i><v_i|`
    pub fn reconstruct(&self) -> Matrix4<C64> {
        let mut out = Matrix4::zeros();
        for (i, &lambda) in self.values.iter().enumerate() {
            let v = self.vectors.column(i);
            out += v * v.adjoint() * c(lambda, 0.0);
        }
        out
    }
}

pub fn eigen_hermitian(m: &Matrix4<C64>) -> Result<HermitianEigen> {
    let herm = hermiticity_residual(m);
    if herm > PHYSICAL_TOL {
        return Err(Error::NotHermitian(herm));
    }
    // symmetrize so the solver sees an exactly Hermitian input
    let sym = (m + m.adjoint()) * c(0.5, 0.0);
    let eig = SymmetricEigen::try_new(sym, 1e-15, 0).ok_or(Error::EigenNotConverged)?;
    let mut order = [0usize, 1, 2, 3];
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut values = [0.0; 4];
    let mut vectors = Matrix4::zeros();
    for (dst, &src) in order.iter().enumerate() {
        values[dst] = eig.eigenvalues[src];
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok(HermitianEigen { values, vectors })
}

pub fn hermiticity_residual(m: &Matrix4<C64>) -> f64 {
    max_abs_entry(&(m - m.adjoint()))
}

pub(crate) fn max_abs_entry<R, C, S>(m: &nalgebra::Matrix<C64, R, C, S>) -> f64
where
    R: nalgebra::Dim,
    C: nalgebra::Dim,
    S: nalgebra::RawStorage<C64, R, C>,
{
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

#[cfg(test)]
pub(crate) mod testing {
    use super::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    pub fn random_complex<R: Rng>(rng: &mut R) -> C64 {
        c(rng.sample(StandardNormal), rng.sample(StandardNormal))
    }

    pub fn random_hermitian<R: Rng>(rng: &mut R) -> Matrix4<C64> {
        let g = Matrix4::from_fn(|_, _| random_complex(rng));
        (g + g.adjoint()) * c(0.5, 0.0)
    }

    /// `T^dagger T / Tr(T^dagger T)` for a Gaussian random `T`.
    pub fn random_density<R: Rng>(rng: &mut R) -> DensityMatrix {
        let t = Matrix4::from_fn(|_, _| random_complex(rng));
        let m = t.adjoint() * t;
        let tr = m.trace();
        DensityMatrix(m / tr)
    }

    /// `exp(iH)` for a random Hermitian `H`, via its eigen-decomposition.
    pub fn random_unitary2<R: Rng>(rng: &mut R) -> Operator2 {
        let a: f64 = rng.sample(StandardNormal);
        let d: f64 = rng.sample(StandardNormal);
        let b = random_complex(rng);
        let h = Matrix2::new(c(a, 0.0), b, b.conj(), c(d, 0.0));
        let eig = SymmetricEigen::new(h);
        let phases = Matrix2::from_diagonal(&eig.eigenvalues.map(|l| C64::from_polar(1.0, l)));
        Operator2(eig.eigenvectors * phases * eig.eigenvectors.adjoint())
    }
}
