//! Dense complex-matrix algebra for small systems.
//!
//! Operators are stored as `nalgebra` dense matrices. Everything here assumes
//! `d <= 16`; there is no sparse path. Superoperators act on column-stacked
//! vectorizations, `vec(X)[i + d*j] = X[i, j]`, which is also the native
//! column-major storage order of `DMatrix`, so `vec(A X B) = (Bᵀ ⊗ A) vec(X)`.

use nalgebra::allocator::Allocator;
use nalgebra::{ComplexField, DMatrix, DVector, DefaultAllocator, Dim, DimMin, OMatrix, Vector3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type ComplexMatrix = DMatrix<Complex64>;

/// Tolerance for Hermiticity checks at construction (max entry deviation).
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Tolerance for the trace of a density operator.
pub const TRACE_TOL: f64 = 1e-9;
/// Largest asymmetry accepted before an integrator step is rejected.
pub const DRIFT_TOL: f64 = 1e-9;

#[inline]
pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];
    pub const XYZ: [Pauli; 3] = [Pauli::X, Pauli::Y, Pauli::Z];
}

/// The 2x2 identity or Pauli matrix.
pub fn pauli(axis: Pauli) -> Hermitian {
    let z = c(0.0, 0.0);
    let one = c(1.0, 0.0);
    let m = match axis {
        Pauli::I => [one, z, z, one],
        Pauli::X => [z, one, one, z],
        Pauli::Y => [z, c(0.0, -1.0), c(0.0, 1.0), z],
        Pauli::Z => [one, z, z, -one],
    };
    Hermitian(ComplexMatrix::from_row_slice(2, 2, &m))
}

fn check_same_dims(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::DimensionMismatch(a.nrows(), b.nrows()));
    }
    if !a.is_square() {
        return Err(Error::NotSquare(a.nrows(), a.ncols()));
    }
    Ok(())
}

pub fn commutator(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    check_same_dims(a, b)?;
    Ok(a * b - b * a)
}

pub fn anticommutator(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    check_same_dims(a, b)?;
    Ok(a * b + b * a)
}

/// Largest entrywise deviation `|A - A†|`.
pub fn hermitian_deviation(a: &ComplexMatrix) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Replace `a` by `(a + a†)/2` in place and return the asymmetry that was removed.
pub fn symmetrize(a: &mut ComplexMatrix) -> f64 {
    let drift = hermitian_deviation(a);
    let n = a.nrows();
    for i in 0..n {
        for j in i..n {
            let avg = (a[(i, j)] + a[(j, i)].conj()) * 0.5;
            a[(i, j)] = avg;
            a[(j, i)] = avg.conj();
        }
    }
    drift
}

pub fn trace(a: &ComplexMatrix) -> Complex64 {
    a.diagonal().iter().sum()
}

pub fn identity(d: usize) -> ComplexMatrix {
    ComplexMatrix::identity(d, d)
}

pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kronecker(b)
}

/// Column-stacking vectorization.
pub fn vectorize(a: &ComplexMatrix) -> DVector<Complex64> {
    DVector::from_column_slice(a.as_slice())
}

pub fn unvectorize(v: &[Complex64], d: usize) -> ComplexMatrix {
    ComplexMatrix::from_column_slice(d, d, v)
}

/// Superoperator of `X ↦ A X B` in the column-stacked basis.
pub fn sandwich_superop(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    b.transpose().kronecker(a)
}

/// Superoperator of `X ↦ -i[H, X]`.
pub fn hamiltonian_superop(h: &ComplexMatrix) -> ComplexMatrix {
    let id = identity(h.nrows());
    (sandwich_superop(h, &id) - sandwich_superop(&id, h)) * c(0.0, -1.0)
}

/// Superoperator of the Lindblad dissipator `L X L† - ½{L†L, X}`.
pub fn dissipator_superop(l: &ComplexMatrix) -> ComplexMatrix {
    let id = identity(l.nrows());
    let ld = l.adjoint();
    let ldl = &ld * l;
    sandwich_superop(l, &ld) - (sandwich_superop(&ldl, &id) + sandwich_superop(&id, &ldl)) * c(0.5, 0.0)
}

// Padé degrees and the 1-norm bounds below which each is accurate to unit roundoff.
const PADE_THETA: [(usize, f64); 4] =
    [(3, 1.495585217958292e-2), (5, 2.53939833006323e-1), (7, 9.504178996162932e-1), (9, 2.097847961257068e0)];
const THETA_13: f64 = 5.371920351148152;

const B3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const B5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const B7: [f64; 8] = [17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0];
const B9: [f64; 10] =
    [17643225600.0, 8821612800.0, 2075673600.0, 302702400.0, 30270240.0, 2162160.0, 110880.0, 3960.0, 90.0, 1.0];
const B13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

fn one_norm<T, D>(a: &OMatrix<T, D, D>) -> f64
where
    T: ComplexField<RealField = f64> + Copy,
    D: Dim,
    DefaultAllocator: Allocator<D, D>,
{
    a.column_iter().map(|col| col.iter().map(|x| x.modulus()).sum::<f64>()).fold(0.0, f64::max)
}

/// Matrix exponential by scaling and squaring with a Padé approximant of
/// degree 3, 5, 7, 9 or 13 selected from the 1-norm.
///
/// Generic over the storage so the optimizer can use stack-allocated real
/// matrices while the solvers use dynamic complex ones.
pub fn expm_generic<T, D>(a: &OMatrix<T, D, D>) -> Result<OMatrix<T, D, D>>
where
    T: ComplexField<RealField = f64> + Copy,
    D: Dim + DimMin<D, Output = D>,
    DefaultAllocator: Allocator<D, D> + Allocator<D>,
{
    let (rows, cols) = a.shape_generic();
    let norm = one_norm(a);
    if !norm.is_finite() || a.iter().any(|x| !x.modulus().is_finite()) {
        return Err(Error::NonFinite);
    }
    let ident = OMatrix::<T, D, D>::identity_generic(rows, cols);
    let scal = |x: f64| T::from_real(x);

    for &(m, theta) in PADE_THETA.iter() {
        if norm <= theta {
            let coeffs: &[f64] = match m {
                3 => &B3,
                5 => &B5,
                7 => &B7,
                _ => &B9,
            };
            let a2 = a * a;
            // even and odd polynomial parts in powers of a2
            let mut power = ident.clone();
            let mut u_inner = ident.clone() * scal(coeffs[1]);
            let mut v = ident.clone() * scal(coeffs[0]);
            for k in 1..=(m / 2) {
                power = &power * &a2;
                v += &power * scal(coeffs[2 * k]);
                u_inner += &power * scal(coeffs[2 * k + 1]);
            }
            let u = a * u_inner;
            return pade_solve(u, v);
        }
    }

    let s = if norm > THETA_13 { (norm / THETA_13).log2().ceil() as i32 } else { 0 };
    if s > 1000 {
        return Err(Error::ExpmOverflow(norm));
    }
    let scaled = a * scal(0.5_f64.powi(s));
    let b = &B13;
    let a2 = &scaled * &scaled;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let u_hi = &a6 * scal(b[13]) + &a4 * scal(b[11]) + &a2 * scal(b[9]);
    let u_inner = &a6 * &u_hi + &a6 * scal(b[7]) + &a4 * scal(b[5]) + &a2 * scal(b[3]) + &ident * scal(b[1]);
    let u = &scaled * u_inner;
    let v_hi = &a6 * scal(b[12]) + &a4 * scal(b[10]) + &a2 * scal(b[8]);
    let v = &a6 * &v_hi + &a6 * scal(b[6]) + &a4 * scal(b[4]) + &a2 * scal(b[2]) + &ident * scal(b[0]);
    let mut r = pade_solve(u, v)?;
    for _ in 0..s {
        r = &r * &r;
    }
    if r.iter().any(|x| !x.modulus().is_finite()) {
        return Err(Error::ExpmOverflow(norm));
    }
    Ok(r)
}

fn pade_solve<T, D>(u: OMatrix<T, D, D>, v: OMatrix<T, D, D>) -> Result<OMatrix<T, D, D>>
where
    T: ComplexField<RealField = f64> + Copy,
    D: Dim + DimMin<D, Output = D>,
    DefaultAllocator: Allocator<D, D> + Allocator<D>,
{
    let num = &v + &u;
    let den = v - u;
    den.lu().solve(&num).ok_or(Error::NonFinite)
}

/// Matrix exponential of a dynamic complex matrix.
pub fn expm(a: &ComplexMatrix) -> Result<ComplexMatrix> {
    if !a.is_square() {
        return Err(Error::NotSquare(a.nrows(), a.ncols()));
    }
    expm_generic(a)
}

/// `exp(-i H t)` for a Hermitian generator.
pub fn unitary(h: &Hermitian, t: f64) -> Result<ComplexMatrix> {
    expm(&(h.matrix() * c(0.0, -t)))
}

/// A Hermitian operator, checked at construction.
#[derive(Clone, Debug, PartialEq)]
pub struct Hermitian(ComplexMatrix);

impl Hermitian {
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::NotSquare(m.nrows(), m.ncols()));
        }
        if m.iter().any(|x| !x.re.is_finite() || !x.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        let dev = hermitian_deviation(&m);
        if dev > HERMITIAN_TOL {
            return Err(Error::NotHermitian(dev));
        }
        let mut m = m;
        symmetrize(&mut m);
        Ok(Hermitian(m))
    }

    pub fn zeros(d: usize) -> Self {
        Hermitian(ComplexMatrix::zeros(d, d))
    }

    /// Real-diagonal operator.
    pub fn diagonal(values: &[f64]) -> Self {
        let v: Vec<Complex64> = values.iter().map(|&x| c(x, 0.0)).collect();
        Hermitian(ComplexMatrix::from_diagonal(&DVector::from_vec(v)))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.0
    }

    pub fn scale(&self, s: f64) -> Hermitian {
        Hermitian(&self.0 * c(s, 0.0))
    }

    pub fn add(&self, other: &Hermitian) -> Result<Hermitian> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch(self.dim(), other.dim()));
        }
        Ok(Hermitian(&self.0 + &other.0))
    }

    /// `self + s * other`.
    pub fn add_scaled(&self, other: &Hermitian, s: f64) -> Result<Hermitian> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch(self.dim(), other.dim()));
        }
        Ok(Hermitian(&self.0 + &other.0 * c(s, 0.0)))
    }
}

/// A (possibly subnormalized) density operator.
///
/// Construction checks Hermiticity and that the trace is real and in
/// `[0, 1]`. Positivity is only checked on request, see
/// [`DensityOperator::check_positive`].
#[derive(Clone, Debug, PartialEq)]
pub struct DensityOperator(ComplexMatrix);

impl DensityOperator {
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::NotSquare(m.nrows(), m.ncols()));
        }
        if m.iter().any(|x| !x.re.is_finite() || !x.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        let dev = hermitian_deviation(&m);
        if dev > HERMITIAN_TOL {
            return Err(Error::NotHermitian(dev));
        }
        let tr = trace(&m);
        if tr.im.abs() > TRACE_TOL || tr.re < -TRACE_TOL || tr.re > 1.0 + TRACE_TOL {
            return Err(Error::InvalidTrace(tr.re));
        }
        let mut m = m;
        symmetrize(&mut m);
        Ok(DensityOperator(m))
    }

    /// Wraps a matrix produced by a solver; only symmetrizes.
    pub(crate) fn from_solver(mut m: ComplexMatrix) -> Result<Self> {
        let drift = symmetrize(&mut m);
        if drift > DRIFT_TOL {
            return Err(Error::HermiticityDrift(drift));
        }
        Ok(DensityOperator(m))
    }

    /// Unit-trace state requirement used by initializers.
    pub fn normalized(m: ComplexMatrix) -> Result<Self> {
        let rho = Self::new(m)?;
        let tr = rho.weight();
        if (tr - 1.0).abs() > TRACE_TOL {
            return Err(Error::InvalidTrace(tr));
        }
        Ok(rho)
    }

    /// `|ψ⟩⟨ψ|` for a (normalized internally) state vector.
    pub fn pure(psi: &[Complex64]) -> Result<Self> {
        let v = DVector::from_column_slice(psi);
        let n = v.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::InvalidTrace(0.0));
        }
        let v = v / c(n, 0.0);
        Self::new(&v * v.adjoint())
    }

    /// Computational basis state `|k⟩⟨k|`.
    pub fn basis(d: usize, k: usize) -> Self {
        let mut m = ComplexMatrix::zeros(d, d);
        m[(k, k)] = c(1.0, 0.0);
        DensityOperator(m)
    }

    pub fn maximally_mixed(d: usize) -> Self {
        DensityOperator(identity(d) * c(1.0 / d as f64, 0.0))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.0
    }

    /// The trace, i.e. the probability weight carried by this operator.
    pub fn weight(&self) -> f64 {
        trace(&self.0).re
    }

    pub fn scaled(&self, s: f64) -> Result<Self> {
        Self::new(&self.0 * c(s, 0.0))
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.0.clone().symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Fails if an eigenvalue is below `-tol`.
    pub fn check_positive(&self, tol: f64) -> Result<()> {
        let min = self.min_eigenvalue();
        if min < -tol {
            return Err(Error::NotPositive(min));
        }
        Ok(())
    }

    /// Bloch vector `v_i = Tr(σ_i ρ)/Tr(ρ)` of a qubit state.
    pub fn bloch(&self) -> Result<Vector3<f64>> {
        if self.dim() != 2 {
            return Err(Error::NotQubit(self.dim()));
        }
        let tr = self.weight();
        if tr <= 0.0 {
            return Err(Error::InvalidTrace(tr));
        }
        let comp = |p: Pauli| trace(&(pauli(p).matrix() * &self.0)).re / tr;
        Ok(Vector3::new(comp(Pauli::X), comp(Pauli::Y), comp(Pauli::Z)))
    }

    pub fn from_bloch(v: &Vector3<f64>) -> Result<Self> {
        let n = v.norm();
        if n > 1.0 + 1e-12 {
            return Err(Error::BlochOutOfRange(n));
        }
        let m = (pauli(Pauli::I).into_matrix()
            + pauli(Pauli::X).into_matrix() * c(v.x, 0.0)
            + pauli(Pauli::Y).into_matrix() * c(v.y, 0.0)
            + pauli(Pauli::Z).into_matrix() * c(v.z, 0.0))
            * c(0.5, 0.0);
        Self::new(m)
    }
}

/// Half the trace norm of `ρ1 - ρ2`.
pub fn trace_distance(a: &DensityOperator, b: &DensityOperator) -> Result<f64> {
    matrix_trace_distance(a.matrix(), b.matrix())
}

/// Trace distance on raw matrices.
pub fn matrix_trace_distance(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<f64> {
    check_same_dims(a, b)?;
    let diff = a - b;
    Ok(0.5 * diff.singular_values().sum())
}

/// Row-major JSON form: `[[[re, im], ...], ...]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MatrixJson(pub Vec<Vec<[f64; 2]>>);

impl From<&ComplexMatrix> for MatrixJson {
    fn from(m: &ComplexMatrix) -> Self {
        MatrixJson((0..m.nrows()).map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect()).collect())
    }
}

impl TryFrom<&MatrixJson> for ComplexMatrix {
    type Error = Error;

    fn try_from(j: &MatrixJson) -> Result<Self> {
        let n = j.0.len();
        if n == 0 {
            return Err(Error::NotSquare(0, 0));
        }
        let mut m = ComplexMatrix::zeros(n, n);
        for (i, row) in j.0.iter().enumerate() {
            if row.len() != n {
                return Err(Error::NotSquare(n, row.len()));
            }
            for (k, [re, im]) in row.iter().enumerate() {
                m[(i, k)] = c(*re, *im);
            }
        }
        Ok(m)
    }
}

impl TryFrom<&MatrixJson> for Hermitian {
    type Error = Error;

    fn try_from(j: &MatrixJson) -> Result<Self> {
        Hermitian::new(ComplexMatrix::try_from(j)?)
    }
}
