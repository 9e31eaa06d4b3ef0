//! Dense complex linear algebra for small Hilbert spaces.
//!
//! Everything here is sized for `dim <= 64`: states, general square operators,
//! validated Hermitian operators, a cyclic Jacobi eigensolver, and the exact and
//! Trotterized propagators built on top of it.

use crate::error::{Error, Result};
use crate::scalar::{cis, real, Real, C};
use std::ops::{Add, Mul, Sub};

/// Default relative eigenvalue gap below which a spectrum counts as degenerate.
pub const DEFAULT_DEGENERACY_TOL: f64 = 1e-9;

/// A (generally sub-normalized) vector of probability amplitudes.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector<T> {
    amps: Vec<C<T>>,
}

impl<T: Real> StateVector<T> {
    pub fn new(amps: Vec<C<T>>) -> Result<Self> {
        if amps.is_empty() {
            return Err(Error::InvalidArgument("state vector must be non-empty".into()));
        }
        if amps.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidArgument("state vector has non-finite amplitudes".into()));
        }
        Ok(Self { amps })
    }

    /// Builds a state from real amplitudes.
    pub fn from_real(values: &[T]) -> Result<Self> {
        Self::new(values.iter().map(|&x| real(x)).collect())
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            amps: vec![C::new(T::zero(), T::zero()); dim.max(1)],
        }
    }

    pub fn basis(dim: usize, k: usize) -> Self {
        let mut s = Self::zeros(dim);
        s.amps[k] = real(T::one());
        s
    }

    pub(crate) fn from_vec_unchecked(amps: Vec<C<T>>) -> Self {
        Self { amps }
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[C<T>] {
        &self.amps
    }

    pub fn into_amplitudes(self) -> Vec<C<T>> {
        self.amps
    }

    pub fn norm_sqr(&self) -> T {
        self.amps.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn norm(&self) -> T {
        self.norm_sqr().sqrt()
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &Self) -> C<T> {
        self.amps
            .iter()
            .zip(&other.amps)
            .fold(C::new(T::zero(), T::zero()), |acc, (a, b)| acc + a.conj() * b)
    }

    pub fn scale(&self, z: C<T>) -> Self {
        Self::from_vec_unchecked(self.amps.iter().map(|a| a * z).collect())
    }

    /// Largest componentwise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| (a - b).norm())
            .fold(T::zero(), T::max)
    }

    /// Euclidean distance `||self - other||`.
    pub fn distance(&self, other: &Self) -> T {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<T>()
            .sqrt()
    }

    pub(crate) fn check_dim(&self, dim: usize) -> Result<()> {
        if self.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: self.dim(),
            });
        }
        Ok(())
    }
}

impl<T: Real> Add for &StateVector<T> {
    type Output = StateVector<T>;
    fn add(self, rhs: Self) -> StateVector<T> {
        StateVector::from_vec_unchecked(self.amps.iter().zip(&rhs.amps).map(|(a, b)| a + b).collect())
    }
}

impl<T: Real> Sub for &StateVector<T> {
    type Output = StateVector<T>;
    fn sub(self, rhs: Self) -> StateVector<T> {
        StateVector::from_vec_unchecked(self.amps.iter().zip(&rhs.amps).map(|(a, b)| a - b).collect())
    }
}

/// Dense square complex matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator<T> {
    dim: usize,
    data: Vec<C<T>>,
}

impl<T: Real> Operator<T> {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![C::new(T::zero(), T::zero()); dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for k in 0..dim {
            m.data[k * dim + k] = real(T::one());
        }
        m
    }

    pub fn from_diagonal(diag: &[C<T>]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (k, z) in diag.iter().enumerate() {
            m.data[k * diag.len() + k] = *z;
        }
        m
    }

    /// Builds a matrix from rows; all rows must have length `rows.len()`.
    pub fn from_rows(rows: &[Vec<C<T>>]) -> Result<Self> {
        let dim = rows.len();
        if dim == 0 {
            return Err(Error::InvalidArgument("operator must be non-empty".into()));
        }
        let mut data = Vec::with_capacity(dim * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Self { dim, data })
    }

    pub fn from_real_rows(rows: &[Vec<T>]) -> Result<Self> {
        let rows: Vec<Vec<C<T>>> = rows.iter().map(|r| r.iter().map(|&x| real(x)).collect()).collect();
        Self::from_rows(&rows)
    }

    /// Outer product `|u><v|`.
    pub fn outer(u: &StateVector<T>, v: &StateVector<T>) -> Self {
        let dim = u.dim();
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                m.data[i * dim + j] = u.amps[i] * v.amps[j].conj();
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> C<T> {
        self.data[i * self.dim + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, z: C<T>) {
        self.data[i * self.dim + j] = z;
    }

    pub fn entries(&self) -> &[C<T>] {
        &self.data
    }

    pub fn column(&self, j: usize) -> StateVector<T> {
        StateVector::from_vec_unchecked((0..self.dim).map(|i| self.get(i, j)).collect())
    }

    pub fn adjoint(&self) -> Self {
        let n = self.dim;
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m.data[j * n + i] = self.data[i * n + j].conj();
            }
        }
        m
    }

    pub fn matmul(&self, rhs: &Self) -> Self {
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a.re == T::zero() && a.im == T::zero() {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] = out.data[i * n + j] + a * rhs.data[k * n + j];
                }
            }
        }
        out
    }

    pub fn apply(&self, psi: &StateVector<T>) -> StateVector<T> {
        StateVector::from_vec_unchecked(self.apply_slice(&psi.amps))
    }

    pub(crate) fn apply_slice(&self, v: &[C<T>]) -> Vec<C<T>> {
        let n = self.dim;
        (0..n)
            .map(|i| {
                self.data[i * n..(i + 1) * n]
                    .iter()
                    .zip(v)
                    .fold(C::new(T::zero(), T::zero()), |acc, (a, b)| acc + a * b)
            })
            .collect()
    }

    pub fn scale(&self, z: C<T>) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|a| a * z).collect(),
        }
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().map(|z| z.norm()).fold(T::zero(), T::max)
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(T::zero(), T::max)
    }

    /// `max |U^dagger U - 1|`.
    pub fn unitarity_residual(&self) -> T {
        self.adjoint().matmul(self).max_abs_diff(&Self::identity(self.dim))
    }

    /// `max |M - M^dagger|`.
    pub fn hermiticity_residual(&self) -> T {
        self.max_abs_diff(&self.adjoint())
    }

    pub(crate) fn check_dim(&self, dim: usize) -> Result<()> {
        if self.dim != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: self.dim,
            });
        }
        Ok(())
    }
}

impl<T: Real> Add for &Operator<T> {
    type Output = Operator<T>;
    fn add(self, rhs: Self) -> Operator<T> {
        Operator {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl<T: Real> Sub for &Operator<T> {
    type Output = Operator<T>;
    fn sub(self, rhs: Self) -> Operator<T> {
        Operator {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl<T: Real> Mul for &Operator<T> {
    type Output = Operator<T>;
    fn mul(self, rhs: Self) -> Operator<T> {
        self.matmul(rhs)
    }
}

/// A validated Hermitian operator (Hamiltonian or observable).
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianOperator<T> {
    op: Operator<T>,
}

impl<T: Real> HermitianOperator<T> {
    /// Accepts `m` when `max|M - M^dagger| <= 1e-12 * max|M|`.
    pub fn new(m: Operator<T>) -> Result<Self> {
        let scale = m.max_abs();
        let residual = m.hermiticity_residual();
        if residual > T::tol(1e-12, 16.0) * scale {
            return Err(Error::NotHermitian {
                residual: residual.to_f64().unwrap_or(f64::NAN),
            });
        }
        // Symmetrize so downstream code sees an exactly Hermitian matrix.
        let half = T::lit(0.5);
        let n = m.dim;
        let mut op = m.clone();
        for i in 0..n {
            for j in 0..n {
                let z = (m.get(i, j) + m.get(j, i).conj()).scale(half);
                op.set(i, j, z);
            }
        }
        Ok(Self { op })
    }

    pub fn from_real_rows(rows: &[Vec<T>]) -> Result<Self> {
        Self::new(Operator::from_real_rows(rows)?)
    }

    pub fn diagonal(values: &[T]) -> Self {
        let diag: Vec<C<T>> = values.iter().map(|&x| real(x)).collect();
        Self {
            op: Operator::from_diagonal(&diag),
        }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            op: Operator::zeros(dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.op.dim
    }

    pub fn as_operator(&self) -> &Operator<T> {
        &self.op
    }

    pub fn scaled(&self, x: T) -> Self {
        Self {
            op: self.op.scale(real(x)),
        }
    }

    pub fn sum(&self, other: &Self) -> Result<Self> {
        other.op.check_dim(self.dim())?;
        Ok(Self { op: &self.op + &other.op })
    }

    /// Splits into the diagonal part and the off-diagonal remainder.
    pub fn split_diagonal(&self) -> (Self, Self) {
        let n = self.dim();
        let mut diag = Operator::zeros(n);
        let mut off = self.op.clone();
        for k in 0..n {
            diag.set(k, k, self.op.get(k, k));
            off.set(k, k, C::new(T::zero(), T::zero()));
        }
        (Self { op: diag }, Self { op: off })
    }
}

/// Eigen-system of a Hermitian operator: ascending eigenvalues and
/// column-orthonormal eigenvectors with a fixed phase convention.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralDecomposition<T> {
    eigenvalues: Vec<T>,
    eigenvectors: Operator<T>,
    degenerate: bool,
    degeneracy_tol: T,
}

impl<T: Real> SpectralDecomposition<T> {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[T] {
        &self.eigenvalues
    }

    /// Eigenvectors as columns.
    pub fn eigenvectors(&self) -> &Operator<T> {
        &self.eigenvectors
    }

    pub fn eigenvector(&self, k: usize) -> StateVector<T> {
        self.eigenvectors.column(k)
    }

    /// Warning-level flag: some eigenvalue gap is below the degeneracy tolerance.
    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    /// Smallest gap between consecutive eigenvalues, relative to the spectral radius.
    pub fn min_relative_gap(&self) -> T {
        let radius = self.spectral_radius();
        if self.dim() < 2 {
            return T::infinity();
        }
        let gap = self
            .eigenvalues
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(T::infinity(), T::min);
        if radius > T::zero() {
            gap / radius
        } else {
            T::zero()
        }
    }

    pub fn spectral_radius(&self) -> T {
        self.eigenvalues.iter().map(|a| a.abs()).fold(T::zero(), T::max)
    }

    /// Fails with `DegenerateSpectrum` when eigenvalues cannot label eigenpaths.
    pub fn require_nondegenerate(&self) -> Result<()> {
        if self.degenerate {
            return Err(Error::DegenerateSpectrum {
                gap: self.min_relative_gap().to_f64().unwrap_or(0.0),
                tol: self.degeneracy_tol.to_f64().unwrap_or(0.0),
            });
        }
        Ok(())
    }

    /// Projector `|a_k><a_k|`.
    pub fn projector(&self, k: usize) -> Operator<T> {
        let v = self.eigenvector(k);
        Operator::outer(&v, &v)
    }

    /// `sum_k g(a_k) |a_k><a_k|`.
    pub fn map_spectrum(&self, g: impl Fn(T) -> C<T>) -> Operator<T> {
        let n = self.dim();
        let v = &self.eigenvectors;
        let gk: Vec<C<T>> = self.eigenvalues.iter().map(|&a| g(a)).collect();
        let mut out = Operator::zeros(n);
        for i in 0..n {
            for j in 0..n {
                let mut acc = C::new(T::zero(), T::zero());
                for k in 0..n {
                    acc = acc + v.get(i, k) * gk[k] * v.get(j, k).conj();
                }
                out.set(i, j, acc);
            }
        }
        out
    }

    /// `sum_k a_k |a_k><a_k|`.
    pub fn reconstruct(&self) -> Operator<T> {
        self.map_spectrum(real)
    }

    /// Coefficients `<a_k|psi>`.
    pub fn to_eigenbasis(&self, psi: &[C<T>]) -> Vec<C<T>> {
        let n = self.dim();
        (0..n)
            .map(|k| {
                (0..n).fold(C::new(T::zero(), T::zero()), |acc, i| {
                    acc + self.eigenvectors.get(i, k).conj() * psi[i]
                })
            })
            .collect()
    }

    /// `sum_k c_k |a_k>`.
    pub fn from_eigenbasis(&self, coef: &[C<T>]) -> Vec<C<T>> {
        self.eigenvectors.apply_slice(coef)
    }

    /// `V^dagger U V`: an operator expressed in this eigenbasis.
    pub fn conjugate_into(&self, u: &Operator<T>) -> Operator<T> {
        self.eigenvectors.adjoint().matmul(&u.matmul(&self.eigenvectors))
    }
}

/// Eigen-decomposes `a` with the default degeneracy tolerance.
pub fn spectral_decompose<T: Real>(a: &HermitianOperator<T>) -> SpectralDecomposition<T> {
    spectral_decompose_with_tol(a, T::lit(DEFAULT_DEGENERACY_TOL))
}

/// Cyclic complex Jacobi eigensolver.
///
/// Eigenvalues are sorted ascending. Each eigenvector is rotated so that its
/// largest-magnitude component (first one on ties) is real and positive.
pub fn spectral_decompose_with_tol<T: Real>(
    a: &HermitianOperator<T>,
    degeneracy_tol: T,
) -> SpectralDecomposition<T> {
    let n = a.dim();
    let mut m = a.op.clone();
    let mut v = Operator::identity(n);
    let scale = m.max_abs().max(T::min_positive_value());
    let eps = T::epsilon();

    for _sweep in 0..100 {
        let off: T = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m.get(i, j).norm_sqr())
            .sum();
        if off.sqrt() <= eps * eps.sqrt() * scale || off == T::zero() {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m.get(p, q);
                let mag = apq.norm();
                if mag <= T::min_positive_value() {
                    continue;
                }
                let phase = apq / mag;
                let app = m.get(p, p).re;
                let aqq = m.get(q, q).re;
                let theta = (aqq - app) / (T::lit(2.0) * mag);
                let t = if theta >= T::zero() {
                    T::one() / (theta + (T::one() + theta * theta).sqrt())
                } else {
                    -T::one() / (-theta + (T::one() + theta * theta).sqrt())
                };
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = t * c;
                // J = [[c, s e^{i phi}], [-s e^{-i phi}, c]] on (p, q).
                let sp = phase.scale(s);
                let sm = phase.conj().scale(s);
                for k in 0..n {
                    let akp = m.get(k, p);
                    let akq = m.get(k, q);
                    m.set(k, p, akp.scale(c) - akq * sm);
                    m.set(k, q, akp * sp + akq.scale(c));
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, vkp.scale(c) - vkq * sm);
                    v.set(k, q, vkp * sp + vkq.scale(c));
                }
                for k in 0..n {
                    let apk = m.get(p, k);
                    let aqk = m.get(q, k);
                    m.set(p, k, apk.scale(c) - sp * aqk);
                    m.set(q, k, sm * apk + aqk.scale(c));
                }
                m.set(p, q, C::new(T::zero(), T::zero()));
                m.set(q, p, C::new(T::zero(), T::zero()));
                let dp = m.get(p, p).re;
                let dq = m.get(q, q).re;
                m.set(p, p, real(dp));
                m.set(q, q, real(dq));
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m.get(i, i).re.partial_cmp(&m.get(j, j).re).unwrap());
    let eigenvalues: Vec<T> = order.iter().map(|&k| m.get(k, k).re).collect();
    let mut vecs = Operator::zeros(n);
    for (col, &k) in order.iter().enumerate() {
        let column: Vec<C<T>> = (0..n).map(|i| v.get(i, k)).collect();
        let norm = column.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt();
        let max = column.iter().map(|z| z.norm()).fold(T::zero(), T::max);
        let pivot = column
            .iter()
            .position(|z| z.norm() >= max * (T::one() - T::lit(1e-12)))
            .unwrap_or(0);
        let fix = column[pivot].conj() / (column[pivot].norm() * norm);
        for (i, z) in column.iter().enumerate() {
            let mut w = z * fix;
            if i == pivot {
                w = real(w.norm());
            }
            vecs.set(i, col, w);
        }
    }

    let mut decomp = SpectralDecomposition {
        eigenvalues,
        eigenvectors: vecs,
        degenerate: false,
        degeneracy_tol,
    };
    decomp.degenerate = n > 1 && decomp.min_relative_gap() < degeneracy_tol;
    decomp
}

/// `exp(-i H t)` via the spectral decomposition of `H`.
pub fn exact_propagator<T: Real>(h: &HermitianOperator<T>, t: T) -> Result<Operator<T>> {
    if t < T::zero() {
        return Err(Error::InvalidArgument("propagation time must be non-negative".into()));
    }
    Ok(spectral_decompose(h).map_spectrum(|e| cis(-e * t)))
}

/// Factor ordering for a split propagator.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SplitOrder {
    /// `exp(-i H1 eps) exp(-i H2 eps)` per slice.
    #[default]
    FirstOrder,
    /// `exp(-i H2 eps/2) exp(-i H1 eps) exp(-i H2 eps/2)` per slice.
    Symmetric,
}

/// First-order Trotter product `(exp(-i H1 eps) exp(-i H2 eps))^N`, `eps = T/N`.
pub fn trotter_propagator<T: Real>(
    h1: &HermitianOperator<T>,
    h2: &HermitianOperator<T>,
    t: T,
    slices: usize,
) -> Result<Operator<T>> {
    trotter_propagator_with(h1, h2, t, slices, SplitOrder::FirstOrder)
}

pub fn trotter_propagator_with<T: Real>(
    h1: &HermitianOperator<T>,
    h2: &HermitianOperator<T>,
    t: T,
    slices: usize,
    order: SplitOrder,
) -> Result<Operator<T>> {
    h2.op.check_dim(h1.dim())?;
    if slices == 0 {
        return Err(Error::InvalidArgument("slice count must be at least 1".into()));
    }
    let eps = t / T::count(slices);
    let step = match order {
        SplitOrder::FirstOrder => exact_propagator(h1, eps)?.matmul(&exact_propagator(h2, eps)?),
        SplitOrder::Symmetric => {
            let half = exact_propagator(h2, eps * T::lit(0.5))?;
            half.matmul(&exact_propagator(h1, eps)?).matmul(&half)
        }
    };
    Ok(power(&step, slices))
}

/// `m^n` by repeated multiplication in slice order.
pub(crate) fn power<T: Real>(m: &Operator<T>, n: usize) -> Operator<T> {
    let mut out = Operator::identity(m.dim());
    for _ in 0..n {
        out = m.matmul(&out);
    }
    out
}
