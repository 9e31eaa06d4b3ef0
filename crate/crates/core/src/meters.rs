//! The lambda route to measurement amplitudes.
//!
//! For meter couplings `lambda_i beta_i(t) A` the system evolves as
//! `prod_j exp(-i c_j A) exp(-i H eps) |psi0>` with `c_j = sum_i lambda_i w_{i,j}`.
//! A discrete Fourier transform over `lambda` turns these states into pointer
//! readout amplitudes
//!
//! ```text
//! Phi(f) = (dlambda / 2 pi)^M sum_lambda exp(+i lambda.f) psi(lambda)
//! ```
//!
//! on a grid with `df * dlambda * L = 2 pi` per axis. With this normalization
//! `sum_f Phi(f) df^M` is exactly the `lambda = 0` state, i.e. the unperturbed
//! evolution, independent of where the readout values fall.
//!
//! Readout values that sit on grid nodes come out as discrete deltas of height
//! `amplitude / df`; values between nodes leak into neighbouring bins, so grids
//! should be aligned with the readout lattice ([`FAxis::for_lattice`]).

use crate::error::{Error, Result};
use crate::hilbert::{spectral_decompose, HermitianOperator, Operator, SpectralDecomposition, StateVector};
use crate::scalar::{cis, real, CompensatedSum, Real, C};
use crate::timegrid::PathFunctionalSpec;
use rayon::prelude::*;
use rustfft::FftPlanner;

/// Largest supported number of meters.
pub const MAX_METERS: usize = 3;

/// One pointer axis: `L` readout nodes `f_n = origin + n df` and the conjugate
/// couplings `lambda_m = (m - L/2) dlambda`, `dlambda = 2 pi / (L df)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FAxis<T> {
    points: usize,
    df: T,
    origin: T,
}

impl<T: Real> FAxis<T> {
    pub fn new(points: usize, df: T, origin: T) -> Result<Self> {
        if points < 2 || !points.is_power_of_two() {
            return Err(Error::InvalidArgument(format!(
                "axis size must be a power of two >= 2, got {points}"
            )));
        }
        if !(df > T::zero()) || !df.is_finite() || !origin.is_finite() {
            return Err(Error::InvalidArgument("readout spacing must be positive and finite".into()));
        }
        Ok(Self { points, df, origin })
    }

    /// Grid symmetric about `f = 0`.
    pub fn centered(points: usize, df: T) -> Result<Self> {
        Self::new(points, df, -T::count(points / 2) * df)
    }

    /// Grid with spacing `df` whose nodes include the lattice `f_min + k df`
    /// up to `f_max`, padded evenly on both sides.
    pub fn aligned(points: usize, df: T, f_min: T, f_max: T) -> Result<Self> {
        let span = ((f_max - f_min) / df).round().to_usize().unwrap_or(usize::MAX);
        if span.saturating_add(1) > points {
            return Err(Error::NyquistViolation {
                axis: 0,
                span: (f_max - f_min).to_f64().unwrap_or(f64::NAN),
                period: (T::count(points) * df).to_f64().unwrap_or(f64::NAN),
                suggested_points: (span + 2).next_power_of_two(),
            });
        }
        let pad = (points - span - 1) / 2;
        Self::new(points, df, f_min - T::count(pad) * df)
    }

    /// Grid aligned with the lattice of attainable readouts of a meter with
    /// slice weights `weights` on an observable with spectrum `levels`.
    ///
    /// When all non-zero weights are equal to `w` and the levels are integer
    /// multiples of a common gap `g` apart, readouts lie on the lattice
    /// `F_min + k w g`; the grid spacing is `w g / refine`. Otherwise the
    /// attainable range is spread over a quarter of the axis.
    pub fn for_lattice(points: usize, weights: &[T], levels: &[T], refine: usize) -> Result<Self> {
        let lo = levels.iter().copied().fold(T::infinity(), T::min);
        let hi = levels.iter().copied().fold(T::neg_infinity(), T::max);
        let (f_min, f_max) = weights.iter().fold((T::zero(), T::zero()), |(a, b), &w| {
            let (x, y) = (w * lo, w * hi);
            (a + x.min(y), b + x.max(y))
        });
        let spacing = lattice_spacing(weights, levels)
            .map(|s| s / T::count(refine.max(1)))
            .unwrap_or_else(|| {
                let span = f_max - f_min;
                if span > T::zero() {
                    span / T::count((points / 4).max(1))
                } else {
                    T::one() / T::count(refine.max(1))
                }
            });
        Self::aligned(points, spacing, f_min, f_max)
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn df(&self) -> T {
        self.df
    }

    pub fn origin(&self) -> T {
        self.origin
    }

    pub fn dlambda(&self) -> T {
        T::TAU() / (T::count(self.points) * self.df)
    }

    /// Readout period `L df`: values differing by it are indistinguishable.
    pub fn period(&self) -> T {
        T::count(self.points) * self.df
    }

    pub fn f(&self, n: usize) -> T {
        self.origin + T::count(n) * self.df
    }

    pub fn lambda(&self, m: usize) -> T {
        (T::count(m) - T::count(self.points / 2)) * self.dlambda()
    }

    pub fn f_values(&self) -> Vec<T> {
        (0..self.points).map(|n| self.f(n)).collect()
    }

    pub fn lambda_values(&self) -> Vec<T> {
        (0..self.points).map(|m| self.lambda(m)).collect()
    }

    /// Index of the node nearest to `f`.
    pub fn nearest(&self, f: T) -> Option<usize> {
        let pos = ((f - self.origin) / self.df).round();
        if pos < T::zero() {
            return None;
        }
        pos.to_usize().filter(|&n| n < self.points)
    }

    /// Same axis with spacing and origin scaled by `alpha`.
    pub fn rescaled(&self, alpha: T) -> Result<Self> {
        Self::new(self.points, self.df * alpha, self.origin * alpha)
    }
}

fn lattice_spacing<T: Real>(weights: &[T], levels: &[T]) -> Option<T> {
    let nonzero: Vec<T> = weights.iter().copied().filter(|w| *w != T::zero()).collect();
    let w = *nonzero.first()?;
    let rel = T::lit(1e-9);
    if nonzero.iter().any(|&x| (x - w).abs() > rel * w.abs()) {
        return None;
    }
    let mut sorted = levels.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    sorted.dedup_by(|a, b| (*a - *b).abs() <= rel * (a.abs() + b.abs() + T::one()));
    if sorted.len() < 2 {
        return Some(w.abs());
    }
    let gap = sorted.windows(2).map(|p| p[1] - p[0]).fold(T::infinity(), T::min);
    let commensurate = sorted.iter().all(|&a| {
        let q = (a - sorted[0]) / gap;
        (q - q.round()).abs() < T::lit(1e-9) * (T::one() + q.abs())
    });
    commensurate.then(|| w.abs() * gap)
}

/// Product readout grid for up to three meters.
#[derive(Clone, Debug, PartialEq)]
pub struct LambdaGrid<T> {
    axes: Vec<FAxis<T>>,
}

impl<T: Real> LambdaGrid<T> {
    pub fn new(axes: Vec<FAxis<T>>) -> Result<Self> {
        if axes.is_empty() || axes.len() > MAX_METERS {
            return Err(Error::InvalidArgument(format!(
                "between 1 and {MAX_METERS} meter axes are supported, got {}",
                axes.len()
            )));
        }
        Ok(Self { axes })
    }

    pub fn single(axis: FAxis<T>) -> Self {
        Self { axes: vec![axis] }
    }

    pub fn axes(&self) -> &[FAxis<T>] {
        &self.axes
    }

    pub fn meters(&self) -> usize {
        self.axes.len()
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.points).product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Quadrature weight `prod df_i`.
    pub fn cell(&self) -> T {
        self.axes.iter().map(|a| a.df).fold(T::one(), |a, b| a * b)
    }

    /// Per-axis indices of flat point `p` (axis 0 varies slowest).
    pub fn multi_index(&self, mut p: usize) -> Vec<usize> {
        let mut idx = vec![0; self.axes.len()];
        for (i, a) in self.axes.iter().enumerate().rev() {
            idx[i] = p % a.points;
            p /= a.points;
        }
        idx
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        self.axes.iter().zip(idx).fold(0, |p, (a, &n)| p * a.points + n)
    }

    pub fn f_point(&self, p: usize) -> Vec<T> {
        self.multi_index(p)
            .iter()
            .zip(&self.axes)
            .map(|(&n, a)| a.f(n))
            .collect()
    }

    pub fn lambda_point(&self, p: usize) -> Vec<T> {
        self.multi_index(p)
            .iter()
            .zip(&self.axes)
            .map(|(&m, a)| a.lambda(m))
            .collect()
    }

    /// Checks that every attainable readout is represented without aliasing.
    pub fn validate(&self, spec: &PathFunctionalSpec<T>, levels: &[T]) -> Result<()> {
        if spec.meters() != self.meters() {
            return Err(Error::GridMismatch(format!(
                "{} meters but {} readout axes",
                spec.meters(),
                self.meters()
            )));
        }
        for (i, axis) in self.axes.iter().enumerate() {
            let (lo, hi) = spec.attainable_range(i, levels);
            validate_axis(i, axis, lo, hi)?;
        }
        Ok(())
    }
}

pub(crate) fn validate_axis<T: Real>(i: usize, axis: &FAxis<T>, lo: T, hi: T) -> Result<()> {
    let span = hi - lo;
    let slack = axis.df * T::lit(1e-9);
    if span >= axis.period() - slack {
        return Err(Error::NyquistViolation {
            axis: i,
            span: span.to_f64().unwrap_or(f64::NAN),
            period: axis.period().to_f64().unwrap_or(f64::NAN),
            suggested_points: ((span / axis.df).ceil().to_usize().unwrap_or(0) + 2).next_power_of_two(),
        });
    }
    let (gmin, gmax) = (axis.f(0), axis.f(axis.points - 1));
    if lo < gmin - slack || hi > gmax + slack {
        return Err(Error::GridTooSmall {
            axis: i,
            f_min: lo.to_f64().unwrap_or(f64::NAN),
            f_max: hi.to_f64().unwrap_or(f64::NAN),
            grid_min: gmin.to_f64().unwrap_or(f64::NAN),
            grid_max: gmax.to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok(())
}

#[derive(Clone, Copy, Debug)]
enum Direction {
    /// lambda -> f
    ToReadout,
    /// f -> lambda
    ToCoupling,
}

/// Transforms point-major data (`data[p * dim + c]`) along every axis.
fn transform<T: Real>(grid: &LambdaGrid<T>, dim: usize, data: &mut [C<T>], dir: Direction) {
    let mut planner = FftPlanner::<T>::new();
    let shape: Vec<usize> = grid.axes.iter().map(|a| a.points).collect();
    for (ax, axis) in grid.axes.iter().enumerate() {
        let len = axis.points;
        let stride: usize = shape[ax + 1..].iter().product();
        let outer: usize = shape[..ax].iter().product();
        let fft = match dir {
            Direction::ToReadout => planner.plan_fft_inverse(len),
            Direction::ToCoupling => planner.plan_fft_forward(len),
        };
        let dl = axis.dlambda();
        let origin_phase: Vec<C<T>> = (0..len)
            .map(|m| {
                let phase = axis.lambda(m) * axis.origin;
                match dir {
                    Direction::ToReadout => cis(phase),
                    Direction::ToCoupling => cis(-phase).scale(axis.df),
                }
            })
            .collect();
        let alternating: Vec<T> = (0..len)
            .map(|n| if n % 2 == 0 { T::one() } else { -T::one() })
            .collect();
        let post_scale = dl / T::TAU();
        let mut line = vec![C::new(T::zero(), T::zero()); len];
        for o in 0..outer {
            for s in 0..stride {
                for c in 0..dim {
                    let at = |k: usize| ((o * len + k) * stride + s) * dim + c;
                    for k in 0..len {
                        line[k] = data[at(k)];
                    }
                    match dir {
                        Direction::ToReadout => {
                            for (z, ph) in line.iter_mut().zip(&origin_phase) {
                                *z = *z * ph;
                            }
                            fft.process(&mut line);
                            for (k, z) in line.iter_mut().enumerate() {
                                *z = z.scale(alternating[k] * post_scale);
                            }
                        }
                        Direction::ToCoupling => {
                            for (k, z) in line.iter_mut().enumerate() {
                                *z = z.scale(alternating[k]);
                            }
                            fft.process(&mut line);
                            for (z, ph) in line.iter_mut().zip(&origin_phase) {
                                *z = *z * ph;
                            }
                        }
                    }
                    for k in 0..len {
                        data[at(k)] = line[k];
                    }
                }
            }
        }
    }
}

/// Whether a field is maximally resolved or smoothed by a meter kernel.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FieldKind {
    Fine,
    Coarse,
}

/// Pointer-readout amplitudes: one state per readout grid node.
#[derive(Clone, Debug, PartialEq)]
pub struct AmplitudeField<T> {
    grid: LambdaGrid<T>,
    dim: usize,
    data: Vec<C<T>>,
    kind: FieldKind,
}

impl<T: Real> AmplitudeField<T> {
    /// Builds a field from states already expressed on the readout grid.
    pub fn from_states(grid: LambdaGrid<T>, states: &[StateVector<T>], kind: FieldKind) -> Result<Self> {
        if states.len() != grid.len() {
            return Err(Error::LengthMismatch {
                expected: grid.len(),
                found: states.len(),
            });
        }
        let dim = states.first().map_or(1, |s| s.dim());
        let mut data = Vec::with_capacity(dim * states.len());
        for s in states {
            s.check_dim(dim)?;
            data.extend_from_slice(s.amplitudes());
        }
        Ok(Self { grid, dim, data, kind })
    }

    /// Builds a field by transforming coupling-space states `psi(lambda_p)`.
    pub fn from_coupling_states(grid: LambdaGrid<T>, dim: usize, mut data: Vec<C<T>>, kind: FieldKind) -> Result<Self> {
        if data.len() != grid.len() * dim {
            return Err(Error::LengthMismatch {
                expected: grid.len() * dim,
                found: data.len(),
            });
        }
        transform(&grid, dim, &mut data, Direction::ToReadout);
        Ok(Self { grid, dim, data, kind })
    }

    pub fn grid(&self) -> &LambdaGrid<T> {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> FieldKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn state(&self, p: usize) -> StateVector<T> {
        StateVector::from_vec_unchecked(self.data[p * self.dim..(p + 1) * self.dim].to_vec())
    }

    pub fn states(&self) -> Vec<StateVector<T>> {
        (0..self.len()).map(|p| self.state(p)).collect()
    }

    pub fn f(&self, p: usize) -> Vec<T> {
        self.grid.f_point(p)
    }

    /// State at the node nearest to `f`, if `f` is on the grid.
    pub fn state_at(&self, f: &[T]) -> Option<StateVector<T>> {
        let idx: Option<Vec<usize>> = self.grid.axes.iter().zip(f).map(|(a, &x)| a.nearest(x)).collect();
        idx.map(|i| self.state(self.grid.flat_index(&i)))
    }

    /// `sum_f Phi(f) df^M`.
    pub fn marginal(&self) -> StateVector<T> {
        let mut acc = CompensatedSum::zeros(self.dim);
        for p in 0..self.len() {
            acc.add_slice(&self.data[p * self.dim..(p + 1) * self.dim]);
        }
        let cell = real(self.grid.cell());
        StateVector::from_vec_unchecked(acc.value().into_iter().map(|z| z * cell).collect())
    }

    /// `sum_f ||Phi(f)||^2 df^M`.
    pub fn total_weight(&self) -> T {
        self.data.iter().map(|z| z.norm_sqr()).sum::<T>() * self.grid.cell()
    }

    /// Coupling-space states `psi(lambda_p)`, point-major.
    pub fn to_coupling_states(&self) -> Vec<C<T>> {
        let mut data = self.data.clone();
        transform(&self.grid, self.dim, &mut data, Direction::ToCoupling);
        data
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(T::zero(), T::max)
    }
}

/// Precomputed coupled evolution for one `(H, A, meters)` setup.
#[derive(Clone, Debug)]
pub struct LambdaEvolver<T> {
    decomp: SpectralDecomposition<T>,
    spec: PathFunctionalSpec<T>,
    /// `V^dagger exp(-i H eps) V` in the eigenbasis of `A`.
    transfer: Operator<T>,
}

impl<T: Real> LambdaEvolver<T> {
    pub fn new(h: &HermitianOperator<T>, a: &HermitianOperator<T>, spec: &PathFunctionalSpec<T>) -> Result<Self> {
        a.as_operator().check_dim(h.dim())?;
        let u = crate::hilbert::exact_propagator(h, spec.grid().step())?;
        Self::from_slice_propagator(&u, a, spec)
    }

    pub fn from_slice_propagator(u_eps: &Operator<T>, a: &HermitianOperator<T>, spec: &PathFunctionalSpec<T>) -> Result<Self> {
        u_eps.check_dim(a.dim())?;
        let decomp = spectral_decompose(a);
        let transfer = decomp.conjugate_into(u_eps);
        Ok(Self {
            decomp,
            spec: spec.clone(),
            transfer,
        })
    }

    pub fn dim(&self) -> usize {
        self.decomp.dim()
    }

    pub fn spec(&self) -> &PathFunctionalSpec<T> {
        &self.spec
    }

    pub fn levels(&self) -> &[T] {
        self.decomp.eigenvalues()
    }

    fn evolve_coefs(&self, lambdas: &[T], mut coefs: Vec<C<T>>) -> Vec<C<T>> {
        let levels = self.decomp.eigenvalues();
        for j in 0..self.spec.grid().slices() {
            coefs = self.transfer.apply_slice(&coefs);
            let c = self.spec.slice_coupling(lambdas, j);
            if c != T::zero() {
                for (z, &a) in coefs.iter_mut().zip(levels) {
                    *z = *z * cis(-c * a);
                }
            }
        }
        coefs
    }

    /// `prod_j exp(-i c_j A) exp(-i H eps) |psi0>`.
    pub fn evolve(&self, lambdas: &[T], psi0: &StateVector<T>) -> Result<StateVector<T>> {
        psi0.check_dim(self.dim())?;
        if lambdas.len() != self.spec.meters() {
            return Err(Error::LengthMismatch {
                expected: self.spec.meters(),
                found: lambdas.len(),
            });
        }
        let coefs = self.evolve_coefs(lambdas, self.decomp.to_eigenbasis(psi0.amplitudes()));
        Ok(StateVector::from_vec_unchecked(self.decomp.from_eigenbasis(&coefs)))
    }

    /// The full coupled evolution operator.
    pub fn evolve_operator(&self, lambdas: &[T]) -> Operator<T> {
        let n = self.dim();
        let v = self.decomp.eigenvectors();
        let mut cols = Operator::zeros(n);
        for k in 0..n {
            let mut e = vec![C::new(T::zero(), T::zero()); n];
            e[k] = real(T::one());
            let out = self.evolve_coefs(lambdas, e);
            for (i, z) in out.into_iter().enumerate() {
                cols.set(i, k, z);
            }
        }
        v.matmul(&cols).matmul(&v.adjoint())
    }

    /// Coupling-space states on every node of `lgrid`, point-major.
    pub fn coupling_states(&self, lgrid: &LambdaGrid<T>, psi0: &StateVector<T>) -> Result<Vec<C<T>>> {
        psi0.check_dim(self.dim())?;
        let coefs0 = self.decomp.to_eigenbasis(psi0.amplitudes());
        let states: Vec<Vec<C<T>>> = (0..lgrid.len())
            .into_par_iter()
            .map(|p| {
                let coefs = self.evolve_coefs(&lgrid.lambda_point(p), coefs0.clone());
                self.decomp.from_eigenbasis(&coefs)
            })
            .collect();
        Ok(states.concat())
    }
}

/// Coupled evolution at fixed couplings `lambdas`.
pub fn lambda_evolve<T: Real>(
    h: &HermitianOperator<T>,
    a: &HermitianOperator<T>,
    spec: &PathFunctionalSpec<T>,
    lambdas: &[T],
    psi0: &StateVector<T>,
) -> Result<StateVector<T>> {
    LambdaEvolver::new(h, a, spec)?.evolve(lambdas, psi0)
}

/// Fine-grained readout field `Phi(f)`.
pub fn amplitude_field<T: Real>(
    h: &HermitianOperator<T>,
    a: &HermitianOperator<T>,
    spec: &PathFunctionalSpec<T>,
    lgrid: &LambdaGrid<T>,
    psi0: &StateVector<T>,
) -> Result<AmplitudeField<T>> {
    let ev = LambdaEvolver::new(h, a, spec)?;
    lgrid.validate(spec, ev.levels())?;
    let data = ev.coupling_states(lgrid, psi0)?;
    AmplitudeField::from_coupling_states(lgrid.clone(), ev.dim(), data, FieldKind::Fine)
}

/// Pointer kernel along one readout axis.
#[derive(Clone, Debug, PartialEq)]
pub enum AxisKernel<T> {
    /// `G(f) = exp(-f^2 / width^2)`.
    Gaussian { width: T },
    /// `G(f) = delta(f - offset)`: symbol `exp(-i lambda offset)`.
    Shift { offset: T },
    /// Symbol `exp(-i b lambda^2)`: freely spread pointer.
    QuadraticPhase { b: T },
    /// `G(n df)` for `n = -L/2 .. L/2 - 1`.
    Sampled { values: Vec<C<T>> },
}

impl<T: Real> AxisKernel<T> {
    pub fn is_unitary(&self) -> bool {
        matches!(self, Self::Shift { .. } | Self::QuadraticPhase { .. })
    }

    /// Samples on the centered difference grid, for square-integrable kernels.
    pub fn samples(&self, axis: &FAxis<T>) -> Result<Option<Vec<C<T>>>> {
        let half = axis.points / 2;
        match self {
            Self::Gaussian { width } => {
                if !(*width > T::zero()) {
                    return Err(Error::InvalidArgument("Gaussian width must be positive".into()));
                }
                Ok(Some(
                    (0..axis.points)
                        .map(|k| {
                            let f = (T::count(k) - T::count(half)) * axis.df;
                            real((-(f * f) / (*width * *width)).exp())
                        })
                        .collect(),
                ))
            }
            Self::Sampled { values } => {
                if values.len() != axis.points {
                    return Err(Error::LengthMismatch {
                        expected: axis.points,
                        found: values.len(),
                    });
                }
                Ok(Some(values.clone()))
            }
            Self::Shift { .. } | Self::QuadraticPhase { .. } => Ok(None),
        }
    }

    /// Coupling-space symbol `G(lambda_m)` on the axis.
    pub fn symbol(&self, axis: &FAxis<T>) -> Result<Vec<C<T>>> {
        match self {
            Self::Shift { offset } => Ok(axis.lambda_values().into_iter().map(|l| cis(-l * *offset)).collect()),
            Self::QuadraticPhase { b } => Ok(axis.lambda_values().into_iter().map(|l| cis(-*b * l * l)).collect()),
            _ => {
                let mut g = self.samples(axis)?.expect("square-integrable kernel");
                let centered = FAxis::centered(axis.points, axis.df)?;
                transform(&LambdaGrid::single(centered), 1, &mut g, Direction::ToCoupling);
                Ok(g)
            }
        }
    }

    /// `sum_n |G(n df)|^2 df`, if square integrable.
    pub fn square_mass(&self, axis: &FAxis<T>) -> Result<Option<T>> {
        Ok(self
            .samples(axis)?
            .map(|g| g.iter().map(|z| z.norm_sqr()).sum::<T>() * axis.df))
    }
}

/// Product kernel over all readout axes.
#[derive(Clone, Debug, PartialEq)]
pub struct CoarseGrainKernel<T> {
    axes: Vec<AxisKernel<T>>,
}

impl<T: Real> CoarseGrainKernel<T> {
    pub fn new(axes: Vec<AxisKernel<T>>) -> Self {
        Self { axes }
    }

    pub fn gaussian(widths: &[T]) -> Self {
        Self::new(widths.iter().map(|&width| AxisKernel::Gaussian { width }).collect())
    }

    pub fn shift(offsets: &[T]) -> Self {
        Self::new(offsets.iter().map(|&offset| AxisKernel::Shift { offset }).collect())
    }

    pub fn quadratic_phase(bs: &[T]) -> Self {
        Self::new(bs.iter().map(|&b| AxisKernel::QuadraticPhase { b }).collect())
    }

    pub fn axes(&self) -> &[AxisKernel<T>] {
        &self.axes
    }

    pub fn is_unitary(&self) -> bool {
        self.axes.iter().all(AxisKernel::is_unitary)
    }

    fn check(&self, grid: &LambdaGrid<T>) -> Result<()> {
        if self.axes.len() != grid.meters() {
            return Err(Error::GridMismatch(format!(
                "kernel has {} axes, field has {}",
                self.axes.len(),
                grid.meters()
            )));
        }
        Ok(())
    }

    /// Product symbol on every coupling-grid point.
    pub fn symbol(&self, grid: &LambdaGrid<T>) -> Result<Vec<C<T>>> {
        self.check(grid)?;
        let per_axis = self
            .axes
            .iter()
            .zip(grid.axes())
            .map(|(k, a)| k.symbol(a))
            .collect::<Result<Vec<_>>>()?;
        Ok((0..grid.len())
            .map(|p| {
                grid.multi_index(p)
                    .iter()
                    .zip(&per_axis)
                    .fold(real(T::one()), |acc, (&m, s)| acc * s[m])
            })
            .collect())
    }

    /// `sum_f |G(f)|^2 df^M`, `None` for unitary (non-normalizable) kernels.
    pub fn square_mass(&self, grid: &LambdaGrid<T>) -> Result<Option<T>> {
        self.check(grid)?;
        let mut total = T::one();
        for (k, a) in self.axes.iter().zip(grid.axes()) {
            match k.square_mass(a)? {
                Some(m) => total = total * m,
                None => return Ok(None),
            }
        }
        Ok(Some(total))
    }
}

/// Circular convolution of the field with the kernel along every axis,
/// applied as a product of coupling-space symbols.
pub fn coarse_grain<T: Real>(field: &AmplitudeField<T>, kernel: &CoarseGrainKernel<T>) -> Result<AmplitudeField<T>> {
    let symbol = kernel.symbol(&field.grid)?;
    let mut data = field.to_coupling_states();
    let dim = field.dim;
    for (p, s) in symbol.iter().enumerate() {
        for z in &mut data[p * dim..(p + 1) * dim] {
            *z = *z * s;
        }
    }
    let kind = if kernel.is_unitary() { field.kind } else { FieldKind::Coarse };
    AmplitudeField::from_coupling_states(field.grid.clone(), dim, data, kind)
}

/// Readout probabilities `W(f) = <Psi(f)|Psi(f)>` of a coarse-grained field.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbabilityTable<T> {
    grid: LambdaGrid<T>,
    weights: Vec<T>,
}

impl<T: Real> ProbabilityTable<T> {
    pub fn grid(&self) -> &LambdaGrid<T> {
        &self.grid
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn cell(&self) -> T {
        self.grid.cell()
    }

    /// `sum_f W(f) df^M`.
    pub fn total_mass(&self) -> T {
        self.weights.iter().copied().sum::<T>() * self.cell()
    }

    /// Mass of the nodes whose readout satisfies `pred`.
    pub fn mass_where(&self, pred: impl Fn(&[T]) -> bool) -> T {
        (0..self.weights.len())
            .filter(|&p| pred(&self.grid.f_point(p)))
            .map(|p| self.weights[p])
            .sum::<T>()
            * self.cell()
    }

    /// Table rescaled to unit total mass.
    pub fn normalized(&self) -> Self {
        let m = self.total_mass();
        Self {
            grid: self.grid.clone(),
            weights: self.weights.iter().map(|&w| w / m).collect(),
        }
    }
}

pub fn probabilities<T: Real>(field: &AmplitudeField<T>) -> Result<ProbabilityTable<T>> {
    if field.kind == FieldKind::Fine {
        return Err(Error::FineFieldNotNormalizable);
    }
    Ok(ProbabilityTable {
        grid: field.grid.clone(),
        weights: (0..field.len()).map(|p| field.state(p).norm_sqr()).collect(),
    })
}

/// Transforms the field back to couplings and returns the largest state
/// deviation from direct evolution at those couplings.
pub fn fourier_consistency_check<T: Real>(
    field: &AmplitudeField<T>,
    h: &HermitianOperator<T>,
    a: &HermitianOperator<T>,
    spec: &PathFunctionalSpec<T>,
    psi0: &StateVector<T>,
) -> Result<T> {
    let ev = LambdaEvolver::new(h, a, spec)?;
    if field.dim != ev.dim() {
        return Err(Error::DimensionMismatch {
            expected: ev.dim(),
            found: field.dim,
        });
    }
    let direct = ev.coupling_states(&field.grid, psi0)?;
    let back = field.to_coupling_states();
    let dim = field.dim;
    Ok((0..field.len())
        .map(|p| {
            back[p * dim..(p + 1) * dim]
                .iter()
                .zip(&direct[p * dim..(p + 1) * dim])
                .map(|(x, y)| (x - y).norm_sqr())
                .sum::<T>()
                .sqrt()
        })
        .fold(T::zero(), T::max))
}

/// `G(f) -> G(alpha f)` for Gaussian kernels.
pub fn resolution_rescale<T: Real>(kernel: &CoarseGrainKernel<T>, alpha: T) -> Result<CoarseGrainKernel<T>> {
    if !(alpha > T::zero()) {
        return Err(Error::NonPositiveAlpha(alpha.to_f64().unwrap_or(f64::NAN)));
    }
    let axes = kernel
        .axes
        .iter()
        .map(|k| match k {
            AxisKernel::Gaussian { width } => Ok(AxisKernel::Gaussian { width: *width / alpha }),
            _ => Err(Error::InvalidArgument("only Gaussian kernels can be rescaled".into())),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CoarseGrainKernel::new(axes))
}
