//! A particle on a periodic 1D lattice.
//!
//! Evolution uses the split-operator method: potential phases in position
//! space, kinetic phases in momentum space, and the meter phase
//! `exp(-i lambda w_j F(x))` after every slice. Measurement fields over `f`
//! follow from a sweep over `lambda` exactly as for finite-dimensional
//! systems. For tiny lattices the same amplitudes can be summed over all
//! position paths with the dense lattice Hamiltonian.

use crate::error::{Error, Result};
use crate::hilbert::{exact_propagator, spectral_decompose, HermitianOperator, Operator, SplitOrder, StateVector};
use crate::meters::{AmplitudeField, FAxis, FieldKind, LambdaGrid};
use crate::pathsum::{BinnedAmplitudes, PathSum};
use crate::scalar::{cis, real, Real, C};
use crate::timegrid::{PathFunctionalSpec, SwitchingFunction, TimeGrid};
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

/// Periodic lattice `x_i = x_min + i dx`, `dx = (x_max - x_min) / points`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct XGrid<T> {
    x_min: T,
    dx: T,
    points: usize,
}

impl<T: Real> XGrid<T> {
    pub fn new(x_min: T, x_max: T, points: usize) -> Result<Self> {
        if points < 2 || !points.is_power_of_two() {
            return Err(Error::InvalidArgument(format!(
                "lattice size must be a power of two >= 2, got {points}"
            )));
        }
        if !(x_max > x_min) || !x_min.is_finite() || !x_max.is_finite() {
            return Err(Error::InvalidArgument("lattice bounds must be finite with x_max > x_min".into()));
        }
        Ok(Self {
            x_min,
            dx: (x_max - x_min) / T::count(points),
            points,
        })
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn dx(&self) -> T {
        self.dx
    }

    pub fn length(&self) -> T {
        self.dx * T::count(self.points)
    }

    pub fn x(&self, i: usize) -> T {
        self.x_min + T::count(i) * self.dx
    }

    pub fn xs(&self) -> Vec<T> {
        (0..self.points).map(|i| self.x(i)).collect()
    }

    /// Lattice momenta in FFT order.
    pub fn momenta(&self) -> Vec<T> {
        let dk = T::TAU() / self.length();
        let n = self.points;
        (0..n)
            .map(|i| {
                if i < n / 2 {
                    T::count(i) * dk
                } else {
                    -(T::count(n - i) * dk)
                }
            })
            .collect()
    }

    fn check(&self, len: usize) -> Result<()> {
        if len != self.points {
            return Err(Error::GridMismatch(format!(
                "expected {} lattice samples, found {len}",
                self.points
            )));
        }
        Ok(())
    }
}

/// Wavefunction samples `psi(x_i)` with `sum |psi|^2 dx` as the norm.
#[derive(Clone, Debug, PartialEq)]
pub struct LatticeWavefunction<T> {
    xgrid: XGrid<T>,
    values: Vec<C<T>>,
    mass: T,
}

impl<T: Real> LatticeWavefunction<T> {
    pub fn new(xgrid: XGrid<T>, values: Vec<C<T>>, mass: T) -> Result<Self> {
        xgrid.check(values.len())?;
        if !(mass > T::zero()) {
            return Err(Error::InvalidArgument("mass must be positive".into()));
        }
        if values.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidArgument("wavefunction samples must be finite".into()));
        }
        Ok(Self { xgrid, values, mass })
    }

    /// Normalized packet `exp(-(x - x0)^2 / (4 s^2) + i p0 x)`.
    pub fn gaussian_packet(xgrid: XGrid<T>, mass: T, x0: T, width: T, p0: T) -> Result<Self> {
        let four = T::lit(4.0);
        let values: Vec<C<T>> = xgrid
            .xs()
            .into_iter()
            .map(|x| {
                let d = x - x0;
                cis(p0 * x).scale((-(d * d) / (four * width * width)).exp())
            })
            .collect();
        let mut psi = Self::new(xgrid, values, mass)?;
        let n = psi.norm();
        psi.values.iter_mut().for_each(|z| *z = z.unscale(n));
        Ok(psi)
    }

    pub fn xgrid(&self) -> &XGrid<T> {
        &self.xgrid
    }

    pub fn values(&self) -> &[C<T>] {
        &self.values
    }

    pub fn mass(&self) -> T {
        self.mass
    }

    pub fn norm_sqr(&self) -> T {
        self.values.iter().map(C::norm_sqr).sum::<T>() * self.xgrid.dx
    }

    pub fn norm(&self) -> T {
        self.norm_sqr().sqrt()
    }

    /// `sum x |psi|^2 dx / norm^2`.
    pub fn mean_position(&self) -> T {
        let m: T = self
            .values
            .iter()
            .enumerate()
            .map(|(i, z)| self.xgrid.x(i) * z.norm_sqr())
            .sum::<T>()
            * self.xgrid.dx;
        m / self.norm_sqr()
    }

    /// Weight `sum |psi|^2 dx` on the `margin` outermost sites at each end.
    pub fn edge_weight(&self, margin: usize) -> T {
        let n = self.values.len();
        let m = margin.min(n / 2);
        self.values[..m]
            .iter()
            .chain(&self.values[n - m..])
            .map(C::norm_sqr)
            .sum::<T>()
            * self.xgrid.dx
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm())
            .fold(T::zero(), T::max)
    }

    /// Samples as a plain vector (no `sqrt(dx)` scaling).
    pub fn to_state(&self) -> StateVector<T> {
        StateVector::from_vec_unchecked(self.values.clone())
    }
}

/// Discretization of `p^2 / 2m`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum KineticScheme {
    /// `k^2 / 2m` on the lattice momenta.
    #[default]
    Spectral,
    /// Three-point periodic finite difference: `(1 - cos k dx) / (m dx^2)`.
    FiniteDifference,
}

impl KineticScheme {
    fn energy<T: Real>(self, k: T, mass: T, dx: T) -> T {
        match self {
            Self::Spectral => k * k / (T::lit(2.0) * mass),
            Self::FiniteDifference => (T::one() - (k * dx).cos()) / (mass * dx * dx),
        }
    }
}

/// A coordinate functional `F = int beta(t) F(x(t)) dt`.
#[derive(Clone, Debug, PartialEq)]
pub struct CoordinateFunctional<T> {
    values: Vec<T>,
    beta: SwitchingFunction<T>,
}

impl<T: Real> CoordinateFunctional<T> {
    pub fn new(xgrid: &XGrid<T>, values: Vec<T>, beta: SwitchingFunction<T>) -> Result<Self> {
        xgrid.check(values.len())?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("functional values must be finite".into()));
        }
        Ok(Self { values, beta })
    }

    /// Indicator of `lo <= x < hi`.
    pub fn indicator(xgrid: &XGrid<T>, lo: T, hi: T, beta: SwitchingFunction<T>) -> Result<Self> {
        let values = xgrid
            .xs()
            .into_iter()
            .map(|x| if x >= lo && x < hi { T::one() } else { T::zero() })
            .collect();
        Self::new(xgrid, values, beta)
    }

    /// `F(x) = x`.
    pub fn position(xgrid: &XGrid<T>, beta: SwitchingFunction<T>) -> Result<Self> {
        Self::new(xgrid, xgrid.xs(), beta)
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn beta(&self) -> &SwitchingFunction<T> {
        &self.beta
    }

    fn range(&self) -> (T, T) {
        self.values
            .iter()
            .fold((T::infinity(), T::neg_infinity()), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }
}

/// Precomputed split-operator stepping for one lattice, potential and time grid.
pub struct ParticleEvolver<T: Real> {
    xgrid: XGrid<T>,
    grid: TimeGrid<T>,
    mass: T,
    order: SplitOrder,
    potential_phase: Vec<C<T>>,
    kinetic_phase: Vec<C<T>>,
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
}

impl<T: Real> ParticleEvolver<T> {
    pub fn new(
        xgrid: XGrid<T>,
        mass: T,
        potential: &[T],
        grid: TimeGrid<T>,
        scheme: KineticScheme,
        order: SplitOrder,
    ) -> Result<Self> {
        xgrid.check(potential.len())?;
        let eps = grid.step();
        let v_step = match order {
            SplitOrder::FirstOrder => eps,
            SplitOrder::Symmetric => eps / T::lit(2.0),
        };
        let n = T::count(xgrid.points);
        let potential_phase = potential.iter().map(|&v| cis(-v * v_step)).collect();
        let kinetic_phase = xgrid
            .momenta()
            .into_iter()
            .map(|k| cis(-scheme.energy(k, mass, xgrid.dx) * eps) / n)
            .collect();
        let mut planner = FftPlanner::new();
        Ok(Self {
            xgrid,
            grid,
            mass,
            order,
            potential_phase,
            kinetic_phase,
            forward: planner.plan_fft_forward(xgrid.points),
            inverse: planner.plan_fft_inverse(xgrid.points),
        })
    }

    pub fn xgrid(&self) -> &XGrid<T> {
        &self.xgrid
    }

    pub fn grid(&self) -> &TimeGrid<T> {
        &self.grid
    }

    fn kinetic(&self, psi: &mut [C<T>]) {
        self.forward.process(psi);
        for (z, p) in psi.iter_mut().zip(&self.kinetic_phase) {
            *z = *z * p;
        }
        self.inverse.process(psi);
    }

    fn potential(&self, psi: &mut [C<T>]) {
        for (z, p) in psi.iter_mut().zip(&self.potential_phase) {
            *z = *z * p;
        }
    }

    /// One slice without the meter: `exp(-i T eps) exp(-i V eps)` or the
    /// symmetric variant.
    pub fn step(&self, psi: &mut [C<T>]) {
        self.potential(psi);
        self.kinetic(psi);
        if self.order == SplitOrder::Symmetric {
            self.potential(psi);
        }
    }

    fn check(&self, psi: &LatticeWavefunction<T>) -> Result<()> {
        if psi.xgrid != self.xgrid {
            return Err(Error::GridMismatch("wavefunction lives on a different lattice".into()));
        }
        Ok(())
    }

    /// Evolution over the whole grid with meter coupling `lambda`, also
    /// returning the norm after every slice.
    pub fn evolve_trace(
        &self,
        psi: &LatticeWavefunction<T>,
        lambda: T,
        weights: &[T],
        f: &[T],
    ) -> Result<(LatticeWavefunction<T>, Vec<T>)> {
        self.check(psi)?;
        self.xgrid.check(f.len())?;
        let mut values = psi.values.clone();
        let mut norms = Vec::with_capacity(self.grid.slices());
        for &w in weights {
            self.step(&mut values);
            let c = lambda * w;
            if c != T::zero() {
                for (z, &fx) in values.iter_mut().zip(f) {
                    *z = *z * cis(-c * fx);
                }
            }
            norms.push(values.iter().map(C::norm_sqr).sum::<T>().sqrt() * self.xgrid.dx.sqrt());
        }
        let out = LatticeWavefunction {
            xgrid: self.xgrid,
            values,
            mass: self.mass,
        };
        Ok((out, norms))
    }

    pub fn evolve(
        &self,
        psi: &LatticeWavefunction<T>,
        lambda: T,
        cf: &CoordinateFunctional<T>,
    ) -> Result<LatticeWavefunction<T>> {
        let spec = PathFunctionalSpec::single(self.grid, cf.beta.clone())?;
        self.evolve_trace(psi, lambda, spec.weights(0), &cf.values).map(|(p, _)| p)
    }

    /// Readout field `<x|Phi(T|f)>` on `axis`.
    pub fn amplitude_field(
        &self,
        psi0: &LatticeWavefunction<T>,
        cf: &CoordinateFunctional<T>,
        axis: &FAxis<T>,
    ) -> Result<AmplitudeField<T>> {
        self.check(psi0)?;
        let spec = PathFunctionalSpec::single(self.grid, cf.beta.clone())?;
        let (lo, hi) = cf.range();
        let lgrid = LambdaGrid::single(*axis);
        lgrid.validate(&spec, &[lo, hi])?;
        let w = spec.weights(0);
        let states: Vec<Vec<C<T>>> = (0..axis.points())
            .into_par_iter()
            .map(|m| {
                self.evolve_trace(psi0, axis.lambda(m), w, &cf.values)
                    .map(|(p, _)| p.values)
            })
            .collect::<Result<_>>()?;
        AmplitudeField::from_coupling_states(lgrid, self.xgrid.points, states.concat(), FieldKind::Fine)
    }
}

/// First-order spectral split-step evolution with meter coupling `lambda`.
pub fn split_step_evolve<T: Real>(
    psi: &LatticeWavefunction<T>,
    potential: &[T],
    grid: &TimeGrid<T>,
    lambda: T,
    cf: &CoordinateFunctional<T>,
) -> Result<LatticeWavefunction<T>> {
    ParticleEvolver::new(
        psi.xgrid,
        psi.mass,
        potential,
        *grid,
        KineticScheme::Spectral,
        SplitOrder::FirstOrder,
    )?
    .evolve(psi, lambda, cf)
}

/// Readout field of a coordinate functional, using spectral first-order steps.
pub fn coordinate_amplitude_field<T: Real>(
    psi0: &LatticeWavefunction<T>,
    potential: &[T],
    grid: &TimeGrid<T>,
    cf: &CoordinateFunctional<T>,
    axis: &FAxis<T>,
) -> Result<AmplitudeField<T>> {
    ParticleEvolver::new(
        psi0.xgrid,
        psi0.mass,
        potential,
        *grid,
        KineticScheme::Spectral,
        SplitOrder::FirstOrder,
    )?
    .amplitude_field(psi0, cf, axis)
}

/// Periodic finite-difference Hamiltonian `-(1/2m) d^2/dx^2 + V`.
pub fn dense_hamiltonian<T: Real>(xgrid: &XGrid<T>, mass: T, potential: &[T]) -> Result<HermitianOperator<T>> {
    xgrid.check(potential.len())?;
    let n = xgrid.points;
    let t = T::one() / (mass * xgrid.dx * xgrid.dx);
    let mut rows = vec![vec![T::zero(); n]; n];
    for i in 0..n {
        rows[i][i] = t + potential[i];
        let off = -t / T::lit(2.0);
        let next = (i + 1) % n;
        let prev = (i + n - 1) % n;
        rows[i][next] = rows[i][next] + off;
        rows[i][prev] = rows[i][prev] + off;
    }
    HermitianOperator::from_real_rows(&rows)
}

/// Dense slice propagator for the lattice oracle.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SliceFactor {
    /// `exp(-i H eps)` of the full finite-difference Hamiltonian.
    #[default]
    Exact,
    /// `exp(-i T eps) exp(-i V eps)`, matching the split-step evolution.
    Split,
}

/// The chosen slice propagator for the finite-difference lattice Hamiltonian.
pub fn dense_slice_propagator<T: Real>(
    xgrid: &XGrid<T>,
    mass: T,
    potential: &[T],
    grid: &TimeGrid<T>,
    factor: SliceFactor,
) -> Result<Operator<T>> {
    let eps = grid.step();
    match factor {
        SliceFactor::Exact => exact_propagator(&dense_hamiltonian(xgrid, mass, potential)?, eps),
        SliceFactor::Split => {
            let kin = exact_propagator(&dense_hamiltonian(xgrid, mass, &vec![T::zero(); xgrid.points])?, eps)?;
            let pot: Vec<C<T>> = potential.iter().map(|&v| cis(-v * eps)).collect();
            Ok(kin.matmul(&Operator::from_diagonal(&pot)))
        }
    }
}

/// `U_eps^N psi0` with the dense slice propagator.
pub fn dense_lattice_evolve<T: Real>(
    psi0: &LatticeWavefunction<T>,
    potential: &[T],
    grid: &TimeGrid<T>,
    factor: SliceFactor,
) -> Result<StateVector<T>> {
    let u = dense_slice_propagator(&psi0.xgrid, psi0.mass, potential, grid, factor)?;
    Ok((0..grid.slices()).fold(psi0.to_state(), |s, _| u.apply(&s)))
}

fn lattice_path_sum<T: Real>(
    psi0: &LatticeWavefunction<T>,
    potential: &[T],
    grid: &TimeGrid<T>,
    factor: SliceFactor,
    cap: u64,
) -> Result<PathSum<T>> {
    let u = dense_slice_propagator(&psi0.xgrid, psi0.mass, potential, grid, factor)?;
    let position = spectral_decompose(&HermitianOperator::diagonal(&psi0.xgrid.xs()));
    Ok(PathSum::from_slice_propagator(&u, &position, grid, &psi0.to_state())?.with_cap(cap))
}

/// Largest lattice accepted by the position-path oracle.
pub const MAX_TINY_SITES: usize = 8;

fn check_tiny<T: Real>(psi0: &LatticeWavefunction<T>, grid: &TimeGrid<T>) -> Result<()> {
    if psi0.xgrid.points > MAX_TINY_SITES || grid.slices() > MAX_TINY_SITES {
        return Err(Error::InvalidArgument(format!(
            "position-path sums are limited to {MAX_TINY_SITES} sites and {MAX_TINY_SITES} slices"
        )));
    }
    Ok(())
}

/// Sum over all position paths `x_{k_1} .. x_{k_N}` of the products of
/// lattice matrix elements.
pub fn tiny_lattice_feynman_sum<T: Real>(
    psi0: &LatticeWavefunction<T>,
    potential: &[T],
    grid: &TimeGrid<T>,
    factor: SliceFactor,
    cap: u64,
) -> Result<StateVector<T>> {
    check_tiny(psi0, grid)?;
    lattice_path_sum(psi0, potential, grid, factor, cap)?.total()
}

/// Position paths binned by the value of a coordinate functional.
pub fn tiny_lattice_binned<T: Real>(
    psi0: &LatticeWavefunction<T>,
    potential: &[T],
    grid: &TimeGrid<T>,
    cf: &CoordinateFunctional<T>,
    factor: SliceFactor,
    cap: u64,
) -> Result<BinnedAmplitudes<T>> {
    check_tiny(psi0, grid)?;
    let spec = PathFunctionalSpec::single(*grid, cf.beta.clone())?;
    lattice_path_sum(psi0, potential, grid, factor, cap)?.binned_with_levels(&spec, &cf.values)
}

/// Bin amplitudes `Phi(f) df` of a particle field, with `x` samples kept as is.
pub fn bin_amplitude<T: Real>(field: &AmplitudeField<T>, p: usize) -> StateVector<T> {
    field.state(p).scale(real(field.grid().cell()))
}
