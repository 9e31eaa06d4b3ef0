//! Continuous measurement along a readout record.
//!
//! A record `phi(t)` conditions the evolution through a non-Hermitian damping
//! term: each slice applies `exp(-i H eps)` and then
//! `exp(-(phi_j - A)^2 eps / sigma^2)`, diagonal in the eigenbasis of `A`.
//! The same state arises from a chain of weak von Neumann meters, one per
//! slice, each read out through a Gaussian of width `sigma / sqrt(eps)`.

use crate::error::{Error, Result};
use crate::hilbert::{exact_propagator, spectral_decompose, HermitianOperator, Operator, StateVector};
use crate::meters::{LambdaEvolver, LambdaGrid};
use crate::scalar::{real, Real, C};
use crate::timegrid::{PathFunctionalSpec, SwitchingFunction, TimeGrid};
use rayon::prelude::*;

/// Sampled pointer record `phi(t_j)` on a time grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ReadoutRecord<T> {
    grid: TimeGrid<T>,
    phi: Vec<T>,
}

impl<T: Real> ReadoutRecord<T> {
    pub fn new(grid: TimeGrid<T>, phi: Vec<T>) -> Result<Self> {
        if phi.len() != grid.slices() {
            return Err(Error::LengthMismatch {
                expected: grid.slices(),
                found: phi.len(),
            });
        }
        if phi.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("record samples must be finite".into()));
        }
        Ok(Self { grid, phi })
    }

    pub fn constant(grid: TimeGrid<T>, value: T) -> Result<Self> {
        Self::new(grid, vec![value; grid.slices()])
    }

    /// Record that follows the eigenvalue path `levels[path[j]]`.
    pub fn from_levels(grid: TimeGrid<T>, levels: &[T], path: &[usize]) -> Result<Self> {
        let phi = path
            .iter()
            .map(|&k| {
                levels
                    .get(k)
                    .copied()
                    .ok_or_else(|| Error::InvalidArgument(format!("level index {k} out of range")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(grid, phi)
    }

    pub fn grid(&self) -> &TimeGrid<T> {
        &self.grid
    }

    pub fn phi(&self) -> &[T] {
        &self.phi
    }
}

/// Width of the measurement tube.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MenskyConfig<T> {
    sigma: T,
}

impl<T: Real> MenskyConfig<T> {
    pub fn new(sigma: T) -> Result<Self> {
        if !(sigma > T::zero()) {
            return Err(Error::InvalidArgument("sigma must be positive".into()));
        }
        Ok(Self { sigma })
    }

    pub fn sigma(&self) -> T {
        self.sigma
    }
}

fn check_grid<T: Real>(grid: &TimeGrid<T>, record: &ReadoutRecord<T>) -> Result<()> {
    if record.grid.slices() != grid.slices() {
        return Err(Error::LengthMismatch {
            expected: grid.slices(),
            found: record.grid.slices(),
        });
    }
    Ok(())
}

/// Record-conditioned evolution together with the norm after every slice.
pub fn record_evolve_trace<T: Real>(
    h: &HermitianOperator<T>,
    a: &HermitianOperator<T>,
    grid: &TimeGrid<T>,
    record: &ReadoutRecord<T>,
    cfg: &MenskyConfig<T>,
    psi0: &StateVector<T>,
) -> Result<(StateVector<T>, Vec<T>)> {
    a.as_operator().check_dim(h.dim())?;
    psi0.check_dim(h.dim())?;
    check_grid(grid, record)?;
    let eps = grid.step();
    let decomp = spectral_decompose(a);
    let transfer = decomp.conjugate_into(&exact_propagator(h, eps)?);
    let levels = decomp.eigenvalues();
    let s2 = cfg.sigma * cfg.sigma;
    let mut coefs = decomp.to_eigenbasis(psi0.amplitudes());
    let mut norms = Vec::with_capacity(grid.slices());
    for &phi in &record.phi {
        coefs = transfer.apply_slice(&coefs);
        for (z, &ak) in coefs.iter_mut().zip(levels) {
            let d = phi - ak;
            *z = z.scale((-(d * d) * eps / s2).exp());
        }
        norms.push(coefs.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt());
    }
    Ok((StateVector::from_vec_unchecked(decomp.from_eigenbasis(&coefs)), norms))
}

/// `prod_j exp(-(phi_j - A)^2 eps / sigma^2) exp(-i H eps) |psi0>`.
pub fn record_evolve<T: Real>(
    h: &HermitianOperator<T>,
    a: &HermitianOperator<T>,
    grid: &TimeGrid<T>,
    record: &ReadoutRecord<T>,
    cfg: &MenskyConfig<T>,
    psi0: &StateVector<T>,
) -> Result<StateVector<T>> {
    record_evolve_trace(h, a, grid, record, cfg, psi0).map(|(s, _)| s)
}

/// The same state built from one Gaussian von Neumann meter per slice.
pub fn weak_meter_array<T: Real>(
    h: &HermitianOperator<T>,
    a: &HermitianOperator<T>,
    grid: &TimeGrid<T>,
    sigma: T,
    psi0: &StateVector<T>,
    record: &ReadoutRecord<T>,
) -> Result<StateVector<T>> {
    a.as_operator().check_dim(h.dim())?;
    psi0.check_dim(h.dim())?;
    check_grid(grid, record)?;
    let cfg = MenskyConfig::new(sigma)?;
    let eps = grid.step();
    let width = cfg.sigma / eps.sqrt();
    let pointer = |x: T| (-(x * x) / (width * width)).exp();
    let u = exact_propagator(h, eps)?;
    let decomp = spectral_decompose(a);
    let projectors: Vec<Operator<T>> = (0..decomp.dim()).map(|k| decomp.projector(k)).collect();
    let mut psi = psi0.clone();
    for &phi in &record.phi {
        psi = u.apply(&psi);
        let meter = projectors
            .iter()
            .zip(decomp.eigenvalues())
            .fold(Operator::zeros(decomp.dim()), |acc, (p, &ak)| {
                &acc + &p.scale(real(pointer(phi - ak)))
            });
        psi = meter.apply(&psi);
    }
    Ok(psi)
}

/// `<Psi_phi(T)|Psi_phi(T)>` for each record, in input order.
pub fn record_probability_scan<T: Real>(
    h: &HermitianOperator<T>,
    a: &HermitianOperator<T>,
    grid: &TimeGrid<T>,
    cfg: &MenskyConfig<T>,
    psi0: &StateVector<T>,
    records: &[ReadoutRecord<T>],
) -> Result<Vec<T>> {
    if records.is_empty() {
        return Err(Error::EmptyRecordSet);
    }
    records
        .par_iter()
        .map(|r| record_evolve(h, a, grid, r, cfg, psi0).map(|s| s.norm_sqr()))
        .collect()
}

/// Deviation between the tube-regularized and bare coupled evolutions.
///
/// The regularization multiplies `psi(lambda)` by
/// `exp(-lambda^2 sigma^2 int beta^2 / 4)`; for every `sigma` the result is
/// `max_lambda |1 - exp(..)| ||psi(lambda)||` over the coupling grid.
pub fn weak_limit_check<T: Real>(
    h: &HermitianOperator<T>,
    a: &HermitianOperator<T>,
    grid: &TimeGrid<T>,
    beta: &SwitchingFunction<T>,
    sigmas: &[T],
    psi0: &StateVector<T>,
    lgrid: &LambdaGrid<T>,
) -> Result<Vec<T>> {
    if beta.is_impulse() {
        return Err(Error::ImpulseNotSquareIntegrable);
    }
    if lgrid.meters() != 1 {
        return Err(Error::GridMismatch("weak-limit check uses a single meter axis".into()));
    }
    let spec = PathFunctionalSpec::single(*grid, beta.clone())?;
    let b2 = beta.square_integral(grid)?;
    let ev = LambdaEvolver::new(h, a, &spec)?;
    let dim = ev.dim();
    let states = ev.coupling_states(lgrid, psi0)?;
    let norms: Vec<T> = states
        .chunks(dim)
        .map(|s| s.iter().map(C::norm_sqr).sum::<T>().sqrt())
        .collect();
    let quarter = T::lit(0.25);
    Ok(sigmas
        .iter()
        .map(|&sigma| {
            norms
                .iter()
                .enumerate()
                .map(|(p, &n)| {
                    let l = lgrid.lambda_point(p)[0];
                    let x = l * l * sigma * sigma * b2 * quarter;
                    (-(-x).exp_m1()) * n
                })
                .fold(T::zero(), T::max)
        })
        .collect())
}
