//! Transformations between the readout fields of two observables.
//!
//! With coupled evolutions `U_A(lambda)` and `U_B(lambda)` sharing a coupling
//! grid, the operator kernel
//!
//! ```text
//! K(n df) = (dlambda / 2 pi) sum_lambda exp(i lambda n df) U_B(lambda) U_A(lambda)^dagger
//! ```
//!
//! maps the `A` field onto the `B` field by circular convolution. The kernel
//! is periodic in `n` with the grid size, so it is stored as one operator per
//! residue class and the convolution is exact on the discrete grid.

use crate::error::{Error, Result};
use crate::hilbert::{exact_propagator, HermitianOperator, Operator, SpectralDecomposition, StateVector};
use crate::meters::{validate_axis, AmplitudeField, FAxis, FieldKind, LambdaEvolver, LambdaGrid};
use crate::pathsum::path_count;
use crate::scalar::{real, Real, C};
use crate::timegrid::{PathFunctionalSpec, SwitchingFunction, TimeGrid};
use rayon::prelude::*;

/// Operator-valued kernel `K(n df)` for `n` modulo the grid size.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorKernel<T> {
    axis: FAxis<T>,
    dim: usize,
    samples: Vec<Operator<T>>,
}

impl<T: Real> OperatorKernel<T> {
    pub fn axis(&self) -> &FAxis<T> {
        &self.axis
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `K(n df)`, with `n` taken modulo the grid size.
    pub fn at(&self, n: isize) -> &Operator<T> {
        let l = self.samples.len() as isize;
        &self.samples[n.rem_euclid(l) as usize]
    }

    pub fn samples(&self) -> &[Operator<T>] {
        &self.samples
    }

    /// `max_k || df sum_j K(j)^dagger K(j + k) - delta_k0 / df ||_max`, scaled by `df`.
    pub fn unitarity_residual(&self) -> T {
        let l = self.samples.len();
        let df = self.axis.df();
        let adj: Vec<Operator<T>> = self.samples.iter().map(Operator::adjoint).collect();
        (0..l)
            .into_par_iter()
            .map(|k| {
                let mut acc = Operator::zeros(self.dim);
                for j in 0..l {
                    acc = &acc + &adj[j].matmul(&self.samples[(j + k) % l]);
                }
                let mut s = acc.scale(real(df * df));
                if k == 0 {
                    s = &s - &Operator::identity(self.dim);
                }
                s.max_abs()
            })
            .collect::<Vec<_>>()
            .into_iter()
            .fold(T::zero(), T::max)
    }
}

/// Kernel between the `A` meter with switching `beta_a` and the `B` meter with
/// `beta_b`, on the readout axis `axis`.
pub fn finite_time_kernel<T: Real>(
    h: &HermitianOperator<T>,
    a: &HermitianOperator<T>,
    b: &HermitianOperator<T>,
    grid: &TimeGrid<T>,
    beta_a: &SwitchingFunction<T>,
    beta_b: &SwitchingFunction<T>,
    axis: &FAxis<T>,
) -> Result<OperatorKernel<T>> {
    let u = exact_propagator(h, grid.step())?;
    let spec_a = PathFunctionalSpec::single(*grid, beta_a.clone())?;
    let spec_b = PathFunctionalSpec::single(*grid, beta_b.clone())?;
    let ev_a = LambdaEvolver::from_slice_propagator(&u, a, &spec_a)?;
    let ev_b = LambdaEvolver::from_slice_propagator(&u, b, &spec_b)?;
    let (a_lo, a_hi) = spec_a.attainable_range(0, ev_a.levels());
    let (b_lo, b_hi) = spec_b.attainable_range(0, ev_b.levels());
    let origin = FAxis::new(axis.points(), axis.df(), T::zero())?;
    validate_axis(0, &origin, T::zero(), (a_hi - a_lo) + (b_hi - b_lo))?;

    let d = h.dim();
    let lgrid = LambdaGrid::single(origin);
    let data: Vec<Vec<C<T>>> = (0..axis.points())
        .into_par_iter()
        .map(|m| {
            let l = [axis.lambda(m)];
            let k = ev_b.evolve_operator(&l).matmul(&ev_a.evolve_operator(&l).adjoint());
            k.entries().to_vec()
        })
        .collect();
    let field = AmplitudeField::from_coupling_states(lgrid, d * d, data.concat(), FieldKind::Fine)?;
    let samples = (0..axis.points())
        .map(|n| {
            let e = field.state(n).into_amplitudes();
            let rows: Vec<Vec<C<T>>> = e.chunks(d).map(<[C<T>]>::to_vec).collect();
            Operator::from_rows(&rows)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(OperatorKernel {
        axis: *axis,
        dim: d,
        samples,
    })
}

/// `Phi_B(f) = sum_f' K(f - f') Phi_A(f') df`.
pub fn apply_kernel<T: Real>(kernel: &OperatorKernel<T>, field: &AmplitudeField<T>) -> Result<AmplitudeField<T>> {
    let axes = field.grid().axes();
    let same = axes.len() == 1
        && axes[0].points() == kernel.axis.points()
        && (axes[0].df() - kernel.axis.df()).abs() <= T::lit(1e-12) * kernel.axis.df();
    if !same {
        return Err(Error::GridMismatch("field and kernel use different readout grids".into()));
    }
    if field.dim() != kernel.dim {
        return Err(Error::DimensionMismatch {
            expected: kernel.dim,
            found: field.dim(),
        });
    }
    let l = kernel.samples.len();
    let df = real(kernel.axis.df());
    let inputs = field.states();
    let out: Vec<StateVector<T>> = (0..l)
        .into_par_iter()
        .map(|n| {
            let mut acc = StateVector::zeros(kernel.dim);
            for (np, s) in inputs.iter().enumerate() {
                acc = &acc + &kernel.at(n as isize - np as isize).apply(s);
            }
            acc.scale(df)
        })
        .collect();
    AmplitudeField::from_states(field.grid().clone(), &out, field.kind())
}

/// Components `<b|psi>` obtained through the `A` basis, with the deviation
/// from direct projection onto the `B` basis.
#[derive(Clone, Debug, PartialEq)]
pub struct BasisChange<T> {
    pub amplitudes: Vec<C<T>>,
    pub residual: T,
}

pub fn von_neumann_basis_change<T: Real>(
    psi: &StateVector<T>,
    decomp_a: &SpectralDecomposition<T>,
    decomp_b: &SpectralDecomposition<T>,
) -> Result<BasisChange<T>> {
    psi.check_dim(decomp_a.dim())?;
    psi.check_dim(decomp_b.dim())?;
    let n = psi.dim();
    let in_a: Vec<C<T>> = (0..n).map(|k| decomp_a.eigenvector(k).inner(psi)).collect();
    let amplitudes: Vec<C<T>> = (0..n)
        .map(|j| {
            let b = decomp_b.eigenvector(j);
            (0..n).fold(C::new(T::zero(), T::zero()), |acc, k| {
                acc + b.inner(&decomp_a.eigenvector(k)) * in_a[k]
            })
        })
        .collect();
    let residual = (0..n)
        .map(|j| (amplitudes[j] - decomp_b.eigenvector(j).inner(psi)).norm())
        .fold(T::zero(), T::max);
    Ok(BasisChange { amplitudes, residual })
}

/// `max | sum_paths U[a]^dagger U[a] - 1 |` by exhaustive enumeration with
/// dense projectors.
pub fn completeness_identity_check<T: Real>(
    h: &HermitianOperator<T>,
    decomp_a: &SpectralDecomposition<T>,
    grid: &TimeGrid<T>,
    cap: u64,
) -> Result<T> {
    let d = decomp_a.dim();
    let paths = path_count(d, grid.slices());
    if paths > cap as u128 {
        return Err(Error::CapExceeded { paths, cap });
    }
    let u = exact_propagator(h, grid.step())?;
    let steps: Vec<Operator<T>> = (0..d).map(|k| decomp_a.projector(k).matmul(&u)).collect();
    let mut total = Operator::zeros(d);
    let mut stack = vec![(Operator::identity(d), 0usize)];
    while let Some((op, depth)) = stack.pop() {
        if depth == grid.slices() {
            total = &total + &op.adjoint().matmul(&op);
            continue;
        }
        for s in steps.iter().rev() {
            stack.push((s.matmul(&op), depth + 1));
        }
    }
    Ok((&total - &Operator::identity(d)).max_abs())
}
