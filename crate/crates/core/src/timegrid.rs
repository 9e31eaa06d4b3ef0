//! Uniform time slicing of `[0, T]`, meter switching functions and the path
//! functionals `F[a] = sum_j w_j a(t_j)` they define.
//!
//! Paths are sampled at the left node `t_j = (j-1) eps` of each slice; the
//! endpoint value at `T` is carried by the last slice.

use crate::error::{Error, Result};
use crate::hilbert::SpectralDecomposition;
use crate::pathsum::EigenPath;
use crate::scalar::Real;

/// `N` equal slices of width `eps = T / N`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeGrid<T> {
    duration: T,
    slices: usize,
}

impl<T: Real> TimeGrid<T> {
    pub fn new(duration: T, slices: usize) -> Result<Self> {
        if slices == 0 {
            return Err(Error::InvalidArgument("slice count must be at least 1".into()));
        }
        if !(duration >= T::zero()) || !duration.is_finite() {
            return Err(Error::InvalidArgument("duration must be finite and non-negative".into()));
        }
        Ok(Self { duration, slices })
    }

    pub fn duration(&self) -> T {
        self.duration
    }

    pub fn slices(&self) -> usize {
        self.slices
    }

    pub fn step(&self) -> T {
        self.duration / T::count(self.slices)
    }

    /// `t_j = j * eps` for zero-based `j`.
    pub fn node(&self, j: usize) -> T {
        self.duration * T::count(j) / T::count(self.slices)
    }

    pub fn nodes(&self) -> Vec<T> {
        (0..self.slices).map(|j| self.node(j)).collect()
    }
}

/// Time profile `beta(t)` of a meter coupling.
#[derive(Clone, Debug, PartialEq)]
pub enum SwitchingFunction<T> {
    /// von Neumann meter firing at `at`.
    Impulse { at: T },
    /// Finite-time meter with constant rate `rate` (1/time).
    Constant { rate: T },
    /// Per-slice samples `beta(t_j)`.
    Sampled { values: Vec<T> },
}

impl<T: Real> SwitchingFunction<T> {
    /// `beta = 1/T`: the time-average meter.
    pub fn time_average(grid: &TimeGrid<T>) -> Self {
        Self::Constant {
            rate: T::one() / grid.duration(),
        }
    }

    pub fn is_impulse(&self) -> bool {
        matches!(self, Self::Impulse { .. })
    }

    /// `int beta^2 dt`, undefined for impulses.
    pub fn square_integral(&self, grid: &TimeGrid<T>) -> Result<T> {
        match self {
            Self::Impulse { .. } => Err(Error::ImpulseNotSquareIntegrable),
            Self::Constant { rate } => Ok(*rate * *rate * grid.duration()),
            Self::Sampled { values } => {
                check_len(values.len(), grid.slices())?;
                Ok(values.iter().map(|&b| b * b).sum::<T>() * grid.step())
            }
        }
    }

    pub fn scaled(&self, alpha: T) -> Self {
        match self {
            Self::Impulse { at } => Self::Impulse { at: *at },
            Self::Constant { rate } => Self::Constant { rate: *rate * alpha },
            Self::Sampled { values } => Self::Sampled {
                values: values.iter().map(|&v| v * alpha).collect(),
            },
        }
    }
}

fn check_len(found: usize, expected: usize) -> Result<()> {
    if found != expected {
        return Err(Error::LengthMismatch { expected, found });
    }
    Ok(())
}

/// Riemann weights `w_j` with `F[phi] ~ sum_j w_j phi(t_j)`.
///
/// An impulse puts unit weight on the slice containing `at`, with `at = T`
/// assigned to the last slice.
pub fn slice_weights<T: Real>(beta: &SwitchingFunction<T>, grid: &TimeGrid<T>) -> Result<Vec<T>> {
    let n = grid.slices();
    let eps = grid.step();
    match beta {
        SwitchingFunction::Impulse { at } => {
            let t = grid.duration();
            if !(*at >= T::zero() && *at <= t) {
                return Err(Error::ImpulseOutOfRange {
                    at: at.to_f64().unwrap_or(f64::NAN),
                    duration: t.to_f64().unwrap_or(f64::NAN),
                });
            }
            let pos = if t > T::zero() {
                (*at * T::count(n) / t).floor()
            } else {
                T::zero()
            };
            let slot = pos.to_usize().unwrap_or(0).min(n - 1);
            let mut w = vec![T::zero(); n];
            w[slot] = T::one();
            Ok(w)
        }
        SwitchingFunction::Constant { rate } => Ok(vec![*rate * eps; n]),
        SwitchingFunction::Sampled { values } => {
            check_len(values.len(), n)?;
            Ok(values.iter().map(|&v| v * eps).collect())
        }
    }
}

/// A set of meters sharing one time grid, with their slice weights.
#[derive(Clone, Debug, PartialEq)]
pub struct PathFunctionalSpec<T> {
    grid: TimeGrid<T>,
    betas: Vec<SwitchingFunction<T>>,
    weights: Vec<Vec<T>>,
}

impl<T: Real> PathFunctionalSpec<T> {
    pub fn new(grid: TimeGrid<T>, betas: Vec<SwitchingFunction<T>>) -> Result<Self> {
        if betas.is_empty() {
            return Err(Error::InvalidArgument("at least one meter is required".into()));
        }
        let weights = betas
            .iter()
            .map(|b| slice_weights(b, &grid))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { grid, betas, weights })
    }

    pub fn single(grid: TimeGrid<T>, beta: SwitchingFunction<T>) -> Result<Self> {
        Self::new(grid, vec![beta])
    }

    pub fn grid(&self) -> &TimeGrid<T> {
        &self.grid
    }

    pub fn betas(&self) -> &[SwitchingFunction<T>] {
        &self.betas
    }

    pub fn meters(&self) -> usize {
        self.betas.len()
    }

    /// Slice weights of meter `i`.
    pub fn weights(&self, i: usize) -> &[T] {
        &self.weights[i]
    }

    /// `sum_i lambda_i w_{i,j}`: the coupling folded into slice `j`.
    pub fn slice_coupling(&self, lambdas: &[T], j: usize) -> T {
        lambdas
            .iter()
            .zip(&self.weights)
            .map(|(&l, w)| l * w[j])
            .fold(T::zero(), |a, b| a + b)
    }

    /// Binning tolerance per meter: `1e-6 * max_j |w_j|`, floored at 1024 ulps
    /// for single precision.
    pub fn bin_tolerances(&self) -> Vec<T> {
        let rel = T::tol(1e-6, 1024.0);
        self.weights
            .iter()
            .map(|w| {
                let wmax = w.iter().map(|x| x.abs()).fold(T::zero(), T::max);
                if wmax > T::zero() {
                    wmax * rel
                } else {
                    rel
                }
            })
            .collect()
    }

    /// Smallest and largest attainable `F_i` when the path takes values in `levels`.
    pub fn attainable_range(&self, i: usize, levels: &[T]) -> (T, T) {
        let lo = levels.iter().copied().fold(T::infinity(), T::min);
        let hi = levels.iter().copied().fold(T::neg_infinity(), T::max);
        self.weights[i].iter().fold((T::zero(), T::zero()), |(a, b), &w| {
            let (x, y) = (w * lo, w * hi);
            (a + x.min(y), b + x.max(y))
        })
    }

    /// `F_i` for a path given by per-slice level indices.
    pub(crate) fn values_for_levels(&self, indices: &[usize], levels: &[T]) -> Vec<T> {
        self.weights
            .iter()
            .map(|w| {
                w.iter()
                    .zip(indices)
                    .map(|(&wj, &k)| wj * levels[k])
                    .fold(T::zero(), |a, b| a + b)
            })
            .collect()
    }
}

/// `F_j[a] = sum_slices w_slice a_{k(slice)}` for every meter.
pub fn functional_value<T: Real>(
    spec: &PathFunctionalSpec<T>,
    path: &EigenPath,
    decomp: &SpectralDecomposition<T>,
) -> Result<Vec<T>> {
    check_len(path.len(), spec.grid.slices())?;
    if let Some(&bad) = path.indices().iter().find(|&&k| k >= decomp.dim()) {
        return Err(Error::InvalidArgument(format!(
            "path index {bad} out of range for dimension {}",
            decomp.dim()
        )));
    }
    Ok(spec.values_for_levels(path.indices(), decomp.eigenvalues()))
}
