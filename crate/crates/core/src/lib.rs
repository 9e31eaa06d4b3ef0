//! Eigenpath sums and meter-based measurement amplitudes for small quantum
//! systems.
//!
//! The engine is generic over the real scalar ([`Real`], implemented for `f32`
//! and `f64`). The aliases at the crate root fix it to `f64`.
//!
//! ```
//! use eigenpath::{spectral_decompose, Hermitian, PathSum, State, TimeGrid};
//!
//! let h = Hermitian::from_real_rows(&[vec![0.0, 0.5], vec![0.5, 1.0]]).unwrap();
//! let a = spectral_decompose(&Hermitian::diagonal(&[1.0, 2.0]));
//! let psi = State::basis(2, 0);
//! let grid = TimeGrid::new(1.0, 8).unwrap();
//! let total = PathSum::new(&h, &a, &grid, &psi).unwrap().total().unwrap();
//! assert!((total.norm() - 1.0).abs() < 1e-12);
//! ```

pub mod error;
pub mod hilbert;
pub mod mensky;
pub mod meters;
pub mod particle1d;
pub mod pathsum;
pub mod scalar;
pub mod timegrid;
pub mod transforms;

pub use error::{Error, Result};
pub use hilbert::{
    exact_propagator, spectral_decompose, trotter_propagator, HermitianOperator, Operator, SpectralDecomposition,
    SplitOrder, StateVector,
};
pub use meters::{
    amplitude_field, coarse_grain, lambda_evolve, probabilities, AmplitudeField, AxisKernel, CoarseGrainKernel, FAxis,
    FieldKind, LambdaGrid, ProbabilityTable,
};
pub use pathsum::{binned_measurement_amplitude, EigenPath, PathSum};
pub use scalar::{Real, C};
pub use timegrid::{PathFunctionalSpec, SwitchingFunction, TimeGrid};

/// Complex `f64`.
pub type Complex = C<f64>;
/// State vector over `f64`.
pub type State = StateVector<f64>;
/// Dense operator over `f64`.
pub type Matrix = Operator<f64>;
/// Hermitian operator over `f64`.
pub type Hermitian = HermitianOperator<f64>;
/// Spectral decomposition over `f64`.
pub type Spectrum = SpectralDecomposition<f64>;
/// Time grid over `f64`.
pub type Grid = TimeGrid<f64>;
/// Meter specification over `f64`.
pub type Meters = PathFunctionalSpec<f64>;
/// Readout field over `f64`.
pub type Field = AmplitudeField<f64>;
