mod common;

use common::{c, evolve, expm};
use eigenpath::mensky::{record_evolve_trace, weak_meter_array, MenskyConfig, ReadoutRecord};
use eigenpath::meters::fourier_consistency_check;
use eigenpath::particle1d::{CoordinateFunctional, KineticScheme, LatticeWavefunction, ParticleEvolver, XGrid};
use eigenpath::pathsum::{enumerate_eigenpaths, path_count, relabel_by_function};
use eigenpath::transforms::{completeness_identity_check, von_neumann_basis_change};
use eigenpath::*;
use proptest::prelude::*;

fn hermitian(dim: usize) -> impl Strategy<Value = Hermitian> {
    prop::collection::vec(-1.0f64..1.0, dim * dim).prop_map(move |v| {
        let mut rows = vec![vec![c(0.0, 0.0); dim]; dim];
        for i in 0..dim {
            rows[i][i] = c(v[i * dim + i], 0.0);
            for j in i + 1..dim {
                let z = c(v[i * dim + j], v[j * dim + i]);
                rows[i][j] = z;
                rows[j][i] = z.conj();
            }
        }
        Hermitian::new(Matrix::from_rows(&rows).unwrap()).unwrap()
    })
}

fn state(dim: usize) -> impl Strategy<Value = State> {
    prop::collection::vec(-1.0f64..1.0, 2 * dim)
        .prop_filter("non-zero", |v| v.iter().any(|x| x.abs() > 1e-3))
        .prop_map(move |v| {
            let s = State::new((0..dim).map(|k| c(v[2 * k], v[2 * k + 1])).collect()).unwrap();
            let n = s.norm();
            s.scale(c(1.0 / n, 0.0))
        })
}

/// Diagonal observable with well separated integer levels.
fn levels(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(1i32..4, dim).prop_map(|gaps| {
        gaps.iter()
            .scan(0.0, |acc, &g| {
                *acc += f64::from(g);
                Some(*acc)
            })
            .collect()
    })
}

fn finite_time(n: usize) -> Meters {
    let g = Grid::new(1.0, n).unwrap();
    Meters::single(g, SwitchingFunction::time_average(&g)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn exact_propagator_is_unitary(h in hermitian(3), t in 0.0f64..3.0) {
        let u = exact_propagator(&h, t).unwrap();
        prop_assert!(u.unitarity_residual() <= 1e-10);
        prop_assert!(u.max_abs_diff(&expm(&h, t)) <= 1e-12);
    }

    #[test]
    fn decomposition_roundtrip(lv in levels(3), h in hermitian(3)) {
        // Rotate a diagonal operator with known spectrum into a random basis.
        let v = exact_propagator(&h, 1.0).unwrap();
        let diag = Matrix::from_diagonal(&lv.iter().map(|&x| c(x, 0.0)).collect::<Vec<_>>());
        let a = Hermitian::new(v.matmul(&diag).matmul(&v.adjoint())).unwrap();
        let d = spectral_decompose(&a);
        for (x, y) in d.eigenvalues().iter().zip(&lv) {
            prop_assert!((x - y).abs() < 1e-10);
        }
        let again = spectral_decompose(&Hermitian::new(d.reconstruct()).unwrap());
        for k in 0..3 {
            prop_assert!(again.projector(k).max_abs_diff(&d.projector(k)) < 1e-10);
        }
    }

    #[test]
    fn path_sum_completeness(h in hermitian(3), lv in levels(3), psi in state(3), n in 1usize..6) {
        let grid = Grid::new(1.0, n).unwrap();
        let d = spectral_decompose(&Hermitian::diagonal(&lv));
        let total = PathSum::new(&h, &d, &grid, &psi).unwrap().total().unwrap();
        prop_assert!(total.distance(&evolve(&h, 1.0, &psi)) <= 1e-12);
    }

    #[test]
    fn path_amplitudes_contract_and_bins_partition(h in hermitian(2), psi in state(2), n in 1usize..8) {
        let spec = finite_time(n);
        let d = spectral_decompose(&Hermitian::diagonal(&[1.0, 2.0]));
        let ps = PathSum::new(&h, &d, spec.grid(), &psi).unwrap();
        let paths = enumerate_eigenpaths(2, spec.grid(), 1 << 10).unwrap();
        prop_assert_eq!(paths.count() as u128, path_count(2, n));
        for path in enumerate_eigenpaths(2, spec.grid(), 1 << 10).unwrap() {
            prop_assert!(ps.amplitude(&path).unwrap().state.norm() <= psi.norm() * (1.0 + 1e-12));
        }
        let binned = ps.binned(&spec).unwrap();
        prop_assert!(binned.total().distance(&ps.total().unwrap()) <= 1e-12);
    }

    #[test]
    fn injective_relabel_keeps_states(h in hermitian(2), psi in state(2), n in 1usize..7) {
        let spec = finite_time(n);
        let d = spectral_decompose(&Hermitian::diagonal(&[1.0, 2.0]));
        let base = binned_measurement_amplitude(&h, &d, &psi, &spec).unwrap();
        let moved = relabel_by_function(&h, &d, &psi, &spec, |a| 3.0 * a - 1.0).unwrap();
        prop_assert_eq!(base.len(), moved.len());
        for (b, m) in base.bins().iter().zip(moved.bins()) {
            prop_assert_eq!(&b.state, &m.state);
        }
    }

    #[test]
    fn field_marginal_and_dual_route(h in hermitian(2), psi in state(2), n in 2usize..9) {
        let spec = finite_time(n);
        let a = Hermitian::diagonal(&[1.0, 2.0]);
        let axis = FAxis::for_lattice(64, spec.weights(0), &[1.0, 2.0], 1).unwrap();
        let field = amplitude_field(&h, &a, &spec, &LambdaGrid::single(axis), &psi).unwrap();
        prop_assert!(field.marginal().distance(&evolve(&h, 1.0, &psi)) <= 1e-10);
        let binned = binned_measurement_amplitude(&h, &spectral_decompose(&a), &psi, &spec).unwrap();
        for bin in binned.bins() {
            let s = field.state_at(&bin.f).unwrap().scale(c(axis.df(), 0.0));
            prop_assert!(s.distance(&bin.state) <= 1e-10);
        }
        prop_assert!(fourier_consistency_check(&field, &h, &a, &spec, &psi).unwrap() <= 1e-10);
    }

    #[test]
    fn kernels_conserve_or_scale_mass(h in hermitian(2), psi in state(2), width in 0.05f64..0.5, shift in -1.0f64..1.0, b in -0.05f64..0.05) {
        let spec = finite_time(6);
        let a = Hermitian::diagonal(&[1.0, 2.0]);
        let axis = FAxis::for_lattice(256, spec.weights(0), &[1.0, 2.0], 4).unwrap();
        let field = amplitude_field(&h, &a, &spec, &LambdaGrid::single(axis), &psi).unwrap();
        let gauss = CoarseGrainKernel::gaussian(&[width]);
        let coarse = coarse_grain(&field, &gauss).unwrap();
        let table = probabilities(&coarse).unwrap();
        let g2 = gauss.square_mass(field.grid()).unwrap().unwrap();
        prop_assert!((table.total_mass() - g2 * psi.norm_sqr()).abs() <= 1e-6);
        let w = coarse.total_weight();
        for k in [CoarseGrainKernel::shift(&[shift]), CoarseGrainKernel::quadratic_phase(&[b])] {
            let moved = coarse_grain(&coarse, &k).unwrap();
            prop_assert!((moved.total_weight() - w).abs() <= 1e-10 * w.max(1.0));
        }
    }

    #[test]
    fn mensky_monotone_and_equivalent(h in hermitian(2), psi in state(2), phi in prop::collection::vec(-1.0f64..4.0, 8), sigma in 0.1f64..5.0) {
        let grid = Grid::new(1.0, 8).unwrap();
        let a = Hermitian::diagonal(&[1.0, 2.0]);
        let rec = ReadoutRecord::new(grid, phi).unwrap();
        let cfg = MenskyConfig::new(sigma).unwrap();
        let (out, norms) = record_evolve_trace(&h, &a, &grid, &rec, &cfg, &psi).unwrap();
        let mut prev = psi.norm();
        for n in norms {
            prop_assert!(n <= prev * (1.0 + 1e-14));
            prev = n;
        }
        let meters = weak_meter_array(&h, &a, &grid, sigma, &psi, &rec).unwrap();
        prop_assert!(out.distance(&meters) <= 1e-13);
    }

    #[test]
    fn basis_change_preserves_norm(ha in hermitian(3), hb in hermitian(3), psi in state(3)) {
        let bc = von_neumann_basis_change(&psi, &spectral_decompose(&ha), &spectral_decompose(&hb)).unwrap();
        prop_assert!(bc.residual <= 1e-12);
        let n: f64 = bc.amplitudes.iter().map(|z| z.norm_sqr()).sum();
        prop_assert!((n - psi.norm_sqr()).abs() <= 1e-12);
    }

    #[test]
    fn history_completeness(h in hermitian(2), lv in levels(2), n in 1usize..7) {
        let d = spectral_decompose(&Hermitian::diagonal(&lv));
        let r = completeness_identity_check(&h, &d, &Grid::new(1.0, n).unwrap(), 1 << 8).unwrap();
        prop_assert!(r <= 1e-12);
    }

    #[test]
    fn particle_norm_is_conserved(x0 in -4.0f64..4.0, p0 in -2.0f64..2.0, lambda in -3.0f64..3.0) {
        let xg = XGrid::new(-16.0, 16.0, 128).unwrap();
        let psi = LatticeWavefunction::gaussian_packet(xg, 1.0, x0, 1.0, p0).unwrap();
        let grid = Grid::new(1.0, 32).unwrap();
        let v: Vec<f64> = xg.xs().iter().map(|x| 0.02 * x * x).collect();
        let cf = CoordinateFunctional::indicator(&xg, -1.0, 1.0, SwitchingFunction::time_average(&grid)).unwrap();
        let ev = ParticleEvolver::new(xg, 1.0, &v, grid, KineticScheme::Spectral, SplitOrder::FirstOrder).unwrap();
        let (_, norms) = ev.evolve_trace(&psi, lambda, &[1.0 / 32.0; 32], cf.values()).unwrap();
        let mut prev = psi.norm();
        for n in norms {
            prop_assert!((n - prev).abs() <= 1e-12);
            prev = n;
        }
    }
}
