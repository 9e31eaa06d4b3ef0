//! Dispatch from a validated config to the compute modules.

use std::collections::BTreeMap;

use eigenpath::mensky::{record_evolve_trace, record_probability_scan, weak_limit_check, weak_meter_array, MenskyConfig, ReadoutRecord};
use eigenpath::meters::fourier_consistency_check;
use eigenpath::particle1d::{
    bin_amplitude, dense_lattice_evolve, tiny_lattice_binned, tiny_lattice_feynman_sum, CoordinateFunctional, KineticScheme,
    LatticeWavefunction, ParticleEvolver, SliceFactor, XGrid,
};
use eigenpath::pathsum::{path_count, DEFAULT_PATH_CAP};
use eigenpath::transforms::{apply_kernel, completeness_identity_check, finite_time_kernel, von_neumann_basis_change};
use eigenpath::{
    amplitude_field, coarse_grain, exact_propagator, probabilities, spectral_decompose, AxisKernel, CoarseGrainKernel,
    Complex, FAxis, Field, Grid, Hermitian, LambdaGrid, Matrix, Meters, PathSum, Spectrum, SplitOrder, State,
    SwitchingFunction,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::bundle::{Metadata, ResultBundle, Table};
use crate::config::{
    ComplexVector, ExperimentConfig, GridSpec, KernelSpec, KineticSpec, MatrixSpec, MeterSpec, ObservableSpec,
    PotentialSpec, RecordSpec, Route, SwitchingSpec, SystemSpec,
};
use crate::error::{AtPath, CliError};

/// Residual names and their default tolerances.
pub const DEFAULT_TOLERANCES: &[(&str, f64)] = &[
    ("basis_change", 1e-12),
    ("bin_partition", 1e-12),
    ("boundary_weight", 1e-10),
    ("completeness_identity", 1e-12),
    ("feynman_vs_dense", 1e-12),
    ("feynman_vs_field", 1e-9),
    ("fourier_consistency", 1e-10),
    ("jump_partition", 1e-12),
    ("kernel_map", 1e-8),
    ("kernel_unitarity", 1e-8),
    ("marginal_completeness", 1e-10),
    ("mass_identity", 1e-6),
    ("meter_array_equivalence", 1e-13),
    ("norm_drift", 1e-10),
    ("norm_monotone", 1e-14),
    ("outside_mass", 1e-6),
    ("path_completeness", 1e-12),
    ("paths_vs_lambda", 1e-10),
    ("sum_rule", 1e-8),
    ("weak_limit", 1e-2),
];

/// Largest `dim^N` for which the dense history-completeness check runs.
const COMPLETENESS_PATHS: u128 = 1 << 14;

struct Tolerances(BTreeMap<&'static str, f64>);

impl Tolerances {
    fn from_config(overrides: &BTreeMap<String, f64>) -> Result<Self, CliError> {
        let mut map: BTreeMap<&'static str, f64> = DEFAULT_TOLERANCES.iter().copied().collect();
        for (name, &tol) in overrides {
            let path = format!("tolerances.{name}");
            let Some(slot) = map.iter_mut().find(|(k, _)| **k == name.as_str()).map(|(_, v)| v) else {
                return Err(CliError::config(path, "unknown residual name"));
            };
            if !(tol.is_finite() && tol >= 0.0) {
                return Err(CliError::config(path, "tolerance must be finite and non-negative"));
            }
            *slot = tol;
        }
        Ok(Self(map))
    }

    fn get(&self, name: &str) -> f64 {
        self.0[name]
    }
}

struct Report<'a> {
    bundle: ResultBundle,
    tol: &'a Tolerances,
}

impl Report<'_> {
    fn residual(&mut self, name: &str, value: f64) {
        let tol = self.tol.get(name);
        self.bundle.residual(name, value, tol);
    }

    fn table(&mut self, name: &str, table: Table) {
        self.bundle.table(name, table);
    }
}

pub fn run(cfg: &ExperimentConfig) -> Result<ResultBundle, CliError> {
    let tol = Tolerances::from_config(&cfg.tolerances)?;
    let metadata = Metadata {
        schema: cfg.schema,
        name: cfg.name.clone(),
        route: cfg.route.as_str().to_string(),
        engine: format!("eigenpath {}", env!("CARGO_PKG_VERSION")),
        config: serde_json::to_value(cfg).expect("config serializes"),
    };
    let mut report = Report {
        bundle: ResultBundle::new(metadata),
        tol: &tol,
    };
    let grid = Grid::new(cfg.time.duration, cfg.time.slices).at("time")?;
    if cfg.meters.len() > eigenpath::meters::MAX_METERS {
        return Err(CliError::config(
            "meters",
            format!("at most {} meters are supported", eigenpath::meters::MAX_METERS),
        ));
    }
    match &cfg.system {
        SystemSpec::Particle1d { .. } => run_particle(cfg, grid, &mut report)?,
        _ => run_levels(cfg, grid, &mut report)?,
    }
    Ok(report.bundle)
}

fn c(re: f64, im: f64) -> Complex {
    Complex::new(re, im)
}

fn hermitian_from(spec: &MatrixSpec, dim: usize, rng: &mut ChaCha8Rng, path: &str) -> Result<Hermitian, CliError> {
    let h = match spec {
        MatrixSpec::Diagonal(d) => Ok(Hermitian::diagonal(d)),
        MatrixSpec::Real(rows) => Hermitian::from_real_rows(rows),
        MatrixSpec::Complex { real, imag } => {
            if real.len() != imag.len() || real.iter().zip(imag).any(|(r, i)| r.len() != i.len()) {
                return Err(CliError::config(path, "real and imag parts differ in shape"));
            }
            let rows: Vec<Vec<Complex>> = real
                .iter()
                .zip(imag)
                .map(|(r, i)| r.iter().zip(i).map(|(&x, &y)| c(x, y)).collect())
                .collect();
            Matrix::from_rows(&rows).and_then(Hermitian::new)
        }
        MatrixSpec::Random { scale } => {
            if !(scale.is_finite() && *scale > 0.0) {
                return Err(CliError::config(format!("{path}.random.scale"), "must be positive"));
            }
            let mut rows = vec![vec![c(0.0, 0.0); dim]; dim];
            for i in 0..dim {
                rows[i][i] = c(rng.gen_range(-scale..*scale), 0.0);
                for j in i + 1..dim {
                    let z = c(rng.gen_range(-scale..*scale), rng.gen_range(-scale..*scale));
                    rows[i][j] = z;
                    rows[j][i] = z.conj();
                }
            }
            Matrix::from_rows(&rows).and_then(Hermitian::new)
        }
    }
    .at(path)?;
    if h.dim() != dim {
        return Err(CliError::config(path, format!("expected a {dim}x{dim} matrix, found {0}x{0}", h.dim())));
    }
    Ok(h)
}

fn matrix_observable(spec: &ObservableSpec) -> Option<MatrixSpec> {
    Some(match spec {
        ObservableSpec::Diagonal(d) => MatrixSpec::Diagonal(d.clone()),
        ObservableSpec::Real(r) => MatrixSpec::Real(r.clone()),
        ObservableSpec::Complex { real, imag } => MatrixSpec::Complex {
            real: real.clone(),
            imag: imag.clone(),
        },
        ObservableSpec::Random { scale } => MatrixSpec::Random { scale: *scale },
        _ => return None,
    })
}

fn complex_vector(v: &ComplexVector, dim: usize, path: &str) -> Result<Vec<Complex>, CliError> {
    let zeros = vec![0.0; v.real.len()];
    let imag = v.imag.as_ref().unwrap_or(&zeros);
    if v.real.len() != dim || imag.len() != dim {
        return Err(CliError::config(path, format!("expected {dim} components")));
    }
    Ok(v.real.iter().zip(imag).map(|(&x, &y)| c(x, y)).collect())
}

fn switching(spec: &SwitchingSpec, grid: &Grid) -> SwitchingFunction<f64> {
    match spec {
        SwitchingSpec::Impulse { at } => SwitchingFunction::Impulse { at: *at },
        SwitchingSpec::Average => SwitchingFunction::time_average(grid),
        SwitchingSpec::Constant { rate } => SwitchingFunction::Constant { rate: *rate },
        SwitchingSpec::Sampled { values } => SwitchingFunction::Sampled { values: values.clone() },
    }
}

fn meter_spec(meters: &[MeterSpec], grid: Grid) -> Result<Meters, CliError> {
    let betas = meters.iter().map(|m| switching(&m.switching, &grid)).collect();
    Meters::new(grid, betas).at("meters")
}

fn axis_for(g: &GridSpec, spec: &Meters, i: usize, levels: &[f64]) -> Result<FAxis<f64>, CliError> {
    let path = format!("meters[{i}].grid");
    match (g.df, g.origin) {
        (Some(df), Some(origin)) => FAxis::new(g.points, df, origin),
        (Some(df), None) => {
            let (lo, hi) = spec.attainable_range(i, levels);
            FAxis::aligned(g.points, df, lo, hi)
        }
        (None, Some(_)) => return Err(CliError::config(path, "`origin` requires `df`")),
        (None, None) => FAxis::for_lattice(g.points, spec.weights(i), levels, g.refine.unwrap_or(1)),
    }
    .at(&path)
}

fn lambda_grid(meters: &[MeterSpec], spec: &Meters, levels: &[f64]) -> Result<LambdaGrid<f64>, CliError> {
    let axes = meters
        .iter()
        .enumerate()
        .map(|(i, m)| axis_for(&m.grid, spec, i, levels))
        .collect::<Result<Vec<_>, _>>()?;
    let lgrid = LambdaGrid::new(axes).at("meters")?;
    lgrid.validate(spec, levels).at("meters")?;
    Ok(lgrid)
}

fn kernel(meters: &[MeterSpec]) -> Result<Option<CoarseGrainKernel<f64>>, CliError> {
    let given = meters.iter().filter(|m| m.kernel.is_some()).count();
    if given == 0 {
        return Ok(None);
    }
    if given != meters.len() {
        return Err(CliError::config("meters", "either every meter or no meter has a kernel"));
    }
    let axes = meters
        .iter()
        .map(|m| match m.kernel.as_ref().expect("checked above") {
            KernelSpec::Gaussian { width } => AxisKernel::Gaussian { width: *width },
            KernelSpec::Shift { offset } => AxisKernel::Shift { offset: *offset },
            KernelSpec::QuadraticPhase { b } => AxisKernel::QuadraticPhase { b: *b },
        })
        .collect();
    Ok(Some(CoarseGrainKernel::new(axes)))
}

fn f_columns(meters: usize) -> Vec<String> {
    if meters == 1 {
        vec!["f".into()]
    } else {
        (0..meters).map(|i| format!("f_{i}")).collect()
    }
}

fn amplitude_columns(meters: usize, dim: usize) -> Vec<String> {
    let mut cols = f_columns(meters);
    for k in 0..dim {
        cols.push(format!("re_{k}"));
        cols.push(format!("im_{k}"));
    }
    cols
}

fn push_amplitudes(row: &mut Vec<f64>, s: &State) {
    for z in s.amplitudes() {
        row.push(z.re);
        row.push(z.im);
    }
}

fn field_table(field: &Field) -> Table {
    let mut t = Table::new(amplitude_columns(field.grid().meters(), field.dim()));
    for p in 0..field.len() {
        let mut row = field.f(p);
        push_amplitudes(&mut row, &field.state(p));
        t.push(row);
    }
    t
}

fn state_table(s: &State) -> Table {
    let mut t = Table::new(["k", "re", "im"]);
    for (k, z) in s.amplitudes().iter().enumerate() {
        t.push(vec![k as f64, z.re, z.im]);
    }
    t
}

struct Levels {
    h: Hermitian,
    a: Hermitian,
    decomp: Spectrum,
    psi0: State,
    grid: Grid,
    cap: u64,
}

fn run_levels(cfg: &ExperimentConfig, grid: Grid, report: &mut Report) -> Result<(), CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (h, dim) = match &cfg.system {
        SystemSpec::Qubit { energies, coupling } => {
            let rows = [vec![energies[0], *coupling], vec![*coupling, energies[1]]];
            (Hermitian::from_real_rows(&rows).at("system")?, 2)
        }
        SystemSpec::Nlevel { dim, hamiltonian } => {
            if *dim == 0 {
                return Err(CliError::config("system.dim", "must be positive"));
            }
            (hermitian_from(hamiltonian, *dim, &mut rng, "system.hamiltonian")?, *dim)
        }
        SystemSpec::Particle1d { .. } => unreachable!("particle systems use their own runner"),
    };
    let obs = cfg
        .observable
        .as_ref()
        .ok_or_else(|| CliError::config("observable", "missing field"))?;
    let obs = matrix_observable(obs)
        .ok_or_else(|| CliError::config("observable", "level systems need a matrix observable"))?;
    let a = hermitian_from(&obs, dim, &mut rng, "observable")?;
    let decomp = spectral_decompose(&a);
    decomp.require_nondegenerate().at("observable")?;
    let init = cfg
        .initial_state
        .as_ref()
        .ok_or_else(|| CliError::config("initial_state", "missing field"))?;
    let psi0 = State::new(complex_vector(init, dim, "initial_state")?).at("initial_state")?;
    let n = psi0.norm();
    if !(n > 0.0) {
        return Err(CliError::config("initial_state", "state must be non-zero"));
    }
    let lv = Levels {
        h,
        a,
        decomp,
        psi0: psi0.scale(c(1.0 / n, 0.0)),
        grid,
        cap: cfg.path_cap.unwrap_or(DEFAULT_PATH_CAP),
    };

    let meters = if cfg.meters.is_empty() {
        None
    } else {
        Some(meter_spec(&cfg.meters, grid)?)
    };
    let need_meters = || CliError::config("meters", format!("the {} route needs at least one meter", cfg.route.as_str()));
    match cfg.route {
        Route::Paths => {
            paths(&lv, meters.as_ref(), report)?;
        }
        Route::Lambda => {
            let spec = meters.as_ref().ok_or_else(need_meters)?;
            lambda(&lv, cfg, spec, report)?;
        }
        Route::Mensky => mensky(&lv, cfg, meters.as_ref(), report, &mut rng)?,
        Route::Transform => transform(&lv, cfg, meters.as_ref(), report, &mut rng)?,
        Route::Crosscheck => {
            let spec = meters.as_ref().ok_or_else(need_meters)?;
            let binned = paths(&lv, Some(spec), report)?.expect("meters given");
            let field = lambda(&lv, cfg, spec, report)?;
            let cell = c(field.grid().cell(), 0.0);
            let mut worst: f64 = 0.0;
            for bin in binned.bins() {
                let s = field
                    .state_at(&bin.f)
                    .ok_or_else(|| CliError::config("meters", "a path-sum bin falls off the readout grid"))?;
                worst = worst.max(s.scale(cell).distance(&bin.state));
            }
            report.residual("paths_vs_lambda", worst);
            if cfg.mensky.is_some() {
                mensky(&lv, cfg, meters.as_ref(), report, &mut rng)?;
            }
        }
    }
    Ok(())
}

fn paths(
    lv: &Levels,
    spec: Option<&Meters>,
    report: &mut Report,
) -> Result<Option<eigenpath::pathsum::BinnedAmplitudes<f64>>, CliError> {
    let ps = PathSum::new(&lv.h, &lv.decomp, &lv.grid, &lv.psi0)?.with_cap(lv.cap);
    let total = ps.total()?;
    let exact = exact_propagator(&lv.h, lv.grid.duration())?.apply(&lv.psi0);
    report.residual("path_completeness", total.distance(&exact));
    report.table("final_state", state_table(&total));

    let classes = ps.by_jumps()?;
    let mut t = Table::new(amplitude_columns(1, lv.h.dim()).into_iter().skip(1).collect::<Vec<_>>());
    t.columns.insert(0, "jumps".into());
    let mut sum = State::zeros(lv.h.dim());
    for (n, s) in &classes {
        let mut row = vec![*n as f64];
        push_amplitudes(&mut row, s);
        t.push(row);
        sum = &sum + s;
    }
    report.residual("jump_partition", sum.distance(&total));
    report.table("jump_classes", t);

    let Some(spec) = spec else {
        return Ok(None);
    };
    let binned = ps.binned(spec)?;
    let mut t = Table::new(amplitude_columns(spec.meters(), lv.h.dim()));
    for bin in binned.bins() {
        let mut row = bin.f.clone();
        push_amplitudes(&mut row, &bin.state);
        t.push(row);
    }
    report.residual("bin_partition", binned.total().distance(&total));
    report.table("bins", t);
    Ok(Some(binned))
}

fn lambda(lv: &Levels, cfg: &ExperimentConfig, spec: &Meters, report: &mut Report) -> Result<Field, CliError> {
    let lgrid = lambda_grid(&cfg.meters, spec, lv.decomp.eigenvalues())?;
    let field = amplitude_field(&lv.h, &lv.a, spec, &lgrid, &lv.psi0)?;
    let exact = exact_propagator(&lv.h, lv.grid.duration())?.apply(&lv.psi0);
    report.residual("marginal_completeness", field.marginal().distance(&exact));
    report.residual(
        "fourier_consistency",
        fourier_consistency_check(&field, &lv.h, &lv.a, spec, &lv.psi0)?,
    );
    report.table("field", field_table(&field));

    if let Some(kernel) = kernel(&cfg.meters)? {
        let coarse = coarse_grain(&field, &kernel).at("meters")?;
        report.table("coarse_field", field_table(&coarse));
        if let Some(g2) = kernel.square_mass(field.grid()).at("meters")? {
            let table = probabilities(&coarse)?;
            let mut t = Table::new(f_columns(spec.meters()));
            t.columns.push("W".into());
            for (p, &w) in table.weights().iter().enumerate() {
                let mut row = lgrid.f_point(p);
                row.push(w);
                t.push(row);
            }
            report.residual("mass_identity", (table.total_mass() - g2).abs() / g2.max(1.0));
            report.table("probabilities", t);
        }
    }
    Ok(field)
}

fn records(lv: &Levels, cfg: &ExperimentConfig, rng: &mut ChaCha8Rng) -> Result<Vec<ReadoutRecord<f64>>, CliError> {
    let ms = cfg.mensky.as_ref().expect("caller checks");
    let levels = lv.decomp.eigenvalues();
    let mut out = Vec::new();
    for (i, r) in ms.records.iter().enumerate() {
        let path = format!("mensky.records[{i}]");
        out.push(
            match r {
                RecordSpec::Constant(v) => ReadoutRecord::constant(lv.grid, *v),
                RecordSpec::Samples(s) => ReadoutRecord::new(lv.grid, s.clone()),
                RecordSpec::Levels(idx) => ReadoutRecord::from_levels(lv.grid, levels, idx),
            }
            .at(&path)?,
        );
    }
    let (lo, hi) = (levels[0] - 1.0, levels[levels.len() - 1] + 1.0);
    for _ in 0..ms.random_records {
        let phi = (0..lv.grid.slices()).map(|_| rng.gen_range(lo..hi)).collect();
        out.push(ReadoutRecord::new(lv.grid, phi).at("mensky.random_records")?);
    }
    Ok(out)
}

fn mensky(
    lv: &Levels,
    cfg: &ExperimentConfig,
    spec: Option<&Meters>,
    report: &mut Report,
    rng: &mut ChaCha8Rng,
) -> Result<(), CliError> {
    let ms = cfg
        .mensky
        .as_ref()
        .ok_or_else(|| CliError::config("mensky", "missing field"))?;
    let mcfg = MenskyConfig::new(ms.sigma).at("mensky.sigma")?;
    let recs = records(lv, cfg, rng)?;
    let weights = record_probability_scan(&lv.h, &lv.a, &lv.grid, &mcfg, &lv.psi0, &recs).at("mensky.records")?;
    let checks: Vec<(f64, f64)> = recs
        .par_iter()
        .map(|r| {
            let (out, norms) = record_evolve_trace(&lv.h, &lv.a, &lv.grid, r, &mcfg, &lv.psi0)?;
            let rise = norms
                .iter()
                .scan(lv.psi0.norm(), |prev, &n| {
                    let d = n - *prev;
                    *prev = n;
                    Some(d)
                })
                .fold(0.0, f64::max);
            let meters = weak_meter_array(&lv.h, &lv.a, &lv.grid, ms.sigma, &lv.psi0, r)?;
            Ok((rise, out.distance(&meters)))
        })
        .collect::<eigenpath::Result<_>>()?;
    let mut t = Table::new(["record", "norm_sqr"]);
    for (i, w) in weights.iter().enumerate() {
        t.push(vec![i as f64, *w]);
    }
    report.table("records", t);
    report.residual("norm_monotone", checks.iter().map(|x| x.0).fold(0.0, f64::max));
    report.residual("meter_array_equivalence", checks.iter().map(|x| x.1).fold(0.0, f64::max));

    if !ms.weak_limit_sigmas.is_empty() {
        let spec = spec.ok_or_else(|| CliError::config("meters", "the weak-limit scan needs a meter"))?;
        let beta = &spec.betas()[0];
        let axis = axis_for(&cfg.meters[0].grid, spec, 0, lv.decomp.eigenvalues())?;
        let devs = weak_limit_check(
            &lv.h,
            &lv.a,
            &lv.grid,
            beta,
            &ms.weak_limit_sigmas,
            &lv.psi0,
            &LambdaGrid::single(axis),
        )
        .at("mensky.weak_limit_sigmas")?;
        let mut t = Table::new(["sigma", "deviation"]);
        for (s, d) in ms.weak_limit_sigmas.iter().zip(&devs) {
            t.push(vec![*s, *d]);
        }
        let smallest = ms
            .weak_limit_sigmas
            .iter()
            .zip(&devs)
            .min_by(|x, y| x.0.total_cmp(y.0))
            .map_or(0.0, |x| *x.1);
        report.residual("weak_limit", smallest);
        report.table("weak_limit", t);
    }
    Ok(())
}

fn transform(
    lv: &Levels,
    cfg: &ExperimentConfig,
    spec: Option<&Meters>,
    report: &mut Report,
    rng: &mut ChaCha8Rng,
) -> Result<(), CliError> {
    let ts = cfg
        .transform
        .as_ref()
        .ok_or_else(|| CliError::config("transform", "missing field"))?;
    let spec_a = match spec {
        Some(s) if s.meters() == 1 => s,
        _ => return Err(CliError::config("meters", "the transform route needs exactly one meter")),
    };
    let target = matrix_observable(&ts.target)
        .ok_or_else(|| CliError::config("transform.target", "expected a matrix observable"))?;
    let b = hermitian_from(&target, lv.h.dim(), rng, "transform.target")?;
    let decomp_b = spectral_decompose(&b);
    decomp_b.require_nondegenerate().at("transform.target")?;
    let beta_a = spec_a.betas()[0].clone();
    let beta_b = ts
        .target_switching
        .as_ref()
        .map_or_else(|| beta_a.clone(), |s| switching(s, &lv.grid));
    let spec_b = Meters::single(lv.grid, beta_b.clone()).at("transform.target_switching")?;

    // One axis has to hold both readout ranges.
    let mut levels: Vec<f64> = lv.decomp.eigenvalues().to_vec();
    levels.extend_from_slice(decomp_b.eigenvalues());
    let axis = axis_for(&cfg.meters[0].grid, spec_a, 0, &levels)?;
    let lgrid = LambdaGrid::single(axis);
    lgrid.validate(spec_a, lv.decomp.eigenvalues()).at("meters")?;
    lgrid.validate(&spec_b, decomp_b.eigenvalues()).at("transform")?;

    let fa = amplitude_field(&lv.h, &lv.a, spec_a, &lgrid, &lv.psi0)?;
    let fb = amplitude_field(&lv.h, &b, &spec_b, &lgrid, &lv.psi0)?;
    let k = finite_time_kernel(&lv.h, &lv.a, &b, &lv.grid, &beta_a, &beta_b, &axis).at("meters[0].grid")?;
    let mapped = apply_kernel(&k, &fa)?;
    report.residual("kernel_map", mapped.max_abs_diff(&fb));
    report.residual("kernel_unitarity", k.unitarity_residual());
    report.residual(
        "basis_change",
        von_neumann_basis_change(&lv.psi0, &lv.decomp, &decomp_b)?.residual,
    );
    if path_count(lv.h.dim(), lv.grid.slices()) <= COMPLETENESS_PATHS {
        let r = completeness_identity_check(&lv.h, &lv.decomp, &lv.grid, COMPLETENESS_PATHS as u64)?;
        report.residual("completeness_identity", r);
    }
    report.table("field_a", field_table(&fa));
    report.table("field_b", field_table(&fb));
    report.table("mapped_field", field_table(&mapped));
    Ok(())
}

fn run_particle(cfg: &ExperimentConfig, grid: Grid, report: &mut Report) -> Result<(), CliError> {
    let SystemSpec::Particle1d {
        mass,
        x_min,
        x_max,
        points,
        potential,
        packet,
        kinetic,
        symmetric_split,
    } = &cfg.system
    else {
        unreachable!("level systems use their own runner")
    };
    let xg = XGrid::new(*x_min, *x_max, *points).at("system")?;
    let xs = xg.xs();
    let v: Vec<f64> = match potential {
        PotentialSpec::Zero => vec![0.0; *points],
        PotentialSpec::Barrier { lo, hi, height } => {
            xs.iter().map(|x| if x >= lo && x <= hi { *height } else { 0.0 }).collect()
        }
        PotentialSpec::Harmonic { omega, center } => {
            xs.iter().map(|x| 0.5 * omega * omega * (x - center).powi(2)).collect()
        }
        PotentialSpec::Samples(s) if s.len() == *points => s.clone(),
        PotentialSpec::Samples(_) => {
            return Err(CliError::config("system.potential", format!("expected {points} samples")))
        }
    };
    let psi0 = match (packet, &cfg.initial_state) {
        (Some(p), None) => LatticeWavefunction::gaussian_packet(xg, *mass, p.x0, p.width, p.p0).at("system.packet")?,
        (None, Some(init)) => {
            let values = complex_vector(init, *points, "initial_state")?;
            let raw = LatticeWavefunction::new(xg, values, *mass).at("initial_state")?;
            let n = raw.norm();
            if !(n > 0.0) {
                return Err(CliError::config("initial_state", "state must be non-zero"));
            }
            let values = raw.values().iter().map(|z| z / n).collect();
            LatticeWavefunction::new(xg, values, *mass).at("initial_state")?
        }
        _ => {
            return Err(CliError::config(
                "system.packet",
                "give exactly one of `system.packet` and `initial_state`",
            ))
        }
    };
    let cap = cfg.path_cap.unwrap_or(DEFAULT_PATH_CAP);
    let final_table = |state: &[Complex], report: &mut Report| {
        let mut t = Table::new(["x", "re", "im"]);
        for (x, z) in xs.iter().zip(state) {
            t.push(vec![*x, z.re, z.im]);
        }
        report.table("final_state", t);
    };

    let dense_check = |report: &mut Report| -> Result<State, CliError> {
        let sum = tiny_lattice_feynman_sum(&psi0, &v, &grid, SliceFactor::Exact, cap).at("system.points")?;
        let dense = dense_lattice_evolve(&psi0, &v, &grid, SliceFactor::Exact)?;
        report.residual("feynman_vs_dense", sum.distance(&dense));
        Ok(sum)
    };
    if cfg.route == Route::Paths {
        let sum = dense_check(report)?;
        final_table(sum.amplitudes(), report);
        return Ok(());
    }
    if !matches!(cfg.route, Route::Lambda | Route::Crosscheck) {
        return Err(CliError::config("route", "particle systems support the paths, lambda and crosscheck routes"));
    }

    if cfg.meters.len() != 1 {
        return Err(CliError::config("meters", "particle systems take exactly one meter"));
    }
    if cfg.meters[0].kernel.is_some() {
        return Err(CliError::config("meters[0].kernel", "kernels are not supported for particle systems"));
    }
    let beta = switching(&cfg.meters[0].switching, &grid);
    let spec = Meters::single(grid, beta.clone()).at("meters[0].switching")?;
    let cf = match cfg.observable.as_ref() {
        Some(ObservableSpec::Indicator { lo, hi }) => CoordinateFunctional::indicator(&xg, *lo, *hi, beta),
        Some(ObservableSpec::Position) => CoordinateFunctional::position(&xg, beta),
        Some(ObservableSpec::Samples(s)) => CoordinateFunctional::new(&xg, s.clone(), beta),
        Some(_) => return Err(CliError::config("observable", "particle systems need a coordinate observable")),
        None => return Err(CliError::config("observable", "missing field")),
    }
    .at("observable")?;
    let (f_lo, f_hi) = cf.values().iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let scheme = match (cfg.route, kinetic) {
        // The position-path oracle uses the lattice Laplacian.
        (Route::Crosscheck, _) | (_, KineticSpec::FiniteDifference) => KineticScheme::FiniteDifference,
        (_, KineticSpec::Spectral) => KineticScheme::Spectral,
    };
    let order = if *symmetric_split && cfg.route != Route::Crosscheck {
        SplitOrder::Symmetric
    } else {
        SplitOrder::FirstOrder
    };
    let ev = ParticleEvolver::new(xg, *mass, &v, grid, scheme, order).at("system")?;
    let axis = axis_for(&cfg.meters[0].grid, &spec, 0, &[f_lo, f_hi])?;
    let field = ev.amplitude_field(&psi0, &cf, &axis).at("meters[0].grid")?;
    let (plain, norms) = ev.evolve_trace(&psi0, 0.0, spec.weights(0), cf.values())?;

    report.residual("sum_rule", field.marginal().max_abs_diff(&plain.to_state()));
    let drift = norms.iter().map(|n| (n - psi0.norm()).abs()).fold(0.0, f64::max);
    report.residual("norm_drift", drift);
    report.residual("boundary_weight", plain.edge_weight((*points / 32).max(1)));

    let (lo, hi) = spec.attainable_range(0, &[f_lo, f_hi]);
    let df = axis.df();
    let slack = 2.0 * df + 1e-12;
    let dx = xg.dx();
    let mut t = Table::new(["f", "W"]);
    let mut outside = 0.0;
    for p in 0..field.len() {
        let f = field.f(p)[0];
        let w = bin_amplitude(&field, p).norm_sqr() * dx;
        if f < lo - slack || f > hi + slack {
            outside += w;
        }
        t.push(vec![f, w]);
    }
    report.residual("outside_mass", outside);
    report.table("f_distribution", t);
    final_table(plain.values(), report);

    if cfg.route == Route::Crosscheck {
        dense_check(report)?;
        let binned = tiny_lattice_binned(&psi0, &v, &grid, &cf, SliceFactor::Split, cap).at("system.points")?;
        let mut worst: f64 = 0.0;
        for bin in binned.bins() {
            let p = axis
                .nearest(bin.f[0])
                .ok_or_else(|| CliError::config("meters[0].grid", "a path-sum bin falls off the readout grid"))?;
            worst = worst.max(bin_amplitude(&field, p).distance(&bin.state));
        }
        report.residual("feynman_vs_field", worst);
    }
    Ok(())
}
