//! Eigenpath decomposition of the evolution operator.
//!
//! An eigenpath assigns one eigenvalue index of the measured observable `A`
//! to every time slice. Its amplitude is the left-ordered product
//! `P_{k_N} U_eps ... P_{k_1} U_eps |psi0>` with `U_eps = exp(-i H eps)`.
//! Summing all paths reproduces `U_eps^N |psi0>`; restricting the sum by the
//! value of a path functional gives the fine-grained measurement amplitude.
//!
//! Every projector is rank one, so a path amplitude is a scalar times the last
//! eigenvector. Enumeration walks the path tree depth first carrying that
//! scalar, split over lexicographic prefixes for parallelism and merged back in
//! prefix order so results do not depend on the thread count.

use crate::error::{Error, Result};
use crate::hilbert::{exact_propagator, HermitianOperator, Operator, SpectralDecomposition, StateVector};
use crate::scalar::{CompensatedSum, Real, C};
use crate::timegrid::{PathFunctionalSpec, TimeGrid};
use rayon::prelude::*;
use std::collections::BTreeMap;

/// Default limit on the number of enumerated paths.
pub const DEFAULT_PATH_CAP: u64 = 1 << 22;

/// A history given by one eigenvalue index per slice.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EigenPath {
    indices: Vec<usize>,
}

impl EigenPath {
    pub fn new(indices: Vec<usize>) -> Self {
        Self { indices }
    }

    pub fn constant(k: usize, slices: usize) -> Self {
        Self::new(vec![k; slices])
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Number of slices whose index differs from the previous slice.
    pub fn jump_count(&self) -> usize {
        jumps_of(&self.indices)
    }

    /// `a(t_j)` for every slice.
    pub fn values<T: Real>(&self, decomp: &SpectralDecomposition<T>) -> Vec<T> {
        self.indices.iter().map(|&k| decomp.eigenvalues()[k]).collect()
    }
}

fn jumps_of(indices: &[usize]) -> usize {
    indices.windows(2).filter(|w| w[0] != w[1]).count()
}

/// `dim^slices`, saturating.
pub fn path_count(dim: usize, slices: usize) -> u128 {
    let mut n: u128 = 1;
    for _ in 0..slices {
        n = n.saturating_mul(dim as u128);
    }
    n
}

fn check_cap(dim: usize, slices: usize, cap: u64) -> Result<()> {
    let paths = path_count(dim, slices);
    if paths > cap as u128 {
        return Err(Error::CapExceeded { paths, cap });
    }
    Ok(())
}

/// Lexicographic odometer over all `dim^N` index sequences.
#[derive(Clone, Debug)]
pub struct EigenPathIter {
    dim: usize,
    next: Option<Vec<usize>>,
}

impl Iterator for EigenPathIter {
    type Item = EigenPath;

    fn next(&mut self) -> Option<EigenPath> {
        let current = self.next.take()?;
        let mut succ = current.clone();
        let mut carried = true;
        for slot in succ.iter_mut().rev() {
            *slot += 1;
            if *slot < self.dim {
                carried = false;
                break;
            }
            *slot = 0;
        }
        if !carried {
            self.next = Some(succ);
        }
        Some(EigenPath::new(current))
    }
}

/// All eigenpaths on `grid` in lexicographic order.
pub fn enumerate_eigenpaths<T: Real>(dim: usize, grid: &TimeGrid<T>, cap: u64) -> Result<EigenPathIter> {
    if dim < 2 {
        return Err(Error::InvalidArgument("eigenpath enumeration needs dim >= 2".into()));
    }
    check_cap(dim, grid.slices(), cap)?;
    Ok(EigenPathIter {
        dim,
        next: Some(vec![0; grid.slices()]),
    })
}

/// The substate `U_T[a] |psi0>` of one eigenpath.
#[derive(Clone, Debug, PartialEq)]
pub struct PathAmplitude<T> {
    pub path: EigenPath,
    pub state: StateVector<T>,
    pub jump_count: usize,
}

/// One readout bin of a restricted path sum.
#[derive(Clone, Debug, PartialEq)]
pub struct Bin<T> {
    pub key: Vec<i64>,
    /// Functional values of the lexicographically first path in the bin.
    pub f: Vec<T>,
    pub state: StateVector<T>,
}

/// Path amplitudes grouped by quantized functional values, ordered by key.
#[derive(Clone, Debug, PartialEq)]
pub struct BinnedAmplitudes<T> {
    tolerances: Vec<T>,
    bins: Vec<Bin<T>>,
}

impl<T: Real> BinnedAmplitudes<T> {
    pub fn bins(&self) -> &[Bin<T>] {
        &self.bins
    }

    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    pub fn tolerances(&self) -> &[T] {
        &self.tolerances
    }

    /// Bin whose key matches `f` after quantization.
    pub fn find(&self, f: &[T]) -> Option<&Bin<T>> {
        let key = quantize(f, &self.tolerances);
        self.bins
            .binary_search_by(|b| b.key.as_slice().cmp(key.as_slice()))
            .ok()
            .map(|i| &self.bins[i])
    }

    /// Coherent sum of all bins.
    pub fn total(&self) -> StateVector<T> {
        let dim = self.bins.first().map_or(1, |b| b.state.dim());
        let mut acc = CompensatedSum::zeros(dim);
        for b in &self.bins {
            acc.add_slice(b.state.amplitudes());
        }
        StateVector::from_vec_unchecked(acc.value())
    }
}

fn quantize<T: Real>(f: &[T], tol: &[T]) -> Vec<i64> {
    let mut key = vec![0; f.len()];
    quantize_into(f, tol, &mut key);
    key
}

fn quantize_into<T: Real>(f: &[T], tol: &[T], key: &mut [i64]) {
    for ((k, &x), &t) in key.iter_mut().zip(f).zip(tol) {
        *k = (x / t).round().to_i64().unwrap_or(i64::MAX);
    }
}

trait PathVisitor<T>: Send {
    fn visit(&mut self, indices: &[usize], coef: C<T>, jumps: usize);
    fn merge(&mut self, other: Self);
}

struct TotalVisitor<T> {
    acc: CompensatedSum<T>,
}

impl<T: Real> PathVisitor<T> for TotalVisitor<T> {
    fn visit(&mut self, indices: &[usize], coef: C<T>, _jumps: usize) {
        self.acc.add_at(*indices.last().unwrap(), coef);
    }
    fn merge(&mut self, other: Self) {
        self.acc.merge(&other.acc);
    }
}

struct JumpVisitor<T> {
    dim: usize,
    classes: BTreeMap<usize, CompensatedSum<T>>,
}

impl<T: Real> PathVisitor<T> for JumpVisitor<T> {
    fn visit(&mut self, indices: &[usize], coef: C<T>, jumps: usize) {
        let dim = self.dim;
        self.classes
            .entry(jumps)
            .or_insert_with(|| CompensatedSum::zeros(dim))
            .add_at(*indices.last().unwrap(), coef);
    }
    fn merge(&mut self, other: Self) {
        for (n, acc) in other.classes {
            match self.classes.get_mut(&n) {
                Some(mine) => mine.merge(&acc),
                None => {
                    self.classes.insert(n, acc);
                }
            }
        }
    }
}

struct BinVisitor<'a, T> {
    dim: usize,
    spec: &'a PathFunctionalSpec<T>,
    levels: &'a [T],
    tol: &'a [T],
    key: Vec<i64>,
    bins: BTreeMap<Vec<i64>, (Vec<T>, CompensatedSum<T>)>,
}

impl<T: Real> PathVisitor<T> for BinVisitor<'_, T> {
    fn visit(&mut self, indices: &[usize], coef: C<T>, _jumps: usize) {
        let f = self.spec.values_for_levels(indices, self.levels);
        quantize_into(&f, self.tol, &mut self.key);
        let last = *indices.last().unwrap();
        if let Some((_, acc)) = self.bins.get_mut(self.key.as_slice()) {
            acc.add_at(last, coef);
        } else {
            let mut acc = CompensatedSum::zeros(self.dim);
            acc.add_at(last, coef);
            self.bins.insert(self.key.clone(), (f, acc));
        }
    }
    fn merge(&mut self, other: Self) {
        for (key, (f, acc)) in other.bins {
            match self.bins.get_mut(&key) {
                Some((_, mine)) => mine.merge(&acc),
                None => {
                    self.bins.insert(key, (f, acc));
                }
            }
        }
    }
}

/// Exhaustive eigenpath summation for one `(U_eps, A, grid, psi0)` setup.
#[derive(Clone, Debug)]
pub struct PathSum<T> {
    decomp: SpectralDecomposition<T>,
    grid: TimeGrid<T>,
    /// `<a_k| U_eps |psi0>`.
    first: Vec<C<T>>,
    /// `W[k' * dim + k] = <a_k'| U_eps |a_k>`.
    transfer: Vec<C<T>>,
    cap: u64,
}

impl<T: Real> PathSum<T> {
    /// Uses `U_eps = exp(-i H eps)` as the slice propagator.
    pub fn new(
        h: &HermitianOperator<T>,
        decomp: &SpectralDecomposition<T>,
        grid: &TimeGrid<T>,
        psi0: &StateVector<T>,
    ) -> Result<Self> {
        h.as_operator().check_dim(decomp.dim())?;
        let u = exact_propagator(h, grid.step())?;
        Self::from_slice_propagator(&u, decomp, grid, psi0)
    }

    /// Uses an arbitrary per-slice propagator, e.g. a split kinetic/potential factor.
    pub fn from_slice_propagator(
        u_eps: &Operator<T>,
        decomp: &SpectralDecomposition<T>,
        grid: &TimeGrid<T>,
        psi0: &StateVector<T>,
    ) -> Result<Self> {
        let dim = decomp.dim();
        u_eps.check_dim(dim)?;
        psi0.check_dim(dim)?;
        decomp.require_nondegenerate()?;
        let first = decomp.to_eigenbasis(&u_eps.apply(psi0).into_amplitudes());
        let w = decomp.conjugate_into(u_eps);
        Ok(Self {
            decomp: decomp.clone(),
            grid: *grid,
            first,
            transfer: w.entries().to_vec(),
            cap: DEFAULT_PATH_CAP,
        })
    }

    pub fn with_cap(mut self, cap: u64) -> Self {
        self.cap = cap;
        self
    }

    pub fn dim(&self) -> usize {
        self.decomp.dim()
    }

    pub fn grid(&self) -> &TimeGrid<T> {
        &self.grid
    }

    fn step(&self, coef: C<T>, from: Option<usize>, to: usize) -> C<T> {
        match from {
            None => self.first[to],
            Some(k) => self.transfer[to * self.dim() + k] * coef,
        }
    }

    fn state_from(&self, last: usize, coef: C<T>) -> StateVector<T> {
        let mut e = vec![C::new(T::zero(), T::zero()); self.dim()];
        e[last] = coef;
        StateVector::from_vec_unchecked(self.decomp.from_eigenbasis(&e))
    }

    fn coefs_to_state(&self, coefs: &[C<T>]) -> StateVector<T> {
        StateVector::from_vec_unchecked(self.decomp.from_eigenbasis(coefs))
    }

    /// Amplitude of a single eigenpath.
    pub fn amplitude(&self, path: &EigenPath) -> Result<PathAmplitude<T>> {
        if path.len() != self.grid.slices() {
            return Err(Error::LengthMismatch {
                expected: self.grid.slices(),
                found: path.len(),
            });
        }
        if let Some(&k) = path.indices().iter().find(|&&k| k >= self.dim()) {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: k + 1,
            });
        }
        let mut coef = C::new(T::zero(), T::zero());
        let mut prev = None;
        for &k in path.indices() {
            coef = self.step(coef, prev, k);
            prev = Some(k);
        }
        Ok(PathAmplitude {
            path: path.clone(),
            state: self.state_from(prev.unwrap(), coef),
            jump_count: path.jump_count(),
        })
    }

    fn dfs<V: PathVisitor<T>>(&self, indices: &mut Vec<usize>, coef: C<T>, jumps: usize, v: &mut V) {
        if indices.len() == self.grid.slices() {
            v.visit(indices, coef, jumps);
            return;
        }
        let prev = indices.last().copied();
        for k in 0..self.dim() {
            let c = self.step(coef, prev, k);
            let j = jumps + usize::from(prev.is_some_and(|p| p != k));
            indices.push(k);
            self.dfs(indices, c, j, v);
            indices.pop();
        }
    }

    fn walk<V: PathVisitor<T>>(&self, make: impl Fn() -> V + Sync) -> Result<V> {
        let (dim, n) = (self.dim(), self.grid.slices());
        check_cap(dim, n, self.cap)?;
        let mut depth = 0;
        while depth < n && path_count(dim, depth) < 256 {
            depth += 1;
        }
        let prefixes: Vec<Vec<usize>> = if depth == 0 {
            vec![Vec::new()]
        } else {
            EigenPathIter {
                dim,
                next: Some(vec![0; depth]),
            }
            .map(|p| p.indices)
            .collect()
        };
        let partials: Vec<V> = prefixes
            .par_iter()
            .map(|prefix| {
                let mut v = make();
                let mut coef = C::new(T::zero(), T::zero());
                let mut prev = None;
                for &k in prefix {
                    coef = self.step(coef, prev, k);
                    prev = Some(k);
                }
                let mut indices = prefix.clone();
                self.dfs(&mut indices, coef, jumps_of(prefix), &mut v);
                v
            })
            .collect();
        let mut iter = partials.into_iter();
        let mut acc = iter.next().expect("at least one prefix");
        for p in iter {
            acc.merge(p);
        }
        Ok(acc)
    }

    /// Sum over all eigenpaths; equals `U_eps^N |psi0>`.
    pub fn total(&self) -> Result<StateVector<T>> {
        let dim = self.dim();
        let v = self.walk(|| TotalVisitor {
            acc: CompensatedSum::zeros(dim),
        })?;
        Ok(self.coefs_to_state(&v.acc.value()))
    }

    /// Restricted sums grouped by the functionals of `spec`.
    pub fn binned(&self, spec: &PathFunctionalSpec<T>) -> Result<BinnedAmplitudes<T>> {
        let levels = self.decomp.eigenvalues().to_vec();
        self.binned_with_levels(spec, &levels)
    }

    /// Like [`binned`](Self::binned), with the path value on eigen-index `k`
    /// replaced by `levels[k]`.
    pub fn binned_with_levels(&self, spec: &PathFunctionalSpec<T>, levels: &[T]) -> Result<BinnedAmplitudes<T>> {
        if spec.grid() != &self.grid {
            return Err(Error::GridMismatch("functional spec uses a different time grid".into()));
        }
        if levels.len() != self.dim() {
            return Err(Error::LengthMismatch {
                expected: self.dim(),
                found: levels.len(),
            });
        }
        let tol = spec.bin_tolerances();
        let dim = self.dim();
        let v = self.walk(|| BinVisitor {
            dim,
            spec,
            levels,
            tol: &tol,
            key: vec![0; spec.meters()],
            bins: BTreeMap::new(),
        })?;
        let bins = v
            .bins
            .into_iter()
            .map(|(key, (f, acc))| Bin {
                key,
                f,
                state: self.coefs_to_state(&acc.value()),
            })
            .collect();
        Ok(BinnedAmplitudes { tolerances: tol, bins })
    }

    /// Partial sums over paths with a fixed number of jumps.
    pub fn by_jumps(&self) -> Result<BTreeMap<usize, StateVector<T>>> {
        let dim = self.dim();
        let v = self.walk(|| JumpVisitor {
            dim,
            classes: BTreeMap::new(),
        })?;
        Ok(v
            .classes
            .into_iter()
            .map(|(n, acc)| (n, self.coefs_to_state(&acc.value())))
            .collect())
    }
}

pub fn path_amplitude<T: Real>(
    h: &HermitianOperator<T>,
    decomp: &SpectralDecomposition<T>,
    grid: &TimeGrid<T>,
    path: &EigenPath,
    psi0: &StateVector<T>,
) -> Result<PathAmplitude<T>> {
    PathSum::new(h, decomp, grid, psi0)?.amplitude(path)
}

pub fn path_sum_total<T: Real>(
    h: &HermitianOperator<T>,
    decomp: &SpectralDecomposition<T>,
    grid: &TimeGrid<T>,
    psi0: &StateVector<T>,
) -> Result<StateVector<T>> {
    PathSum::new(h, decomp, grid, psi0)?.total()
}

pub fn binned_measurement_amplitude<T: Real>(
    h: &HermitianOperator<T>,
    decomp: &SpectralDecomposition<T>,
    psi0: &StateVector<T>,
    spec: &PathFunctionalSpec<T>,
) -> Result<BinnedAmplitudes<T>> {
    PathSum::new(h, decomp, spec.grid(), psi0)?.binned(spec)
}

/// Bins histories of `F(A)` instead of `A`: each path is labelled by the
/// functional of `F(a(t))`.
pub fn relabel_by_function<T: Real>(
    h: &HermitianOperator<T>,
    decomp: &SpectralDecomposition<T>,
    psi0: &StateVector<T>,
    spec: &PathFunctionalSpec<T>,
    f: impl Fn(T) -> T,
) -> Result<BinnedAmplitudes<T>> {
    let levels: Vec<T> = decomp.eigenvalues().iter().map(|&a| f(a)).collect();
    PathSum::new(h, decomp, spec.grid(), psi0)?.binned_with_levels(spec, &levels)
}

pub fn group_paths_by_jumps<T: Real>(
    h: &HermitianOperator<T>,
    decomp: &SpectralDecomposition<T>,
    grid: &TimeGrid<T>,
    psi0: &StateVector<T>,
) -> Result<BTreeMap<usize, StateVector<T>>> {
    PathSum::new(h, decomp, grid, psi0)?.by_jumps()
}

/// Which generator appears in the free exponentials of the jump series.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ExponentGenerator {
    /// `exp(-i H0 t)` with `H0` the diagonal part: a true expansion in powers of `V`.
    #[default]
    Diagonal,
    /// `exp(-i (H0 + V) t)`.
    Full,
}

/// Quadrature settings for [`jump_series_term`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DysonQuadrature {
    /// Nodes per time axis (including both endpoints).
    pub points: usize,
    /// Upper bound on `order * points`.
    pub budget: usize,
    pub generator: ExponentGenerator,
}

impl Default for DysonQuadrature {
    fn default() -> Self {
        Self {
            points: 4097,
            budget: 1 << 20,
            generator: ExponentGenerator::Diagonal,
        }
    }
}

/// n-th term of the jump (interaction-picture) series with default quadrature.
pub fn jump_series_term<T: Real>(
    h0: &HermitianOperator<T>,
    v: &HermitianOperator<T>,
    t: T,
    n: usize,
) -> Result<Operator<T>> {
    jump_series_term_with(h0, v, t, n, &DysonQuadrature::default())
}

/// `(-i)^n int_{0<t_1<...<t_n<T} E(T-t_n) V E(t_n-t_{n-1}) V ... V E(t_1)`.
///
/// The ordered simplex is integrated by nested cumulative trapezoid rules on
/// one uniform grid: with `K_0(t) = E(t)` and
/// `K_m(t) = -i int_0^t E(t-s) V K_{m-1}(s) ds`, each `K_m` is advanced slab by
/// slab using `E(t_i - s) = E(h) E(t_{i-1} - s)`.
pub fn jump_series_term_with<T: Real>(
    h0: &HermitianOperator<T>,
    v: &HermitianOperator<T>,
    t: T,
    n: usize,
    quad: &DysonQuadrature,
) -> Result<Operator<T>> {
    v.as_operator().check_dim(h0.dim())?;
    let generator = match quad.generator {
        ExponentGenerator::Diagonal => h0.clone(),
        ExponentGenerator::Full => h0.sum(v)?,
    };
    if n == 0 {
        return exact_propagator(&generator, t);
    }
    if quad.points < 2 {
        return Err(Error::InvalidArgument("quadrature needs at least two points".into()));
    }
    if n.saturating_mul(quad.points) > quad.budget {
        return Err(Error::QuadratureBudgetExceeded {
            order: n,
            points: quad.points,
            budget: quad.budget,
        });
    }
    let intervals = quad.points - 1;
    let h = t / T::count(intervals);
    let decomp = crate::hilbert::spectral_decompose(&generator);
    let step = exact_propagator(&generator, h)?;
    let vop = v.as_operator();
    let step_v = step.matmul(vop);
    let half = C::new(T::zero(), -h * T::lit(0.5));

    let mut prev: Vec<Operator<T>> = (0..quad.points)
        .map(|i| {
            let ti = t * T::count(i) / T::count(intervals);
            decomp.map_spectrum(|e| crate::scalar::cis(-e * ti))
        })
        .collect();
    for _ in 0..n {
        let mut next = Vec::with_capacity(quad.points);
        next.push(Operator::zeros(h0.dim()));
        for i in 1..quad.points {
            let carried = step.matmul(&next[i - 1]);
            let slab = &vop.matmul(&prev[i]) + &step_v.matmul(&prev[i - 1]);
            next.push(&carried + &slab.scale(half));
        }
        prev = next;
    }
    Ok(prev.pop().unwrap())
}

/// Relative weights `<Phi_n|Phi_n> / sum_m <Phi_m|Phi_m>` of alternative routes.
pub fn two_slit_weights<T: Real>(substates: &[StateVector<T>]) -> Result<Vec<T>> {
    if substates.is_empty() {
        return Err(Error::InvalidArgument("need at least one substate".into()));
    }
    let norms: Vec<T> = substates.iter().map(|s| s.norm_sqr()).collect();
    let total: T = norms.iter().copied().sum();
    if total == T::zero() {
        return Err(Error::AllZeroSubstates);
    }
    Ok(norms.into_iter().map(|w| w / total).collect())
}
