//! Binned eigenpath sum against the lambda-route field for a driven qubit.

use eigenpath::{
    amplitude_field, spectral_decompose, Complex, FAxis, Hermitian, LambdaGrid, Meters, PathSum, State,
    SwitchingFunction, TimeGrid,
};

fn main() -> eigenpath::Result<()> {
    let h = Hermitian::from_real_rows(&[vec![0.0, 0.5], vec![0.5, 1.0]])?;
    let a = Hermitian::diagonal(&[1.0, 2.0]);
    let psi = State::basis(2, 0);
    let grid = TimeGrid::new(1.0, 10)?;

    let spec = Meters::single(grid, SwitchingFunction::time_average(&grid))?;
    let bins = PathSum::new(&h, &spectral_decompose(&a), &grid, &psi)?.binned(&spec)?;

    let axis = FAxis::for_lattice(256, spec.weights(0), &[1.0, 2.0], 1)?;
    let field = amplitude_field(&h, &a, &spec, &LambdaGrid::single(axis), &psi)?;
    println!("{:>6} {:>12} {:>12}", "f", "|bin|^2", "deviation");
    for bin in bins.bins() {
        let s = field.state_at(&bin.f).expect("bin on grid").scale(Complex::new(axis.df(), 0.0));
        println!("{:>6.2} {:>12.4e} {:>12.2e}", bin.f[0], bin.state.norm_sqr(), s.distance(&bin.state));
    }
    Ok(())
}
