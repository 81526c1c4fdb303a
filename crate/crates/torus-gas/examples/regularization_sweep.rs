//! Smoothing-time sweep for one random configuration: the energy gap against
//! its envelope shape, test errors, and the size-optimal flow time.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::TAU;
use torus_gas::grid::{GridField, TorusGrid};
use torus_gas::kernel::Kernel;
use torus_gas::particles::Configuration;
use torus_gas::regularize::{energy_gap, optimal_t, test_error};

fn main() -> torus_gas::Result<()> {
    let grid = TorusGrid::new(1, 1.0, 4096)?;
    let gamma = 0.8;
    let kernel = Kernel::riesz(grid, gamma, 1.0)?;
    let n_points = 128;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let config = Configuration::random_uniform(n_points, grid.d(), grid.side(), &mut rng)?;
    let f = GridField::from_fn(grid, |x| (TAU * x[0]).cos() + 0.25 * (3.0 * TAU * x[0]).sin());

    println!("N = {n_points}, gamma = {gamma}");
    println!(
        "{:>10} {:>12} {:>12} {:>8} {:>12} {:>12}",
        "t", "gap", "shape", "ratio", "err_a=0.5", "err_a=2"
    );
    for t in torus_gas::acceptance::logspace(1e-4, 1e-1, 10) {
        let (gap, shape) = energy_gap(&config, &kernel, t)?;
        let (err_rough, _) = test_error(&config, &kernel, &f, t, 0.5)?;
        let (err_smooth, _) = test_error(&config, &kernel, &f, t, 2.0)?;
        println!(
            "{t:>10.2e} {gap:>12.4e} {shape:>12.4e} {:>8.3} {err_rough:>12.4e} {err_smooth:>12.4e}",
            gap / shape
        );
    }

    for alpha in [0.5, 2.0] {
        let opt = optimal_t(n_points, alpha, gamma, gamma, grid.d())?;
        println!(
            "optimal t at alpha = {alpha}: N^{:.3} = {:.3e}{}",
            opt.exponent,
            opt.t,
            if opt.degenerate { " (degenerate branch)" } else { "" }
        );
    }
    Ok(())
}
