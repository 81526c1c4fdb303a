//! Exact finite-N splitting of the Hamiltonian around the mean-field and
//! thermal measures: the defect is pure float bookkeeping.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use torus_gas::equilibrium::{solve_equilibrium, solve_thermal, SolverOptions};
use torus_gas::grid::TorusGrid;
use torus_gas::kernel::Kernel;
use torus_gas::particles::{splitting_check, Configuration, SplittingVariant};
use torus_gas::potential::Potential;

fn main() -> torus_gas::Result<()> {
    let grid = TorusGrid::new(1, 1.0, 256)?;
    let kernel = Kernel::riesz(grid, 2.0, 1.0)?;
    let v = Potential::Cosine { amplitude: 1.0, mode: 1 };
    let opts = SolverOptions::default();
    let eq = solve_equilibrium(&kernel, &v, &opts)?;
    let th = solve_thermal(&kernel, &v, 64.0, &opts)?;

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    println!("{:>6} {:>16} {:>16}", "trial", "equilibrium", "thermal");
    for trial in 0..10 {
        // keep pairs off the interpolation guard
        let config = loop {
            let c = Configuration::random_uniform(16, grid.d(), grid.side(), &mut rng)?;
            if c.min_separation() > grid.spacing() / 8.0 {
                break c;
            }
        };
        let a = splitting_check(&kernel, &v, &config, Some(&eq), None, SplittingVariant::Equilibrium)?;
        let b = splitting_check(&kernel, &v, &config, None, Some(&th), SplittingVariant::Thermal)?;
        worst = worst.max(a).max(b);
        println!("{trial:>6} {a:>16.2e} {b:>16.2e}");
    }
    println!("\nworst relative defect {worst:.2e}");
    Ok(())
}
