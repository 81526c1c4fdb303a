//! Thermal equilibria across a temperature ladder, converging to the
//! mean-field measure as theta grows.

use torus_gas::equilibrium::{solve_equilibrium, solve_thermal, SolverOptions};
use torus_gas::grid::{GridField, TorusGrid};
use torus_gas::kernel::Kernel;
use torus_gas::potential::Potential;

fn main() -> torus_gas::Result<()> {
    let grid = TorusGrid::new(1, 1.0, 512)?;
    let kernel = Kernel::riesz(grid, 2.0, 1.0)?;
    let v = Potential::Cosine { amplitude: 1.0, mode: 1 };
    let opts = SolverOptions::default();

    let eq = solve_equilibrium(&kernel, &v, &opts)?;
    println!(
        "mean-field: c_inf {:.6}, residual {:.1e}, energy {:.6}",
        eq.c_inf, eq.residual_on_support, eq.energy
    );

    let ones = GridField::from_fn(grid, |_| 1.0);
    println!(
        "\n{:>8} {:>12} {:>10} {:>12} {:>12}",
        "theta", "c_theta", "entropy", "residual", "L1_to_eq"
    );
    for theta in [4.0, 16.0, 64.0, 256.0] {
        let th = solve_thermal(&kernel, &v, theta, &opts)?;
        let diff = GridField::new(
            grid,
            th.density
                .field()
                .values()
                .iter()
                .zip(eq.density.field().values())
                .map(|(a, b)| (a - b).abs())
                .collect(),
        )?;
        let l1 = diff.quadrature_against(&ones);
        println!(
            "{theta:>8.0} {:>12.6} {:>10.4} {:>12.1e} {:>12.2e}",
            th.c_theta,
            th.density.entropy(),
            th.residual,
            l1
        );
    }
    println!("\nthe gap to the mean-field measure closes like 1/theta");
    Ok(())
}
