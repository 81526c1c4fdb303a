//! The three identities everything downstream leans on: transform round-trip,
//! Parseval, and the interaction energy of h_{-1}f as a multiplier norm.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use torus_gas::grid::{GridField, TorusGrid};
use torus_gas::kernel::Kernel;

fn main() -> torus_gas::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    println!("{:>3} {:>6} {:>12} {:>12} {:>12}", "d", "n", "round_trip", "parseval", "energy");

    for (d, n) in [(1usize, 512usize), (2, 128), (3, 32)] {
        let grid = TorusGrid::new(d, 1.0, n)?;
        let kernel = Kernel::riesz(grid, 2.0, 1.0)?;
        let f = GridField::new(grid, (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect())?;
        let spec = f.spectrum();

        let back = spec.field()?;
        let scale = f.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let round_trip = f
            .values()
            .iter()
            .zip(back.values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max)
            / scale;

        let sq = f.quadrature_against(&f);
        let parseval = (sq - spec.l2_norm2()).abs() / sq;

        // E(h_{-1}f) = ||h_{-1/2}f||^2: the quadratic energy is a weighted
        // spectral norm, so the two routes must agree to roundoff
        let rough = kernel.apply_h_alpha(&spec, -1.0).field()?;
        let energy = kernel.energy_of_density(&rough);
        let norm2 = kernel.apply_h_alpha(&spec, -0.5).l2_norm2();
        let plancherel = (energy - norm2).abs() / norm2;

        println!("{d:>3} {n:>6} {round_trip:>12.2e} {parseval:>12.2e} {plancherel:>12.2e}");
    }
    Ok(())
}
