//! Admissibility audit of the built-in kernels, plus the tabulated-kernel
//! file format round-trip.

use torus_gas::grid::TorusGrid;
use torus_gas::kernel::Kernel;

fn audit(label: &str, kernel: &Kernel, s_values: &[f64]) -> torus_gas::Result<()> {
    let rep = kernel.check_admissibility(s_values)?;
    println!(
        "{label:<14} gamma_fit {:.4} (res {:.1e})  lambda_fit {:.4} (res {:.1e})  min p {:+.2e}  C {:.2e}",
        rep.gamma_fit, rep.gamma_residual, rep.lambda_fit, rep.lambda_residual, rep.min_p, rep.c_heat
    );
    Ok(())
}

fn main() -> torus_gas::Result<()> {
    let grid = TorusGrid::new(1, 1.0, 512)?;
    let s_values = torus_gas::acceptance::logspace(1e-3, 1.0, 7);

    audit("riesz g=0.8", &Kernel::riesz(grid, 0.8, 1.0)?, &s_values)?;
    audit("riesz g=2", &Kernel::riesz(grid, 2.0, 1.0)?, &s_values)?;
    audit("coulomb", &Kernel::coulomb(grid, 1.0)?, &s_values)?;

    // a kernel defined only by its coefficient table goes through the same
    // audit; the envelope fits recover the decay without knowing the rule
    let table = std::env::temp_dir().join("kernel_audit_table.csv");
    torus_gas::io::write_kernel_table(&table, &Kernel::riesz(grid, 1.3, 0.7)?)?;
    let tabulated = torus_gas::io::read_kernel_table(&table, grid)?;
    audit("tabulated", &tabulated, &s_values)?;
    println!("tabulated decay exponent estimate: {:.4}", tabulated.decay_exponent());
    std::fs::remove_file(&table).ok();
    Ok(())
}
