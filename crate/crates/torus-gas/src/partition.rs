//! Brute-force partition functions for tiny N and the constant-free lower
//! bounds they certify.
//!
//! The quadrature lives on a subgrid of the kernel lattice (the stride must
//! be exact), so every pair energy is an exact lattice value of the
//! band-limited g: the quadrature converges spectrally in the node count and
//! a doubling check certifies the tail.

use crate::equilibrium::{EquilibriumMeasure, ThermalEquilibrium};
use crate::error::{Error, Result};
use crate::grid::GridField;
use crate::sampler::GibbsParams;
use rayon::prelude::*;

/// Node-count cap for the tensor quadrature, chosen for desk-scale runtimes.
pub const QUADRATURE_BUDGET: f64 = 1.3e8;

/// Values of a kernel-grid field on the n_q-per-axis subgrid, flattened
/// row-major with axis 0 slowest (the kernel grid's own layout).
fn strided_values(src: &GridField, n_q: usize) -> Result<Vec<f64>> {
    let grid = src.grid();
    let d = grid.d();
    let n_k = grid.n();
    if n_q == 0 || n_k % n_q != 0 {
        return Err(Error::InvalidParameter(format!(
            "quadrature nodes {n_q} must divide the kernel grid {n_k} for exact lattice lookups"
        )));
    }
    let stride = n_k / n_q;
    let count = n_q.pow(d as u32);
    let mut out = Vec::with_capacity(count);
    for q in 0..count {
        let mut flat = 0usize;
        let mut rest = q;
        let mut divisor = count / n_q;
        for _ in 0..d {
            let c = rest / divisor;
            rest %= divisor;
            divisor = (divisor / n_q).max(1);
            flat = flat * n_k + c * stride;
        }
        out.push(src.values()[flat]);
    }
    Ok(out)
}

/// Flat index of the difference p - q on the subgrid lattice.
fn diff_index(p: usize, q: usize, d: usize, n_q: usize) -> usize {
    if d == 1 {
        return (p + n_q - q) % n_q;
    }
    let mut flat = 0usize;
    let mut rp = p;
    let mut rq = q;
    let mut divisor = n_q.pow(d as u32) / n_q;
    for _ in 0..d {
        let cp = rp / divisor;
        let cq = rq / divisor;
        rp %= divisor;
        rq %= divisor;
        divisor = (divisor / n_q).max(1);
        flat = flat * n_q + (cp + n_q - cq) % n_q;
    }
    flat
}

fn merge_lse(a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    match (a, b) {
        ((am, asum), (bm, bsum)) if am >= bm => (am, asum + bsum * (bm - am).exp()),
        ((am, asum), (bm, bsum)) => (bm, bsum + asum * (am - bm).exp()),
    }
}

/// log Z by tensor-grid quadrature of exp(-beta H_N), N <= 3.
pub fn direct_log_partition(params: &GibbsParams, quadrature_n: usize) -> Result<f64> {
    let n = params.n_points;
    if n > 3 {
        return Err(Error::InvalidParameter(format!(
            "direct quadrature is for N <= 3, got N = {n}"
        )));
    }
    let grid = params.kernel.grid();
    let d = grid.d();
    let nodes = (quadrature_n as f64).powi((d * n) as i32);
    if nodes > QUADRATURE_BUDGET {
        return Err(Error::BudgetExceeded { points: nodes, cap: QUADRATURE_BUDGET });
    }
    let g_q = strided_values(&params.kernel.g_on_grid()?, quadrature_n)?;
    let v_q = strided_values(&params.potential.field(grid)?, quadrature_n)?;
    let k = g_q.len();
    let beta = params.beta;
    let nf = n as f64;

    // streaming log-sum-exp over the outer point, parallel across it
    let (peak, sum) = (0..k)
        .into_par_iter()
        .map(|p1| {
            let mut local = (f64::NEG_INFINITY, 0.0);
            let mut push = |x: f64| {
                local = merge_lse(local, (x, 1.0));
            };
            match n {
                1 => push(-beta * nf * v_q[p1]),
                2 => {
                    for p2 in 0..k {
                        let h = 2.0 * g_q[diff_index(p1, p2, d, quadrature_n)]
                            + nf * (v_q[p1] + v_q[p2]);
                        push(-beta * h);
                    }
                }
                _ => {
                    for p2 in 0..k {
                        let g12 = g_q[diff_index(p1, p2, d, quadrature_n)];
                        let v12 = v_q[p1] + v_q[p2];
                        for p3 in 0..k {
                            let h = 2.0
                                * (g12
                                    + g_q[diff_index(p1, p3, d, quadrature_n)]
                                    + g_q[diff_index(p2, p3, d, quadrature_n)])
                                + nf * (v12 + v_q[p3]);
                            push(-beta * h);
                        }
                    }
                }
            }
            local
        })
        .reduce(|| (f64::NEG_INFINITY, 0.0), merge_lse);

    if !(peak.is_finite() && sum > 0.0) {
        return Err(Error::NonFiniteEnergy);
    }
    let cell_log = (grid.side() / quadrature_n as f64).ln();
    Ok(peak + sum.ln() + (d * n) as f64 * cell_log)
}

/// log Z at the doubled node count, plus the change from the base count:
/// a Richardson-style certificate of quadrature convergence.
pub fn direct_log_partition_checked(
    params: &GibbsParams,
    quadrature_n: usize,
) -> Result<(f64, f64)> {
    let coarse = direct_log_partition(params, quadrature_n)?;
    let fine = direct_log_partition(params, 2 * quadrature_n)?;
    Ok((fine, (fine - coarse).abs()))
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct PartitionEstimates {
    /// Direct quadrature value, present for N <= 3 when requested.
    pub log_z: Option<f64>,
    /// Thermal lower bound on log Z/(N^2 beta):
    /// -E_V^theta(mu_theta) + E(mu_theta)/N.
    pub lower_bound_thermal: f64,
    /// Equilibrium-measure lower bound:
    /// -E_V(mu_inf) - ent[mu_inf]/theta + E(mu_inf)/N.
    pub lower_bound_eq: f64,
    /// log K_inf = log Z + N^2 beta E_V(mu_inf).
    pub log_k_inf: Option<f64>,
    /// log K_theta = log Z + N^2 beta E_V^theta(mu_theta).
    pub log_k_theta: Option<f64>,
    /// log Z/(N^2 beta) + E_V^theta(mu_theta): the bound-a slack, a trend
    /// column against powers of N.
    pub gap_thermal: Option<f64>,
}

/// Constant-free lower bounds on log Z/(N^2 beta) from the solved measures,
/// with the direct quadrature attached when a node count is given.
pub fn partition_lower_bounds(
    params: &GibbsParams,
    thermal: &ThermalEquilibrium,
    eq: &EquilibriumMeasure,
    quadrature_n: Option<usize>,
) -> Result<PartitionEstimates> {
    if params.beta <= 0.0 {
        return Err(Error::InvalidParameter("lower bounds need beta > 0".into()));
    }
    let nf = params.n_points as f64;
    let theta = params.theta();
    let kernel = params.kernel;

    // solved `energy` fields: thermal carries E_V + ent/theta, eq carries E_V
    let interaction_thermal = kernel.energy_of_density(thermal.density.field());
    let interaction_eq = kernel.energy_of_density(eq.density.field());
    let lower_bound_thermal = -thermal.energy + interaction_thermal / nf;
    let lower_bound_eq = -eq.energy - eq.density.entropy() / theta + interaction_eq / nf;

    let log_z = match quadrature_n {
        Some(n_q) => Some(direct_log_partition(params, n_q)?),
        None => None,
    };
    let n2b = nf * nf * params.beta;
    Ok(PartitionEstimates {
        log_z,
        lower_bound_thermal,
        lower_bound_eq,
        log_k_inf: log_z.map(|z| z + n2b * eq.energy),
        log_k_theta: log_z.map(|z| z + n2b * thermal.energy),
        gap_thermal: log_z.map(|z| z / n2b + thermal.energy),
    })
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct FreeEnergyRow {
    /// F_{N,beta}(mu^{x N}) = N(N-1) E(mu) + N^2 int V dmu + (N/beta) ent[mu].
    pub free_energy: f64,
    /// free_energy + log Z / beta; nonnegative up to quadrature tolerance.
    pub defect: f64,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct FreeEnergyCheck {
    pub minus_log_z_over_beta: f64,
    pub rows: Vec<FreeEnergyRow>,
}

/// Evaluate the Gibbs variational functional on product test measures and
/// compare with -log Z / beta, which is its minimum over all measures.
pub fn free_energy_check(
    params: &GibbsParams,
    mu_list: &[crate::grid::ProbabilityDensity],
    quadrature_n: usize,
) -> Result<FreeEnergyCheck> {
    if params.beta <= 0.0 {
        return Err(Error::InvalidParameter("free energy needs beta > 0".into()));
    }
    let log_z = direct_log_partition(params, quadrature_n)?;
    let minus_log_z_over_beta = -log_z / params.beta;
    let grid = params.kernel.grid();
    let vfield = params.potential.field(grid)?;
    let nf = params.n_points as f64;
    let rows = mu_list
        .iter()
        .map(|mu| {
            let interaction = params.kernel.energy_of_density(mu.field());
            let v_mean = vfield.quadrature_against(mu.field());
            let free_energy = nf * (nf - 1.0) * interaction
                + nf * nf * v_mean
                + nf / params.beta * mu.entropy();
            FreeEnergyRow { free_energy, defect: free_energy - minus_log_z_over_beta }
        })
        .collect();
    Ok(FreeEnergyCheck { minus_log_z_over_beta, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::{solve_equilibrium, solve_thermal, SolverOptions};
    use crate::grid::{ProbabilityDensity, TorusGrid};
    use crate::kernel::Kernel;
    use crate::potential::Potential;
    use std::f64::consts::TAU;

    fn grid1(n: usize) -> TorusGrid {
        TorusGrid::new(1, 1.0, n).unwrap()
    }

    #[test]
    fn zero_temperature_free_gas_is_pure_volume() {
        let grid = TorusGrid::new(1, 2.0, 512).unwrap();
        let kernel = Kernel::riesz(grid, 2.0, 1.0).unwrap();
        let v = Potential::Zero;
        let params = GibbsParams::new(2, 0.0, &kernel, &v).unwrap();
        let log_z = direct_log_partition(&params, 64).unwrap();
        assert!((log_z - 2.0 * 2.0f64.ln()).abs() < 1e-12, "{log_z}");
    }

    #[test]
    fn two_body_reduction_to_a_single_integral() {
        let grid = grid1(512);
        let kernel = Kernel::riesz(grid, 2.0, 1.0).unwrap();
        let v = Potential::Zero;
        let beta = 0.7;
        let params = GibbsParams::new(2, beta, &kernel, &v).unwrap();
        let n_q = 128;
        let log_z = direct_log_partition(&params, n_q).unwrap();

        // V = 0: the double sum collapses by translation invariance to
        // T^{2d} * mean_u exp(-2 beta g(u)) on the same subgrid, exactly
        let g_q = strided_values(&kernel.g_on_grid().unwrap(), n_q).unwrap();
        let mean: f64 =
            g_q.iter().map(|&g| (-2.0 * beta * g).exp()).sum::<f64>() / n_q as f64;
        assert!((log_z - mean.ln()).abs() < 1e-12, "{log_z} vs {}", mean.ln());
    }

    #[test]
    fn log_partition_decreases_in_beta_for_nonnegative_energies() {
        let grid = grid1(512);
        // zero mode 2 lifts the band-limited Riesz kernel above zero
        let kernel = Kernel::riesz(grid, 2.0, 2.0).unwrap();
        let vfield = GridField::from_fn(grid, |x| 1.0 + (TAU * x[0]).cos());
        let v = Potential::Tabulated(vfield);
        let mut prev = f64::INFINITY;
        for beta in [0.5, 1.0, 2.0] {
            let params = GibbsParams::new(2, beta, &kernel, &v).unwrap();
            let log_z = direct_log_partition(&params, 64).unwrap();
            assert!(log_z < prev, "log Z not decreasing at beta = {beta}");
            prev = log_z;
        }
    }

    #[test]
    fn budget_and_stride_guards() {
        let grid = grid1(512);
        let kernel = Kernel::riesz(grid, 2.0, 1.0).unwrap();
        let v = Potential::Zero;
        let params = GibbsParams::new(3, 1.0, &kernel, &v).unwrap();
        assert!(matches!(
            direct_log_partition(&params, 1024),
            Err(Error::BudgetExceeded { .. })
        ));
        assert!(matches!(
            direct_log_partition(&params, 100),
            Err(Error::InvalidParameter(_))
        ));
        let params4 = GibbsParams::new(4, 1.0, &kernel, &v);
        assert!(matches!(
            direct_log_partition(&params4.unwrap(), 16),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn doubling_certificate_is_tight_for_smooth_integrands() {
        let grid = grid1(512);
        let kernel = Kernel::riesz(grid, 2.0, 1.0).unwrap();
        let v = Potential::Cosine { amplitude: 1.0, mode: 1 };
        let params = GibbsParams::new(2, 1.0, &kernel, &v).unwrap();
        // convergence is limited by the Boltzmann dip at the band-limited
        // corner of g (width ~ 1/n_k), so the certificate sits near 1e-7
        // rather than machine precision at these node counts
        let (_, change) = direct_log_partition_checked(&params, 128).unwrap();
        assert!(change < 1e-6, "quadrature not converged: change {change}");
        let (_, change_fine) = direct_log_partition_checked(&params, 256).unwrap();
        assert!(change_fine < change, "doubling did not tighten: {change_fine} vs {change}");
    }

    #[test]
    fn uniform_case_closed_form_bound_holds() {
        let grid = grid1(512);
        let kernel = Kernel::riesz(grid, 2.0, 1.0).unwrap();
        let v = Potential::Zero;
        let n = 2usize;
        let theta = 2.0;
        let params = GibbsParams::new(n, theta / n as f64, &kernel, &v).unwrap();
        let opts = SolverOptions::default();
        let thermal = solve_thermal(&kernel, &v, theta, &opts).unwrap();
        let eq = solve_equilibrium(&kernel, &v, &opts).unwrap();
        let est = partition_lower_bounds(&params, &thermal, &eq, Some(128)).unwrap();

        // V = 0 on the unit torus: mu_theta is uniform with E = g^(0) and
        // zero entropy, so bound a = -g^(0) (1 - 1/N)
        let closed = -kernel.zero_mode() * (1.0 - 1.0 / n as f64);
        assert!(
            (est.lower_bound_thermal - closed).abs() < 1e-10,
            "{} vs {closed}",
            est.lower_bound_thermal
        );
        let n2b = (n * n) as f64 * params.beta;
        assert!(est.log_z.unwrap() / n2b >= est.lower_bound_thermal - 1e-6);
        assert!(est.log_z.unwrap() / n2b >= est.lower_bound_eq - 1e-6);
        assert!(est.gap_thermal.unwrap() >= 0.0);
        assert!(est.log_k_inf.unwrap().is_finite() && est.log_k_theta.unwrap().is_finite());
    }

    #[test]
    fn bounds_hold_and_order_sanely_with_a_potential() {
        let grid = grid1(512);
        let kernel = Kernel::riesz(grid, 2.0, 1.0).unwrap();
        let v = Potential::Cosine { amplitude: 1.0, mode: 1 };
        let n = 2usize;
        let theta = 2.0;
        let params = GibbsParams::new(n, theta / n as f64, &kernel, &v).unwrap();
        let opts = SolverOptions::default();
        let thermal = solve_thermal(&kernel, &v, theta, &opts).unwrap();
        let eq = solve_equilibrium(&kernel, &v, &opts).unwrap();
        let est = partition_lower_bounds(&params, &thermal, &eq, Some(128)).unwrap();
        let n2b = (n * n) as f64 * params.beta;
        assert!(est.log_z.unwrap() / n2b >= est.lower_bound_thermal - 1e-6);
        assert!(est.log_z.unwrap() / n2b >= est.lower_bound_eq - 1e-6);

        // minimality of mu_theta gives bound a >= bound b up to the
        // interaction difference carried by the 1/N terms
        let slack = (kernel.energy_of_density(thermal.density.field())
            - kernel.energy_of_density(eq.density.field()))
            / n as f64;
        assert!(
            est.lower_bound_thermal >= est.lower_bound_eq + slack - 1e-12,
            "a {} vs b {} + slack {slack}",
            est.lower_bound_thermal,
            est.lower_bound_eq
        );
    }

    #[test]
    fn product_measures_never_beat_the_partition_function() {
        let grid = grid1(512);
        let kernel = Kernel::riesz(grid, 2.0, 1.0).unwrap();
        let v = Potential::Cosine { amplitude: 1.0, mode: 1 };
        let n = 2usize;
        let theta = 2.0;
        let params = GibbsParams::new(n, theta / n as f64, &kernel, &v).unwrap();
        let opts = SolverOptions::default();
        let thermal = solve_thermal(&kernel, &v, theta, &opts).unwrap();

        let mut mu_list = vec![ProbabilityDensity::uniform(grid), thermal.density.clone()];
        for k in 0..10 {
            let raw = GridField::from_fn(grid, |x| {
                1.0 + 0.7 * (TAU * x[0] + 0.37 * k as f64).sin()
                    + 0.2 * (2.0 * TAU * x[0] + 1.3 * k as f64).cos()
            });
            mu_list.push(ProbabilityDensity::from_unnormalized(raw).unwrap());
        }
        let check = free_energy_check(&params, &mu_list, 128).unwrap();
        for (k, row) in check.rows.iter().enumerate() {
            assert!(row.defect >= -1e-9, "measure {k} beat log Z: defect {}", row.defect);
        }
        // the thermal product is the best of the family
        let thermal_defect = check.rows[1].defect;
        for (k, row) in check.rows.iter().enumerate() {
            if k != 1 {
                assert!(
                    thermal_defect <= row.defect + 1e-12,
                    "thermal defect {thermal_defect} vs row {k}: {}",
                    row.defect
                );
            }
        }
    }
}
