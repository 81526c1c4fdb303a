//! Mean-field minimizers: the thermal density at finite theta and the
//! zero-temperature equilibrium measure reached by continuation in theta.
//!
//! Optimality is always measured through the first-order condition. With
//! h = g * mu and c the multiplier, the thermal solution satisfies
//! 2h + V + (1/theta) log mu = c everywhere, and the equilibrium measure
//! satisfies zeta := 2h + V - c >= 0 with equality on its support.

use crate::error::{Error, Result};
use crate::grid::{GridField, ProbabilityDensity, SpectralField, TorusGrid};
use crate::kernel::Kernel;
use crate::potential::Potential;
use rustfft::num_complex::Complex64;

#[derive(Clone, Copy, Debug)]
pub struct SolverOptions {
    /// Initial step size of the damped fixed-point iteration.
    pub damping: f64,
    pub max_iter: usize,
    /// Convergence target for the sup-norm of the first-order residual.
    pub tol: f64,
    /// Final rung of the theta continuation in `solve_equilibrium`.
    pub theta_max: f64,
    /// Support cutoff relative to max mu.
    pub support_threshold: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            damping: 0.5,
            max_iter: 20_000,
            tol: 1e-11,
            theta_max: 16_384.0,
            support_threshold: 1e-3,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ThermalEquilibrium {
    pub density: ProbabilityDensity,
    pub h: GridField,
    pub theta: f64,
    pub c_theta: f64,
    /// zeta_theta = -(1/theta) log mu = c_theta - 2h - V.
    pub zeta: GridField,
    pub residual: f64,
    pub iterations: usize,
    pub energy: f64,
    pub entropy: f64,
}

#[derive(Clone, Debug)]
pub struct EquilibriumMeasure {
    pub density: ProbabilityDensity,
    pub h: GridField,
    pub c_inf: f64,
    /// zeta = 2h + V - c_inf; >= 0 with equality on the support.
    pub zeta: GridField,
    pub support: Vec<bool>,
    pub support_threshold: f64,
    /// (threshold, support volume) for a small sweep around the cutoff.
    pub support_sensitivity: Vec<(f64, f64)>,
    /// max |zeta| over the eroded support.
    pub residual_on_support: f64,
    pub min_zeta: f64,
    pub theta_ladder: Vec<f64>,
    pub energy: f64,
}

/// Potential field h(mu) = g * mu, synthesized from g^(m) mu~(m).
pub fn h_field(kernel: &Kernel, mu: &GridField) -> GridField {
    let grid = mu.grid();
    assert_eq!(grid, kernel.grid(), "density and kernel on different grids");
    let spec = mu.spectrum();
    let td = grid.volume();
    let coeffs: Vec<Complex64> = kernel
        .ghat()
        .iter()
        .zip(spec.coeffs())
        .map(|(&g, c)| g * td * c)
        .collect();
    SpectralField::new(grid, coeffs)
        .expect("length preserved")
        .field()
        .expect("real product of even coefficients")
}

/// Interaction plus potential energy of a density.
pub fn mean_field_energy(kernel: &Kernel, v: &GridField, mu: &ProbabilityDensity) -> f64 {
    kernel.energy_of_density(mu.field()) + v.quadrature_against(mu.field())
}

/// Mean-field energy plus the (1/theta) entropy term.
pub fn thermal_energy(kernel: &Kernel, v: &GridField, mu: &ProbabilityDensity, theta: f64) -> f64 {
    mean_field_energy(kernel, v, mu) + mu.entropy() / theta
}

/// Normalized density proportional to exp(-theta zeta), and its mass
/// z = integral of exp(-theta zeta) before normalization.
pub fn tilted_density(zeta: &GridField, theta: f64) -> Result<(ProbabilityDensity, f64)> {
    if !(theta.is_finite() && theta > 0.0) {
        return Err(Error::InvalidParameter(format!("theta {theta} must be positive")));
    }
    let shift = zeta.min();
    let w = zeta.map(|z| (-theta * (z - shift)).exp());
    let z = w.quadrature() * (-theta * shift).exp();
    Ok((ProbabilityDensity::from_unnormalized(w)?, z))
}

/// Cells at least `threshold` * max(mu) full.
pub fn support_mask(mu: &GridField, threshold: f64) -> Vec<bool> {
    let cut = threshold * mu.max();
    mu.values().iter().map(|&v| v >= cut).collect()
}

/// Strip mask cells with any off-mask axis neighbor (periodic).
pub fn erode_mask(grid: TorusGrid, mask: &[bool]) -> Vec<bool> {
    let n = grid.n();
    let mut out = vec![false; mask.len()];
    for idx in 0..mask.len() {
        if !mask[idx] {
            continue;
        }
        let k = grid.coords_of(idx);
        let mut interior = true;
        'axes: for a in 0..grid.d() {
            for step in [n - 1, 1] {
                let mut kk = k;
                kk[a] = (k[a] + step) % n;
                if !mask[grid.index_of(&kk)] {
                    interior = false;
                    break 'axes;
                }
            }
        }
        out[idx] = interior;
    }
    out
}

struct Solved {
    /// Normalized log density.
    y: Vec<f64>,
    h: GridField,
    c: f64,
    residual: f64,
    iterations: usize,
}

/// Normalize a raw log density in place and return the thermal free energy
/// of the density it defines.
fn normalized_free_energy(
    kernel: &Kernel,
    v: &GridField,
    theta: f64,
    w: &mut [f64],
) -> f64 {
    let grid = kernel.grid();
    let cell = grid.cell_volume();
    let shift = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = shift + (cell * w.iter().map(|&x| (x - shift).exp()).sum::<f64>()).ln();
    let mut vmu = 0.0;
    let mut ent = 0.0;
    let mut mu = vec![0.0; w.len()];
    for i in 0..w.len() {
        w[i] -= lse;
        mu[i] = w[i].exp();
        vmu += v.values()[i] * mu[i];
        ent += mu[i] * w[i];
    }
    let mu = GridField::new(grid, mu).expect("sized");
    kernel.energy_of_density(&mu) + cell * (vmu + ent / theta)
}

/// Damped fixed-point iteration on w = log mu, taking the first-order
/// residual to zero.
///
/// The scalar variant steps all cells uniformly with damping that halves on
/// oscillation. The continuation variant splits the step: cells too empty to
/// feed back through h take the full frozen-field Newton move (capped so a
/// dead cell never jumps straight into the bulk), live cells get the
/// mode-preconditioned step (divide the coefficient at m by 1 + 2 theta
/// g^(m), the linearization around the uniform density), and the combined
/// step is backtracked against the thermal free energy, which is strictly
/// convex, so progress is monotone.
fn fixed_point(
    kernel: &Kernel,
    v: &GridField,
    theta: f64,
    opts: &SolverOptions,
    preconditioned: bool,
    tol: f64,
    w0: Vec<f64>,
) -> Result<Solved> {
    let grid = kernel.grid();
    let len = grid.len();
    let cell = grid.cell_volume();
    // below this normalized log density a cell's contribution to h is noise
    let live_y = (0.1 / grid.volume()).ln();
    let mut w = w0;
    let mut delta = opts.damping;
    let mut prev_res = f64::INFINITY;
    let mut step = vec![0.0; len];
    for iter in 0..opts.max_iter {
        let f_cur = normalized_free_energy(kernel, v, theta, &mut w);
        let mu = GridField::new(grid, w.iter().map(|&x| x.exp()).collect()).expect("sized");
        let h = h_field(kernel, &mu);

        let mut c = 0.0;
        for i in 0..len {
            let phi = 2.0 * h.values()[i] + v.values()[i] + w[i] / theta;
            c += phi * mu.values()[i];
            step[i] = phi;
        }
        c *= cell;
        let mut res: f64 = 0.0;
        for s in step.iter_mut() {
            *s -= c;
            res = res.max(s.abs());
        }
        if !res.is_finite() || res > 1e8 {
            return Err(Error::DivergedField);
        }
        if res <= tol {
            return Ok(Solved { y: w, h, c, residual: res, iterations: iter });
        }

        if preconditioned {
            let mut dir = vec![0.0; len];
            let mut live = vec![0.0; len];
            for i in 0..len {
                if w[i] < live_y {
                    // rise stops at the live boundary so regimes change one way
                    dir[i] = (-theta * step[i]).min(live_y - w[i]);
                } else {
                    live[i] = step[i];
                }
            }
            let spec = GridField::new(grid, live).expect("sized").spectrum();
            let coeffs: Vec<Complex64> = kernel
                .ghat()
                .iter()
                .zip(spec.coeffs())
                .map(|(&g, s)| s / (1.0 + 2.0 * theta * g))
                .collect();
            let damped = SpectralField::new(grid, coeffs)
                .expect("sized")
                .field()
                .expect("real step");
            for i in 0..len {
                if w[i] >= live_y {
                    dir[i] = -theta * damped.values()[i];
                }
            }
            let mut slope =
                cell * (0..len).map(|i| mu.values()[i] * step[i] * dir[i]).sum::<f64>();
            if slope >= 0.0 {
                // preconditioner turned uphill; fall back to the plain
                // w-space gradient, which always descends
                for i in 0..len {
                    dir[i] = -theta * step[i];
                }
                slope = -theta * cell * (0..len).map(|i| mu.values()[i] * step[i].powi(2)).sum::<f64>();
            }
            // once |slope| sinks into rounding noise of F the quadratic model
            // is exact and backtracking can only flail; the epsilon slack
            // lets the full Newton step through
            let noise = 8.0 * f64::EPSILON * f_cur.abs().max(1.0);
            let mut s = 1.0;
            for _ in 0..60 {
                let mut trial: Vec<f64> =
                    w.iter().zip(&dir).map(|(&wi, &p)| wi + s * p).collect();
                let f_try = normalized_free_energy(kernel, v, theta, &mut trial);
                if f_try <= f_cur + 1e-4 * s * slope + noise {
                    w = trial;
                    break;
                }
                s *= 0.5;
                if s < 1e-14 {
                    // flat to rounding; take the tiny step and move on
                    w = trial;
                    break;
                }
            }
        } else {
            if res > prev_res {
                delta = (0.5 * delta).max(1e-6);
            } else {
                delta = (1.05 * delta).min(opts.damping);
            }
            let mean = step.iter().sum::<f64>() / len as f64;
            for (wi, &s) in w.iter_mut().zip(&step) {
                *wi -= delta * theta * (s - mean);
            }
        }
        prev_res = res;
    }
    Err(Error::NoConvergence { iterations: opts.max_iter, residual: prev_res })
}

pub fn solve_thermal(
    kernel: &Kernel,
    potential: &Potential,
    theta: f64,
    opts: &SolverOptions,
) -> Result<ThermalEquilibrium> {
    if !(theta.is_finite() && theta > 0.0) {
        return Err(Error::InvalidParameter(format!("theta {theta} must be positive")));
    }
    let grid = kernel.grid();
    let v = potential.field(grid)?;
    let solved = fixed_point(kernel, &v, theta, opts, false, opts.tol, vec![0.0; grid.len()])?;
    thermal_from_solved(kernel, &v, theta, solved)
}

fn thermal_from_solved(
    kernel: &Kernel,
    v: &GridField,
    theta: f64,
    solved: Solved,
) -> Result<ThermalEquilibrium> {
    let grid = kernel.grid();
    let mu = GridField::new(grid, solved.y.iter().map(|&x| x.exp()).collect())?;
    let zeta = GridField::new(grid, solved.y.iter().map(|&x| -x / theta).collect())?;
    let density = ProbabilityDensity::from_unnormalized(mu)?;
    let energy = thermal_energy(kernel, v, &density, theta);
    let entropy = density.entropy();
    Ok(ThermalEquilibrium {
        h: solved.h,
        density,
        theta,
        c_theta: solved.c,
        zeta,
        residual: solved.residual,
        iterations: solved.iterations,
        energy,
        entropy,
    })
}

/// Zero-temperature equilibrium by continuation: climb a theta ladder with
/// warm starts, then cancel the leading 1/theta bias by extrapolating the
/// last two rungs (held a factor 2 apart).
pub fn solve_equilibrium(
    kernel: &Kernel,
    potential: &Potential,
    opts: &SolverOptions,
) -> Result<EquilibriumMeasure> {
    let grid = kernel.grid();
    let v = potential.field(grid)?;
    if !(opts.theta_max.is_finite() && opts.theta_max >= 16.0) {
        return Err(Error::InvalidParameter(format!("theta_max {} too small", opts.theta_max)));
    }

    let mut ladder = vec![];
    let mut theta = 4.0;
    while theta < opts.theta_max / 2.0 {
        ladder.push(theta);
        theta *= 4.0;
    }
    ladder.push(opts.theta_max / 2.0);
    ladder.push(opts.theta_max);

    // residuals below the extrapolation's own 1/theta^2 bias are unobservable
    let tol = opts.tol.max(10.0 / opts.theta_max.powi(2));
    let mut w = vec![0.0; grid.len()];
    let mut half = None;
    let mut last = None;
    for &theta in &ladder {
        let solved = fixed_point(kernel, &v, theta, opts, true, tol, w)?;
        w = solved.y.clone();
        let mu: Vec<f64> = solved.y.iter().map(|&x| x.exp()).collect();
        if theta == opts.theta_max / 2.0 {
            half = Some(mu);
        } else if theta == opts.theta_max {
            last = Some(mu);
        }
    }
    let (half, last) = (half.expect("rung visited"), last.expect("rung visited"));

    // mu_theta = mu_inf + B/theta + O(1/theta^2): 2 mu(t) - mu(t/2) kills B
    let extrapolated: Vec<f64> = last
        .iter()
        .zip(&half)
        .map(|(&a, &b)| (2.0 * a - b).max(0.0))
        .collect();
    let density = ProbabilityDensity::from_unnormalized(GridField::new(grid, extrapolated)?)?;

    let h = h_field(kernel, density.field());
    let interaction = kernel.energy_of_density(density.field());
    let c_inf = 2.0 * interaction + v.quadrature_against(density.field());
    let zeta = GridField::new(
        grid,
        (0..grid.len())
            .map(|i| 2.0 * h.values()[i] + v.values()[i] - c_inf)
            .collect(),
    )?;

    let support = support_mask(density.field(), opts.support_threshold);
    let eroded = erode_mask(grid, &support);
    let residual_on_support = zeta
        .values()
        .iter()
        .zip(&eroded)
        .filter(|(_, &inside)| inside)
        .map(|(z, _)| z.abs())
        .fold(0.0f64, f64::max);
    let support_sensitivity = [1e-2, 1e-3, 1e-4]
        .iter()
        .map(|&thr| {
            let count = support_mask(density.field(), thr).iter().filter(|&&b| b).count();
            (thr, grid.cell_volume() * count as f64)
        })
        .collect();

    let energy = interaction + v.quadrature_against(density.field());
    Ok(EquilibriumMeasure {
        min_zeta: zeta.min(),
        h,
        c_inf,
        zeta,
        support,
        support_threshold: opts.support_threshold,
        support_sensitivity,
        residual_on_support,
        theta_ladder: ladder,
        energy,
        density,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TorusGrid;
    use approx::assert_relative_eq;
    use std::f64::consts::TAU;

    fn riesz2(n: usize, side: f64) -> Kernel {
        Kernel::riesz(TorusGrid::new(1, side, n).unwrap(), 2.0, 1.0).unwrap()
    }

    #[test]
    fn flat_potential_gives_uniform_density_and_exact_multiplier() {
        for side in [1.0, 2.0] {
            let kernel = riesz2(256, side);
            let theta = 2.5;
            let eq = solve_thermal(&kernel, &Potential::Zero, theta, &SolverOptions::default())
                .unwrap();
            let want = 1.0 / side;
            for &v in eq.density.field().values() {
                assert_relative_eq!(v, want, max_relative = 1e-10);
            }
            // c = 2 g^(0) + (1/theta) log(1/T^d)
            assert_relative_eq!(
                eq.c_theta,
                2.0 + (1.0 / side).ln() / theta,
                max_relative = 1e-10
            );
            assert!(eq.residual < 1e-11);
        }
    }

    #[test]
    fn weak_potential_linear_response() {
        // FOC mode 1: mu~(1) (2 g^(1) + 1/theta) = -V^(1) + O(eps^2)
        let kernel = riesz2(512, 1.0);
        let theta = 8.0;
        let eps = 1e-3;
        let eq = solve_thermal(
            &kernel,
            &Potential::Cosine { amplitude: eps, mode: 1 },
            theta,
            &SolverOptions::default(),
        )
        .unwrap();
        let moment = eq.density.field().spectrum().coeff_at(&[1, 0, 0]).re;
        let want = -(eps / 2.0) / (2.0 + 1.0 / theta);
        assert!((moment - want).abs() < 5.0 * eps * eps, "{moment} vs {want}");
    }

    #[test]
    fn cosine_equilibrium_is_exact() {
        // V = cos(2 pi x), g^(1) = 1: mu = 1 - cos(2 pi x)/2, c = 2, zeta = 0
        let kernel = riesz2(512, 1.0);
        let eq = solve_equilibrium(
            &kernel,
            &Potential::Cosine { amplitude: 1.0, mode: 1 },
            &SolverOptions::default(),
        )
        .unwrap();
        let spec = eq.density.field().spectrum();
        assert_relative_eq!(spec.coeff_at(&[1, 0, 0]).re, -0.25, epsilon = 1e-6);
        assert_relative_eq!(eq.c_inf, 2.0, epsilon = 1e-6);
        assert!(eq.zeta.max().abs() < 1e-6 && eq.zeta.min().abs() < 1e-6);
        assert!(eq.support.iter().all(|&b| b), "full support expected");
        assert_relative_eq!(eq.energy, 1.125 - 0.25, epsilon = 1e-6);
    }

    #[test]
    fn strong_well_concentrates_support() {
        let kernel = riesz2(512, 1.0);
        let eq = solve_equilibrium(
            &kernel,
            &Potential::GaussianWell { depth: 6.0, width: 0.08, center: [0.5, 0.0, 0.0] },
            &SolverOptions { theta_max: 8192.0, ..SolverOptions::default() },
        )
        .unwrap();
        let frac = eq.support.iter().filter(|&&b| b).count() as f64 / 512.0;
        assert!(frac < 0.95, "support should shrink, got {frac}");
        assert!(eq.min_zeta > -2e-3, "zeta min {}", eq.min_zeta);
        // the extrapolated measure carries a flat ~2e-3 offset across each
        // support component (mass split between well and shelf converges like
        // the ladder tail; 4e-4 at theta_max = 32768), so the on-support
        // residual is a global scale, not an edge artifact
        assert!(eq.residual_on_support < 5e-3, "on-support residual {}", eq.residual_on_support);
        // off the (uneroded) support zeta must be pushed up
        let max_off = eq
            .zeta
            .values()
            .iter()
            .zip(&eq.support)
            .filter(|(_, &inside)| !inside)
            .map(|(z, _)| *z)
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(max_off > 0.0);
        // support volume stable under threshold sweep
        let vols: Vec<f64> = eq.support_sensitivity.iter().map(|&(_, v)| v).collect();
        let spread = (vols.iter().cloned().fold(f64::MIN, f64::max)
            - vols.iter().cloned().fold(f64::MAX, f64::min))
            / vols[1];
        assert!(spread < 0.15, "support volume swings {spread} across thresholds");
    }

    #[test]
    fn thermal_solution_minimizes_free_energy() {
        let kernel = riesz2(256, 1.0);
        let theta = 4.0;
        let v = Potential::Cosine { amplitude: 1.0, mode: 1 };
        let vf = v.field(kernel.grid()).unwrap();
        let eq = solve_thermal(&kernel, &v, theta, &SolverOptions::default()).unwrap();
        let best = thermal_energy(&kernel, &vf, &eq.density, theta);
        for k in 0..5 {
            let bump = GridField::from_fn(kernel.grid(), |x| {
                1.0 + 0.3 * (TAU * (k + 1) as f64 * x[0]).sin()
            });
            let mixed = GridField::new(
                kernel.grid(),
                eq.density
                    .field()
                    .values()
                    .iter()
                    .zip(bump.values())
                    .map(|(a, b)| a * b)
                    .collect(),
            )
            .unwrap();
            let nu = ProbabilityDensity::from_unnormalized(mixed).unwrap();
            let other = thermal_energy(&kernel, &vf, &nu, theta);
            assert!(other - best > -1e-10, "perturbation {k} beats the minimizer");
        }
    }

    #[test]
    fn iteration_budget_is_enforced() {
        let kernel = riesz2(128, 1.0);
        let opts = SolverOptions { max_iter: 3, tol: 1e-15, ..SolverOptions::default() };
        match solve_thermal(&kernel, &Potential::Cosine { amplitude: 1.0, mode: 1 }, 4.0, &opts) {
            Err(Error::NoConvergence { iterations: 3, .. }) => {}
            other => panic!("expected NoConvergence, got {other:?}"),
        }
    }

    #[test]
    fn tilted_density_normalizes() {
        let grid = TorusGrid::new(1, 1.0, 128).unwrap();
        let zeta = GridField::from_fn(grid, |x| (TAU * x[0]).cos() + 1.0);
        let (p, z) = tilted_density(&zeta, 3.0).unwrap();
        assert!(z > 0.0);
        assert_relative_eq!(p.field().quadrature(), 1.0, max_relative = 1e-12);
        // direct quadrature of exp(-theta zeta)
        let direct = zeta.map(|v| (-3.0 * v).exp()).quadrature();
        assert_relative_eq!(z, direct, max_relative = 1e-12);
    }
}
