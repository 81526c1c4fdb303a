//! Metropolis sampling of the Gibbs measure exp(-beta H_N) and the Monte
//! Carlo evaluation of concentration and Laplace-transform bounds for linear
//! statistics.
//!
//! Moves are single-particle with incremental O(N) energy updates; a full
//! recomputation every block of accepted moves guards against drift. The
//! pairwise energy uses the same interpolated band-limited g as the exact
//! Hamiltonian routines, so incremental and full agree to rounding.

use crate::equilibrium::{EquilibriumMeasure, ThermalEquilibrium};
use crate::error::{Error, Result};
use crate::grid::{GridField, ProbabilityDensity, MAX_DIM};
use crate::kernel::Kernel;
use crate::particles::{hamiltonian_with, Configuration, FluctuationObservable, PairPotential};
use crate::potential::Potential;
use crate::stats::{block_jackknife, integrated_autocorrelation_time, mean, wilson_interval};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Exponent cap for any exp() the harness evaluates.
pub const MAX_SAFE_EXPONENT: f64 = 700.0;

#[derive(Debug, Clone, Copy)]
pub struct GibbsParams<'a> {
    pub n_points: usize,
    pub beta: f64,
    pub kernel: &'a Kernel,
    pub potential: &'a Potential,
}

impl<'a> GibbsParams<'a> {
    pub fn new(
        n_points: usize,
        beta: f64,
        kernel: &'a Kernel,
        potential: &'a Potential,
    ) -> Result<Self> {
        if n_points == 0 {
            return Err(Error::InvalidParameter("need at least one particle".into()));
        }
        if !(beta.is_finite() && beta >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "inverse temperature {beta} must be finite and nonnegative"
            )));
        }
        Ok(Self { n_points, beta, kernel, potential })
    }

    /// theta = N beta, the mean-field temperature parameter.
    pub fn theta(&self) -> f64 {
        self.n_points as f64 * self.beta
    }
}

#[derive(Debug, Clone)]
pub struct ChainOptions {
    /// Post burn-in proposal count.
    pub steps: usize,
    pub burn_in: usize,
    /// Record every `thin`-th step.
    pub thin: usize,
    /// Fixed proposal half-width; None tunes to 30-50% acceptance in burn-in.
    pub proposal_scale: Option<f64>,
    pub seed: u64,
    /// Accepted moves between full energy recomputations.
    pub recompute_every: usize,
    pub drift_tol: f64,
}

impl Default for ChainOptions {
    fn default() -> Self {
        Self {
            steps: 100_000,
            burn_in: 10_000,
            thin: 100,
            proposal_scale: None,
            seed: 1,
            recompute_every: 1_000,
            drift_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ChainResult {
    pub samples: Vec<Configuration>,
    /// H_N at the recorded steps.
    pub energy_series: Vec<f64>,
    /// Post burn-in acceptance fraction.
    pub acceptance_rate: f64,
    /// Frozen proposal half-width.
    pub proposal_scale: f64,
    pub seed: u64,
    pub steps: usize,
    pub burn_in: usize,
    pub thin: usize,
    /// Proposals rejected for landing inside the coincidence guard.
    pub singular_rejections: usize,
    /// Autocorrelation time of H_N, in proposal steps.
    pub energy_iat_steps: f64,
}

/// Metropolis acceptance probability for an energy change `delta_h`.
pub fn acceptance_probability(beta: f64, delta_h: f64) -> f64 {
    let x = beta * delta_h;
    if x <= 0.0 {
        1.0
    } else {
        (-x).exp()
    }
}

fn torus_distance(a: &[f64; MAX_DIM], b: &[f64; MAX_DIM], d: usize, side: f64) -> f64 {
    let mut s = 0.0;
    for axis in 0..d {
        let mut dx = (a[axis] - b[axis]).abs();
        if dx > side / 2.0 {
            dx = side - dx;
        }
        s += dx * dx;
    }
    s.sqrt()
}

/// g(a - b) through the same wrap + interpolation as the pair-energy path.
fn g_between(g: &GridField, a: &[f64; MAX_DIM], b: &[f64; MAX_DIM], d: usize, side: f64) -> f64 {
    let mut diff = [0.0; MAX_DIM];
    for axis in 0..d {
        diff[axis] = (a[axis] - b[axis]).rem_euclid(side);
    }
    g.sample(&diff)
}

struct ChainState<'a> {
    pair: &'a PairPotential,
    vfield: &'a GridField,
    config: Configuration,
    energy: f64,
    beta: f64,
    d: usize,
    side: f64,
    scale: f64,
    rng: ChaCha8Rng,
    recompute_every: usize,
    drift_tol: f64,
    accepted_since_recompute: usize,
    singular_rejections: usize,
}

impl ChainState<'_> {
    fn recompute(&mut self) -> Result<()> {
        let full = hamiltonian_with(self.pair, self.vfield, &self.config)?;
        let drift = (self.energy - full).abs();
        if drift > self.drift_tol {
            return Err(Error::EnergyDrift { drift });
        }
        self.energy = full;
        self.accepted_since_recompute = 0;
        Ok(())
    }

    /// One proposal; returns whether it was accepted.
    fn step(&mut self) -> Result<bool> {
        let n = self.config.len();
        let i = self.rng.gen_range(0..n);
        let old = self.config.points()[i];
        let mut cand = old;
        for axis in 0..self.d {
            let moved = old[axis] + self.scale * self.rng.gen_range(-1.0..1.0);
            let wrapped = moved.rem_euclid(self.side);
            cand[axis] = if wrapped >= self.side { 0.0 } else { wrapped };
        }

        let g = self.pair.field();
        let guard = self.pair.min_distance();
        let mut delta_pair = 0.0;
        for (j, q) in self.config.points().iter().enumerate() {
            if j == i {
                continue;
            }
            if torus_distance(&cand, q, self.d, self.side) < guard {
                self.singular_rejections += 1;
                return Ok(false);
            }
            delta_pair += g_between(g, &cand, q, self.d, self.side)
                - g_between(g, &old, q, self.d, self.side);
        }
        let delta_h = 2.0 * delta_pair
            + n as f64 * (self.vfield.sample(&cand) - self.vfield.sample(&old));
        if !delta_h.is_finite() {
            return Err(Error::NonFiniteEnergy);
        }

        let a = acceptance_probability(self.beta, delta_h);
        if a >= 1.0 || self.rng.gen_range(0.0..1.0) < a {
            self.config.set_point(i, cand);
            self.energy += delta_h;
            self.accepted_since_recompute += 1;
            if self.accepted_since_recompute >= self.recompute_every {
                self.recompute()?;
            }
            Ok(true)
        } else {
            Ok(false)
        }
    }
}

/// Sample the Gibbs measure with single-particle Metropolis moves.
pub fn mcmc_sample(params: &GibbsParams, opts: &ChainOptions) -> Result<ChainResult> {
    let grid = params.kernel.grid();
    let d = grid.d();
    let side = grid.side();
    if opts.thin == 0 || opts.steps == 0 {
        return Err(Error::InvalidParameter("steps and thin must be positive".into()));
    }
    let pair = PairPotential::new(params.kernel)?;
    let vfield = params.potential.field(grid)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);

    let config = {
        let mut tries = 0;
        loop {
            let c = Configuration::random_uniform(params.n_points, d, side, &mut rng)?;
            if params.n_points == 1 || c.min_separation() >= pair.min_distance() {
                break c;
            }
            tries += 1;
            if tries > 1_000 {
                return Err(Error::InvalidParameter(
                    "could not draw an initial configuration clear of the coincidence guard"
                        .into(),
                ));
            }
        }
    };
    let energy = hamiltonian_with(&pair, &vfield, &config)?;
    if !energy.is_finite() {
        return Err(Error::NonFiniteEnergy);
    }

    let mut state = ChainState {
        pair: &pair,
        vfield: &vfield,
        config,
        energy,
        beta: params.beta,
        d,
        side,
        scale: opts.proposal_scale.unwrap_or(0.1 * side),
        rng,
        recompute_every: opts.recompute_every.max(1),
        drift_tol: opts.drift_tol,
        accepted_since_recompute: 0,
        singular_rejections: 0,
    };

    // burn-in, tuning the proposal toward 30-50% acceptance in windows
    let tuning = opts.proposal_scale.is_none();
    let mut window_accepted = 0usize;
    let mut window_proposed = 0usize;
    for _ in 0..opts.burn_in {
        if state.step()? {
            window_accepted += 1;
        }
        window_proposed += 1;
        if tuning && window_proposed == 200 {
            let rate = window_accepted as f64 / window_proposed as f64;
            if rate < 0.30 {
                state.scale *= 0.8;
            } else if rate > 0.50 {
                state.scale *= 1.25;
            }
            state.scale = state.scale.clamp(1e-4 * side, 0.5 * side);
            window_accepted = 0;
            window_proposed = 0;
        }
    }

    let mut samples = Vec::with_capacity(opts.steps / opts.thin);
    let mut energy_series = Vec::with_capacity(opts.steps / opts.thin);
    let mut accepted = 0usize;
    for step in 1..=opts.steps {
        if state.step()? {
            accepted += 1;
        }
        if step % opts.thin == 0 {
            samples.push(state.config.clone());
            energy_series.push(state.energy);
        }
    }
    state.recompute()?;

    let energy_iat_steps =
        integrated_autocorrelation_time(&energy_series) * opts.thin as f64;
    Ok(ChainResult {
        samples,
        energy_series,
        acceptance_rate: accepted as f64 / opts.steps as f64,
        proposal_scale: state.scale,
        seed: opts.seed,
        steps: opts.steps,
        burn_in: opts.burn_in,
        thin: opts.thin,
        singular_rejections: state.singular_rejections,
        energy_iat_steps,
    })
}

/// Fluct[f] evaluated on every recorded sample.
pub fn fluctuation_series(chain: &ChainResult, obs: &FluctuationObservable) -> Vec<f64> {
    chain.samples.iter().map(|c| obs.evaluate(c)).collect()
}

/// Autocorrelation gate: the observable must decorrelate at least 50 times
/// over the chain. Returns the autocorrelation time in proposal steps.
pub fn stationarity_gate(chain: &ChainResult, series: &[f64]) -> Result<f64> {
    let tau = integrated_autocorrelation_time(series) * chain.thin as f64;
    let limit = chain.steps as f64 / 50.0;
    if tau < limit {
        Ok(tau)
    } else {
        Err(Error::StationarityGateFailed { tau, limit })
    }
}

/// Per-r row of a bound evaluation. Columns are filled by whichever report
/// produced the row; None means not applicable to that report.
#[derive(Debug, Clone, serde::Serialize)]
pub struct BoundRow {
    pub r: f64,
    /// r^2 / ||h_{-1/2} f||^2, the concentration exponent rate.
    pub conc_leading: f64,
    /// (r^2/4) ||h_{-1/2} f||^2, the log-Laplace leading term.
    pub laplace_leading: f64,
    pub p_hat: Option<f64>,
    pub p_low: Option<f64>,
    pub p_high: Option<f64>,
    /// Tail probability below the 10/M resolution floor.
    pub censored: bool,
    /// -log p_hat / (N^2 beta).
    pub rate_estimate: Option<f64>,
    /// Half-width of the rate interval implied by the Wilson bounds.
    pub rate_ci: Option<f64>,
    /// ent[mu_inf + r h_{-1}f / ||h_{-1/2}f||^2 | uniform on Sigma].
    pub entropy_rate: Option<f64>,
    /// ent[mu_th + r h_{-1}f / ||h_{-1/2}f||^2 | mu_th].
    pub entropy_rate_thermal: Option<f64>,
    /// log E[exp(N^2 beta r Fluct)] / (N^2 beta).
    pub log_laplace: Option<f64>,
    pub log_laplace_se: Option<f64>,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct BoundReport {
    pub observable: String,
    /// ||h_{-1/2} f||^2_{L^2}.
    pub h_half_norm2: f64,
    pub mean_fluct: f64,
    pub n_samples: usize,
    /// Observable autocorrelation time, proposal steps.
    pub iat_steps: f64,
    /// Whether h_{-1}(f) is supported in the reference support set.
    pub support_ok: Option<bool>,
    /// Largest r keeping the relevant perturbed density nonnegative.
    pub r_positivity: Option<f64>,
    pub rows: Vec<BoundRow>,
    /// d/dr of log-Laplace at r = 0 (central difference) and its error.
    pub slope_at_zero: Option<f64>,
    pub slope_se: Option<f64>,
}

fn h_half_norm2(kernel: &Kernel, f: &GridField) -> Result<f64> {
    let norm2 = kernel.apply_h_alpha(&f.spectrum(), -0.5).l2_norm2();
    if norm2 <= 0.0 {
        return Err(Error::InvalidParameter(
            "observable is constant: ||h_{-1/2} f|| vanishes".into(),
        ));
    }
    Ok(norm2)
}

/// Largest r with base + r * direction >= 0 pointwise (direction mean-zero).
fn positivity_radius(base: &GridField, direction: &GridField) -> f64 {
    let mut r0 = f64::INFINITY;
    for (&b, &h) in base.values().iter().zip(direction.values()) {
        if h < 0.0 {
            r0 = r0.min(b / -h);
        }
    }
    r0
}

fn perturbed_density(
    base: &ProbabilityDensity,
    direction: &GridField,
    r: f64,
) -> Option<ProbabilityDensity> {
    let values: Vec<f64> = base
        .field()
        .values()
        .iter()
        .zip(direction.values())
        .map(|(&b, &h)| b + r * h)
        .collect();
    if values.iter().any(|&v| v < -1e-12) {
        return None;
    }
    let field = GridField::new(base.grid(), values.iter().map(|&v| v.max(0.0)).collect())
        .expect("length preserved");
    ProbabilityDensity::new(field).ok()
}

/// Empirical tail probabilities of |Fluct[f]| with Wilson intervals against
/// the theoretical exponent rate, plus the paper-side entropy rate terms
/// where the perturbed measures exist.
pub fn concentration_report(
    chain: &ChainResult,
    params: &GibbsParams,
    obs: &FluctuationObservable,
    eq: Option<&EquilibriumMeasure>,
    thermal: Option<&ThermalEquilibrium>,
    r_grid: &[f64],
) -> Result<BoundReport> {
    let series = fluctuation_series(chain, obs);
    let iat_steps = stationarity_gate(chain, &series)?;
    let norm2 = h_half_norm2(params.kernel, obs.field())?;
    let h_minus_one = params
        .kernel
        .apply_h_alpha(&obs.field().spectrum(), -1.0)
        .field()?;
    // perturbation direction of the lower-bound rate terms
    let direction = h_minus_one.map(|v| v / norm2);

    let support_ok = eq.map(|e| {
        let peak = h_minus_one.values().iter().fold(0.0f64, |a, &v| a.max(v.abs()));
        h_minus_one
            .values()
            .iter()
            .zip(&e.support)
            .all(|(&v, &inside)| inside || v.abs() <= 1e-10 * peak)
    });
    let r_positivity = thermal.map(|th| positivity_radius(th.density.field(), &direction));

    let m = series.len();
    let n2b = (params.n_points as f64).powi(2) * params.beta;
    let floor = 10.0 / m as f64;
    let mut rows = Vec::with_capacity(r_grid.len());
    for &r in r_grid {
        let hits = series.iter().filter(|&&x| x.abs() >= r).count();
        let (p_low, p_hat, p_high) = wilson_interval(hits, m, 1.0);
        let censored = p_hat < floor;
        let (rate_estimate, rate_ci) = if p_hat > 0.0 && p_low > 0.0 && n2b > 0.0 {
            (
                Some(-p_hat.ln() / n2b),
                Some((p_high.ln() - p_low.ln()) / (2.0 * n2b)),
            )
        } else {
            (None, None)
        };
        let entropy_rate = match (eq, support_ok) {
            (Some(e), Some(true)) => perturbed_density(&e.density, &direction, r)
                .map(|p| crate::grid::relative_entropy_vs_mask(p.field(), &e.support)),
            _ => None,
        };
        let entropy_rate_thermal = thermal.and_then(|th| {
            perturbed_density(&th.density, &direction, r).map(|p| p.relative_entropy(&th.density))
        });
        rows.push(BoundRow {
            r,
            conc_leading: r * r / norm2,
            laplace_leading: r * r / 4.0 * norm2,
            p_hat: Some(p_hat),
            p_low: Some(p_low),
            p_high: Some(p_high),
            censored,
            rate_estimate,
            rate_ci,
            entropy_rate,
            entropy_rate_thermal,
            log_laplace: None,
            log_laplace_se: None,
        });
    }

    Ok(BoundReport {
        observable: "fluctuation".into(),
        h_half_norm2: norm2,
        mean_fluct: mean(&series),
        n_samples: m,
        iat_steps,
        support_ok,
        r_positivity,
        rows,
        slope_at_zero: None,
        slope_se: None,
    })
}

const JACKKNIFE_BLOCKS: usize = 64;

fn log_laplace_stat(series: &[f64], s: f64, n2b: f64) -> f64 {
    // log-mean-exp with max subtraction; exact 0 at s = 0
    if s == 0.0 {
        return 0.0;
    }
    let peak = series.iter().fold(f64::NEG_INFINITY, |a, &x| a.max(s * x));
    let sum: f64 = series.iter().map(|&x| (s * x - peak).exp()).sum();
    (peak + (sum / series.len() as f64).ln()) / n2b
}

/// Jackknifed estimates of log E[exp(N^2 beta r Fluct[f])] / (N^2 beta) on a
/// tilt grid, with the leading-term comparison columns, the slope at zero,
/// and the positivity radius of the lower-bound condition
/// mu_inf - (r/2) h_{-1}(f) >= 0.
pub fn laplace_report(
    chain: &ChainResult,
    params: &GibbsParams,
    obs: &FluctuationObservable,
    eq: Option<&EquilibriumMeasure>,
    r_grid: &[f64],
) -> Result<BoundReport> {
    let series = fluctuation_series(chain, obs);
    let iat_steps = stationarity_gate(chain, &series)?;
    let norm2 = h_half_norm2(params.kernel, obs.field())?;
    let h_minus_one = params
        .kernel
        .apply_h_alpha(&obs.field().spectrum(), -1.0)
        .field()?;

    let support_ok = eq.map(|e| {
        let peak = h_minus_one.values().iter().fold(0.0f64, |a, &v| a.max(v.abs()));
        h_minus_one
            .values()
            .iter()
            .zip(&e.support)
            .all(|(&v, &inside)| inside || v.abs() <= 1e-10 * peak)
    });
    let r_positivity =
        eq.map(|e| positivity_radius(e.density.field(), &h_minus_one.map(|v| -v / 2.0)));

    let m = series.len();
    let n2b = (params.n_points as f64).powi(2) * params.beta;
    if n2b <= 0.0 {
        return Err(Error::InvalidParameter(
            "log-Laplace normalization needs beta > 0".into(),
        ));
    }
    let fmax = series.iter().fold(0.0f64, |a, &x| a.max(x.abs()));

    let mut rows = Vec::with_capacity(r_grid.len());
    for &r in r_grid {
        let s = n2b * r;
        let exponent = s.abs() * fmax;
        if exponent > MAX_SAFE_EXPONENT {
            return Err(Error::OverflowGuard {
                r,
                exponent,
                max_safe: MAX_SAFE_EXPONENT / (n2b * fmax),
            });
        }
        let est = block_jackknife(&series, JACKKNIFE_BLOCKS, |d| log_laplace_stat(d, s, n2b))?;
        rows.push(BoundRow {
            r,
            conc_leading: r * r / norm2,
            laplace_leading: r * r / 4.0 * norm2,
            p_hat: None,
            p_low: None,
            p_high: None,
            censored: false,
            rate_estimate: None,
            rate_ci: None,
            entropy_rate: None,
            entropy_rate_thermal: None,
            log_laplace: Some(est.value),
            log_laplace_se: Some(est.std_err),
        });
    }

    // slope at r = 0 by central difference at the smallest step resolving
    // the tilt, jackknifed as a single statistic
    let r_s = r_grid
        .iter()
        .copied()
        .filter(|&r| r > 0.0)
        .fold(f64::INFINITY, f64::min)
        .min(1e-2);
    let (slope_at_zero, slope_se) = if r_s.is_finite() {
        let s = n2b * r_s;
        let est = block_jackknife(&series, JACKKNIFE_BLOCKS, |d| {
            (log_laplace_stat(d, s, n2b) - log_laplace_stat(d, -s, n2b)) / (2.0 * r_s)
        })?;
        (Some(est.value), Some(est.std_err))
    } else {
        (None, None)
    };

    Ok(BoundReport {
        observable: "fluctuation".into(),
        h_half_norm2: norm2,
        mean_fluct: mean(&series),
        n_samples: m,
        iat_steps,
        support_ok,
        r_positivity,
        rows,
        slope_at_zero,
        slope_se,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::{solve_equilibrium, solve_thermal, SolverOptions};
    use crate::grid::TorusGrid;
    use crate::stats::ks_test;
    use std::f64::consts::TAU;

    fn grid1(n: usize) -> TorusGrid {
        TorusGrid::new(1, 1.0, n).unwrap()
    }

    fn cos_field(grid: TorusGrid) -> GridField {
        GridField::from_fn(grid, |x| (TAU * x[0]).cos())
    }

    /// iid-uniform chain stand-in for report tests: exact samples, no MCMC.
    fn synthetic_chain(n_points: usize, m: usize, seed: u64) -> ChainResult {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let samples: Vec<Configuration> = (0..m)
            .map(|_| Configuration::random_uniform(n_points, 1, 1.0, &mut rng).unwrap())
            .collect();
        ChainResult {
            energy_series: samples.iter().map(|_| 0.0).collect(),
            samples,
            acceptance_rate: 0.5,
            proposal_scale: 0.1,
            seed,
            steps: m,
            burn_in: 0,
            thin: 1,
            singular_rejections: 0,
            energy_iat_steps: 1.0,
        }
    }

    #[test]
    fn detailed_balance_identity() {
        let grid = grid1(256);
        let kernel = Kernel::riesz(grid, 2.0, 1.0).unwrap();
        let pair = PairPotential::new(&kernel).unwrap();
        let vfield = Potential::Cosine { amplitude: 1.0, mode: 1 }.field(grid).unwrap();
        let x = Configuration::new(
            vec![[0.11, 0.0, 0.0], [0.47, 0.0, 0.0], [0.83, 0.0, 0.0]],
            1,
            1.0,
        )
        .unwrap();
        let mut y = x.clone();
        y.set_point(1, [0.52, 0.0, 0.0]);
        let hx = hamiltonian_with(&pair, &vfield, &x).unwrap();
        let hy = hamiltonian_with(&pair, &vfield, &y).unwrap();
        for beta in [0.3, 1.0, 4.0] {
            let lhs = (-beta * hx).exp() * acceptance_probability(beta, hy - hx);
            let rhs = (-beta * hy).exp() * acceptance_probability(beta, hx - hy);
            assert!(
                (lhs - rhs).abs() <= 1e-14 * lhs.abs().max(rhs.abs()),
                "beta {beta}: {lhs} vs {rhs}"
            );
        }
    }

    #[test]
    fn free_gas_marginals_are_uniform() {
        let grid = grid1(256);
        let kernel = Kernel::riesz(grid, 2.0, 1.0).unwrap();
        let v = Potential::Zero;
        let params = GibbsParams::new(8, 0.0, &kernel, &v).unwrap();
        let opts = ChainOptions {
            steps: 20_000,
            burn_in: 2_000,
            thin: 16,
            seed: 4,
            ..ChainOptions::default()
        };
        let chain = mcmc_sample(&params, &opts).unwrap();
        let pooled: Vec<f64> = chain
            .samples
            .iter()
            .flat_map(|c| c.points().iter().map(|p| p[0]))
            .collect();
        assert_eq!(pooled.len(), 10_000);
        let ks = ks_test(&pooled, |x| x.clamp(0.0, 1.0));
        assert!(ks.p_value > 0.01, "KS p = {} (D = {})", ks.p_value, ks.statistic);
    }

    #[test]
    fn single_particle_histogram_matches_the_tilted_density() {
        let grid = grid1(512);
        let kernel = Kernel::riesz(grid, 2.0, 1.0).unwrap();
        let v = Potential::Cosine { amplitude: 1.0, mode: 1 };
        let beta = 2.0;
        let params = GibbsParams::new(1, beta, &kernel, &v).unwrap();
        let opts = ChainOptions {
            steps: 320_000,
            burn_in: 10_000,
            thin: 32,
            seed: 12,
            ..ChainOptions::default()
        };
        let chain = mcmc_sample(&params, &opts).unwrap();
        let m = chain.samples.len();
        assert_eq!(m, 10_000);
        assert!(chain.acceptance_rate > 0.3 && chain.acceptance_rate < 0.5);

        // bin probabilities of the stationary density exp(-beta V)/Z on the
        // same lattice the chain sees
        let vfield = v.field(grid).unwrap();
        let weights: Vec<f64> = vfield.values().iter().map(|&w| (-beta * w).exp()).collect();
        let total: f64 = weights.iter().sum();
        let bins = 20;
        let mut expected = vec![0.0; bins];
        for (idx, w) in weights.iter().enumerate() {
            let x = grid.point(idx)[0];
            expected[((x * bins as f64) as usize).min(bins - 1)] += w / total;
        }
        let mut observed = vec![0usize; bins];
        for c in &chain.samples {
            let x = c.points()[0][0];
            observed[((x * bins as f64) as usize).min(bins - 1)] += 1;
        }
        for b in 0..bins {
            let mu = m as f64 * expected[b];
            let sigma = (m as f64 * expected[b] * (1.0 - expected[b])).sqrt();
            assert!(
                (observed[b] as f64 - mu).abs() < 3.0 * sigma,
                "bin {b}: observed {} expected {mu:.1} sigma {sigma:.1}",
                observed[b]
            );
        }
    }

    #[test]
    fn incremental_energy_tracks_full_recomputation() {
        let grid = grid1(256);
        let kernel = Kernel::riesz(grid, 2.0, 1.0).unwrap();
        let v = Potential::Cosine { amplitude: 0.5, mode: 1 };
        let params = GibbsParams::new(8, 1.0, &kernel, &v).unwrap();
        let opts = ChainOptions {
            steps: 100_000,
            burn_in: 1_000,
            thin: 1_000,
            seed: 2,
            ..ChainOptions::default()
        };
        // drift checks run inside; the sampler errors if they ever exceed 1e-6
        let chain = mcmc_sample(&params, &opts).unwrap();
        let pair = PairPotential::new(&kernel).unwrap();
        let vfield = v.field(grid).unwrap();
        let last = chain.samples.last().unwrap();
        let full = hamiltonian_with(&pair, &vfield, last).unwrap();
        assert!(
            (chain.energy_series.last().unwrap() - full).abs() < 1e-6,
            "tracked {} vs recomputed {}",
            chain.energy_series.last().unwrap(),
            full
        );
        assert!(chain.acceptance_rate > 0.0 && chain.acceptance_rate < 1.0);
    }

    #[test]
    fn concentration_report_on_iid_samples() {
        let grid = grid1(256);
        let kernel = Kernel::riesz(grid, 2.0, 1.0).unwrap();
        let v = Potential::Zero;
        let n_points = 16;
        let params = GibbsParams::new(n_points, 1.0, &kernel, &v).unwrap();
        let eq = solve_equilibrium(&kernel, &v, &SolverOptions::default()).unwrap();
        let th = solve_thermal(&kernel, &v, params.theta(), &SolverOptions::default()).unwrap();
        let chain = synthetic_chain(n_points, 4_000, 7);
        let obs = FluctuationObservable::new(cos_field(grid), &eq.density);
        let r_grid = [0.0, 0.05, 0.1, 0.2];
        let report =
            concentration_report(&chain, &params, &obs, Some(&eq), Some(&th), &r_grid).unwrap();

        // ||h_{-1/2} cos||^2 = 1/2 for unit Riesz gamma=2 coefficients
        assert!((report.h_half_norm2 - 0.5).abs() < 1e-10);
        assert_eq!(report.support_ok, Some(true));
        // mu_th uniform, direction = cos/(1/2): r0 = min 1/(2 cos) = 1/2
        assert!((report.r_positivity.unwrap() - 0.5).abs() < 1e-10);

        let r0 = &report.rows[0];
        assert!(r0.p_hat.unwrap() > 0.99, "all samples exceed r=0");
        assert_eq!(r0.conc_leading, 0.0);
        // entropy rates vanish at r = 0: both perturbed measures equal the
        // uniform reference
        assert!(r0.entropy_rate.unwrap().abs() < 1e-12);
        assert!(r0.entropy_rate_thermal.unwrap().abs() < 1e-12);
        // and grow with r
        let r_last = report.rows.last().unwrap();
        assert!(r_last.entropy_rate_thermal.unwrap() > 1e-4);

        // iid fluctuations of cos about uniform: Var = 1/(2N), sigma = 0.177;
        // the tail at r = 0.2 (1.1 sigma) is visible but well below 1
        let hits_row = report
            .rows
            .iter()
            .find(|row| (row.r - 0.2).abs() < 1e-12)
            .unwrap();
        assert!(hits_row.p_hat.unwrap() < 0.5);
        assert!(hits_row.p_hat.unwrap() > 0.05, "1.1 sigma tail empty");
        assert!(!hits_row.censored);
        assert!(hits_row.rate_estimate.unwrap() > 0.0);
    }

    #[test]
    fn laplace_report_slope_and_convexity_on_iid_samples() {
        let grid = grid1(256);
        let kernel = Kernel::riesz(grid, 2.0, 1.0).unwrap();
        let v = Potential::Zero;
        let n_points = 16;
        let params = GibbsParams::new(n_points, 0.25, &kernel, &v).unwrap();
        let eq = solve_equilibrium(&kernel, &v, &SolverOptions::default()).unwrap();
        let chain = synthetic_chain(n_points, 8_000, 19);
        let obs = FluctuationObservable::new(cos_field(grid), &eq.density);
        let r_grid = [0.0, 0.05, 0.1, 0.15, 0.2];
        let report = laplace_report(&chain, &params, &obs, Some(&eq), &r_grid).unwrap();

        // r = 0 is exactly zero by construction
        assert_eq!(report.rows[0].log_laplace.unwrap(), 0.0);
        // positivity radius of mu - (r/2) h_{-1} cos with mu uniform: 2.0
        assert!((report.r_positivity.unwrap() - 2.0).abs() < 1e-10);

        // slope at zero matches the sample mean within jackknife error
        let slope = report.slope_at_zero.unwrap();
        let se = report.slope_se.unwrap();
        let direct = mean(&fluctuation_series(&chain, &obs));
        assert!(
            (slope - direct).abs() < 3.0 * (se + 1e-6),
            "slope {slope} vs mean {direct} (se {se})"
        );

        // convexity of the estimated log-Laplace across the grid
        let l: Vec<f64> = report.rows.iter().map(|r| r.log_laplace.unwrap()).collect();
        let se_max = report
            .rows
            .iter()
            .map(|r| r.log_laplace_se.unwrap())
            .fold(0.0f64, f64::max);
        for w in l.windows(3) {
            assert!(
                w[2] - 2.0 * w[1] + w[0] > -6.0 * se_max,
                "second difference {} under jackknife noise {se_max}",
                w[2] - 2.0 * w[1] + w[0]
            );
        }
    }

    #[test]
    fn laplace_overflow_guard_triggers() {
        let grid = grid1(256);
        let kernel = Kernel::riesz(grid, 2.0, 1.0).unwrap();
        let v = Potential::Zero;
        let params = GibbsParams::new(64, 10.0, &kernel, &v).unwrap();
        let eq = solve_equilibrium(&kernel, &v, &SolverOptions::default()).unwrap();
        let chain = synthetic_chain(64, 2_000, 3);
        let obs = FluctuationObservable::new(cos_field(grid), &eq.density);
        match laplace_report(&chain, &params, &obs, None, &[0.0, 1e6]) {
            Err(Error::OverflowGuard { r, max_safe, .. }) => {
                assert_eq!(r, 1e6);
                assert!(max_safe < 1e6);
            }
            other => panic!("expected overflow guard, got {other:?}"),
        }
    }

    #[test]
    fn stationarity_gate_rejects_a_frozen_chain() {
        let grid = grid1(256);
        let kernel = Kernel::riesz(grid, 2.0, 1.0).unwrap();
        let v = Potential::Zero;
        let eq = solve_equilibrium(&kernel, &v, &SolverOptions::default()).unwrap();
        // a two-plateau chain: the observable series is a step function,
        // whose autocorrelation time is a fixed fraction of the length
        let m = 2_000;
        let a = Configuration::new(vec![[0.1, 0.0, 0.0]], 1, 1.0).unwrap();
        let b = Configuration::new(vec![[0.6, 0.0, 0.0]], 1, 1.0).unwrap();
        let samples: Vec<Configuration> =
            (0..m).map(|k| if k < m / 2 { a.clone() } else { b.clone() }).collect();
        let chain = ChainResult {
            samples,
            energy_series: vec![0.0; m],
            acceptance_rate: 0.0,
            proposal_scale: 0.1,
            seed: 5,
            steps: m,
            burn_in: 0,
            thin: 1,
            singular_rejections: 0,
            energy_iat_steps: m as f64,
        };
        let obs = FluctuationObservable::new(cos_field(grid), &eq.density);
        let series = fluctuation_series(&chain, &obs);
        match stationarity_gate(&chain, &series) {
            Err(Error::StationarityGateFailed { .. }) => {}
            other => panic!("expected gate failure, got {other:?}"),
        }
    }
}
