//! Release gate: each function exercises one headline guarantee end to end
//! and reports a verdict with the measured margins. The integration suite
//! prints one line per criterion; the CLI `all` command drives the same
//! functions.

use crate::construct::{self, ConstructionParams};
use crate::equilibrium::{
    solve_equilibrium, solve_thermal, thermal_energy, EquilibriumMeasure, SolverOptions,
    ThermalEquilibrium,
};
use crate::error::Result;
use crate::grid::{GridField, ProbabilityDensity, TorusGrid, MAX_DIM};
use crate::kernel::Kernel;
use crate::particles::{
    splitting_check, Configuration, EmpiricalMoments, FluctuationObservable, SplittingVariant,
};
use crate::partition::{direct_log_partition_checked, partition_lower_bounds};
use crate::potential::Potential;
use crate::regularize::{gap_bound_shape, test_error_from_moments, GapEvaluator};
use crate::sampler::{
    concentration_report, fluctuation_series, laplace_report, mcmc_sample, stationarity_gate,
    ChainOptions, ChainResult, GibbsParams,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::TAU;
use std::sync::OnceLock;
use std::time::Instant;

/// Verdict of one release criterion: sub-check lines plus the rolled-up flag.
#[derive(Debug, Clone, serde::Serialize)]
pub struct CriterionResult {
    pub name: &'static str,
    pub passed: bool,
    pub lines: Vec<String>,
}

impl CriterionResult {
    fn new(name: &'static str) -> Self {
        Self { name, passed: true, lines: Vec::new() }
    }

    fn check(&mut self, ok: bool, what: impl AsRef<str>) {
        self.lines.push(format!("{} {}", if ok { "ok  " } else { "FAIL" }, what.as_ref()));
        self.passed &= ok;
    }

    fn note(&mut self, what: impl AsRef<str>) {
        self.lines.push(format!("     {}", what.as_ref()));
    }

    pub fn summary(&self) -> String {
        format!("{} {}", self.name, if self.passed { "pass" } else { "FAIL" })
    }
}

pub fn logspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..count).map(|k| (a + (b - a) * k as f64 / (count - 1) as f64).exp()).collect()
}

fn fit_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| x * y).sum();
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

/// Mean-zero white noise: the roughest field the grid can carry, so the
/// identities are stressed across the whole band.
fn noise_field(grid: TorusGrid, rng: &mut ChaCha8Rng) -> GridField {
    let mut vals: Vec<f64> = (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mean = vals.iter().sum::<f64>() / vals.len() as f64;
    for v in &mut vals {
        *v -= mean;
    }
    GridField::new(grid, vals).expect("finite noise values")
}

/// Uniform configuration kept clear of the pair-evaluation coincidence guard.
fn separated_uniform(n: usize, grid: TorusGrid, rng: &mut ChaCha8Rng) -> Result<Configuration> {
    loop {
        let c = Configuration::random_uniform(n, grid.d(), grid.side(), rng)?;
        if c.min_separation() > grid.spacing() / 8.0 {
            return Ok(c);
        }
    }
}

/// Criterion 1: transform round-trip, Parseval, and the energy identity
/// E(h_{-1} f) = ||h_{-1/2} f||^2 on random mean-zero fields (unit torus,
/// where the two sides carry the same volume factor).
pub fn spectral_identities() -> Result<CriterionResult> {
    let started = Instant::now();
    let mut out = CriterionResult::new("criterion-1");
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst: f64 = 0.0;
    let mut fields = 0usize;
    for (d, n) in [(1usize, 256usize), (2, 128)] {
        let grid = TorusGrid::new(d, 1.0, n)?;
        let riesz = Kernel::riesz(grid, 2.0, 1.0)?;
        let coulomb = Kernel::coulomb(grid, 1.0)?;
        for trial in 0..25 {
            let kernel = if trial % 2 == 0 { &riesz } else { &coulomb };
            let f = noise_field(grid, &mut rng);
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

            let rough = kernel.apply_h_alpha(&spec, -1.0).field()?;
            let energy = kernel.energy_of_density(&rough);
            let norm2 = kernel.apply_h_alpha(&spec, -0.5).l2_norm2();
            let plancherel = (energy - norm2).abs() / norm2;

            worst = worst.max(round_trip).max(parseval).max(plancherel);
            fields += 1;
        }
    }
    out.check(fields == 50, format!("{fields} fields across d = 1, 2"));
    out.check(worst < 1e-10, format!("worst relative identity defect {worst:.2e} < 1e-10"));
    let secs = started.elapsed().as_secs_f64();
    out.check(secs < 10.0, format!("runtime {secs:.1} s < 10 s"));
    Ok(out)
}

/// Criterion 2: both splitting decompositions reconstruct H_N to relative
/// 1e-8 on random configurations, for two kernels and two potentials.
pub fn splitting_formulas() -> Result<CriterionResult> {
    let started = Instant::now();
    let mut out = CriterionResult::new("criterion-2");
    let grid = TorusGrid::new(1, 1.0, 256)?;
    let opts = SolverOptions::default();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst = 0.0f64;
    let mut checked = 0usize;
    for kernel in [Kernel::riesz(grid, 2.0, 1.0)?, Kernel::coulomb(grid, 1.0)?] {
        for v in [Potential::Zero, Potential::Cosine { amplitude: 1.0, mode: 1 }] {
            let eq = solve_equilibrium(&kernel, &v, &opts)?;
            let th = solve_thermal(&kernel, &v, 64.0, &opts)?;
            for _ in 0..25 {
                let config = separated_uniform(16, grid, &mut rng)?;
                let a = splitting_check(
                    &kernel,
                    &v,
                    &config,
                    Some(&eq),
                    None,
                    SplittingVariant::Equilibrium,
                )?;
                let b = splitting_check(
                    &kernel,
                    &v,
                    &config,
                    None,
                    Some(&th),
                    SplittingVariant::Thermal,
                )?;
                worst = worst.max(a).max(b);
                checked += 1;
            }
        }
    }
    out.check(checked == 100, format!("{checked} configurations, both variants each"));
    out.check(worst < 1e-8, format!("worst relative defect {worst:.2e} < 1e-8"));
    let secs = started.elapsed().as_secs_f64();
    out.check(secs < 60.0, format!("runtime {secs:.1} s < 60 s"));
    Ok(out)
}

/// Criterion 3: the thermal solver meets its first-order condition, recovers
/// the flat solution with its closed-form multiplier when V = 0, and its
/// energy is minimal against random density perturbations.
pub fn thermal_equilibrium() -> Result<CriterionResult> {
    let mut out = CriterionResult::new("criterion-3");
    let grid = TorusGrid::new(1, 1.0, 256)?;
    let kernel = Kernel::riesz(grid, 2.0, 1.0)?;
    let opts = SolverOptions::default();
    let theta = 32.0;

    let v = Potential::Cosine { amplitude: 1.0, mode: 1 };
    let th = solve_thermal(&kernel, &v, theta, &opts)?;
    out.check(th.residual < 1e-8, format!("first-order residual {:.2e} < 1e-8", th.residual));

    let free = solve_thermal(&kernel, &Potential::Zero, theta, &opts)?;
    let dev = free
        .density
        .field()
        .values()
        .iter()
        .map(|m| (m - 1.0).abs())
        .fold(0.0f64, f64::max);
    let c_want = 2.0 * kernel.zero_mode();
    out.check(dev < 1e-12, format!("V = 0: max |mu - 1| = {dev:.1e}"));
    out.check(
        (free.c_theta - c_want).abs() < 1e-12,
        format!("V = 0: c_theta = {} vs closed form 2 g^(0) = {c_want}", free.c_theta),
    );

    let vfield = v.field(grid)?;
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut min_margin = f64::INFINITY;
    for _ in 0..20 {
        let bumped: Vec<f64> = th
            .density
            .field()
            .values()
            .iter()
            .map(|&m| m * (1.0 + rng.gen_range(-0.1..0.1)))
            .collect();
        let mu = ProbabilityDensity::from_unnormalized(GridField::new(grid, bumped)?)?;
        min_margin = min_margin.min(thermal_energy(&kernel, &vfield, &mu, theta) - th.energy);
    }
    out.check(
        min_margin >= -1e-10,
        format!("20 perturbations: worst minimality margin {min_margin:+.2e} >= -1e-10"),
    );
    Ok(out)
}

/// Criterion 4: the direct-quadrature log-partition rate dominates both
/// constant-free lower bounds for N in {2, 3} and theta in {1, 4, 16}.
pub fn partition_bounds() -> Result<CriterionResult> {
    let started = Instant::now();
    let mut out = CriterionResult::new("criterion-4");
    let grid = TorusGrid::new(1, 1.0, 512)?;
    let kernel = Kernel::riesz(grid, 2.0, 1.0)?;
    let v = Potential::Cosine { amplitude: 1.0, mode: 1 };
    let opts = SolverOptions::default();
    let eq = solve_equilibrium(&kernel, &v, &opts)?;

    let mut worst_margin = f64::INFINITY;
    let mut worst_quad = 0.0f64;
    let mut combos = 0usize;
    for &theta in &[1.0f64, 4.0, 16.0] {
        let th = solve_thermal(&kernel, &v, theta, &opts)?;
        for &n in &[2usize, 3] {
            let beta = theta / n as f64;
            let params = GibbsParams::new(n, beta, &kernel, &v)?;
            let est = partition_lower_bounds(&params, &th, &eq, Some(256))?;
            let rate = est.log_z.expect("quadrature requested") / ((n * n) as f64 * beta);
            worst_margin = worst_margin
                .min(rate - est.lower_bound_thermal)
                .min(rate - est.lower_bound_eq);
            let (_, change) = direct_log_partition_checked(&params, 128)?;
            worst_quad = worst_quad.max(change);
            combos += 1;
        }
    }
    out.check(combos == 6, format!("{combos} (N, theta) combinations"));
    out.check(
        worst_margin >= -1e-6,
        format!("worst bound margin {worst_margin:+.2e} >= -1e-6"),
    );
    out.note(format!("largest quadrature doubling change {worst_quad:.1e}"));
    let secs = started.elapsed().as_secs_f64();
    out.check(secs < 300.0, format!("runtime {secs:.1} s < 300 s"));
    Ok(out)
}

/// Criterion 5: smoothing error rates. The energy gap tracks
/// t^{1 - d/gamma}/N + t with an N-stable constant on generic configurations
/// and scales as N^{-gamma/d} at the balancing time; the test error tracks
/// max{t, t^{alpha/lambda}} ||f||_alpha with an N-stable constant on
/// single-cluster configurations (the family whose moments stay order one).
pub fn regularization_rates() -> Result<CriterionResult> {
    const SEEDS: usize = 8;
    let started = Instant::now();
    let mut out = CriterionResult::new("criterion-5");
    let grid = TorusGrid::new(1, 1.0, 16384)?;
    let kernel = Kernel::riesz(grid, 0.8, 1.0)?;
    let ts = logspace(1e-4, 1e-1, 10);
    let ladder = [16usize, 32, 64, 128, 256];

    let mut gap_ratio_max = Vec::new();
    for (rung, &n) in ladder.iter().enumerate() {
        let mut ratio_mean = vec![0.0f64; ts.len()];
        for seed in 0..SEEDS {
            let mut rng = ChaCha8Rng::seed_from_u64(5000 + (rung * SEEDS + seed) as u64);
            let config = Configuration::random_uniform(n, 1, 1.0, &mut rng)?;
            let eval = GapEvaluator::new(&kernel, &config, 1e-4)?;
            for (j, &t) in ts.iter().enumerate() {
                ratio_mean[j] += eval.gap(t)? / gap_bound_shape(&kernel, n, t) / SEEDS as f64;
            }
        }
        gap_ratio_max.push(ratio_mean.iter().fold(0.0f64, |m, &r| m.max(r)));
    }
    for (k, w) in gap_ratio_max.windows(2).enumerate() {
        let drift = w[1] / w[0];
        out.check(
            (0.8..=1.2).contains(&drift),
            format!("gap constant drift {drift:.3} within 20% ({} -> {})", ladder[k], ladder[k + 1]),
        );
    }
    out.note(format!(
        "gap/shape maxima by rung: {:?}",
        gap_ratio_max.iter().map(|r| (r * 1e3).round() / 1e3).collect::<Vec<_>>()
    ));

    // the N^{-gamma/d} scaling at the balancing time needs rungs deep enough
    // that modes below the first lattice frequency stop mattering; each rung
    // only evaluates at its own t_N, so the mode window stays small
    let slope_ladder = [256usize, 1024, 4096];
    let mut gap_at_tn = Vec::new();
    for (rung, &n) in slope_ladder.iter().enumerate() {
        let tn = (n as f64).powf(-0.8);
        let mut tn_mean = 0.0f64;
        for seed in 0..SEEDS {
            let mut rng = ChaCha8Rng::seed_from_u64(5500 + (rung * SEEDS + seed) as u64);
            let config = Configuration::random_uniform(n, 1, 1.0, &mut rng)?;
            tn_mean += GapEvaluator::new(&kernel, &config, tn)?.gap(tn)? / SEEDS as f64;
        }
        gap_at_tn.push(tn_mean);
    }
    let lx: Vec<f64> = slope_ladder.iter().map(|&n| (n as f64).ln()).collect();
    let ly: Vec<f64> = gap_at_tn.iter().map(|g| g.ln()).collect();
    let slope = fit_slope(&lx, &ly);
    out.check(
        (slope + 0.8).abs() <= 0.12,
        format!("gap slope at t = N^(-gamma/d) over N in {slope_ladder:?}: {slope:.3} vs -0.8 within 15%"),
    );

    let f = GridField::from_fn(grid, |x| (TAU * x[0]).cos() + 0.25 * (3.0 * TAU * x[0]).sin());
    let f_hat = f.spectrum();
    let alphas = [0.5f64, 2.0];
    // max over t of the seed-mean ratio, per (alpha, rung)
    let mut err_ratio_max = vec![vec![0.0f64; ladder.len()]; alphas.len()];
    for (rung, &n) in ladder.iter().enumerate() {
        let mut ratio_mean = vec![vec![0.0f64; ts.len()]; alphas.len()];
        for seed in 0..SEEDS {
            let mut rng = ChaCha8Rng::seed_from_u64(6000 + seed as u64);
            let center = 0.1 + 0.03 * seed as f64;
            let pts: Vec<[f64; MAX_DIM]> = (0..n)
                .map(|_| {
                    let mut p = [0.0; MAX_DIM];
                    p[0] = (center + rng.gen_range(-5e-4..5e-4)).rem_euclid(1.0);
                    p
                })
                .collect();
            let config = Configuration::new(pts, 1, 1.0)?;
            let moments = EmpiricalMoments::compute(grid, &config)?;
            for (ai, &alpha) in alphas.iter().enumerate() {
                for (j, &t) in ts.iter().enumerate() {
                    let (err, shape) = test_error_from_moments(&moments, &kernel, &f_hat, t, alpha)?;
                    ratio_mean[ai][j] += err / shape / SEEDS as f64;
                }
            }
        }
        for (ai, per_t) in ratio_mean.iter().enumerate() {
            err_ratio_max[ai][rung] = per_t.iter().fold(0.0f64, |m, &r| m.max(r));
        }
    }
    for (ai, &alpha) in alphas.iter().enumerate() {
        for (k, w) in err_ratio_max[ai].windows(2).enumerate() {
            let drift = w[1] / w[0];
            out.check(
                (0.8..=1.2).contains(&drift),
                format!(
                    "test-error constant drift {drift:.3} within 20% (alpha = {alpha}, {} -> {})",
                    ladder[k],
                    ladder[k + 1]
                ),
            );
        }
        out.note(format!(
            "alpha = {alpha}: err/shape maxima by rung: {:?}",
            err_ratio_max[ai].iter().map(|r| (r * 1e3).round() / 1e3).collect::<Vec<_>>()
        ));
    }
    let secs = started.elapsed().as_secs_f64();
    out.check(secs < 300.0, format!("runtime {secs:.1} s < 300 s"));
    Ok(out)
}

/// Test-function regularity used in the construction's error bound. The
/// measured error decays close to N^{-0.93} at p = 0.45, so alpha = 2 keeps
/// the fitted constant flat across the ladder; the rung constants below
/// re-certify that on every run.
const CONSTRUCTION_ALPHA: f64 = 2.0;

/// Criterion 6: generated configurations keep their separation floor and
/// exact per-cube counts; the energy defect against the target's
/// signed-measure energy falls monotonically in N; test errors track
/// N^{-alpha p} with an N-stable constant.
pub fn low_energy_construction() -> Result<CriterionResult> {
    // the test error is one scalar per configuration (|<f, smoothed
    // difference>|), so rung constants only stabilize through seed averaging
    const SEEDS: u64 = 64;
    let started = Instant::now();
    let mut out = CriterionResult::new("criterion-6");
    let grid = TorusGrid::new(1, 1.0, 2048)?;
    let kernel = Kernel::riesz(grid, 2.0, 1.0)?;
    let v = Potential::Cosine { amplitude: 1.0, mode: 1 };
    let eq = solve_equilibrium(&kernel, &v, &SolverOptions::default())?;
    let ladder = [32usize, 64, 128, 256];
    let p = ConstructionParams::default().p;

    let f_list = vec![
        (GridField::from_fn(grid, |x| (TAU * x[0]).cos()), CONSTRUCTION_ALPHA),
        (
            GridField::from_fn(grid, |x| {
                0.7 * (2.0 * TAU * x[0]).sin() + 0.3 * (3.0 * TAU * x[0]).cos()
            }),
            CONSTRUCTION_ALPHA,
        ),
    ];

    let mut all_counts = true;
    let mut all_separated = true;
    let mut defects = Vec::new();
    let mut c_hat = vec![Vec::new(); f_list.len()];
    for &n in &ladder {
        let mut defect_mean = 0.0f64;
        let mut ratio_mean = vec![0.0f64; f_list.len()];
        for s in 0..SEEDS {
            let phase = 0.3 + TAU * s as f64 / SEEDS as f64;
            let phi = ProbabilityDensity::from_unnormalized(GridField::from_fn(grid, |x| {
                1.0 + 0.4 * (TAU * x[0]).sin() + 0.2 * (2.0 * TAU * x[0] + phase).cos()
            }))?;
            let params = ConstructionParams { seed: 7000 + s, ..ConstructionParams::default() };
            let (config, stats) = construct::generate_logged(&phi, n, &params, None)?;

            // independent recount and separation audit
            let k = stats.cubes_per_axis;
            let cube_of = |x: f64| ((x / grid.side() * k as f64) as usize).min(k - 1);
            let mut counts = vec![0usize; k];
            for pt in config.points() {
                counts[cube_of(pt[0])] += 1;
            }
            let expected = construct::balanced_counts(&construct::cube_masses(&phi, k), n);
            all_counts &= counts == stats.counts && counts == expected;
            for i in 0..n {
                for j in 0..i {
                    let floor = stats.tau[cube_of(config.points()[i][0])]
                        .max(stats.tau[cube_of(config.points()[j][0])]);
                    all_separated &= config.distance(i, j) >= floor * (1.0 - 1e-12);
                }
            }

            let report =
                construct::verify(&config, &phi, &f_list, &kernel, &eq.density, &stats, p)?;
            defect_mean += report.energy_defect / SEEDS as f64;
            for (fi, row) in report.test_errors.iter().enumerate() {
                ratio_mean[fi] += row.ratio / SEEDS as f64;
            }
        }
        defects.push(defect_mean);
        for (fi, r) in ratio_mean.iter().enumerate() {
            c_hat[fi].push(*r);
        }
    }
    let total = ladder.len() as u64 * SEEDS;
    out.check(all_counts, format!("per-cube counts match the balanced split ({total}/{total})"));
    out.check(all_separated, format!("pairwise separation floor holds ({total}/{total})"));
    out.check(
        defects.windows(2).all(|w| w[1] < w[0]),
        format!(
            "energy defect strictly decreasing: {:?}",
            defects.iter().map(|d| (d * 1e4).round() / 1e4).collect::<Vec<_>>()
        ),
    );
    for (fi, rungs) in c_hat.iter().enumerate() {
        let hi = rungs.iter().fold(0.0f64, |m, &r| m.max(r));
        let lo = rungs.iter().fold(f64::INFINITY, |m, &r| m.min(r));
        out.check(
            hi / lo <= 1.3 / 0.7,
            format!(
                "test function {}: fitted constant spread x{:.2} within the 30% band",
                fi + 1,
                hi / lo
            ),
        );
        out.note(format!(
            "test function {}: C-hat by rung (alpha = {CONSTRUCTION_ALPHA}): {:?}",
            fi + 1,
            rungs.iter().map(|r| (r * 1e3).round() / 1e3).collect::<Vec<_>>()
        ));
    }
    let secs = started.elapsed().as_secs_f64();
    out.check(secs < 300.0, format!("runtime {secs:.1} s < 300 s"));
    Ok(out)
}

/// The chain shared by the tail and transform checks, with the equilibrium
/// data its reports compare against. Built once; both criteria read it.
pub struct SharedRun {
    pub kernel: Kernel,
    pub potential: Potential,
    pub n_points: usize,
    pub beta: f64,
    pub eq: EquilibriumMeasure,
    pub thermal: ThermalEquilibrium,
    pub chain: ChainResult,
    pub observable: FluctuationObservable,
}

static RUN: OnceLock<SharedRun> = OnceLock::new();

/// N = 32 free-potential chain at beta = 1/sqrt(N): 10^4 recorded samples at
/// thin 64. V = 0 keeps the equilibrium support the whole torus, so every
/// hypothesis of the tail bounds holds by inspection.
pub fn shared_run() -> &'static SharedRun {
    RUN.get_or_init(|| {
        let grid = TorusGrid::new(1, 1.0, 512).expect("grid parameters");
        let kernel = Kernel::riesz(grid, 2.0, 1.0).expect("kernel parameters");
        let potential = Potential::Zero;
        let opts = SolverOptions::default();
        let eq = solve_equilibrium(&kernel, &potential, &opts).expect("flat equilibrium");
        let n_points = 32usize;
        let beta = 1.0 / (n_points as f64).sqrt();
        let thermal = solve_thermal(&kernel, &potential, n_points as f64 * beta, &opts)
            .expect("flat thermal equilibrium");
        let params =
            GibbsParams::new(n_points, beta, &kernel, &potential).expect("chain parameters");
        let chain_opts = ChainOptions {
            steps: 640_000,
            burn_in: 64_000,
            thin: 64,
            seed: 7,
            ..ChainOptions::default()
        };
        let chain = mcmc_sample(&params, &chain_opts).expect("chain run");
        let f = GridField::from_fn(grid, |x| (TAU * x[0]).cos());
        let observable = FluctuationObservable::new(f, &eq.density);
        SharedRun { kernel, potential, n_points, beta, eq, thermal, chain, observable }
    })
}

/// Criterion 7: at every tail level the chain resolves, the measured decay
/// rate dominates r^2/||h_{-1/2} f||^2 minus three rate CIs.
pub fn concentration_tail() -> Result<CriterionResult> {
    let started = Instant::now();
    let mut out = CriterionResult::new("criterion-7");
    let run = shared_run();
    let params = GibbsParams::new(run.n_points, run.beta, &run.kernel, &run.potential)?;
    let series = fluctuation_series(&run.chain, &run.observable);
    let tau = stationarity_gate(&run.chain, &series)?;
    out.note(format!(
        "{} samples, observable decorrelates in {tau:.0} proposal steps, acceptance {:.2}",
        run.chain.samples.len(),
        run.chain.acceptance_rate
    ));

    let r_grid: Vec<f64> = (0..=12).map(|k| 0.01 * k as f64).collect();
    let rep = concentration_report(
        &run.chain,
        &params,
        &run.observable,
        Some(&run.eq),
        Some(&run.thermal),
        &r_grid,
    )?;
    out.check(
        (rep.h_half_norm2 - 0.5).abs() < 1e-9,
        format!("||h_(-1/2) f||^2 = {} (cosine mode, closed form 1/2)", rep.h_half_norm2),
    );
    out.check(rep.support_ok == Some(true), "h_(-1)(f) supported inside the equilibrium support");

    let mut informative = 0usize;
    let mut worst = f64::INFINITY;
    for row in rep.rows.iter().filter(|row| row.r > 0.0 && !row.censored) {
        let rate = row.rate_estimate.expect("uncensored row");
        let ci = row.rate_ci.expect("uncensored row");
        informative += 1;
        worst = worst.min(rate - (row.conc_leading - 3.0 * ci));
    }
    out.check(informative >= 5, format!("{informative} tail levels resolved above the 10/M floor"));
    out.check(
        worst >= 0.0,
        format!("one-sided rate margin {worst:+.3e} (rate >= r^2/norm^2 - 3 CI everywhere)"),
    );
    let secs = started.elapsed().as_secs_f64();
    out.check(secs < 600.0, format!("runtime {secs:.1} s < 600 s (shared chain included)"));
    Ok(out)
}

/// Criterion 8: the estimated log-Laplace transform sits between the two
/// theoretical predictions (which share the leading term r^2 norm^2 / 4)
/// within three jackknife CIs plus a fitted-constant floor at the N^{-2}
/// partition rate; slope at zero matches the sample mean; transform convex.
pub fn laplace_sandwich() -> Result<CriterionResult> {
    let started = Instant::now();
    let mut out = CriterionResult::new("criterion-8");
    let run = shared_run();
    let params = GibbsParams::new(run.n_points, run.beta, &run.kernel, &run.potential)?;
    let r_grid: Vec<f64> = (0..=8).map(|k| 0.05 * k as f64).collect();
    let rep = laplace_report(&run.chain, &params, &run.observable, Some(&run.eq), &r_grid)?;

    let r0 = rep.r_positivity.expect("equilibrium supplied");
    out.check(
        (r0 - 2.0).abs() < 1e-9 && r_grid.iter().all(|&r| r <= r0),
        format!("positivity radius r0 = {r0} covers the r grid (max 0.4)"),
    );

    let norm2 = rep.h_half_norm2;
    let floor = 2.0 / (run.n_points as f64).powi(2);
    let mut worst = f64::INFINITY;
    for row in &rep.rows {
        let l = row.log_laplace.expect("transform row");
        let se = row.log_laplace_se.expect("transform row");
        let predicted = row.r * row.r / 4.0 * norm2;
        worst = worst.min(3.0 * se + floor - (l - predicted).abs());
    }
    out.check(
        worst >= 0.0,
        format!("sandwich margin {worst:+.2e} across {} r values", rep.rows.len()),
    );

    let slope = rep.slope_at_zero.expect("slope estimated");
    let slope_se = rep.slope_se.expect("slope estimated");
    out.check(
        (slope - rep.mean_fluct).abs() <= 3.0 * (slope_se + 1e-9),
        format!("slope at zero {slope:+.2e} vs mean fluctuation {:+.2e}", rep.mean_fluct),
    );

    let ls: Vec<f64> = rep.rows.iter().map(|row| row.log_laplace.expect("row")).collect();
    let max_se =
        rep.rows.iter().map(|row| row.log_laplace_se.expect("row")).fold(0.0f64, f64::max);
    out.check(
        ls.windows(3).all(|w| w[2] - 2.0 * w[1] + w[0] >= -6.0 * max_se),
        "second differences nonnegative within jackknife noise",
    );
    let secs = started.elapsed().as_secs_f64();
    out.check(secs < 600.0, format!("runtime {secs:.1} s < 600 s (shared chain included)"));
    Ok(out)
}

/// Criterion 9: the smoothing kernels stay nonnegative where theory says
/// they must (Coulomb), and the reported dip constant for Riesz kernels is
/// finite and unchanged under grid doubling.
pub fn smoothing_positivity() -> Result<CriterionResult> {
    let mut out = CriterionResult::new("criterion-9");
    let grid = TorusGrid::new(1, 1.0, 512)?;
    let rep = Kernel::coulomb(grid, 1.0)?.check_admissibility(&logspace(1e-3, 1.0, 7))?;
    out.check(rep.min_p >= -1e-8, format!("coulomb: min p = {:+.1e} >= -1e-8", rep.min_p));

    // sweep floor 1e-2 keeps the corner mode fully damped on both grids, so
    // the reported dip is a kernel property rather than a truncation echo
    let sweep = logspace(1e-2, 1.0, 7);
    for &gamma in &[1.5f64, 2.0] {
        let mut cs = Vec::new();
        for &n in &[512usize, 1024] {
            let g = TorusGrid::new(1, 1.0, n)?;
            let rep = Kernel::riesz(g, gamma, 1.0)?.check_admissibility(&sweep)?;
            out.check(
                rep.c_heat.is_finite(),
                format!("riesz gamma = {gamma}, n = {n}: C = {:.1e} finite", rep.c_heat),
            );
            cs.push(rep.c_heat);
        }
        out.check(
            (cs[0] - cs[1]).abs() <= 1e-8,
            format!("riesz gamma = {gamma}: |C(512) - C(1024)| = {:.1e} <= 1e-8", (cs[0] - cs[1]).abs()),
        );
    }
    Ok(out)
}
