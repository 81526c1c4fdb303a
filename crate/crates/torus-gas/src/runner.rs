//! Command dispatch for the experiment driver. Every run resolves its
//! configuration, echoes it next to the artifacts for provenance, emits a
//! JSON summary plus CSV detail, and reports pass/fail: false means a hard
//! assertion failed (the process exits nonzero), configuration problems
//! surface as Error::Config (exit 2).

use crate::acceptance;
use crate::config::ExperimentConfig;
use crate::equilibrium::{solve_equilibrium, solve_thermal};
use crate::error::{Error, Result};
use crate::grid::{GridField, TorusGrid};
use crate::io;
use crate::particles::{splitting_check, Configuration, FluctuationObservable, SplittingVariant};
use crate::partition::partition_lower_bounds;
use crate::regularize::{gap_bound_shape, p_star, GapEvaluator};
use crate::sampler::{
    concentration_report, fluctuation_series, laplace_report, mcmc_sample, stationarity_gate,
    BoundReport, ChainResult, GibbsParams,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    CheckKernel,
    Equilibrium,
    VerifySplitting,
    VerifyRegularization,
    Construct,
    Sample,
    Concentration,
    Laplace,
    Partition,
    All,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::CheckKernel => "check-kernel",
            Command::Equilibrium => "equilibrium",
            Command::VerifySplitting => "verify-splitting",
            Command::VerifyRegularization => "verify-regularization",
            Command::Construct => "construct",
            Command::Sample => "sample",
            Command::Concentration => "concentration",
            Command::Laplace => "laplace",
            Command::Partition => "partition",
            Command::All => "all",
        }
    }
}

/// Runs one command. Returns whether every hard assertion held; artifacts
/// land under `<out>/<command>/` together with the resolved-config echo.
pub fn run(
    command: Command,
    cfg: &ExperimentConfig,
    out_override: Option<PathBuf>,
    seed_override: Option<u64>,
) -> Result<bool> {
    let mut cfg = cfg.clone();
    if let Some(seed) = seed_override {
        cfg.seed = seed;
    }
    if let Some(dir) = out_override.or_else(|| std::env::var_os("TORUS_GAS_OUT").map(Into::into)) {
        cfg.output.dir = dir;
    }
    let out = cfg.output.dir.join(command.name());
    std::fs::create_dir_all(&out)?;
    std::fs::write(out.join("resolved.toml"), cfg.to_toml()?)?;

    match command {
        Command::CheckKernel => check_kernel(&cfg, &out),
        Command::Equilibrium => equilibrium(&cfg, &out),
        Command::VerifySplitting => verify_splitting(&cfg, &out),
        Command::VerifyRegularization => verify_regularization(&cfg, &out),
        Command::Construct => construct(&cfg, &out),
        Command::Sample => sample(&cfg, &out),
        Command::Concentration => concentration(&cfg, &out),
        Command::Laplace => laplace(&cfg, &out),
        Command::Partition => partition(&cfg, &out),
        Command::All => all(&cfg, &out),
    }
}

#[derive(Serialize)]
struct HeatMinRow {
    s: f64,
    min_p: f64,
}

fn check_kernel(cfg: &ExperimentConfig, out: &Path) -> Result<bool> {
    let grid = cfg.grid()?;
    let kernel = cfg.kernel(grid)?;
    let rep = kernel.check_admissibility(&cfg.sweeps.s_grid)?;
    io::write_json(&out.join("summary.json"), "check-kernel", &rep)?;
    let rows: Vec<HeatMinRow> =
        rep.heat_minima.iter().map(|&(s, min_p)| HeatMinRow { s, min_p }).collect();
    io::write_rows(&out.join("heat_minima.csv"), &rows)?;
    // named kernels must recover their decay exponent from the fit
    let expected = kernel.decay_exponent();
    let pass = rep.gamma_fit.is_finite()
        && rep.lambda_fit.is_finite()
        && rep.c_heat.is_finite()
        && (cfg.kernel.name == "table" || (rep.gamma_fit - expected).abs() <= 0.01);
    println!(
        "check-kernel: gamma_fit {:.4}, lambda_fit {:.4}, min p {:+.2e}, C {:.2e}",
        rep.gamma_fit, rep.lambda_fit, rep.min_p, rep.c_heat
    );
    Ok(pass)
}

#[derive(Serialize)]
struct EquilibriumSummary {
    c_inf: f64,
    min_zeta: f64,
    residual_on_support: f64,
    support_fraction: f64,
    support_sensitivity: Vec<(f64, f64)>,
    energy: f64,
    theta: f64,
    c_theta: f64,
    thermal_residual: f64,
    thermal_energy: f64,
    thermal_entropy: f64,
}

fn equilibrium(cfg: &ExperimentConfig, out: &Path) -> Result<bool> {
    let grid = cfg.grid()?;
    let kernel = cfg.kernel(grid)?;
    let v = cfg.potential(grid)?;
    let opts = cfg.solver_options();
    let eq = solve_equilibrium(&kernel, &v, &opts)?;
    let th = solve_thermal(&kernel, &v, cfg.theta()?, &opts)?;
    io::write_field_csv(&out.join("mu_inf.csv"), eq.density.field())?;
    io::write_field_csv(&out.join("h_inf.csv"), &eq.h)?;
    io::write_field_csv(&out.join("zeta_inf.csv"), &eq.zeta)?;
    io::write_field_csv(&out.join("mu_theta.csv"), th.density.field())?;
    let support_fraction =
        eq.support.iter().filter(|&&s| s).count() as f64 / eq.support.len() as f64;
    let summary = EquilibriumSummary {
        c_inf: eq.c_inf,
        min_zeta: eq.min_zeta,
        residual_on_support: eq.residual_on_support,
        support_fraction,
        support_sensitivity: eq.support_sensitivity.clone(),
        energy: eq.energy,
        theta: th.theta,
        c_theta: th.c_theta,
        thermal_residual: th.residual,
        thermal_energy: th.energy,
        thermal_entropy: th.entropy,
    };
    io::write_json(&out.join("summary.json"), "equilibrium", &summary)?;
    let pass = eq.residual_on_support <= 5e-3 && th.residual <= 1e-8;
    println!(
        "equilibrium: c_inf {:.6}, support {:.0}%, zeta residual {:.2e}; thermal residual {:.2e}",
        eq.c_inf,
        100.0 * support_fraction,
        eq.residual_on_support,
        th.residual
    );
    Ok(pass)
}

#[derive(Serialize)]
struct SplittingRow {
    trial: usize,
    variant: &'static str,
    defect: f64,
}

#[derive(Serialize)]
struct SplittingSummary {
    trials: usize,
    max_defect: f64,
}

fn separated_uniform(n: usize, grid: TorusGrid, rng: &mut ChaCha8Rng) -> Result<Configuration> {
    loop {
        let c = Configuration::random_uniform(n, grid.d(), grid.side(), rng)?;
        if c.min_separation() > grid.spacing() / 8.0 {
            return Ok(c);
        }
    }
}

fn verify_splitting(cfg: &ExperimentConfig, out: &Path) -> Result<bool> {
    let grid = cfg.grid()?;
    let kernel = cfg.kernel(grid)?;
    let v = cfg.potential(grid)?;
    let opts = cfg.solver_options();
    let eq = solve_equilibrium(&kernel, &v, &opts)?;
    let th = solve_thermal(&kernel, &v, cfg.theta()?, &opts)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut rows = Vec::new();
    let mut max_defect = 0.0f64;
    for trial in 0..cfg.sweeps.trials {
        let config = separated_uniform(cfg.gibbs.n_points, grid, &mut rng)?;
        let a =
            splitting_check(&kernel, &v, &config, Some(&eq), None, SplittingVariant::Equilibrium)?;
        let b = splitting_check(&kernel, &v, &config, None, Some(&th), SplittingVariant::Thermal)?;
        rows.push(SplittingRow { trial, variant: "equilibrium", defect: a });
        rows.push(SplittingRow { trial, variant: "thermal", defect: b });
        max_defect = max_defect.max(a).max(b);
    }
    io::write_rows(&out.join("splitting.csv"), &rows)?;
    io::write_json(
        &out.join("summary.json"),
        "verify-splitting",
        &SplittingSummary { trials: cfg.sweeps.trials, max_defect },
    )?;
    println!("verify-splitting: {} trials, max relative defect {max_defect:.2e}", cfg.sweeps.trials);
    Ok(max_defect < 1e-8)
}

#[derive(Serialize)]
struct GapSweepRow {
    #[serde(rename = "N")]
    n: usize,
    t: f64,
    gap: f64,
    bound_shape: f64,
    ratio: f64,
}

#[derive(Serialize)]
struct RegularizationSummary {
    max_ratio: Vec<(usize, f64)>,
}

fn verify_regularization(cfg: &ExperimentConfig, out: &Path) -> Result<bool> {
    let grid = cfg.grid()?;
    let kernel = cfg.kernel(grid)?;
    let t_min = cfg.sweeps.t_grid.iter().copied().fold(f64::INFINITY, f64::min);
    let mut rows = Vec::new();
    let mut max_ratio = Vec::new();
    let mut pass = true;
    for (rung, &n) in cfg.sweeps.n_ladder.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(rung as u64));
        let config = Configuration::random_uniform(n, grid.d(), grid.side(), &mut rng)?;
        let eval = GapEvaluator::new(&kernel, &config, t_min)?;
        let mut worst = 0.0f64;
        for &t in &cfg.sweeps.t_grid {
            let gap = eval.gap(t)?;
            let bound_shape = gap_bound_shape(&kernel, n, t);
            let ratio = gap / bound_shape;
            pass &= gap.is_finite() && ratio.is_finite() && gap >= -1e-12;
            worst = worst.max(ratio);
            rows.push(GapSweepRow { n, t, gap, bound_shape, ratio });
        }
        max_ratio.push((n, worst));
    }
    io::write_rows(&out.join("gap_sweep.csv"), &rows)?;
    io::write_json(
        &out.join("summary.json"),
        "verify-regularization",
        &RegularizationSummary { max_ratio: max_ratio.clone() },
    )?;
    for (n, worst) in &max_ratio {
        println!("verify-regularization: N = {n}, max gap/shape {worst:.3}");
    }
    Ok(pass)
}

fn construct(cfg: &ExperimentConfig, out: &Path) -> Result<bool> {
    let grid = cfg.grid()?;
    let kernel = cfg.kernel(grid)?;
    let v = cfg.potential(grid)?;
    let eq = solve_equilibrium(&kernel, &v, &cfg.solver_options())?;
    let phi = eq.density.clone();
    let alpha = cfg.sweeps.alpha;
    let f_list = vec![
        (GridField::from_fn(grid, move |x| (TAU * x[0] / grid.side()).cos()), alpha),
        (GridField::from_fn(grid, move |x| (2.0 * TAU * x[0] / grid.side()).sin()), alpha),
    ];
    let mut reports = Vec::new();
    let mut pass = true;
    for (rung, &n) in cfg.sweeps.n_ladder.iter().enumerate() {
        let params = crate::construct::ConstructionParams {
            seed: cfg.seed.wrapping_add(rung as u64),
            ..Default::default()
        };
        let (config, stats) = crate::construct::generate_logged(&phi, n, &params, None)?;
        io::write_config_csv(&out.join(format!("config_{n}.csv")), &config)?;
        let report = crate::construct::verify(
            &config,
            &phi,
            &f_list,
            &kernel,
            &eq.density,
            &stats,
            params.p,
        )?;
        pass &= report.energy_defect.is_finite() && report.min_separation > 0.0;
        println!(
            "construct: N = {n}, min separation {:.3e}, energy defect {:.3e}",
            report.min_separation, report.energy_defect
        );
        reports.push(report);
    }
    io::write_json(&out.join("summary.json"), "construct", &reports)?;
    Ok(pass)
}

#[derive(Serialize)]
struct ChainMeta {
    seed: u64,
    steps: usize,
    burn_in: usize,
    thin: usize,
    n_samples: usize,
    acceptance_rate: f64,
    proposal_scale: f64,
    singular_rejections: usize,
    energy_iat_steps: f64,
}

#[derive(Serialize)]
struct EnergyRow {
    sample: usize,
    energy: f64,
}

fn run_chain(cfg: &ExperimentConfig) -> Result<(ChainResult, TorusGrid)> {
    let grid = cfg.grid()?;
    let kernel = cfg.kernel(grid)?;
    let v = cfg.potential(grid)?;
    let params = GibbsParams::new(cfg.gibbs.n_points, cfg.beta()?, &kernel, &v)?;
    let chain = mcmc_sample(&params, &cfg.chain_options(cfg.seed))?;
    Ok((chain, grid))
}

fn chain_meta(chain: &ChainResult) -> ChainMeta {
    ChainMeta {
        seed: chain.seed,
        steps: chain.steps,
        burn_in: chain.burn_in,
        thin: chain.thin,
        n_samples: chain.samples.len(),
        acceptance_rate: chain.acceptance_rate,
        proposal_scale: chain.proposal_scale,
        singular_rejections: chain.singular_rejections,
        energy_iat_steps: chain.energy_iat_steps,
    }
}

fn sample(cfg: &ExperimentConfig, out: &Path) -> Result<bool> {
    let (chain, _) = run_chain(cfg)?;
    if let Some(last) = chain.samples.last() {
        io::write_config_csv(&out.join("state.csv"), last)?;
    }
    let rows: Vec<EnergyRow> = chain
        .energy_series
        .iter()
        .enumerate()
        .map(|(sample, &energy)| EnergyRow { sample, energy })
        .collect();
    io::write_rows(&out.join("energy_series.csv"), &rows)?;
    io::write_json(&out.join("summary.json"), "sample", &chain_meta(&chain))?;
    let gate = stationarity_gate(&chain, &chain.energy_series);
    match gate {
        Ok(tau) => {
            println!(
                "sample: {} samples, acceptance {:.2}, energy decorrelates in {tau:.0} steps",
                chain.samples.len(),
                chain.acceptance_rate
            );
            Ok(true)
        }
        Err(Error::StationarityGateFailed { tau, limit }) => {
            println!("sample: stationarity gate FAILED (tau {tau:.0} steps, limit {limit:.0})");
            Ok(false)
        }
        Err(e) => Err(e),
    }
}

/// The fluctuation observable every tail command measures: the first cosine
/// mode against the configured equilibrium density.
fn cosine_observable(grid: TorusGrid, reference: &crate::grid::ProbabilityDensity) -> FluctuationObservable {
    let f = GridField::from_fn(grid, move |x| (TAU * x[0] / grid.side()).cos());
    FluctuationObservable::new(f, reference)
}

fn concentration(cfg: &ExperimentConfig, out: &Path) -> Result<bool> {
    let grid = cfg.grid()?;
    let kernel = cfg.kernel(grid)?;
    let v = cfg.potential(grid)?;
    let opts = cfg.solver_options();
    let eq = solve_equilibrium(&kernel, &v, &opts)?;
    let th = solve_thermal(&kernel, &v, cfg.theta()?, &opts)?;
    let params = GibbsParams::new(cfg.gibbs.n_points, cfg.beta()?, &kernel, &v)?;
    let chain = mcmc_sample(&params, &cfg.chain_options(cfg.seed))?;
    let obs = cosine_observable(grid, &eq.density);
    stationarity_gate(&chain, &fluctuation_series(&chain, &obs))?;
    let rep =
        concentration_report(&chain, &params, &obs, Some(&eq), Some(&th), &cfg.sweeps.r_grid)?;
    io::write_rows(&out.join("bounds.csv"), &rep.rows)?;
    io::write_json(&out.join("summary.json"), "concentration", &rep)?;
    let pass = tail_bound_holds(&rep);
    let resolved = rep.rows.iter().filter(|row| row.r > 0.0 && !row.censored).count();
    println!(
        "concentration: {resolved} tail levels resolved of {}, bound {}",
        rep.rows.len() - 1,
        if pass { "holds" } else { "VIOLATED" }
    );
    Ok(pass)
}

/// r > 0 rows with resolved tails must decay at least at the predicted rate,
/// three CIs of slack.
fn tail_bound_holds(rep: &BoundReport) -> bool {
    rep.rows.iter().filter(|row| row.r > 0.0 && !row.censored).all(|row| {
        match (row.rate_estimate, row.rate_ci) {
            (Some(rate), Some(ci)) => rate >= row.conc_leading - 3.0 * ci,
            _ => false,
        }
    })
}

fn laplace(cfg: &ExperimentConfig, out: &Path) -> Result<bool> {
    let grid = cfg.grid()?;
    let kernel = cfg.kernel(grid)?;
    let v = cfg.potential(grid)?;
    let opts = cfg.solver_options();
    let eq = solve_equilibrium(&kernel, &v, &opts)?;
    let params = GibbsParams::new(cfg.gibbs.n_points, cfg.beta()?, &kernel, &v)?;
    let chain = mcmc_sample(&params, &cfg.chain_options(cfg.seed))?;
    let obs = cosine_observable(grid, &eq.density);
    stationarity_gate(&chain, &fluctuation_series(&chain, &obs))?;
    let rep = laplace_report(&chain, &params, &obs, Some(&eq), &cfg.sweeps.r_grid)?;
    io::write_rows(&out.join("laplace.csv"), &rep.rows)?;
    io::write_json(&out.join("summary.json"), "laplace", &rep)?;

    let lam = kernel.decay_exponent();
    let floor = match p_star(cfg.sweeps.alpha, lam, lam, grid.d()) {
        Ok((p, _)) => 2.0 * (cfg.gibbs.n_points as f64).powf(p),
        Err(_) => 0.0,
    };
    let mut pass = true;
    let mut max_se = 0.0f64;
    let mut ls = Vec::new();
    for row in &rep.rows {
        let (l, se) = match (row.log_laplace, row.log_laplace_se) {
            (Some(l), Some(se)) => (l, se),
            _ => {
                pass = false;
                continue;
            }
        };
        let predicted = row.r * row.r / 4.0 * rep.h_half_norm2;
        pass &= (l - predicted).abs() <= 3.0 * se + floor;
        max_se = max_se.max(se);
        ls.push(l);
    }
    pass &= ls.windows(3).all(|w| w[2] - 2.0 * w[1] + w[0] >= -6.0 * max_se);
    if let (Some(slope), Some(se)) = (rep.slope_at_zero, rep.slope_se) {
        pass &= (slope - rep.mean_fluct).abs() <= 3.0 * (se + 1e-9);
    }
    println!(
        "laplace: {} r values, sandwich {}",
        rep.rows.len(),
        if pass { "holds" } else { "VIOLATED" }
    );
    Ok(pass)
}

#[derive(Serialize)]
struct PartitionSummary {
    n_points: usize,
    theta: f64,
    beta: f64,
    rate: Option<f64>,
    quadrature_change: Option<f64>,
    lower_bound_thermal: f64,
    lower_bound_eq: f64,
    gap_thermal: Option<f64>,
}

fn partition(cfg: &ExperimentConfig, out: &Path) -> Result<bool> {
    let grid = cfg.grid()?;
    let kernel = cfg.kernel(grid)?;
    let v = cfg.potential(grid)?;
    let opts = cfg.solver_options();
    let eq = solve_equilibrium(&kernel, &v, &opts)?;
    let theta = cfg.theta()?;
    let th = solve_thermal(&kernel, &v, theta, &opts)?;
    let beta = cfg.beta()?;
    let n = cfg.gibbs.n_points;
    let params = GibbsParams::new(n, beta, &kernel, &v)?;
    // direct quadrature only where the node budget allows it
    let quadrature = if n <= 3 { Some(256) } else { None };
    let est = partition_lower_bounds(&params, &th, &eq, quadrature)?;
    let rate = est.log_z.map(|z| z / ((n * n) as f64 * beta));
    let quadrature_change = match quadrature {
        Some(nq) => Some(crate::partition::direct_log_partition_checked(&params, nq / 2)?.1),
        None => None,
    };
    let summary = PartitionSummary {
        n_points: n,
        theta,
        beta,
        rate,
        quadrature_change,
        lower_bound_thermal: est.lower_bound_thermal,
        lower_bound_eq: est.lower_bound_eq,
        gap_thermal: est.gap_thermal,
    };
    io::write_json(&out.join("summary.json"), "partition", &summary)?;
    let pass = match rate {
        Some(rate) => {
            rate >= est.lower_bound_thermal - 1e-6 && rate >= est.lower_bound_eq - 1e-6
        }
        None => true,
    };
    match rate {
        Some(rate) => println!(
            "partition: rate {rate:.6}, bounds ({:.6}, {:.6}), margin {}",
            est.lower_bound_thermal,
            est.lower_bound_eq,
            if pass { "holds" } else { "VIOLATED" }
        ),
        None => println!(
            "partition: N = {n} too large for quadrature; bounds ({:.6}, {:.6}) reported",
            est.lower_bound_thermal, est.lower_bound_eq
        ),
    }
    Ok(pass)
}

fn all(_cfg: &ExperimentConfig, out: &Path) -> Result<bool> {
    let results = vec![
        acceptance::spectral_identities()?,
        acceptance::splitting_formulas()?,
        acceptance::thermal_equilibrium()?,
        acceptance::partition_bounds()?,
        acceptance::regularization_rates()?,
        acceptance::low_energy_construction()?,
        acceptance::concentration_tail()?,
        acceptance::laplace_sandwich()?,
        acceptance::smoothing_positivity()?,
    ];
    for r in &results {
        println!("{}", r.summary());
        for line in &r.lines {
            println!("  {line}");
        }
    }
    io::write_json(&out.join("summary.json"), "all", &results)?;
    Ok(results.iter().all(|r| r.passed))
}
