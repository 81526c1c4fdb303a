//! Metropolis sampling of the particle gas: tuning, mixing diagnostics, and
//! the energy trace.

use torus_gas::grid::TorusGrid;
use torus_gas::kernel::Kernel;
use torus_gas::potential::Potential;
use torus_gas::sampler::{mcmc_sample, stationarity_gate, ChainOptions, GibbsParams};

fn main() -> torus_gas::Result<()> {
    let grid = TorusGrid::new(1, 1.0, 512)?;
    let kernel = Kernel::riesz(grid, 2.0, 1.0)?;
    let v = Potential::Cosine { amplitude: 0.5, mode: 1 };
    let n_points = 32;
    let beta = 1.0 / (n_points as f64).sqrt();
    let params = GibbsParams::new(n_points, beta, &kernel, &v)?;

    let opts = ChainOptions { steps: 200_000, burn_in: 20_000, thin: 50, seed: 11, ..Default::default() };
    let chain = mcmc_sample(&params, &opts)?;

    println!("N = {n_points}, beta = {beta:.4} (theta = {:.2})", params.theta());
    println!("samples            {}", chain.samples.len());
    println!("acceptance         {:.3}", chain.acceptance_rate);
    println!("proposal scale     {:.4} (tuned in burn-in)", chain.proposal_scale);
    println!("singular rejects   {}", chain.singular_rejections);
    println!("energy IAT         {:.0} proposal steps", chain.energy_iat_steps);

    let tau = stationarity_gate(&chain, &chain.energy_series)?;
    let m = chain.energy_series.len() as f64;
    let mean = chain.energy_series.iter().sum::<f64>() / m;
    let var = chain.energy_series.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / m;
    // effective sample size discounts by the autocorrelation in thinned units
    let ess = m / (tau / (opts.thin as f64)).max(1.0);
    println!(
        "mean H_N           {mean:.4} +- {:.4} (ESS {ess:.0})",
        (var / ess).sqrt()
    );
    Ok(())
}
