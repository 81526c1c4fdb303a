//! Small statistics toolbox for the Monte Carlo layer: Wilson score
//! intervals, a one-sample Kolmogorov-Smirnov test, block jackknife for
//! nonlinear statistics, and Sokal's self-consistent window for integrated
//! autocorrelation times.

use crate::error::{Error, Result};

/// Wilson score interval for a binomial proportion at `z` standard errors.
/// Returns (low, center, high); the center is the score midpoint, not k/n.
pub fn wilson_interval(successes: usize, trials: usize, z: f64) -> (f64, f64, f64) {
    assert!(trials > 0, "empty sample");
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = (z / denom) * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((center - half).max(0.0), center, (center + half).min(1.0))
}

#[derive(Debug, Clone, Copy)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// One-sample KS test against a CDF. The p-value uses the asymptotic
/// Kolmogorov distribution with the Stephens finite-n correction
/// lambda = (sqrt(n) + 0.12 + 0.11/sqrt(n)) * D.
pub fn ks_test(samples: &[f64], cdf: impl Fn(f64) -> f64) -> KsResult {
    assert!(!samples.is_empty(), "empty sample");
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite samples"));
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        let c = cdf(x);
        let lo = i as f64 / n;
        let hi = (i + 1) as f64 / n;
        d = d.max((c - lo).abs()).max((hi - c).abs());
    }
    let lambda = (n.sqrt() + 0.12 + 0.11 / n.sqrt()) * d;
    KsResult { statistic: d, p_value: kolmogorov_q(lambda) }
}

/// Q(lambda) = 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 lambda^2): the survival
/// function of the Kolmogorov distribution.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 0.2 {
        // the dual theta series puts Q within 1e-13 of 1 here
        return 1.0;
    }
    let mut q = 0.0;
    let mut sign = 1.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        q += sign * term;
        sign = -sign;
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * q).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy)]
pub struct JackknifeEstimate {
    pub value: f64,
    /// Bias-corrected jackknife point estimate.
    pub corrected: f64,
    pub std_err: f64,
    pub blocks: usize,
}

/// Block jackknife of an arbitrary statistic of the sample. The data is cut
/// into `blocks` contiguous blocks (correlated chains: blocks longer than the
/// autocorrelation time make the leave-one-out replicates nearly
/// independent).
pub fn block_jackknife(
    data: &[f64],
    blocks: usize,
    stat: impl Fn(&[f64]) -> f64,
) -> Result<JackknifeEstimate> {
    if blocks < 2 || data.len() < 2 * blocks {
        return Err(Error::InvalidParameter(format!(
            "need at least 2 observations in each of >= 2 blocks, got {} points in {} blocks",
            data.len(),
            blocks
        )));
    }
    let value = stat(data);
    let b = blocks;
    let len = data.len();
    let mut replicates = Vec::with_capacity(b);
    let mut held_out = Vec::with_capacity(len);
    for j in 0..b {
        let start = j * len / b;
        let end = (j + 1) * len / b;
        held_out.clear();
        held_out.extend_from_slice(&data[..start]);
        held_out.extend_from_slice(&data[end..]);
        replicates.push(stat(&held_out));
    }
    let mean_rep: f64 = replicates.iter().sum::<f64>() / b as f64;
    let var: f64 =
        replicates.iter().map(|r| (r - mean_rep) * (r - mean_rep)).sum::<f64>() * (b - 1) as f64
            / b as f64;
    Ok(JackknifeEstimate {
        value,
        corrected: b as f64 * value - (b - 1) as f64 * mean_rep,
        std_err: var.sqrt(),
        blocks: b,
    })
}

/// Integrated autocorrelation time with Sokal's self-consistent window:
/// tau = 1 + 2 sum_{k<=K} rho(k) for the smallest K >= c * tau(K), c = 6.
/// Returns 1.0 for white noise and series too short to resolve a window.
pub fn integrated_autocorrelation_time(series: &[f64]) -> f64 {
    let n = series.len();
    if n < 8 {
        return 1.0;
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let c0: f64 = series.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
    if c0 <= 0.0 {
        return 1.0;
    }
    let c = 6.0;
    let mut tau = 1.0;
    let max_lag = n / 2;
    for k in 1..max_lag {
        let mut ck = 0.0;
        for i in 0..n - k {
            ck += (series[i] - mean) * (series[i + k] - mean);
        }
        ck /= (n - k) as f64;
        tau += 2.0 * ck / c0;
        if (k as f64) >= c * tau.max(1.0) {
            break;
        }
    }
    tau.max(1.0)
}

pub fn mean(data: &[f64]) -> f64 {
    data.iter().sum::<f64>() / data.len() as f64
}

pub fn variance(data: &[f64]) -> f64 {
    let m = mean(data);
    data.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (data.len() - 1).max(1) as f64
}
