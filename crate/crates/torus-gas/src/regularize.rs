//! Smoothing of empirical measures by the kernel-driven parabolic flow, and
//! the exponent calculus that turns the flow's error terms into rates.
//!
//! The flow damps the moment e~(m) by exp(-t/g^(m)), so smoothing costs more
//! where the kernel is weak. Two quantities measure what the flow does: the
//! energy gap E(emp^t) - E^{!=}(emp), and the test error
//! int f d(emp^t - emp). Both are mode sums; the gap is computed by extending
//! the sum well past the grid cutoff (in d=1) because its value at small t
//! lives in frequencies the grid cannot carry.

use crate::error::{Error, Result};
use crate::grid::{GridField, ProbabilityDensity, SpectralField, TorusGrid};
use crate::kernel::Kernel;
use crate::particles::{Configuration, EmpiricalMoments};
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use std::f64::consts::TAU;

/// Damping factors beyond this are treated as zero: exp(-35) ~ 6e-16.
const DAMPING_LOG_CUTOFF: f64 = 35.0;
/// Hard ceiling on extended mode sums (memory and time).
const MODE_CAP: usize = 1 << 25;

/// The empirical measure flowed for time t, synthesized on a grid.
///
/// The flow itself preserves positivity for our kernels; the synthesis is
/// band-limited, so at small t the truncated series rings and the field dips
/// negative. The dip is reported, never clipped: `field` is the honest
/// band-limited density, `min_value` its minimum, `integral` its mass
/// (exactly 1 up to FFT rounding, the zero mode is pinned).
#[derive(Debug, Clone)]
pub struct RegularizedEmpirical {
    pub t: f64,
    pub field: GridField,
    pub min_value: f64,
    pub integral: f64,
    /// Damped moments e~(m) exp(-t/g^(m)) in FFT order on the synthesis grid,
    /// with the self-aliased Nyquist rows projected to conjugate symmetry
    /// (they are the field's actual series coefficients).
    pub moments: Vec<Complex64>,
}

impl RegularizedEmpirical {
    /// The field as a probability density, for callers that need one.
    /// Fails when ringing pushed the minimum below the density tolerance.
    pub fn density(&self) -> Result<ProbabilityDensity> {
        ProbabilityDensity::from_unnormalized(self.field.clone())
    }
}

/// Coefficients g^(m) for every mode of `grid`, from the kernel's own table
/// when the grids match, from the analytic rule otherwise.
fn ghat_on_grid(kernel: &Kernel, grid: TorusGrid) -> Result<Vec<f64>> {
    if grid == kernel.grid() {
        return Ok(kernel.ghat().to_vec());
    }
    (0..grid.len())
        .map(|idx| {
            kernel.ghat_of_norm2(grid.m_norm2(idx)).ok_or_else(|| {
                Error::InvalidParameter(
                    "tabulated kernel has no coefficients off its own grid".into(),
                )
            })
        })
        .collect()
}

/// Flow the empirical measure for time t and synthesize it on `grid`.
pub fn regularize(
    config: &Configuration,
    kernel: &Kernel,
    t: f64,
    grid: TorusGrid,
) -> Result<RegularizedEmpirical> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::InvalidParameter(format!("flow time {t} must be positive")));
    }
    let ghat = ghat_on_grid(kernel, grid)?;
    let raw = EmpiricalMoments::compute(grid, config)?;
    let mut moments = raw.coeffs().to_vec();
    for (idx, c) in moments.iter_mut().enumerate().skip(1) {
        let log_damp = t / ghat[idx];
        *c *= if log_damp > 700.0 { 0.0 } else { (-log_damp).exp() };
    }
    moments[0] = Complex64::new(1.0, 0.0);
    // point-mass moments on the self-aliased Nyquist rows are genuinely
    // complex; project them out so the band-limited density is real
    let mut spectrum = SpectralField::new(grid, moments)?;
    spectrum.conjugate_symmetrize();
    let moments: Vec<Complex64> = spectrum.coeffs().to_vec();

    let scale = 1.0 / grid.volume();
    let coeffs: Vec<Complex64> = moments.iter().map(|c| c * scale).collect();
    let field = SpectralField::new(grid, coeffs)?.field()?;
    let min_value = field.min();
    let integral = field.quadrature();
    Ok(RegularizedEmpirical { t, field, min_value, integral, moments })
}

/// |e~(m)|^2 for m = 1..=m_max by phase recurrence, re-seeded every chunk so
/// rounding drift stays at the chunk scale (~1e-12), chunks in parallel.
fn extended_moment_squares(config: &Configuration, m_max: usize) -> Vec<f64> {
    const CHUNK: usize = 8192;
    let n_inv = 1.0 / config.len() as f64;
    let xs: Vec<f64> = config.points().iter().map(|p| -TAU * p[0] / config.side()).collect();
    let starts: Vec<usize> = (1..=m_max).step_by(CHUNK).collect();
    let blocks: Vec<Vec<f64>> = starts
        .par_iter()
        .map(|&start| {
            let len = CHUNK.min(m_max - start + 1);
            let mut acc = vec![Complex64::new(0.0, 0.0); len];
            for &theta in &xs {
                let step = Complex64::from_polar(1.0, theta);
                let mut z = Complex64::from_polar(1.0, theta * start as f64);
                for slot in acc.iter_mut() {
                    *slot += z;
                    z *= step;
                }
            }
            acc.into_iter().map(|c| (c * n_inv).norm_sqr()).collect()
        })
        .collect();
    blocks.concat()
}

enum GapRoute {
    /// d=1 with an analytic coefficient rule: modes m = 1..=m_max, each
    /// standing for the pair +-m.
    Extended { ghat: Vec<f64>, sq: Vec<f64> },
    /// Everything else: the grid lattice in FFT order, index 0 skipped.
    Lattice { ghat: Vec<f64>, sq: Vec<f64> },
}

/// Evaluates E(emp^t) - E^{!=}(emp) for one configuration at many t.
///
/// Per mode the gap contributes g^(m) [ (D^2-1)(|e~|^2 - 1/N) + D^2/N ] with
/// D = exp(-t/g^(m)), plus g^(0)/N from the zero mode. Modes with D^2 below
/// exp(-35) at the sizing time t_min are dropped: their D-terms are zero to
/// double precision and the remaining -(|e~|^2 - 1/N) tail telescopes into
/// the oscillatory remainder of the pairwise kernel sums (small for separated
/// points, and the same for every t, so ratios across t are unaffected).
pub struct GapEvaluator {
    n_points: f64,
    zero_mode: f64,
    t_floor: f64,
    route: GapRoute,
}

impl GapEvaluator {
    pub fn new(kernel: &Kernel, config: &Configuration, t_min: f64) -> Result<Self> {
        if !(t_min > 0.0) || !t_min.is_finite() {
            return Err(Error::InvalidParameter(format!("flow time {t_min} must be positive")));
        }
        let grid = kernel.grid();
        let n_points = config.len() as f64;
        let route = if grid.d() == 1 && kernel.ghat_of_norm2(1.0).is_some() {
            // smallest m with g^(m) <= 2 t_min / 35, by bisection on the
            // decreasing coefficient rule
            let threshold = 2.0 * t_min / DAMPING_LOG_CUTOFF;
            let ghat_of = |m: usize| kernel.ghat_of_norm2((m * m) as f64).expect("analytic rule");
            let mut hi = 1usize;
            while ghat_of(hi) > threshold {
                hi *= 2;
                if hi > MODE_CAP {
                    return Err(Error::BudgetExceeded {
                        points: hi as f64,
                        cap: MODE_CAP as f64,
                    });
                }
            }
            let mut lo = hi / 2;
            while lo + 1 < hi {
                let mid = lo + (hi - lo) / 2;
                if ghat_of(mid) > threshold {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let m_max = hi.max(8);
            let ghat = (1..=m_max).map(ghat_of).collect();
            let sq = extended_moment_squares(config, m_max);
            GapRoute::Extended { ghat, sq }
        } else {
            let moments = EmpiricalMoments::compute(grid, config)?;
            // the lattice route prices the band-limited real density, so the
            // Nyquist rows enter through their symmetrized coefficients
            let mut spectrum = SpectralField::new(grid, moments.coeffs().to_vec())?;
            spectrum.conjugate_symmetrize();
            let sq = spectrum.coeffs().iter().map(|c| c.norm_sqr()).collect();
            GapRoute::Lattice { ghat: kernel.ghat().to_vec(), sq }
        };
        Ok(Self { n_points, zero_mode: kernel.zero_mode(), t_floor: t_min, route })
    }

    pub fn mode_count(&self) -> usize {
        match &self.route {
            GapRoute::Extended { ghat, .. } => ghat.len(),
            GapRoute::Lattice { ghat, .. } => ghat.len() - 1,
        }
    }

    pub fn gap(&self, t: f64) -> Result<f64> {
        if t < self.t_floor * (1.0 - 1e-12) {
            return Err(Error::InvalidParameter(format!(
                "gap at t={t} requested from an evaluator sized for t >= {}",
                self.t_floor
            )));
        }
        let inv_n = 1.0 / self.n_points;
        let term = |ghat: f64, sq: f64| {
            let log_damp = 2.0 * t / ghat;
            let d2 = if log_damp > 700.0 { 0.0 } else { (-log_damp).exp() };
            ghat * ((d2 - 1.0) * (sq - inv_n) + d2 * inv_n)
        };
        let sum = match &self.route {
            GapRoute::Extended { ghat, sq } => {
                2.0 * ghat
                    .par_iter()
                    .zip(sq.par_iter())
                    .map(|(&g, &s)| term(g, s))
                    .sum::<f64>()
            }
            GapRoute::Lattice { ghat, sq } => ghat
                .iter()
                .zip(sq.iter())
                .skip(1)
                .map(|(&g, &s)| term(g, s))
                .sum::<f64>(),
        };
        Ok(self.zero_mode * inv_n + sum)
    }
}

/// Shape of the gap estimate, t^{1 - d/gamma}/N + t, with the constant left
/// to the caller to fit.
pub fn gap_bound_shape(kernel: &Kernel, n_points: usize, t: f64) -> f64 {
    let d = kernel.grid().d() as f64;
    let gamma = kernel.decay_exponent();
    t.powf(1.0 - d / gamma) / n_points as f64 + t
}

/// (gap, bound shape) at a single time.
pub fn energy_gap(config: &Configuration, kernel: &Kernel, t: f64) -> Result<(f64, f64)> {
    let evaluator = GapEvaluator::new(kernel, config, t)?;
    Ok((evaluator.gap(t)?, gap_bound_shape(kernel, config.len(), t)))
}

/// int f d(emp^t - emp) from moments already in hand: the flow changes only
/// the moments, so the integral is sum_{m != 0} f^(m) conj(e~(m)) (D - 1),
/// exact at the grid band limit.
pub fn test_error_from_moments(
    moments: &EmpiricalMoments,
    kernel: &Kernel,
    f_hat: &SpectralField,
    t: f64,
    alpha: f64,
) -> Result<(f64, f64)> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::InvalidParameter(format!("flow time {t} must be positive")));
    }
    let grid = moments.grid();
    if f_hat.grid() != grid {
        return Err(Error::InvalidParameter("test function on a different grid".into()));
    }
    let ghat = ghat_on_grid(kernel, grid)?;
    let mut acc = Complex64::new(0.0, 0.0);
    for idx in 1..grid.len() {
        let log_damp = t / ghat[idx];
        let damp = if log_damp > 700.0 { 0.0 } else { (-log_damp).exp() };
        // f on the grid has coefficients in density-series scale; moments are
        // integrals, so the pairing carries no volume factor
        acc += f_hat.coeffs()[idx] * moments.coeffs()[idx].conj() * (damp - 1.0) * grid.volume();
    }
    let err = acc.re.abs();
    let lambda = kernel.decay_exponent();
    let seminorm = f_hat.sobolev_seminorm(alpha)?;
    let shape = t.max(t.powf(alpha / lambda)) * seminorm;
    Ok((err, shape))
}

/// (error, bound shape) for one configuration and test function.
pub fn test_error(
    config: &Configuration,
    kernel: &Kernel,
    f: &GridField,
    t: f64,
    alpha: f64,
) -> Result<(f64, f64)> {
    let moments = EmpiricalMoments::compute(kernel.grid(), config)?;
    test_error_from_moments(&moments, kernel, &f.spectrum(), t, alpha)
}

/// Flow time minimizing the combined gap + test-error estimate at size N.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimalTime {
    pub t: f64,
    pub exponent: f64,
    /// The alpha < lambda branch had a vanishing exponent denominator; the
    /// alpha >= lambda rule was used instead.
    pub degenerate: bool,
}

pub fn optimal_t(
    n_points: usize,
    alpha: f64,
    lambda: f64,
    gamma: f64,
    d: usize,
) -> Result<OptimalTime> {
    check_exponent_params(alpha, lambda, gamma, d)?;
    let dd = d as f64;
    let (exponent, degenerate) = if alpha >= lambda {
        (-gamma / dd, false)
    } else {
        let den = 1.0 - dd / gamma - alpha / lambda;
        if den.abs() < 1e-12 {
            (-gamma / dd, true)
        } else {
            (1.0 / den, false)
        }
    };
    Ok(OptimalTime { t: (n_points as f64).powf(exponent), exponent, degenerate })
}

/// The rate exponents: p* for the partition function, q* for concentration,
/// m* for the lower bounds. Fallback flags record parameter corners where the
/// branch formula turns nonnegative and the -gamma/d branch is used instead.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentTable {
    pub p_star: f64,
    pub p_star_fallback: bool,
    pub q_star: f64,
    pub q_star_fallback: bool,
    pub m_star: f64,
}

fn check_exponent_params(alpha: f64, lambda: f64, gamma: f64, d: usize) -> Result<()> {
    if !(alpha > 0.0) || !(lambda > 0.0) || !(gamma > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "exponent parameters must be positive: alpha={alpha} lambda={lambda} gamma={gamma}"
        )));
    }
    if d == 0 || d > crate::grid::MAX_DIM {
        return Err(Error::InvalidParameter(format!("dimension {d} out of range")));
    }
    Ok(())
}

/// p*(alpha, lambda, gamma, d) = max{ -gamma/d, (lambda/alpha -
/// lambda d/(alpha gamma) - 1)^{-1} }, with the second branch only meaningful
/// when negative. Returns (value, fallback flag).
pub fn p_star(alpha: f64, lambda: f64, gamma: f64, d: usize) -> Result<(f64, bool)> {
    check_exponent_params(alpha, lambda, gamma, d)?;
    let dd = d as f64;
    let den = lambda / alpha - lambda * dd / (alpha * gamma) - 1.0;
    if den.abs() < 1e-12 {
        return Err(Error::DegenerateExponent);
    }
    let branch = 1.0 / den;
    if branch >= 0.0 {
        Ok((-gamma / dd, true))
    } else {
        Ok(((-gamma / dd).max(branch), false))
    }
}

pub fn exponents(
    alpha: f64,
    kappa: f64,
    lambda: f64,
    gamma: f64,
    d: usize,
    s: f64,
) -> Result<ExponentTable> {
    if !(kappa > 0.0) {
        return Err(Error::InvalidParameter(format!("kappa {kappa} must be positive")));
    }
    let (p, p_fallback) = p_star(alpha, lambda, gamma, d)?;
    let (q, q_fallback) = p_star(alpha.min(kappa), lambda, gamma, d)?;
    let m = p.max((s - d as f64) / d as f64);
    Ok(ExponentTable {
        p_star: p,
        p_star_fallback: p_fallback,
        q_star: q,
        q_star_fallback: q_fallback,
        m_star: m,
    })
}
