//! Point configurations and their energies.
//!
//! The empirical measure of N points enters every estimate through two doors:
//! its moments e~(m) = (1/N) sum_i exp(-2 pi i m.x_i/T), computed here by
//! direct summation (no gridding error), and the diagonal-excluded pair
//! energy (1/N^2) sum_{i != j} g(x_i - x_j), an O(N^2) loop over interpolated
//! kernel values. The splitting check wires both against the solved
//! equilibrium objects; it is an algebraic identity, so its defect measures
//! bookkeeping consistency rather than discretization quality.

use crate::equilibrium::{EquilibriumMeasure, ThermalEquilibrium};
use crate::error::{Error, Result};
use crate::grid::{GridField, ProbabilityDensity, SpectralField, TorusGrid, MAX_DIM};
use crate::kernel::Kernel;
use crate::potential::Potential;
use rustfft::num_complex::Complex64;
use std::f64::consts::TAU;

/// N points on the torus, coordinates wrapped into [0, T).
#[derive(Debug, Clone, PartialEq)]
pub struct Configuration {
    points: Vec<[f64; MAX_DIM]>,
    d: usize,
    side: f64,
}

impl Configuration {
    pub fn new(points: Vec<[f64; MAX_DIM]>, d: usize, side: f64) -> Result<Self> {
        if d == 0 || d > MAX_DIM {
            return Err(Error::InvalidParameter(format!("dimension {d} out of range")));
        }
        if !(side > 0.0) || !side.is_finite() {
            return Err(Error::InvalidParameter(format!("side {side} must be positive")));
        }
        if points.is_empty() {
            return Err(Error::InvalidParameter("empty configuration".into()));
        }
        let mut wrapped = points;
        for p in &mut wrapped {
            for (axis, c) in p.iter_mut().enumerate() {
                if axis < d {
                    if !c.is_finite() {
                        return Err(Error::InvalidParameter("non-finite coordinate".into()));
                    }
                    *c = c.rem_euclid(side);
                    // rem_euclid of a tiny negative value can round up to side
                    if *c >= side {
                        *c = 0.0;
                    }
                } else {
                    *c = 0.0;
                }
            }
        }
        Ok(Self { points: wrapped, d, side })
    }

    /// i.i.d. uniform draw.
    pub fn random_uniform(n: usize, d: usize, side: f64, rng: &mut impl rand::Rng) -> Result<Self> {
        let points = (0..n)
            .map(|_| {
                let mut p = [0.0; MAX_DIM];
                for c in p.iter_mut().take(d) {
                    *c = rng.gen_range(0.0..side);
                }
                p
            })
            .collect();
        Self::new(points, d, side)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn side(&self) -> f64 {
        self.side
    }

    pub fn points(&self) -> &[[f64; MAX_DIM]] {
        &self.points
    }

    /// Shortest torus distance between points i and j.
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        let mut s = 0.0;
        for axis in 0..self.d {
            let mut dx = (self.points[i][axis] - self.points[j][axis]).abs();
            if dx > self.side / 2.0 {
                dx = self.side - dx;
            }
            s += dx * dx;
        }
        s.sqrt()
    }

    pub fn min_separation(&self) -> f64 {
        let n = self.points.len();
        let mut best = f64::INFINITY;
        for i in 0..n {
            for j in (i + 1)..n {
                best = best.min(self.distance(i, j));
            }
        }
        best
    }

    /// Replaces point i; the new position is wrapped.
    pub fn set_point(&mut self, i: usize, mut p: [f64; MAX_DIM]) {
        for (axis, c) in p.iter_mut().enumerate() {
            if axis < self.d {
                *c = c.rem_euclid(self.side);
                if *c >= self.side {
                    *c = 0.0;
                }
            } else {
                *c = 0.0;
            }
        }
        self.points[i] = p;
    }

    fn check_grid(&self, grid: &TorusGrid) -> Result<()> {
        if self.d != grid.d() || (self.side - grid.side()).abs() > 1e-12 * self.side {
            return Err(Error::InvalidParameter(format!(
                "configuration is on a d={} side={} torus, grid is d={} side={}",
                self.d,
                self.side,
                grid.d(),
                grid.side()
            )));
        }
        Ok(())
    }
}

/// Moments e~(m) of the empirical measure over the grid's frequency lattice,
/// by direct summation. e~(0) = 1 exactly; the measure is real, so
/// e~(-m) = conj(e~(m)) holds by construction.
#[derive(Debug, Clone)]
pub struct EmpiricalMoments {
    grid: TorusGrid,
    coeffs: Vec<Complex64>,
}

impl EmpiricalMoments {
    pub fn compute(grid: TorusGrid, config: &Configuration) -> Result<Self> {
        config.check_grid(&grid)?;
        let n = grid.n();
        let d = grid.d();
        let npts = config.len() as f64;
        // per point and axis, the phase exp(-2 pi i k x / T) for every lattice
        // row index k (frequency grid.freq(k)); tensor products accumulate
        let mut coeffs = vec![Complex64::new(0.0, 0.0); grid.len()];
        let mut axis_phase = vec![Complex64::new(0.0, 0.0); d * n];
        for p in config.points() {
            for axis in 0..d {
                let base = -TAU * p[axis] / grid.side();
                for k in 0..n {
                    let m = grid.freq(k) as f64;
                    axis_phase[axis * n + k] = Complex64::from_polar(1.0, base * m);
                }
            }
            for (idx, c) in coeffs.iter_mut().enumerate() {
                let ks = grid.coords_of(idx);
                let mut z = axis_phase[ks[0]];
                for axis in 1..d {
                    z *= axis_phase[axis * n + ks[axis]];
                }
                *c += z;
            }
        }
        for c in &mut coeffs {
            *c /= npts;
        }
        coeffs[0] = Complex64::new(1.0, 0.0);
        Ok(Self { grid, coeffs })
    }

    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeff_at(&self, m: &[i64; MAX_DIM]) -> Complex64 {
        match self.grid.index_of_lattice(m) {
            Some(idx) => self.coeffs[idx],
            None => Complex64::new(0.0, 0.0),
        }
    }

    /// Density-series coefficients u^(m) = e~(m)/T^d, the layout shared with
    /// `GridField::spectrum`. Synthesizing this spectrum evaluates the
    /// band-limited empirical density.
    pub fn spectral(&self) -> SpectralField {
        let scale = 1.0 / self.grid.volume();
        let coeffs = self.coeffs.iter().map(|c| c * scale).collect();
        SpectralField::new(self.grid, coeffs).expect("moment layout matches grid")
    }

    /// max_{m != 0} |e~(m)|; always <= 1.
    pub fn max_modulus(&self) -> f64 {
        self.coeffs.iter().skip(1).map(|c| c.norm()).fold(0.0, f64::max)
    }
}

/// Real-space pair interaction: the kernel's band-limited g synthesized once
/// on its own grid, evaluated off-grid by multilinear interpolation, with a
/// coincidence guard tied to the grid spacing.
#[derive(Debug, Clone)]
pub struct PairPotential {
    g: GridField,
    min_dist: f64,
}

impl PairPotential {
    pub fn new(kernel: &Kernel) -> Result<Self> {
        let g = kernel.g_on_grid()?;
        let min_dist = kernel.grid().spacing() / 16.0;
        Ok(Self { g, min_dist })
    }

    /// Synthesis on a refined grid (`evaluate_g_real`), for runs where the
    /// untruncated kernel matters more than exact lattice identities.
    pub fn refined(kernel: &Kernel, tol: f64, max_n: usize) -> Result<Self> {
        let g = kernel.evaluate_g_real(tol, max_n)?;
        let min_dist = kernel.grid().spacing() / 16.0;
        Ok(Self { g, min_dist })
    }

    pub fn field(&self) -> &GridField {
        &self.g
    }

    pub fn min_distance(&self) -> f64 {
        self.min_dist
    }

    /// g(x - y), interpolated. Errors when the pair is closer than the guard.
    pub fn eval_pair(
        &self,
        config: &Configuration,
        i: usize,
        j: usize,
    ) -> Result<f64> {
        let dist = config.distance(i, j);
        if dist < self.min_dist {
            return Err(Error::CoincidentPoints { i, j, dist, limit: self.min_dist });
        }
        let grid = self.g.grid();
        let mut diff = [0.0; MAX_DIM];
        for axis in 0..config.d() {
            diff[axis] = (config.points()[i][axis] - config.points()[j][axis]).rem_euclid(grid.side());
        }
        Ok(self.g.sample(&diff))
    }
}

/// (1/N^2) sum_{i != j} g(x_i - x_j). The diagonal stays out; with it the sum
/// would be infinite for singular kernels and would swamp the N^{-1} terms
/// the estimates track.
pub fn pair_energy(kernel: &Kernel, config: &Configuration) -> Result<f64> {
    config.check_grid(&kernel.grid())?;
    let pair = PairPotential::new(kernel)?;
    pair_energy_with(&pair, config)
}

/// Same sum against a prebuilt pair table (callers doing many sums).
pub fn pair_energy_with(pair: &PairPotential, config: &Configuration) -> Result<f64> {
    let n = config.len();
    let mut acc = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            acc += pair.eval_pair(config, i, j)?;
        }
    }
    Ok(2.0 * acc / (n as f64 * n as f64))
}

/// Background data for F_N against a fixed reference density: h(mu) on the
/// grid and the scalar E(mu), computed once.
#[derive(Debug, Clone)]
pub struct BackgroundField {
    h: GridField,
    energy: f64,
}

impl BackgroundField {
    pub fn new(kernel: &Kernel, mu: &ProbabilityDensity) -> Self {
        let h = crate::equilibrium::h_field(kernel, mu.field());
        let energy = kernel.energy_of_density(mu.field());
        Self { h, energy }
    }

    /// Reuses fields already computed by an equilibrium solve.
    pub fn from_parts(h: GridField, energy: f64) -> Self {
        Self { h, energy }
    }

    pub fn h(&self) -> &GridField {
        &self.h
    }

    pub fn energy(&self) -> f64 {
        self.energy
    }

    /// G(emp, mu) = (1/N) sum_i h(mu)(x_i).
    pub fn coupling(&self, config: &Configuration) -> f64 {
        let mean: f64 = config.points().iter().map(|p| self.h.sample(p)).sum();
        mean / config.len() as f64
    }
}

/// F_N(X_N, mu) = E^{!=}(emp) - 2 G(emp, mu) + E(mu): the energy of the
/// signed measure emp - mu with the empirical diagonal removed.
pub fn f_energy(kernel: &Kernel, config: &Configuration, mu: &ProbabilityDensity) -> Result<f64> {
    let background = BackgroundField::new(kernel, mu);
    let pair = PairPotential::new(kernel)?;
    f_energy_with(&pair, &background, config)
}

pub fn f_energy_with(
    pair: &PairPotential,
    background: &BackgroundField,
    config: &Configuration,
) -> Result<f64> {
    Ok(pair_energy_with(pair, config)? - 2.0 * background.coupling(config) + background.energy())
}

/// H_N = sum_{i != j} g(x_i - x_j) + N sum_i V(x_i).
pub fn hamiltonian(kernel: &Kernel, v: &Potential, config: &Configuration) -> Result<f64> {
    config.check_grid(&kernel.grid())?;
    let pair = PairPotential::new(kernel)?;
    let vfield = v.field(kernel.grid())?;
    hamiltonian_with(&pair, &vfield, config)
}

pub fn hamiltonian_with(
    pair: &PairPotential,
    vfield: &GridField,
    config: &Configuration,
) -> Result<f64> {
    let n = config.len() as f64;
    let pair_sum = n * n * pair_energy_with(pair, config)?;
    let v_sum: f64 = config.points().iter().map(|p| vfield.sample(p)).sum();
    Ok(pair_sum + n * v_sum)
}

/// Which decomposition `splitting_check` verifies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplittingVariant {
    /// H_N = N^2 (E_V(mu_inf) + F_N + int zeta_inf d emp)
    Equilibrium,
    /// H_N = N^2 (E_V(mu_th) + ent/theta + F_N + int zeta_th d emp),
    /// zeta_th = -(1/theta) log mu_th
    Thermal,
}

/// Relative defect of the splitting decomposition:
/// |H_N - N^2 (E + F_N + int zeta d emp)| / max(1, |H_N|).
///
/// Both routes share the interpolated g, h and V values, so everything
/// cancels algebraically; the defect is float bookkeeping plus, for the
/// thermal variant, the solver's first-order residual sampled at the points
/// (zeta_th is read off the solved log-density, not recomputed from h).
pub fn splitting_check(
    kernel: &Kernel,
    v: &Potential,
    config: &Configuration,
    equilibrium: Option<&EquilibriumMeasure>,
    thermal: Option<&ThermalEquilibrium>,
    variant: SplittingVariant,
) -> Result<f64> {
    config.check_grid(&kernel.grid())?;
    let pair = PairPotential::new(kernel)?;
    let vfield = v.field(kernel.grid())?;
    let n = config.len() as f64;
    let h_n = hamiltonian_with(&pair, &vfield, config)?;

    // the solved `energy` fields already carry the potential term (and, for
    // the thermal measure, the entropy term)
    let (mu, zeta, mean_field) = match variant {
        SplittingVariant::Equilibrium => {
            let eq = equilibrium
                .ok_or_else(|| Error::InvalidParameter("equilibrium measure required".into()))?;
            (&eq.density, &eq.zeta, eq.energy)
        }
        SplittingVariant::Thermal => {
            let th = thermal
                .ok_or_else(|| Error::InvalidParameter("thermal equilibrium required".into()))?;
            (&th.density, &th.zeta, th.energy)
        }
    };

    let background = BackgroundField::new(kernel, mu);
    let f_n = f_energy_with(&pair, &background, config)?;
    let zeta_mean: f64 =
        config.points().iter().map(|p| zeta.sample(p)).sum::<f64>() / n;
    let reconstructed = n * n * (mean_field + f_n + zeta_mean);
    Ok((h_n - reconstructed).abs() / h_n.abs().max(1.0))
}

/// Fluct[f] = (1/N) sum_i f(x_i) - int f d mu_ref, with the reference term
/// cached for reuse across many configurations.
#[derive(Debug, Clone)]
pub struct FluctuationObservable {
    f: GridField,
    reference_mean: f64,
}

impl FluctuationObservable {
    pub fn new(f: GridField, reference: &ProbabilityDensity) -> Self {
        let reference_mean = f.quadrature_against(reference.field());
        Self { f, reference_mean }
    }

    pub fn field(&self) -> &GridField {
        &self.f
    }

    pub fn reference_mean(&self) -> f64 {
        self.reference_mean
    }

    pub fn evaluate(&self, config: &Configuration) -> f64 {
        let mean: f64 =
            config.points().iter().map(|p| self.f.sample(p)).sum::<f64>() / config.len() as f64;
        mean - self.reference_mean
    }
}

pub fn fluctuation(config: &Configuration, f: &GridField, reference: &ProbabilityDensity) -> f64 {
    FluctuationObservable::new(f.clone(), reference).evaluate(config)
}
