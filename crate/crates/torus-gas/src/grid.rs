//! Periodic grids on the torus [0,T)^d and the fields that live on them.
//!
//! Conventions, used everywhere downstream:
//! - grid points x_k = T k / n, indices row-major with axis 0 slowest;
//! - series coefficients f^(m) = (1/n^d) sum_x f(x) e^{-2 pi i m.x/T} on the
//!   lattice m in {-n/2, .., n/2-1}^d, stored in FFT order;
//! - quadrature is the rectangle rule (T/n)^d sum, exact for band-limited fields;
//! - |m| in seminorms is the Euclidean norm of the integer vector, not scaled by T.

use crate::error::{Error, Result};
use crate::fftn;
use rustfft::num_complex::Complex64;

pub const MAX_DIM: usize = 3;

/// Tolerance for the conjugate-symmetry check in `SpectralField::field`.
const CONJ_SYM_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TorusGrid {
    d: usize,
    side: f64,
    n: usize,
}

impl TorusGrid {
    pub fn new(d: usize, side: f64, n: usize) -> Result<Self> {
        if !(1..=MAX_DIM).contains(&d) {
            return Err(Error::InvalidParameter(format!("dimension {d} not in 1..=3")));
        }
        if !(side.is_finite() && side > 0.0) {
            return Err(Error::InvalidParameter(format!("torus side {side} must be positive")));
        }
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::InvalidParameter(format!("grid size {n} must be a power of two >= 8")));
        }
        if (n as f64).powi(d as i32) > 2f64.powi(24) {
            return Err(Error::InvalidParameter(format!("grid {n}^{d} exceeds the 2^24 node budget")));
        }
        Ok(Self { d, side, n })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn side(&self) -> f64 {
        self.side
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        self.side / self.n as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.d as i32)
    }

    pub fn volume(&self) -> f64 {
        self.side.powi(self.d as i32)
    }

    pub fn coords_of(&self, mut idx: usize) -> [usize; MAX_DIM] {
        let mut k = [0usize; MAX_DIM];
        for a in (0..self.d).rev() {
            k[a] = idx % self.n;
            idx /= self.n;
        }
        k
    }

    pub fn index_of(&self, k: &[usize; MAX_DIM]) -> usize {
        let mut idx = 0;
        for a in 0..self.d {
            idx = idx * self.n + (k[a] % self.n);
        }
        idx
    }

    pub fn point(&self, idx: usize) -> [f64; MAX_DIM] {
        let k = self.coords_of(idx);
        let mut x = [0.0; MAX_DIM];
        for a in 0..self.d {
            x[a] = self.side * k[a] as f64 / self.n as f64;
        }
        x
    }

    /// FFT-order index -> signed frequency in {-n/2, .., n/2-1}.
    pub fn freq(&self, k: usize) -> i64 {
        if k < self.n / 2 {
            k as i64
        } else {
            k as i64 - self.n as i64
        }
    }

    pub fn lattice_of(&self, idx: usize) -> [i64; MAX_DIM] {
        let k = self.coords_of(idx);
        let mut m = [0i64; MAX_DIM];
        for a in 0..self.d {
            m[a] = self.freq(k[a]);
        }
        m
    }

    pub fn index_of_lattice(&self, m: &[i64; MAX_DIM]) -> Option<usize> {
        let half = self.n as i64 / 2;
        let mut k = [0usize; MAX_DIM];
        for a in 0..self.d {
            if m[a] < -half || m[a] >= half {
                return None;
            }
            k[a] = m[a].rem_euclid(self.n as i64) as usize;
        }
        Some(self.index_of(&k))
    }

    /// Squared Euclidean norm of the integer lattice vector at `idx`.
    pub fn m_norm2(&self, idx: usize) -> f64 {
        let m = self.lattice_of(idx);
        let mut s = 0.0;
        for a in 0..self.d {
            s += (m[a] * m[a]) as f64;
        }
        s
    }

    pub fn wrap(&self, x: f64) -> f64 {
        let y = x.rem_euclid(self.side);
        if y == self.side {
            0.0
        } else {
            y
        }
    }

    /// Torus distance between two points (Euclidean, per-axis wrap).
    pub fn distance(&self, x: &[f64; MAX_DIM], y: &[f64; MAX_DIM]) -> f64 {
        let mut s = 0.0;
        for a in 0..self.d {
            let mut dx = (x[a] - y[a]).abs() % self.side;
            if dx > self.side / 2.0 {
                dx = self.side - dx;
            }
            s += dx * dx;
        }
        s.sqrt()
    }
}

#[derive(Clone, Debug)]
pub struct GridField {
    grid: TorusGrid,
    values: Vec<f64>,
}

impl GridField {
    pub fn new(grid: TorusGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidParameter(format!(
                "field has {} values, grid needs {}",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: TorusGrid) -> Self {
        Self { grid, values: vec![0.0; grid.len()] }
    }

    pub fn constant(grid: TorusGrid, c: f64) -> Self {
        Self { grid, values: vec![c; grid.len()] }
    }

    pub fn from_fn(grid: TorusGrid, f: impl Fn(&[f64; MAX_DIM]) -> f64) -> Self {
        let values = (0..grid.len()).map(|i| f(&grid.point(i))).collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Rectangle-rule integral over the torus.
    pub fn quadrature(&self) -> f64 {
        self.grid.cell_volume() * self.values.iter().sum::<f64>()
    }

    /// Integral of this field against a density (both on the same grid).
    pub fn quadrature_against(&self, weight: &GridField) -> f64 {
        assert_eq!(self.grid, weight.grid, "fields on different grids");
        self.grid.cell_volume()
            * self
                .values
                .iter()
                .zip(&weight.values)
                .map(|(a, b)| a * b)
                .sum::<f64>()
    }

    pub fn spectrum(&self) -> SpectralField {
        SpectralField {
            grid: self.grid,
            coeffs: fftn::forward(&self.values, self.grid.n(), self.grid.d()),
        }
    }

    /// Periodic multilinear interpolation at an arbitrary point.
    pub fn sample(&self, x: &[f64; MAX_DIM]) -> f64 {
        let g = &self.grid;
        let n = g.n();
        let mut base = [0usize; MAX_DIM];
        let mut frac = [0.0; MAX_DIM];
        for a in 0..g.d() {
            let u = g.wrap(x[a]) / g.spacing();
            let f = u.floor();
            base[a] = (f as usize) % n;
            frac[a] = u - f;
        }
        let mut acc = 0.0;
        for corner in 0..(1usize << g.d()) {
            let mut k = [0usize; MAX_DIM];
            let mut w = 1.0;
            for a in 0..g.d() {
                if corner >> a & 1 == 1 {
                    k[a] = (base[a] + 1) % n;
                    w *= frac[a];
                } else {
                    k[a] = base[a];
                    w *= 1.0 - frac[a];
                }
            }
            if w != 0.0 {
                acc += w * self.values[g.index_of(&k)];
            }
        }
        acc
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> GridField {
        GridField {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SpectralField {
    grid: TorusGrid,
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn new(grid: TorusGrid, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(Error::InvalidParameter(format!(
                "spectrum has {} coefficients, grid needs {}",
                coeffs.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, coeffs })
    }

    pub fn zeros(grid: TorusGrid) -> Self {
        Self { grid, coeffs: vec![Complex64::default(); grid.len()] }
    }

    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn coeff_at(&self, m: &[i64; MAX_DIM]) -> Complex64 {
        self.grid
            .index_of_lattice(m)
            .map(|i| self.coeffs[i])
            .unwrap_or_default()
    }

    /// Largest deviation from conjugate symmetry, coeff(-m) vs conj(coeff(m)).
    pub fn conjugate_asymmetry(&self) -> f64 {
        let g = &self.grid;
        let n = g.n() as i64;
        let mut max_dev: f64 = 0.0;
        for idx in 0..g.len() {
            let m = g.lattice_of(idx);
            let mut neg = [0i64; MAX_DIM];
            for a in 0..g.d() {
                // -(-n/2) falls off the lattice; the Nyquist row aliases onto itself
                neg[a] = if m[a] == -n / 2 { -n / 2 } else { -m[a] };
            }
            if let Some(j) = g.index_of_lattice(&neg) {
                let dev = (self.coeffs[j] - self.coeffs[idx].conj()).norm();
                max_dev = max_dev.max(dev);
            }
        }
        max_dev
    }

    /// Project onto conjugate symmetry: c(m) <- (c(m) + conj(c(-m)))/2 with
    /// the Nyquist rows self-aliased. The projection of a mode set onto real
    /// band-limited functions; a no-op for spectra of real fields.
    pub fn conjugate_symmetrize(&mut self) {
        let g = self.grid;
        let n = g.n() as i64;
        for idx in 0..g.len() {
            let m = g.lattice_of(idx);
            let mut neg = [0i64; MAX_DIM];
            for a in 0..g.d() {
                neg[a] = if m[a] == -n / 2 { -n / 2 } else { -m[a] };
            }
            let j = g.index_of_lattice(&neg).expect("negation stays on the lattice");
            if j < idx {
                continue;
            }
            let sym = (self.coeffs[idx] + self.coeffs[j].conj()) / 2.0;
            self.coeffs[idx] = sym;
            self.coeffs[j] = sym.conj();
        }
    }

    /// Synthesize the real field; errors if the spectrum is not conjugate-symmetric.
    pub fn field(&self) -> Result<GridField> {
        let scale = self
            .coeffs
            .iter()
            .map(|c| c.norm())
            .fold(0.0f64, f64::max)
            .max(1.0);
        let max_dev = self.conjugate_asymmetry();
        if max_dev > CONJ_SYM_TOL * scale {
            return Err(Error::NonRealSpectrum { max_dev });
        }
        let data = fftn::inverse(&self.coeffs, self.grid.n(), self.grid.d());
        let values = data.iter().map(|c| c.re).collect();
        Ok(GridField { grid: self.grid, values })
    }

    /// sum_m |f^(m)| |m|^alpha with the m=0 term contributing |f^(0)| only at alpha=0.
    pub fn sobolev_seminorm(&self, alpha: f64) -> Result<f64> {
        if alpha < 0.0 {
            return Err(Error::NegativeOrder(alpha));
        }
        let mut s = 0.0;
        for (idx, c) in self.coeffs.iter().enumerate() {
            let m2 = self.grid.m_norm2(idx);
            if m2 == 0.0 {
                if alpha == 0.0 {
                    s += c.norm();
                }
            } else {
                s += c.norm() * m2.powf(alpha / 2.0);
            }
        }
        Ok(s)
    }

    /// L2 norm squared over the torus, T^d sum |f^(m)|^2 (Parseval).
    pub fn l2_norm2(&self) -> f64 {
        self.grid.volume() * self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>()
    }
}

/// Nonnegative field integrating to one (relative tolerance 1e-12).
#[derive(Clone, Debug)]
pub struct ProbabilityDensity {
    field: GridField,
}

impl ProbabilityDensity {
    pub fn new(field: GridField) -> Result<Self> {
        let min = field.min();
        if min < 0.0 {
            return Err(Error::InvalidDensity(format!("negative value {min:.3e}")));
        }
        let total = field.quadrature();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidDensity(format!("integral {total} is not 1")));
        }
        Ok(Self { field })
    }

    /// Rescale a nonnegative field so it integrates to one.
    pub fn from_unnormalized(field: GridField) -> Result<Self> {
        let min = field.min();
        if min < 0.0 {
            return Err(Error::InvalidDensity(format!("negative value {min:.3e}")));
        }
        let total = field.quadrature();
        if !(total.is_finite() && total > 0.0) {
            return Err(Error::InvalidDensity(format!("integral {total} not positive")));
        }
        let values = field.values().iter().map(|v| v / total).collect();
        Ok(Self { field: GridField { grid: field.grid, values } })
    }

    pub fn uniform(grid: TorusGrid) -> Self {
        Self { field: GridField::constant(grid, 1.0 / grid.volume()) }
    }

    pub fn field(&self) -> &GridField {
        &self.field
    }

    pub fn grid(&self) -> TorusGrid {
        self.field.grid
    }

    /// Differential entropy integral of mu log mu, with 0 log 0 = 0.
    pub fn entropy(&self) -> f64 {
        let cell = self.grid().cell_volume();
        cell * self
            .field
            .values()
            .iter()
            .map(|&v| if v > 0.0 { v * v.ln() } else { 0.0 })
            .sum::<f64>()
    }

    /// Relative entropy against another density; +inf when not absolutely continuous.
    pub fn relative_entropy(&self, other: &ProbabilityDensity) -> f64 {
        assert_eq!(self.grid(), other.grid(), "densities on different grids");
        let cell = self.grid().cell_volume();
        let mut s = 0.0;
        for (&p, &q) in self.field.values().iter().zip(other.field.values()) {
            if p > 0.0 {
                if q <= 0.0 {
                    return f64::INFINITY;
                }
                s += p * (p / q).ln();
            }
        }
        cell * s
    }
}

/// Relative entropy of a (possibly signed, but nonnegative-checked) field
/// against the normalized indicator of a mask.
pub fn relative_entropy_vs_mask(density: &GridField, mask: &[bool]) -> f64 {
    let grid = density.grid();
    assert_eq!(mask.len(), grid.len());
    let cell = grid.cell_volume();
    let sigma_volume = cell * mask.iter().filter(|&&b| b).count() as f64;
    let q = 1.0 / sigma_volume;
    let mut s = 0.0;
    for (idx, &p) in density.values().iter().enumerate() {
        if p > 0.0 {
            if !mask[idx] {
                return f64::INFINITY;
            }
            s += p * (p / q).ln();
        }
    }
    cell * s
}
