//! Interaction kernels with positive series coefficients on the frequency
//! lattice, and the spectral calculus built on them.
//!
//! A kernel is the even function g(x) = sum_m g^(m) e^{2 pi i m.x/T}; every
//! energy downstream is a quadratic form in these coefficients. Once a grid is
//! chosen, the band-limited truncation of g IS the model: energies, fields and
//! partition integrals all use the same finite lattice, so inequalities that
//! hold for any positive-coefficient kernel hold exactly for the truncation.
//! `evaluate_g_real` is the exception: it refines the synthesis grid to
//! approximate the untruncated kernel pointwise.
//!
//! The zero mode is an additive constant. Smoothing flows and fractional
//! powers never touch it (mass is conserved), and h_alpha for alpha <= 0
//! annihilates the mean.

use crate::error::{Error, Result};
use crate::grid::{GridField, SpectralField, TorusGrid, MAX_DIM};
use rustfft::num_complex::Complex64;
use std::f64::consts::TAU;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum KernelForm {
    /// g^(m) = |m|^{-gamma}, lattice norm, no box-size factor.
    Riesz { gamma: f64 },
    /// g^(m) = (2 pi |m| / T)^{-2}, the inverse periodic Laplacian.
    Coulomb,
    /// Coefficients supplied point by point; band-limited by construction.
    Tabulated,
}

/// Behaviour of g near the origin, classified from the decay of g^.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Singularity {
    /// g(x) grows like |x|^{-exponent} as x -> 0.
    PowerLaw { exponent: f64 },
    Logarithmic,
    Bounded,
}

#[derive(Clone, Debug)]
pub struct Kernel {
    grid: TorusGrid,
    ghat: Vec<f64>,
    form: KernelForm,
    sing: Singularity,
}

/// Output of `check_admissibility`: decay exponents recovered from the
/// coefficients and how far the smoothing kernels dip below zero.
#[derive(Clone, Debug, serde::Serialize)]
pub struct AdmissibilityReport {
    /// Slope of the upper log-log envelope of g^ (fastest-decay bound).
    pub gamma_fit: f64,
    pub gamma_residual: f64,
    /// Slope of the lower log-log envelope (slowest-decay bound).
    pub lambda_fit: f64,
    pub lambda_residual: f64,
    /// (s, min_x p(x, s)) over the requested sweep.
    pub heat_minima: Vec<(f64, f64)>,
    /// Worst grid minimum of p over the sweep.
    pub min_p: f64,
    /// max(0, -min_p); 0 for genuinely positive kernels.
    pub c_heat: f64,
}

impl Kernel {
    pub fn riesz(grid: TorusGrid, gamma: f64, zero_mode: f64) -> Result<Self> {
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(Error::InvalidParameter(format!("riesz exponent {gamma} must be positive")));
        }
        let d = grid.d() as f64;
        let sing = if gamma < d - 1e-9 {
            Singularity::PowerLaw { exponent: d - gamma }
        } else if gamma <= d + 1e-9 {
            Singularity::Logarithmic
        } else {
            Singularity::Bounded
        };
        Self::from_rule(grid, KernelForm::Riesz { gamma }, sing, zero_mode, |m| {
            norm2_of(m).powf(-gamma / 2.0)
        })
    }

    pub fn coulomb(grid: TorusGrid, zero_mode: f64) -> Result<Self> {
        let sing = match grid.d() {
            1 => Singularity::Bounded,
            2 => Singularity::Logarithmic,
            _ => Singularity::PowerLaw { exponent: 1.0 },
        };
        let scale = (grid.side() / TAU).powi(2);
        Self::from_rule(grid, KernelForm::Coulomb, sing, zero_mode, move |m| {
            scale / norm2_of(m)
        })
    }

    /// Build from an arbitrary coefficient rule. The rule is evaluated on the
    /// whole lattice; it must be even in m and strictly positive off zero.
    pub fn from_rule(
        grid: TorusGrid,
        form: KernelForm,
        sing: Singularity,
        zero_mode: f64,
        rule: impl Fn(&[i64; MAX_DIM]) -> f64,
    ) -> Result<Self> {
        if !(zero_mode.is_finite() && zero_mode >= 0.0) {
            return Err(Error::InvalidParameter(format!("zero mode {zero_mode} must be >= 0")));
        }
        let mut ghat = vec![0.0; grid.len()];
        ghat[0] = zero_mode;
        for idx in 1..grid.len() {
            let m = grid.lattice_of(idx);
            let v = rule(&m);
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::NonPositiveCoefficient { m, value: v });
            }
            ghat[idx] = v;
        }
        let k = Self { grid, ghat, form, sing };
        k.check_even()?;
        Ok(k)
    }

    /// Build from explicit (m, value) rows covering the whole lattice.
    pub fn from_table(grid: TorusGrid, entries: &[([i64; MAX_DIM], f64)]) -> Result<Self> {
        let mut ghat = vec![f64::NAN; grid.len()];
        for &(m, v) in entries {
            let idx = grid
                .index_of_lattice(&m)
                .ok_or_else(|| Error::InvalidParameter(format!("mode {m:?} off the lattice")))?;
            if !ghat[idx].is_nan() {
                return Err(Error::InvalidParameter(format!("mode {m:?} listed twice")));
            }
            if idx == 0 {
                if !(v.is_finite() && v >= 0.0) {
                    return Err(Error::InvalidParameter(format!("zero mode {v} must be >= 0")));
                }
            } else if !(v.is_finite() && v > 0.0) {
                return Err(Error::NonPositiveCoefficient { m, value: v });
            }
            ghat[idx] = v;
        }
        if let Some(idx) = ghat.iter().position(|v| v.is_nan()) {
            return Err(Error::InvalidParameter(format!(
                "mode {:?} missing from the table",
                grid.lattice_of(idx)
            )));
        }
        let mut k = Self { grid, ghat, form: KernelForm::Tabulated, sing: Singularity::Bounded, };
        k.sing = k.classify_decay();
        k.check_even()?;
        Ok(k)
    }

    fn check_even(&self) -> Result<()> {
        let g = &self.grid;
        let n = g.n() as i64;
        for idx in 0..g.len() {
            let m = g.lattice_of(idx);
            let mut neg = [0i64; MAX_DIM];
            for a in 0..g.d() {
                neg[a] = if m[a] == -n / 2 { -n / 2 } else { -m[a] };
            }
            if let Some(j) = g.index_of_lattice(&neg) {
                let (a, b) = (self.ghat[idx], self.ghat[j]);
                if (a - b).abs() > 1e-12 * a.abs().max(b.abs()) {
                    return Err(Error::InvalidParameter(format!(
                        "coefficients not even: g^({m:?}) = {a}, g^({neg:?}) = {b}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Decay exponent from a least-squares fit of ln g^ vs ln |m|
    /// over 1 <= |m|_inf <= n/4 (Nyquist corners excluded).
    pub fn gamma_estimate(&self) -> f64 {
        let g = &self.grid;
        let cap = (g.n() / 4) as i64;
        let (mut sx, mut sy, mut sxx, mut sxy, mut k) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for idx in 1..g.len() {
            let m = g.lattice_of(idx);
            if (0..g.d()).any(|a| m[a].abs() > cap) {
                continue;
            }
            let x = 0.5 * norm2_of(&m).ln();
            let y = self.ghat[idx].ln();
            sx += x;
            sy += y;
            sxx += x * x;
            sxy += x * y;
            k += 1.0;
        }
        let denom = k * sxx - sx * sx;
        if denom.abs() < 1e-14 {
            return f64::NAN;
        }
        -(k * sxy - sx * sy) / denom
    }

    fn classify_decay(&self) -> Singularity {
        let d = self.grid.d() as f64;
        let gamma = self.gamma_estimate();
        if gamma < d - 0.05 {
            Singularity::PowerLaw { exponent: d - gamma }
        } else if gamma <= d + 0.05 {
            Singularity::Logarithmic
        } else {
            Singularity::Bounded
        }
    }

    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    pub fn form(&self) -> KernelForm {
        self.form
    }

    pub fn singularity(&self) -> Singularity {
        self.sing
    }

    /// Dense coefficients in FFT index order.
    pub fn ghat(&self) -> &[f64] {
        &self.ghat
    }

    pub fn zero_mode(&self) -> f64 {
        self.ghat[0]
    }

    pub fn ghat_at(&self, m: &[i64; MAX_DIM]) -> Option<f64> {
        self.grid.index_of_lattice(m).map(|i| self.ghat[i])
    }

    /// Power-law decay exponent of the coefficients: g^(m) ~ |m|^{-exponent}.
    /// Exact for the analytic forms, fitted for tables.
    pub fn decay_exponent(&self) -> f64 {
        match self.form {
            KernelForm::Riesz { gamma } => gamma,
            KernelForm::Coulomb => 2.0,
            KernelForm::Tabulated => self.gamma_estimate(),
        }
    }

    /// Coefficient as a function of |m|^2, beyond the grid lattice.
    /// None for tabulated kernels, which carry no analytic continuation.
    pub fn ghat_of_norm2(&self, m2: f64) -> Option<f64> {
        if m2 == 0.0 {
            return Some(self.ghat[0]);
        }
        match self.form {
            KernelForm::Riesz { gamma } => Some(m2.powf(-gamma / 2.0)),
            KernelForm::Coulomb => Some((self.grid.side() / TAU).powi(2) / m2),
            KernelForm::Tabulated => None,
        }
    }

    /// Coefficient-wise g^(m)^alpha, with the mean annihilated for alpha <= 0.
    pub fn apply_h_alpha(&self, f: &SpectralField, alpha: f64) -> SpectralField {
        assert_eq!(f.grid(), self.grid, "field and kernel on different grids");
        let mut coeffs = f.coeffs().to_vec();
        coeffs[0] = if alpha <= 0.0 {
            Complex64::default()
        } else {
            coeffs[0] * self.ghat[0].powf(alpha)
        };
        for idx in 1..coeffs.len() {
            coeffs[idx] *= self.ghat[idx].powf(alpha);
        }
        SpectralField::new(self.grid, coeffs).expect("length preserved")
    }

    /// Mode damping factors e^{-t/g^(m)}, with the zero mode pinned at 1.
    pub fn damping(&self, t: f64) -> Result<Vec<f64>> {
        if !(t.is_finite() && t > 0.0) {
            return Err(Error::InvalidParameter(format!("smoothing time {t} must be positive")));
        }
        let mut w = vec![1.0; self.grid.len()];
        for idx in 1..w.len() {
            let v = (-t / self.ghat[idx]).exp();
            w[idx] = if v < 1e-300 { 0.0 } else { v };
        }
        Ok(w)
    }

    /// Smoothing kernel p(x, t) = 1 + sum_{m != 0} e^{-t/g^(m)} e^{2 pi i m.x/T}.
    pub fn heat_kernel(&self, t: f64) -> Result<GridField> {
        let w = self.damping(t)?;
        let coeffs = w.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        SpectralField::new(self.grid, coeffs)?.field()
    }

    /// Quadratic energy sum_m g^(m) |mu~(m)|^2 of a density on the grid,
    /// with mu~ = T^d mu^ the moment sequence (mu~(0) = mass).
    pub fn energy_of_density(&self, mu: &GridField) -> f64 {
        assert_eq!(mu.grid(), self.grid, "density and kernel on different grids");
        let spec = mu.spectrum();
        let td2 = self.grid.volume().powi(2);
        td2 * self
            .ghat
            .iter()
            .zip(spec.coeffs())
            .map(|(&g, c)| g * c.norm_sqr())
            .sum::<f64>()
    }

    /// Polarization sum_m g^(m) u~(m) conj(v~(m)) for moment sequences.
    pub fn bilinear_of_moments(&self, u: &SpectralField, v: &SpectralField) -> f64 {
        assert_eq!(u.grid(), self.grid);
        assert_eq!(v.grid(), self.grid);
        self.ghat
            .iter()
            .zip(u.coeffs().iter().zip(v.coeffs()))
            .map(|(&g, (a, b))| g * (a * b.conj()).re)
            .sum()
    }

    /// Share of the energy carried by modes with |m|_inf > n/4; a large value
    /// means the grid truncates the model noticeably.
    pub fn spectral_tail_share(&self, mu: &GridField) -> f64 {
        assert_eq!(mu.grid(), self.grid);
        let spec = mu.spectrum();
        let cap = (self.grid.n() / 4) as i64;
        let mut head = 0.0;
        let mut tail = 0.0;
        for idx in 1..self.grid.len() {
            let m = self.grid.lattice_of(idx);
            let e = self.ghat[idx] * spec.coeffs()[idx].norm_sqr();
            if (0..self.grid.d()).any(|a| m[a].abs() > cap) {
                tail += e;
            } else {
                head += e;
            }
        }
        if head + tail == 0.0 {
            0.0
        } else {
            tail / (head + tail)
        }
    }

    /// Synthesis of the band-limited kernel on its own grid. Exact for the
    /// truncated model; `evaluate_g_real` refines toward the full series.
    pub fn g_on_grid(&self) -> Result<GridField> {
        let coeffs = self.ghat.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        SpectralField::new(self.grid, coeffs)?.field()
    }

    /// Pointwise values of the untruncated g, by doubling the synthesis grid
    /// until successive refinements agree within `tol`. Power-law and
    /// logarithmic kernels are compared away from the origin (4 spacings of
    /// the starting grid); bounded kernels converge uniformly and are
    /// compared everywhere. Tabulated kernels are already band-limited and
    /// come back exactly as synthesized.
    pub fn evaluate_g_real(&self, tol: f64, max_n: usize) -> Result<GridField> {
        if let KernelForm::Tabulated = self.form {
            return self.g_on_grid();
        }
        let d = self.grid.d();
        let side = self.grid.side();
        let excl = match self.sing {
            Singularity::Bounded => 0.0,
            _ => 4.0 * self.grid.spacing(),
        };
        let origin = [0.0; MAX_DIM];
        let mut prev = self.synthesize_at(self.grid.n())?;
        loop {
            let n = prev.grid().n() * 2;
            if n > max_n || TorusGrid::new(d, side, n).is_err() {
                return Err(Error::SlowConvergence { n: prev.grid().n(), change: f64::NAN });
            }
            let fine = self.synthesize_at(n)?;
            let coarse_grid = prev.grid();
            let fine_grid = fine.grid();
            let mut change: f64 = 0.0;
            for idx in 0..coarse_grid.len() {
                let x = coarse_grid.point(idx);
                if excl > 0.0 && coarse_grid.distance(&x, &origin) < excl {
                    continue;
                }
                let k = coarse_grid.coords_of(idx);
                let mut k2 = [0usize; MAX_DIM];
                for a in 0..d {
                    k2[a] = 2 * k[a];
                }
                let dev = (fine.values()[fine_grid.index_of(&k2)] - prev.values()[idx]).abs();
                change = change.max(dev);
            }
            if change <= tol {
                return Ok(fine);
            }
            if n * 2 > max_n || TorusGrid::new(d, side, n * 2).is_err() {
                return Err(Error::SlowConvergence { n, change });
            }
            prev = fine;
        }
    }

    fn synthesize_at(&self, n: usize) -> Result<GridField> {
        let grid = TorusGrid::new(self.grid.d(), self.grid.side(), n)?;
        let mut coeffs = vec![Complex64::default(); grid.len()];
        for (idx, c) in coeffs.iter_mut().enumerate() {
            let v = self
                .ghat_of_norm2(grid.m_norm2(idx))
                .expect("analytic form required for refinement");
            *c = Complex64::new(v, 0.0);
        }
        SpectralField::new(grid, coeffs)?.field()
    }

    /// Fits one envelope of ln g^ against ln |m| over shells of equal |m|^2
    /// (Nyquist corners excluded); returns (exponent, max abs ln-residual).
    fn envelope_fit(&self, upper: bool) -> (f64, f64) {
        let g = &self.grid;
        let cap = (g.n() / 4) as i64;
        let mut shells: std::collections::BTreeMap<i64, f64> = std::collections::BTreeMap::new();
        for idx in 1..g.len() {
            let m = g.lattice_of(idx);
            if (0..g.d()).any(|a| m[a].abs() > cap) {
                continue;
            }
            let key = m[0] * m[0] + m[1] * m[1] + m[2] * m[2];
            let v = self.ghat[idx];
            let e = shells.entry(key).or_insert(v);
            *e = if upper { e.max(v) } else { e.min(v) };
        }
        let pts: Vec<(f64, f64)> = shells
            .iter()
            .map(|(&k, &v)| (0.5 * (k as f64).ln(), v.ln()))
            .collect();
        let n = pts.len() as f64;
        let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), p| (a + p.0, b + p.1));
        let (sxx, sxy) = pts.iter().fold((0.0, 0.0), |(a, b), p| (a + p.0 * p.0, b + p.0 * p.1));
        let denom = n * sxx - sx * sx;
        if denom.abs() < 1e-14 {
            return (f64::NAN, f64::NAN);
        }
        let slope = (n * sxy - sx * sy) / denom;
        let intercept = (sy - slope * sx) / n;
        let resid = pts
            .iter()
            .map(|p| (p.1 - intercept - slope * p.0).abs())
            .fold(0.0_f64, f64::max);
        (-slope, resid)
    }

    /// Decay-envelope estimates plus a sweep of smoothing-kernel minima.
    pub fn check_admissibility(&self, s_values: &[f64]) -> Result<AdmissibilityReport> {
        if s_values.is_empty() {
            return Err(Error::InvalidParameter("empty smoothing sweep".into()));
        }
        let mut heat_minima = Vec::with_capacity(s_values.len());
        let mut min_p = f64::INFINITY;
        for &s in s_values {
            let min = self.heat_kernel(s)?.min();
            min_p = min_p.min(min);
            heat_minima.push((s, min));
        }
        let (gamma_fit, gamma_residual) = self.envelope_fit(true);
        let (lambda_fit, lambda_residual) = self.envelope_fit(false);
        Ok(AdmissibilityReport {
            gamma_fit,
            gamma_residual,
            lambda_fit,
            lambda_residual,
            heat_minima,
            min_p,
            c_heat: (-min_p).max(0.0),
        })
    }
}

fn norm2_of(m: &[i64; MAX_DIM]) -> f64 {
    (m[0] * m[0] + m[1] * m[1] + m[2] * m[2]) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn b2(y: f64) -> f64 {
        y * y - y + 1.0 / 6.0
    }

    #[test]
    fn riesz_gamma2_matches_bernoulli_sum() {
        // sum_{m>=1} cos(2 pi m y)/m^2 = pi^2 B2(y), so g = 1 + 2 pi^2 B2(x/T)
        for side in [1.0, 2.0] {
            let grid = TorusGrid::new(1, side, 2048).unwrap();
            let k = Kernel::riesz(grid, 2.0, 1.0).unwrap();
            let g = k.evaluate_g_real(1e-5, 1 << 19).unwrap();
            for frac in [0.125, 0.25, 0.5, 0.75] {
                let x = frac * side;
                let idx = (frac * g.grid().n() as f64).round() as usize;
                let want = 1.0 + 2.0 * std::f64::consts::PI.powi(2) * b2(frac);
                assert!((g.values()[idx] - want).abs() < 3e-5, "x={x}: {} vs {want}", g.values()[idx]);
            }
        }
    }

    #[test]
    fn coulomb_matches_bernoulli_sum() {
        // g^(m) = (T/2 pi m)^2 gives g - g^(0) = (T^2/2) B2(x/T)
        let side = 2.0;
        let grid = TorusGrid::new(1, side, 2048).unwrap();
        let k = Kernel::coulomb(grid, 1.0).unwrap();
        let g = k.evaluate_g_real(1e-6, 1 << 19).unwrap();
        for frac in [0.25, 0.5] {
            let idx = (frac * g.grid().n() as f64).round() as usize;
            let want = 1.0 + side.powi(2) / 2.0 * b2(frac);
            assert!((g.values()[idx] - want).abs() < 1e-6);
        }
    }

    #[test]
    fn sub_dimensional_riesz_synthesis_does_not_converge() {
        let grid = TorusGrid::new(1, 1.0, 1024).unwrap();
        let k = Kernel::riesz(grid, 0.5, 1.0).unwrap();
        assert_eq!(k.singularity(), Singularity::PowerLaw { exponent: 0.5 });
        match k.evaluate_g_real(1e-6, 1 << 14) {
            Err(Error::SlowConvergence { .. }) => {}
            other => panic!("expected SlowConvergence, got {other:?}"),
        }
    }

    #[test]
    fn singularity_classification() {
        let grid = TorusGrid::new(1, 1.0, 64).unwrap();
        assert_eq!(
            Kernel::riesz(grid, 0.5, 1.0).unwrap().singularity(),
            Singularity::PowerLaw { exponent: 0.5 }
        );
        assert_eq!(Kernel::riesz(grid, 1.0, 1.0).unwrap().singularity(), Singularity::Logarithmic);
        assert_eq!(Kernel::riesz(grid, 2.0, 1.0).unwrap().singularity(), Singularity::Bounded);
        let grid2 = TorusGrid::new(2, 1.0, 64).unwrap();
        assert_eq!(Kernel::coulomb(grid2, 1.0).unwrap().singularity(), Singularity::Logarithmic);
    }

    #[test]
    fn heat_kernel_conserves_mass_and_stays_positive() {
        let grid = TorusGrid::new(1, 1.0, 512).unwrap();
        for k in [Kernel::coulomb(grid, 1.0).unwrap(), Kernel::riesz(grid, 1.5, 1.0).unwrap()] {
            for t in [1e-3, 1e-2, 0.1] {
                let p = k.heat_kernel(t).unwrap();
                assert_relative_eq!(p.quadrature(), 1.0, max_relative = 1e-12);
                assert!(p.min() > -1e-10, "t={t}: min {}", p.min());
                let c0 = p.spectrum().coeff_at(&[0, 0, 0]);
                assert!((c0.re - 1.0).abs() < 1e-13 && c0.im.abs() < 1e-13);
            }
        }
        assert!(Kernel::coulomb(grid, 1.0).unwrap().heat_kernel(0.0).is_err());
    }

    #[test]
    fn h_alpha_composes_and_kills_the_mean() {
        let grid = TorusGrid::new(1, 1.0, 64).unwrap();
        let k = Kernel::riesz(grid, 1.5, 1.0).unwrap();
        let f = GridField::from_fn(grid, |x| {
            2.0 + (TAU * x[0]).cos() + 0.4 * (2.0 * TAU * x[0]).sin()
        })
        .spectrum();
        let twice = k.apply_h_alpha(&k.apply_h_alpha(&f, 0.5), 0.5);
        let once = k.apply_h_alpha(&f, 1.0);
        for (a, b) in twice.coeffs().iter().zip(once.coeffs()) {
            assert!((a - b).norm() < 1e-14);
        }
        // h_{-1} h_1 restores everything but the mean
        let back = k.apply_h_alpha(&once, -1.0);
        assert_eq!(back.coeffs()[0], Complex64::default());
        for idx in 1..grid.len() {
            assert!((back.coeffs()[idx] - f.coeffs()[idx]).norm() < 1e-14);
        }
    }

    #[test]
    fn half_inverse_norm_of_cosine() {
        // f = cos(2 pi x), g^(1) = 1: ||h_{-1/2} f||_L2^2 = 1/2
        let grid = TorusGrid::new(1, 1.0, 128).unwrap();
        let k = Kernel::riesz(grid, 2.0, 1.0).unwrap();
        let f = GridField::from_fn(grid, |x| (TAU * x[0]).cos()).spectrum();
        let half = k.apply_h_alpha(&f, -0.5);
        assert_relative_eq!(half.l2_norm2(), 0.5, max_relative = 1e-12);
    }

    #[test]
    fn energy_of_uniform_density_is_zero_mode() {
        let grid = TorusGrid::new(2, 2.0, 32).unwrap();
        let k = Kernel::coulomb(grid, 0.7).unwrap();
        let u = GridField::constant(grid, 1.0 / grid.volume());
        assert_relative_eq!(k.energy_of_density(&u), 0.7, max_relative = 1e-12);
        // adding a cosine bump of moment amplitude eps adds g^(1) eps^2 / 2
        let eps = 0.01;
        let mu = GridField::from_fn(grid, |x| {
            (1.0 + eps * (TAU * x[0] / 2.0).cos()) / grid.volume()
        });
        let ghat1 = k.ghat_at(&[1, 0, 0]).unwrap();
        assert_relative_eq!(
            k.energy_of_density(&mu),
            0.7 + ghat1 * eps * eps / 2.0,
            max_relative = 1e-10
        );
    }

    #[test]
    fn gamma_estimate_recovers_exponents() {
        let grid = TorusGrid::new(1, 1.0, 256).unwrap();
        let k = Kernel::riesz(grid, 1.5, 1.0).unwrap();
        assert_relative_eq!(k.gamma_estimate(), 1.5, max_relative = 1e-9);
        let grid2 = TorusGrid::new(2, 3.0, 64).unwrap();
        let c = Kernel::coulomb(grid2, 1.0).unwrap();
        assert_relative_eq!(c.gamma_estimate(), 2.0, max_relative = 1e-9);
    }

    #[test]
    fn admissibility_sweep_reports_positive_kernels() {
        let grid = TorusGrid::new(1, 1.0, 256).unwrap();
        let k = Kernel::coulomb(grid, 1.0).unwrap();
        let rep = k.check_admissibility(&[1e-3, 1e-2, 0.1, 1.0]).unwrap();
        assert!(rep.c_heat < 1e-10);
        assert!(rep.min_p > -1e-10);
        assert_relative_eq!(rep.gamma_fit, 2.0, max_relative = 1e-9);
        assert_relative_eq!(rep.lambda_fit, 2.0, max_relative = 1e-9);
        assert!(rep.gamma_residual < 1e-9 && rep.lambda_residual < 1e-9);
        assert_eq!(rep.heat_minima.len(), 4);
    }

    #[test]
    fn bad_rules_are_rejected() {
        let grid = TorusGrid::new(1, 1.0, 32).unwrap();
        let err = Kernel::from_rule(grid, KernelForm::Tabulated, Singularity::Bounded, 1.0, |m| {
            if m[0] == 3 { -1.0 } else { 1.0 / (m[0] * m[0]) as f64 }
        })
        .unwrap_err();
        match err {
            Error::NonPositiveCoefficient { m, value } => {
                assert_eq!(m[0], 3);
                assert_eq!(value, -1.0);
            }
            other => panic!("unexpected {other:?}"),
        }
        // odd in m
        let err = Kernel::from_rule(grid, KernelForm::Tabulated, Singularity::Bounded, 1.0, |m| {
            (1.0 / (m[0] * m[0]) as f64) * if m[0] > 0 { 1.0 } else { 2.0 }
        })
        .unwrap_err();
        assert!(matches!(err, Error::InvalidParameter(_)));
        assert!(Kernel::riesz(grid, 2.0, -0.5).is_err());
    }

    #[test]
    fn table_round_trip() {
        let grid = TorusGrid::new(1, 1.0, 32).unwrap();
        let k = Kernel::riesz(grid, 2.0, 0.3).unwrap();
        let entries: Vec<_> = (0..grid.len())
            .map(|idx| (grid.lattice_of(idx), k.ghat()[idx]))
            .collect();
        let back = Kernel::from_table(grid, &entries).unwrap();
        assert_eq!(back.ghat(), k.ghat());
        assert_eq!(back.form(), KernelForm::Tabulated);
        assert_eq!(back.singularity(), Singularity::Bounded);
        // drop one row
        let err = Kernel::from_table(grid, &entries[1..]).unwrap_err();
        assert!(matches!(err, Error::InvalidParameter(_)));
    }
}
