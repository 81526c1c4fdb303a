//! d-dimensional FFT plumbing on top of rustfft, axis by axis.
//!
//! Layout is row-major with axis 0 slowest. Forward transforms carry the
//! 1/n^d normalization so coefficients are Fourier series coefficients;
//! inverse transforms are plain synthesis sums.

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};
use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

thread_local! {
    static PLANS: RefCell<HashMap<(usize, bool), Arc<dyn Fft<f64>>>> = RefCell::new(HashMap::new());
}

fn plan(n: usize, forward: bool) -> Arc<dyn Fft<f64>> {
    PLANS.with(|cache| {
        cache
            .borrow_mut()
            .entry((n, forward))
            .or_insert_with(|| {
                let dir = if forward { FftDirection::Forward } else { FftDirection::Inverse };
                FftPlanner::new().plan_fft(n, dir)
            })
            .clone()
    })
}

/// In-place transform along every axis of a d-dimensional row-major buffer.
fn transform(data: &mut [Complex64], n: usize, d: usize, forward: bool) {
    debug_assert_eq!(data.len(), n.pow(d as u32));
    let fft = plan(n, forward);
    let mut line = vec![Complex64::default(); n];
    for axis in 0..d {
        // stride between consecutive entries of a line along `axis`
        let stride = n.pow((d - 1 - axis) as u32);
        // lines are indexed by all coordinate combinations with coord[axis] = 0
        let outer = n.pow(axis as u32);
        for o in 0..outer {
            for i in 0..stride {
                let base = o * stride * n + i;
                for (k, slot) in line.iter_mut().enumerate() {
                    *slot = data[base + k * stride];
                }
                fft.process(&mut line);
                for (k, val) in line.iter().enumerate() {
                    data[base + k * stride] = *val;
                }
            }
        }
    }
}

/// Series coefficients of a real field: (1/n^d) sum_x f(x) e^{-2pi i m.k/n}.
pub fn forward(values: &[f64], n: usize, d: usize) -> Vec<Complex64> {
    let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    transform(&mut data, n, d, true);
    let scale = 1.0 / values.len() as f64;
    for c in &mut data {
        *c *= scale;
    }
    data
}

/// Synthesis sum_m c(m) e^{+2pi i m.k/n}; no scaling.
pub fn inverse(coeffs: &[Complex64], n: usize, d: usize) -> Vec<Complex64> {
    let mut data = coeffs.to_vec();
    transform(&mut data, n, d, false);
    data
}
