//! External potentials V acting on single particles.

use crate::error::{Error, Result};
use crate::grid::{GridField, TorusGrid, MAX_DIM};
use std::f64::consts::TAU;

#[derive(Clone, Debug)]
pub enum Potential {
    Zero,
    /// amplitude * cos(2 pi mode x_0 / T), varying along the first axis only.
    Cosine { amplitude: f64, mode: i64 },
    /// -depth * periodized Gaussian of the given width around `center`.
    GaussianWell { depth: f64, width: f64, center: [f64; MAX_DIM] },
    Tabulated(GridField),
}

impl Potential {
    pub fn field(&self, grid: TorusGrid) -> Result<GridField> {
        match self {
            Potential::Zero => Ok(GridField::zeros(grid)),
            Potential::Cosine { amplitude, mode } => {
                if !amplitude.is_finite() {
                    return Err(Error::InvalidParameter(format!("amplitude {amplitude}")));
                }
                if *mode == 0 || mode.unsigned_abs() as usize >= grid.n() / 2 {
                    return Err(Error::InvalidParameter(format!(
                        "cosine mode {mode} outside the resolvable band"
                    )));
                }
                let (a, k) = (*amplitude, *mode as f64);
                Ok(GridField::from_fn(grid, |x| a * (TAU * k * x[0] / grid.side()).cos()))
            }
            Potential::GaussianWell { depth, width, center } => {
                if !(width.is_finite() && *width > 0.0) || !depth.is_finite() {
                    return Err(Error::InvalidParameter(format!(
                        "gaussian well depth {depth}, width {width}"
                    )));
                }
                // images out to where exp(-(kT)^2/2w^2) underflows the sum
                let reach = (8.0 * width / grid.side()).ceil() as i64 + 1;
                let (depth, width) = (*depth, *width);
                let center = *center;
                let d = grid.d();
                let side = grid.side();
                Ok(GridField::from_fn(grid, move |x| {
                    let mut axis = [0.0; MAX_DIM];
                    for a in 0..d {
                        let mut s = 0.0;
                        for k in -reach..=reach {
                            let dz = x[a] - center[a] + k as f64 * side;
                            s += (-dz * dz / (2.0 * width * width)).exp();
                        }
                        axis[a] = s;
                    }
                    -depth * axis[..d].iter().product::<f64>()
                }))
            }
            Potential::Tabulated(f) => {
                if f.grid() != grid {
                    return Err(Error::InvalidParameter(
                        "tabulated potential on a different grid".into(),
                    ));
                }
                Ok(f.clone())
            }
        }
    }
}
