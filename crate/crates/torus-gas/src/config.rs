//! Run configuration: one TOML file describing the grid, kernel, potential,
//! Gibbs parameters, solver tolerances, sweep grids, and output location.
//! Unknown keys are rejected with the dotted path to the offending key;
//! every section has defaults, so the empty file is a valid configuration.

use crate::acceptance::logspace;
use crate::equilibrium::SolverOptions;
use crate::error::{Error, Result};
use crate::grid::{TorusGrid, MAX_DIM};
use crate::io;
use crate::kernel::Kernel;
use crate::potential::Potential;
use crate::sampler::ChainOptions;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub grid: GridSection,
    pub kernel: KernelSection,
    pub potential: PotentialSection,
    pub gibbs: GibbsSection,
    pub solver: SolverSection,
    pub sweeps: SweepSection,
    pub chain: ChainSection,
    /// Master seed; commands derive per-trial streams from it.
    pub seed: u64,
    pub output: OutputSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub d: usize,
    pub side: f64,
    pub n: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        Self { d: 1, side: 1.0, n: 512 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KernelSection {
    /// "riesz", "coulomb", or "table".
    pub name: String,
    pub gamma: f64,
    pub zero_mode: f64,
    /// Coefficient table path, required iff name = "table".
    pub table: Option<PathBuf>,
}

impl Default for KernelSection {
    fn default() -> Self {
        Self { name: "riesz".into(), gamma: 2.0, zero_mode: 1.0, table: None }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PotentialSection {
    /// "zero", "cosine", "gaussian-well", or "table".
    pub preset: String,
    pub amplitude: f64,
    pub mode: i64,
    pub depth: f64,
    pub width: f64,
    pub center: Vec<f64>,
    /// Field CSV path, required iff preset = "table".
    pub table: Option<PathBuf>,
}

impl Default for PotentialSection {
    fn default() -> Self {
        Self {
            preset: "zero".into(),
            amplitude: 1.0,
            mode: 1,
            depth: 1.0,
            width: 0.1,
            center: vec![0.5],
            table: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GibbsSection {
    pub n_points: usize,
    /// At most one of beta/theta; neither means beta = 1/sqrt(N).
    pub beta: Option<f64>,
    pub theta: Option<f64>,
}

impl Default for GibbsSection {
    fn default() -> Self {
        Self { n_points: 32, beta: None, theta: None }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub damping: f64,
    pub max_iter: usize,
    pub tol: f64,
    pub theta_max: f64,
    pub support_threshold: f64,
}

impl Default for SolverSection {
    fn default() -> Self {
        let o = SolverOptions::default();
        Self {
            damping: o.damping,
            max_iter: o.max_iter,
            tol: o.tol,
            theta_max: o.theta_max,
            support_threshold: o.support_threshold,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub t_grid: Vec<f64>,
    pub r_grid: Vec<f64>,
    pub s_grid: Vec<f64>,
    pub n_ladder: Vec<usize>,
    /// Test-function regularity for error bounds.
    pub alpha: f64,
    /// Trial count for identity checks.
    pub trials: usize,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            t_grid: logspace(1e-4, 1e-1, 10),
            r_grid: (0..=12).map(|k| 0.01 * k as f64).collect(),
            s_grid: logspace(1e-3, 1.0, 7),
            n_ladder: vec![16, 32, 64, 128, 256],
            alpha: 2.0,
            trials: 100,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChainSection {
    pub steps: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub proposal_scale: Option<f64>,
    pub recompute_every: usize,
    pub drift_tol: f64,
}

impl Default for ChainSection {
    fn default() -> Self {
        let o = ChainOptions::default();
        Self {
            steps: o.steps,
            burn_in: o.burn_in,
            thin: o.thin,
            proposal_scale: o.proposal_scale,
            recompute_every: o.recompute_every,
            drift_tol: o.drift_tol,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: PathBuf::from("out") }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config { path: path.display().to_string(), message: e.to_string() })?;
        Self::parse_str(&text)
    }

    /// Rejects unknown keys with the dotted path to the key.
    pub fn parse_str(text: &str) -> Result<Self> {
        let de = toml::Deserializer::new(text);
        serde_path_to_error::deserialize(de).map_err(|e| Error::Config {
            path: e.path().to_string(),
            message: e.inner().message().to_string(),
        })
    }

    /// Resolved-config echo; parsing it back reproduces this configuration.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self)
            .map_err(|e| Error::Config { path: "<config>".into(), message: e.to_string() })
    }

    pub fn grid(&self) -> Result<TorusGrid> {
        TorusGrid::new(self.grid.d, self.grid.side, self.grid.n)
    }

    pub fn kernel(&self, grid: TorusGrid) -> Result<Kernel> {
        match self.kernel.name.as_str() {
            "riesz" => Kernel::riesz(grid, self.kernel.gamma, self.kernel.zero_mode),
            "coulomb" => Kernel::coulomb(grid, self.kernel.zero_mode),
            "table" => {
                let path = self.kernel.table.as_ref().ok_or_else(|| Error::Config {
                    path: "kernel.table".into(),
                    message: "kernel name `table` needs a table path".into(),
                })?;
                io::read_kernel_table(path, grid)
            }
            other => Err(Error::Config {
                path: "kernel.name".into(),
                message: format!("unknown kernel `{other}`, expected riesz, coulomb, or table"),
            }),
        }
    }

    pub fn potential(&self, grid: TorusGrid) -> Result<Potential> {
        match self.potential.preset.as_str() {
            "zero" => Ok(Potential::Zero),
            "cosine" => Ok(Potential::Cosine {
                amplitude: self.potential.amplitude,
                mode: self.potential.mode,
            }),
            "gaussian-well" => {
                let mut center = [0.0; MAX_DIM];
                if self.potential.center.len() != grid.d() {
                    return Err(Error::Config {
                        path: "potential.center".into(),
                        message: format!(
                            "{} coordinates for a d = {} grid",
                            self.potential.center.len(),
                            grid.d()
                        ),
                    });
                }
                center[..grid.d()].copy_from_slice(&self.potential.center);
                Ok(Potential::GaussianWell {
                    depth: self.potential.depth,
                    width: self.potential.width,
                    center,
                })
            }
            "table" => {
                let path = self.potential.table.as_ref().ok_or_else(|| Error::Config {
                    path: "potential.table".into(),
                    message: "potential preset `table` needs a field path".into(),
                })?;
                let field = io::read_field_csv(path)?;
                if field.grid() != grid {
                    return Err(Error::Config {
                        path: "potential.table".into(),
                        message: "tabulated potential grid differs from [grid]".into(),
                    });
                }
                Ok(Potential::Tabulated(field))
            }
            other => Err(Error::Config {
                path: "potential.preset".into(),
                message: format!(
                    "unknown potential `{other}`, expected zero, cosine, gaussian-well, or table"
                ),
            }),
        }
    }

    pub fn beta(&self) -> Result<f64> {
        match (self.gibbs.beta, self.gibbs.theta) {
            (Some(_), Some(_)) => Err(Error::Config {
                path: "gibbs".into(),
                message: "give beta or theta, not both".into(),
            }),
            (Some(b), None) => Ok(b),
            (None, Some(t)) => Ok(t / self.gibbs.n_points as f64),
            (None, None) => Ok(1.0 / (self.gibbs.n_points as f64).sqrt()),
        }
    }

    pub fn theta(&self) -> Result<f64> {
        Ok(self.beta()? * self.gibbs.n_points as f64)
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            damping: self.solver.damping,
            max_iter: self.solver.max_iter,
            tol: self.solver.tol,
            theta_max: self.solver.theta_max,
            support_threshold: self.solver.support_threshold,
        }
    }

    pub fn chain_options(&self, seed: u64) -> ChainOptions {
        ChainOptions {
            steps: self.chain.steps,
            burn_in: self.chain.burn_in,
            thin: self.chain.thin,
            proposal_scale: self.chain.proposal_scale,
            seed,
            recompute_every: self.chain.recompute_every,
            drift_tol: self.chain.drift_tol,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_all_defaults() {
        let cfg = ExperimentConfig::parse_str("").unwrap();
        assert_eq!(cfg.grid.n, 512);
        assert_eq!(cfg.kernel.name, "riesz");
        assert_eq!(cfg.sweeps.n_ladder, vec![16, 32, 64, 128, 256]);
        let beta = cfg.beta().unwrap();
        assert!((beta - 1.0 / 32f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn unknown_key_names_its_path() {
        let err = ExperimentConfig::parse_str("[kernel]\ngama = 2.0\n").unwrap_err();
        match err {
            Error::Config { path, message } => {
                assert_eq!(path, "kernel.gama");
                assert!(message.contains("unknown field"), "{message}");
            }
            other => panic!("wrong error {other:?}"),
        }
    }

    #[test]
    fn echo_round_trips() {
        let mut cfg = ExperimentConfig::parse_str("[gibbs]\ntheta = 4.0\n").unwrap();
        cfg.sweeps.alpha = 1.25;
        let echo = cfg.to_toml().unwrap();
        let back = ExperimentConfig::parse_str(&echo).unwrap();
        assert_eq!(back.gibbs.theta, Some(4.0));
        assert_eq!(back.sweeps.alpha, 1.25);
        assert_eq!(back.beta().unwrap(), cfg.beta().unwrap());
    }

    #[test]
    fn beta_theta_conflict_is_rejected() {
        let cfg = ExperimentConfig::parse_str("[gibbs]\nbeta = 0.1\ntheta = 4.0\n").unwrap();
        assert!(cfg.beta().is_err());
    }
}
