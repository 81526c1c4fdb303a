use thiserror::Error;

#[derive(Error, Debug)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("spectrum violates conjugate symmetry (max deviation {max_dev:.3e}); not a real field")]
    NonRealSpectrum { max_dev: f64 },

    #[error("seminorm order must be nonnegative, got {0}")]
    NegativeOrder(f64),

    #[error("density is not a probability density: {0}")]
    InvalidDensity(String),

    #[error("kernel coefficient at m={m:?} is {value:.3e}; all coefficients must be positive")]
    NonPositiveCoefficient { m: [i64; 3], value: f64 },

    #[error("real-space synthesis did not converge: off-singularity change {change:.3e} after doubling to n={n}")]
    SlowConvergence { n: usize, change: f64 },

    #[error("fixed point did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("field diverged during iteration (non-finite values)")]
    DivergedField,

    #[error("points {i} and {j} are within {dist:.3e} of each other, below the {limit:.3e} guard")]
    CoincidentPoints { i: usize, j: usize, dist: f64, limit: f64 },

    #[error("placement failed in cube {cube} after {retries} retries ({placed}/{needed} placed); lower the separation fraction")]
    PlacementFailure { cube: usize, placed: usize, needed: usize, retries: usize },

    #[error("energy became non-finite during sampling")]
    NonFiniteEnergy,

    #[error("incremental energy drifted {drift:.3e} from a full recomputation")]
    EnergyDrift { drift: f64 },

    #[error("quadrature budget exceeded: {points:.3e} nodes requested, cap is {cap:.3e}")]
    BudgetExceeded { points: f64, cap: f64 },

    #[error("tilt exponent would reach {exponent:.1} at r={r}; largest safe r is {max_safe:.4}")]
    OverflowGuard { r: f64, exponent: f64, max_safe: f64 },

    #[error("chain fails the stationarity gate: autocorrelation time {tau:.1} steps exceeds {limit:.1}")]
    StationarityGateFailed { tau: f64, limit: f64 },

    #[error("exponent denominator lambda/alpha - lambda*d/(alpha*gamma) - 1 vanishes; no finite second branch")]
    DegenerateExponent,

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
