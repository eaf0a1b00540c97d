use thiserror::Error;

use crate::solver::EquilibriumResult;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid channel distribution: {0}")]
    InvalidDistribution(String),

    #[error("population must contain at least one user")]
    EmptyPopulation,

    #[error("invalid channel identifier {0}: identifiers must be finite and strictly positive")]
    InvalidIdentifier(f64),

    #[error("population identifiers are not sorted ascending")]
    UnsortedPopulation,

    #[error("invalid protocol parameters: {0}")]
    InvalidParams(String),

    #[error("alpha = {0} is not below 1; the best-response map is not guaranteed to contract")]
    InvalidAlpha(f64),

    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("power {power} outside [{e_min}, {e_max}]")]
    PowerOutOfRange { power: f64, e_min: f64, e_max: f64 },

    #[error("best-response iteration did not converge after {} iterations", .0.iterations)]
    NonConvergence(Box<EquilibriumResult>),

    #[error("closed form invalid: user {index} (theta = {theta}) would be clamped to {power}")]
    TruncationBinds { index: usize, theta: f64, power: f64 },

    #[error("closed form requires a scalar power penalty")]
    NonScalarBeta,

    #[error("no profile on the {grid_points}-point grid is a gridded equilibrium")]
    NoGridEquilibrium { grid_points: usize },

    #[error("all data rates are zero; fairness index is undefined")]
    ZeroRates,

    #[error("invalid data rates: {0}")]
    InvalidRates(String),

    #[error("failed to parse tabulated density, line {line}: {reason}")]
    TableParse { line: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
