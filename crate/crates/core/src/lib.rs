//! Mean-field transmission power control for dense uplink networks.
//!
//! Users are identified by their squared channel gain `θ = |h|²` and pick a
//! transmit power that trades Shannon rate against a linear power cost. The
//! interference each user sees is an aggregate of the rest of the population:
//! uniform under CDMA with single-user decoding, and order-dependent under
//! power-domain NOMA with successive interference cancellation, where only
//! weaker users remain as interference.
//!
//! The crate is organised bottom-up:
//!
//! * [`channel`] samples user populations from channel-gain distributions.
//! * [`game`] holds the utility, interference maps and best responses.
//! * [`solver`] runs the synchronous best-response iteration to a fixed point.
//! * [`oracle`] provides independent ground truth (closed form, brute force).
//! * [`welfare`] compares equilibria: social welfare, fairness, crossings.
//! * [`decoding`] Monte-Carlo decoding with outage and SIC variants.

pub mod channel;
pub mod decoding;
pub mod error;
pub mod game;
pub mod oracle;
pub mod rng;
pub mod solver;
pub mod welfare;

pub use channel::{ChannelDistribution, Population, TabulatedDensity};
pub use decoding::{DecodingScenario, PowerRule, SicVariant};
pub use error::{Error, Result};
pub use game::{Beta, InterferenceProfile, Protocol, ProtocolParams, StrategyProfile};
pub use solver::{EquilibriumResult, InitialProfile, NormChoice, SolverConfig};
pub use welfare::WelfareReport;
