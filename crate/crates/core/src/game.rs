//! Utility, interference maps and best responses for the uplink power game.
//!
//! A user with identifier `θ` transmitting at power `a` against aggregate
//! interference `z` earns
//!
//! ```text
//! u = log₂(1 + θ·a / (α·z + N₀)) − β·a
//! ```
//!
//! Under CDMA every user faces the same `z = (1/N) Σ_j a_j θ_j`. Under NOMA
//! with SIC, signals of stronger users are cancelled before a user is
//! decoded, so only strictly weaker users remain:
//! `z_i = (1/N) Σ_{θ_j < θ_i} a_j θ_j`.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::channel::Population;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    /// Spread spectrum with single-user decoding: uniform interference.
    Cdma,
    /// Power-domain NOMA with SIC in descending gain order.
    Noma,
}

impl Protocol {
    pub const ALL: [Protocol; 2] = [Protocol::Cdma, Protocol::Noma];

    pub fn as_str(self) -> &'static str {
        match self {
            Protocol::Cdma => "cdma",
            Protocol::Noma => "noma",
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Protocol {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "cdma" => Ok(Protocol::Cdma),
            "noma" => Ok(Protocol::Noma),
            other => Err(format!("unknown protocol {other:?} (expected cdma or noma)")),
        }
    }
}

/// Power penalty: one value for everyone, or one per user (population order).
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Beta {
    Scalar(f64),
    PerUser(Vec<f64>),
}

impl Beta {
    pub fn at(&self, user_index: usize) -> f64 {
        match self {
            Beta::Scalar(b) => *b,
            Beta::PerUser(v) => v[user_index],
        }
    }

    pub fn scalar(&self) -> Option<f64> {
        match self {
            Beta::Scalar(b) => Some(*b),
            Beta::PerUser(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProtocolParams {
    /// Effective squared cross-correlation of signatures, `N / n_s`.
    pub alpha: f64,
    /// Noise power.
    pub n0: f64,
    pub beta: Beta,
    pub e_min: f64,
    pub e_max: f64,
}

impl ProtocolParams {
    pub fn new(alpha: f64, n0: f64, beta: Beta, e_min: f64, e_max: f64) -> Result<Self> {
        let params = Self {
            alpha,
            n0,
            beta,
            e_min,
            e_max,
        };
        params.validate()?;
        Ok(params)
    }

    /// `α = 0.25`, `N₀ = 5`, `E = [0, 150]` with a scalar penalty.
    pub fn reference(beta: f64) -> Self {
        Self {
            alpha: 0.25,
            n0: 5.0,
            beta: Beta::Scalar(beta),
            e_min: 0.0,
            e_max: 150.0,
        }
    }

    pub fn with_beta(&self, beta: Beta) -> Self {
        Self { beta, ..self.clone() }
    }

    /// Structural checks. `alpha >= 1` passes here and is rejected by the
    /// solver unless explicitly overridden.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParams(msg));
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return bad(format!("alpha must be positive, got {}", self.alpha));
        }
        if !(self.n0.is_finite() && self.n0 > 0.0) {
            return bad(format!("n0 must be positive, got {}", self.n0));
        }
        if !(self.e_min.is_finite() && self.e_max.is_finite() && 0.0 <= self.e_min && self.e_min < self.e_max) {
            return bad(format!(
                "power bounds must satisfy 0 <= e_min < e_max < inf, got [{}, {}]",
                self.e_min, self.e_max
            ));
        }
        let betas: &[f64] = match &self.beta {
            Beta::Scalar(b) => std::slice::from_ref(b),
            Beta::PerUser(v) if v.is_empty() => return bad("per-user beta is empty".into()),
            Beta::PerUser(v) => v,
        };
        if let Some(b) = betas.iter().find(|b| !(b.is_finite() && **b > 0.0)) {
            return bad(format!("beta entries must be positive, got {b}"));
        }
        Ok(())
    }

    /// Checks the parameters against a population of `n` users.
    pub fn validate_for(&self, n: usize) -> Result<()> {
        self.validate()?;
        if let Beta::PerUser(v) = &self.beta {
            if v.len() != n {
                return Err(Error::LengthMismatch {
                    expected: n,
                    actual: v.len(),
                });
            }
        }
        Ok(())
    }

    #[inline]
    fn effective_noise(&self, z: f64) -> f64 {
        self.alpha * z + self.n0
    }
}

/// Per-user transmit powers aligned with a [`Population`].
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyProfile(Vec<f64>);

impl StrategyProfile {
    pub fn new(powers: Vec<f64>, params: &ProtocolParams) -> Result<Self> {
        if let Some(&p) = powers
            .iter()
            .find(|p| !(p.is_finite() && params.e_min <= **p && **p <= params.e_max))
        {
            return Err(Error::PowerOutOfRange {
                power: p,
                e_min: params.e_min,
                e_max: params.e_max,
            });
        }
        Ok(Self(powers))
    }

    pub fn constant(power: f64, n: usize, params: &ProtocolParams) -> Result<Self> {
        Self::new(vec![power; n], params)
    }

    /// Caller guarantees every entry lies in the feasible power set.
    pub(crate) fn from_feasible(powers: Vec<f64>) -> Self {
        Self(powers)
    }

    pub fn powers(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

/// Per-user interference `z(θ_i)` with the protocol that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct InterferenceProfile {
    values: Vec<f64>,
    protocol: Protocol,
}

impl InterferenceProfile {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn at(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub fn protocol(&self) -> Protocol {
        self.protocol
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Orthogonal projection onto `[e_min, e_max]`.
#[inline]
pub fn project_power(x: f64, params: &ProtocolParams) -> f64 {
    x.max(params.e_min).min(params.e_max)
}

fn check_len(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::LengthMismatch { expected, actual });
    }
    Ok(())
}

/// `(1/N) Σ_j a_j θ_j`, self included.
pub fn interference_cdma(profile: &StrategyProfile, pop: &Population) -> Result<f64> {
    check_len(pop.len(), profile.len())?;
    Ok(cdma_aggregate(profile.powers(), pop.thetas()))
}

/// `z_i = (1/N) Σ_{θ_j < θ_i} a_j θ_j` by prefix sums over the sorted
/// population. Tied identifiers do not interfere with each other.
pub fn interference_noma(profile: &StrategyProfile, pop: &Population) -> Result<InterferenceProfile> {
    check_len(pop.len(), profile.len())?;
    if !pop.is_sorted() {
        return Err(Error::UnsortedPopulation);
    }
    let mut values = vec![0.0; pop.len()];
    noma_prefix(profile.powers(), pop.thetas(), &mut values);
    Ok(InterferenceProfile {
        values,
        protocol: Protocol::Noma,
    })
}

pub fn interference(protocol: Protocol, profile: &StrategyProfile, pop: &Population) -> Result<InterferenceProfile> {
    match protocol {
        Protocol::Cdma => {
            let z = interference_cdma(profile, pop)?;
            Ok(InterferenceProfile {
                values: vec![z; pop.len()],
                protocol,
            })
        }
        Protocol::Noma => interference_noma(profile, pop),
    }
}

pub(crate) fn cdma_aggregate(powers: &[f64], thetas: &[f64]) -> f64 {
    let n = thetas.len() as f64;
    powers.iter().zip(thetas).map(|(a, t)| a * t).sum::<f64>() / n
}

/// Fills `out` with the NOMA interference of a sorted population.
pub(crate) fn noma_prefix(powers: &[f64], thetas: &[f64], out: &mut [f64]) {
    let n = thetas.len() as f64;
    let mut below = 0.0;
    let mut i = 0;
    while i < thetas.len() {
        let mut j = i;
        let mut run = 0.0;
        while j < thetas.len() && thetas[j] == thetas[i] {
            out[j] = below / n;
            run += powers[j] * thetas[j];
            j += 1;
        }
        below += run;
        i = j;
    }
}

/// `log₂(1 + θ·a/(α·z + N₀))`.
#[inline]
pub fn data_rate(a: f64, theta: f64, z: f64, params: &ProtocolParams) -> f64 {
    (theta * a / params.effective_noise(z)).ln_1p() / std::f64::consts::LN_2
}

/// Rate minus the power cost `β_i·a`.
#[inline]
pub fn utility(a: f64, theta: f64, z: f64, params: &ProtocolParams, user_index: usize) -> f64 {
    data_rate(a, theta, z, params) - params.beta.at(user_index) * a
}

/// Unique maximiser of [`utility`] over `[e_min, e_max]`:
/// `P_E(1/(β ln 2) − (α·z + N₀)/θ)`.
#[inline]
pub fn best_response(theta: f64, z: f64, params: &ProtocolParams, user_index: usize) -> f64 {
    let beta = params.beta.at(user_index);
    project_power(
        1.0 / (beta * std::f64::consts::LN_2) - params.effective_noise(z) / theta,
        params,
    )
}
