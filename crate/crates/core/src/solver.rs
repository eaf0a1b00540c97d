//! Synchronous best-response iteration.
//!
//! Each round every user best-responds to the interference induced by the
//! previous round's profile. With `α < 1` the round map is a contraction
//! with constant `α`: in the weighted norm `(1/N) Σ |Δa_i|·θ_i` for CDMA and
//! in the sup norm for NOMA, so the residual history decays at least
//! geometrically and the fixed point does not depend on the starting profile.

use rayon::prelude::*;
use serde::Serialize;

use crate::channel::Population;
use crate::error::{Error, Result};
use crate::game::{self, InterferenceProfile, Protocol, ProtocolParams, StrategyProfile};

/// Populations at least this large update in parallel.
const PARALLEL_MIN_USERS: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
pub enum InitialProfile {
    Constant(f64),
    MidpointOfE,
    Provided(StrategyProfile),
}

/// Residual norm for the stopping rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Norm {
    /// `(1/N) Σ |Δa_i|·θ_i`.
    WeightedL1,
    /// `max_i |Δa_i|`.
    Sup,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NormChoice {
    WeightedL1,
    SupNorm,
    /// Weighted L1 for CDMA, sup norm for NOMA.
    Auto,
}

impl NormChoice {
    pub fn resolve(self, protocol: Protocol) -> Norm {
        match (self, protocol) {
            (NormChoice::WeightedL1, _) | (NormChoice::Auto, Protocol::Cdma) => Norm::WeightedL1,
            (NormChoice::SupNorm, _) | (NormChoice::Auto, Protocol::Noma) => Norm::Sup,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub initial: InitialProfile,
    pub norm: NormChoice,
    /// Run even when `α >= 1`, where convergence is not guaranteed.
    pub allow_noncontractive: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 10_000,
            initial: InitialProfile::MidpointOfE,
            norm: NormChoice::Auto,
            allow_noncontractive: false,
        }
    }
}

impl SolverConfig {
    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_initial(mut self, initial: InitialProfile) -> Self {
        self.initial = initial;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(Error::InvalidConfig(format!("tol must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidConfig("max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumResult {
    pub profile: StrategyProfile,
    /// Interference induced by `profile`.
    pub interference: InterferenceProfile,
    /// `residuals[k]` is the norm of `p_{k+1} − p_k`.
    pub residuals: Vec<f64>,
    pub iterations: usize,
    pub protocol: Protocol,
    pub norm: Norm,
    pub converged: bool,
}

impl EquilibriumResult {
    pub fn final_residual(&self) -> Option<f64> {
        self.residuals.last().copied()
    }

    /// Consecutive residual ratios `r[k+1] / r[k]`.
    pub fn contraction_ratios(&self) -> Vec<f64> {
        self.residuals.windows(2).map(|w| w[1] / w[0]).collect()
    }
}

/// Residual norm of a profile difference.
pub fn residual_norm(delta: &[f64], pop: &Population, norm: Norm) -> Result<f64> {
    if delta.len() != pop.len() {
        return Err(Error::LengthMismatch {
            expected: pop.len(),
            actual: delta.len(),
        });
    }
    Ok(match norm {
        Norm::WeightedL1 => delta.iter().zip(pop.thetas()).map(|(d, t)| d.abs() * t).sum::<f64>() / pop.len() as f64,
        Norm::Sup => delta.iter().fold(0.0, |m, d| m.max(d.abs())),
    })
}

fn norm_of_step(prev: &[f64], next: &[f64], thetas: &[f64], norm: Norm) -> f64 {
    let terms = prev.iter().zip(next).zip(thetas);
    match norm {
        Norm::WeightedL1 => terms.map(|((a, b), t)| (b - a).abs() * t).sum::<f64>() / thetas.len() as f64,
        Norm::Sup => terms.fold(0.0, |m, ((a, b), _)| m.max((b - a).abs())),
    }
}

fn fill_interference(protocol: Protocol, powers: &[f64], thetas: &[f64], z: &mut [f64]) {
    match protocol {
        Protocol::Cdma => z.fill(game::cdma_aggregate(powers, thetas)),
        Protocol::Noma => game::noma_prefix(powers, thetas, z),
    }
}

fn respond(thetas: &[f64], z: &[f64], params: &ProtocolParams, out: &mut [f64]) {
    let update = |(i, a): (usize, &mut f64)| *a = game::best_response(thetas[i], z[i], params, i);
    if out.len() >= PARALLEL_MIN_USERS {
        out.par_iter_mut().enumerate().for_each(update);
    } else {
        out.iter_mut().enumerate().for_each(update);
    }
}

/// Best-response iteration from `cfg.initial` until the step residual drops
/// to `cfg.tol` or `cfg.max_iter` rounds have run.
///
/// Hitting the cap yields [`Error::NonConvergence`] carrying the partial
/// result.
pub fn solve(
    pop: &Population,
    params: &ProtocolParams,
    protocol: Protocol,
    cfg: &SolverConfig,
) -> Result<EquilibriumResult> {
    params.validate_for(pop.len())?;
    cfg.validate()?;
    if params.alpha >= 1.0 && !cfg.allow_noncontractive {
        return Err(Error::InvalidAlpha(params.alpha));
    }
    if !pop.is_sorted() {
        return Err(Error::UnsortedPopulation);
    }

    let n = pop.len();
    let thetas = pop.thetas();
    let mut current = match &cfg.initial {
        InitialProfile::Constant(c) => StrategyProfile::constant(*c, n, params)?.into_inner(),
        InitialProfile::MidpointOfE => vec![0.5 * (params.e_min + params.e_max); n],
        InitialProfile::Provided(p) => {
            if p.len() != n {
                return Err(Error::LengthMismatch {
                    expected: n,
                    actual: p.len(),
                });
            }
            StrategyProfile::new(p.powers().to_vec(), params)?.into_inner()
        }
    };
    let norm = cfg.norm.resolve(protocol);
    let mut next = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut residuals = Vec::new();
    let mut converged = false;

    while residuals.len() < cfg.max_iter {
        fill_interference(protocol, &current, thetas, &mut z);
        respond(thetas, &z, params, &mut next);
        let r = norm_of_step(&current, &next, thetas, norm);
        residuals.push(r);
        std::mem::swap(&mut current, &mut next);
        if r <= cfg.tol {
            converged = true;
            break;
        }
    }

    let profile = StrategyProfile::from_feasible(current);
    let interference = game::interference(protocol, &profile, pop)?;
    let result = EquilibriumResult {
        profile,
        interference,
        iterations: residuals.len(),
        residuals,
        protocol,
        norm,
        converged,
    };
    if converged {
        Ok(result)
    } else {
        Err(Error::NonConvergence(Box::new(result)))
    }
}

/// `max_i |p(θ_i) − BR(θ_i, z(θ_i))|` with `z` recomputed from the profile.
pub fn verify_fixed_point(result: &EquilibriumResult, pop: &Population, params: &ProtocolParams) -> Result<f64> {
    let z = game::interference(result.protocol, &result.profile, pop)?;
    Ok(result
        .profile
        .powers()
        .iter()
        .enumerate()
        .map(|(i, &a)| (a - game::best_response(pop.thetas()[i], z.at(i), params, i)).abs())
        .fold(0.0, f64::max))
}
