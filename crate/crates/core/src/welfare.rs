//! Comparison metrics between the CDMA and NOMA equilibria.

use serde::Serialize;

use crate::channel::Population;
use crate::error::{Error, Result};
use crate::game::{self, Protocol, ProtocolParams, StrategyProfile};
use crate::solver::{self, EquilibriumResult, SolverConfig};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WelfareReport {
    pub welfare_cdma: f64,
    pub welfare_noma: f64,
    pub jain_cdma: f64,
    pub jain_noma: f64,
    /// Bracketing identifiers `[θ_lo, θ_hi]` of each power-curve crossing.
    pub crossing_thetas: Vec<[f64; 2]>,
    /// Bracketing identifiers of each data-rate-curve crossing.
    pub rate_crossing_thetas: Vec<[f64; 2]>,
    /// Largest excess of the high-gain gap over its bound; `<= 0` when it holds.
    pub max_gap_violation: f64,
}

/// A strict sign change of a difference sequence between two users.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Crossing {
    pub lower_index: usize,
    pub upper_index: usize,
    pub theta_lower: f64,
    pub theta_upper: f64,
}

fn check_len(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::LengthMismatch { expected, actual });
    }
    Ok(())
}

/// Per-user equilibrium data rate.
pub fn equilibrium_rates(result: &EquilibriumResult, pop: &Population, params: &ProtocolParams) -> Result<Vec<f64>> {
    check_len(pop.len(), result.profile.len())?;
    Ok(result
        .profile
        .powers()
        .iter()
        .zip(pop.thetas())
        .zip(result.interference.values())
        .map(|((&a, &t), &z)| game::data_rate(a, t, z, params))
        .collect())
}

/// Per-user utility at the equilibrium.
pub fn equilibrium_utilities(
    result: &EquilibriumResult,
    pop: &Population,
    params: &ProtocolParams,
) -> Result<Vec<f64>> {
    check_len(pop.len(), result.profile.len())?;
    Ok(result
        .profile
        .powers()
        .iter()
        .enumerate()
        .map(|(i, &a)| game::utility(a, pop.thetas()[i], result.interference.at(i), params, i))
        .collect())
}

/// Population-average utility `(1/N) Σ u(p(θ_i), θ_i, z(θ_i))`.
pub fn social_welfare(result: &EquilibriumResult, pop: &Population, params: &ProtocolParams) -> Result<f64> {
    let u = equilibrium_utilities(result, pop, params)?;
    Ok(u.iter().sum::<f64>() / u.len() as f64)
}

/// Jain's index `(Σd)² / (N·Σd²)`.
pub fn jains_index(rates: &[f64]) -> Result<f64> {
    if rates.is_empty() {
        return Err(Error::InvalidRates("no rates".into()));
    }
    if let Some(r) = rates.iter().find(|r| !(r.is_finite() && **r >= 0.0)) {
        return Err(Error::InvalidRates(format!(
            "rates must be finite and nonnegative, got {r}"
        )));
    }
    let sum: f64 = rates.iter().sum();
    let sum_sq: f64 = rates.iter().map(|r| r * r).sum();
    if sum_sq == 0.0 {
        return Err(Error::ZeroRates);
    }
    Ok(sum * sum / (rates.len() as f64 * sum_sq))
}

/// Index pairs `(i, j)` where the sign of `diff` flips strictly. Entries that
/// are exactly zero carry no sign and are skipped, so `i` is the last signed
/// entry before the flip and `j` the first after it.
pub fn sign_changes(diff: &[f64]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut last: Option<(usize, bool)> = None;
    for (i, &d) in diff.iter().enumerate() {
        if d == 0.0 || d.is_nan() {
            continue;
        }
        let positive = d > 0.0;
        if let Some((j, prev)) = last {
            if prev != positive {
                out.push((j, i));
            }
        }
        last = Some((i, positive));
    }
    out
}

/// Crossings of two curves sampled on the same sorted population.
pub fn curve_crossings(first: &[f64], second: &[f64], pop: &Population) -> Result<Vec<Crossing>> {
    check_len(pop.len(), first.len())?;
    check_len(pop.len(), second.len())?;
    let diff: Vec<f64> = first.iter().zip(second).map(|(a, b)| a - b).collect();
    Ok(sign_changes(&diff)
        .into_iter()
        .map(|(lo, hi)| Crossing {
            lower_index: lo,
            upper_index: hi,
            theta_lower: pop.thetas()[lo],
            theta_upper: pop.thetas()[hi],
        })
        .collect())
}

/// Where the CDMA and NOMA power curves cross.
pub fn crossing_detect(p_cdma: &StrategyProfile, p_noma: &StrategyProfile, pop: &Population) -> Result<Vec<Crossing>> {
    curve_crossings(p_cdma.powers(), p_noma.powers(), pop)
}

/// `max_i |p_cdma(θ_i) − p_noma(θ_i)| − 2α·E_max·m̂/θ_i` with `m̂` the sample
/// mean gain. Non-positive when the high-gain bound holds for every user.
pub fn high_gain_gap_check(
    p_cdma: &StrategyProfile,
    p_noma: &StrategyProfile,
    pop: &Population,
    params: &ProtocolParams,
) -> Result<f64> {
    check_len(pop.len(), p_cdma.len())?;
    check_len(pop.len(), p_noma.len())?;
    let scale = 2.0 * params.alpha * params.e_max * pop.empirical_mean_gain();
    Ok(p_cdma
        .powers()
        .iter()
        .zip(p_noma.powers())
        .zip(pop.thetas())
        .map(|((a, b), t)| (a - b).abs() - scale / t)
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Solves both equilibria and returns `welfare_noma − welfare_cdma`.
pub fn welfare_dominance_check(pop: &Population, params: &ProtocolParams, cfg: &SolverConfig) -> Result<f64> {
    let cdma = solver::solve(pop, params, Protocol::Cdma, cfg)?;
    let noma = solver::solve(pop, params, Protocol::Noma, cfg)?;
    Ok(social_welfare(&noma, pop, params)? - social_welfare(&cdma, pop, params)?)
}

/// Report over already-solved equilibria.
pub fn report(
    cdma: &EquilibriumResult,
    noma: &EquilibriumResult,
    pop: &Population,
    params: &ProtocolParams,
) -> Result<WelfareReport> {
    let rates_cdma = equilibrium_rates(cdma, pop, params)?;
    let rates_noma = equilibrium_rates(noma, pop, params)?;
    let brackets = |c: Vec<Crossing>| c.into_iter().map(|c| [c.theta_lower, c.theta_upper]).collect();
    Ok(WelfareReport {
        welfare_cdma: social_welfare(cdma, pop, params)?,
        welfare_noma: social_welfare(noma, pop, params)?,
        jain_cdma: jains_index(&rates_cdma)?,
        jain_noma: jains_index(&rates_noma)?,
        crossing_thetas: brackets(crossing_detect(&cdma.profile, &noma.profile, pop)?),
        rate_crossing_thetas: brackets(curve_crossings(&rates_cdma, &rates_noma, pop)?),
        max_gap_violation: high_gain_gap_check(&cdma.profile, &noma.profile, pop, params)?,
    })
}

/// Solves both protocols and builds the full report.
pub fn compare(pop: &Population, params: &ProtocolParams, cfg: &SolverConfig) -> Result<WelfareReport> {
    let cdma = solver::solve(pop, params, Protocol::Cdma, cfg)?;
    let noma = solver::solve(pop, params, Protocol::Noma, cfg)?;
    report(&cdma, &noma, pop, params)
}
