//! Monte-Carlo decoding: Shannon threshold, outage and SIC.
//!
//! The equilibrium analysis assumes every stronger signal is cancelled. This
//! module drops that assumption and replays decoding per realisation: a
//! signal is decoded iff its instantaneous capacity exceeds its target rate,
//! and SIC proceeds in descending order of realised gain with residual
//! interference `(α/N) Σ a_j θ_j` over the signals still present.

use rayon::prelude::*;
use serde::Serialize;

use crate::channel::{ChannelDistribution, Population};
use crate::error::{Error, Result};
use crate::game::{self, ProtocolParams, StrategyProfile};
use crate::rng;

const OUTAGE_CHUNK: usize = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SicVariant {
    /// Decoding stops at the first failure; every later user fails.
    Strict,
    /// Decoding continues past failures; failed signals stay as interference.
    Improved,
}

impl std::str::FromStr for SicVariant {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "strict" => Ok(SicVariant::Strict),
            "improved" => Ok(SicVariant::Improved),
            other => Err(format!("unknown SIC variant {other:?} (expected strict or improved)")),
        }
    }
}

impl std::fmt::Display for SicVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SicVariant::Strict => "strict",
            SicVariant::Improved => "improved",
        })
    }
}

/// How a user's power is chosen once its gain is redrawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PowerRule {
    /// User `i` keeps `profile[i]` whatever its realised gain.
    Fixed,
    /// Power follows the equilibrium strategy curve, linearly interpolated
    /// over the solved population and held flat beyond its ends.
    Interpolated,
}

#[derive(Debug, Clone)]
pub struct DecodingScenario<'a> {
    /// Per-user target rates in bits/s/Hz.
    pub rates: Vec<f64>,
    pub profile: &'a StrategyProfile,
    pub pop: &'a Population,
    pub params: &'a ProtocolParams,
    pub sic_variant: SicVariant,
    pub power_rule: PowerRule,
    pub trials: usize,
    pub seed: u64,
}

impl DecodingScenario<'_> {
    pub fn validate(&self) -> Result<()> {
        let n = self.pop.len();
        for len in [self.rates.len(), self.profile.len()] {
            if len != n {
                return Err(Error::LengthMismatch {
                    expected: n,
                    actual: len,
                });
            }
        }
        if let Some(r) = self.rates.iter().find(|r| !(r.is_finite() && **r > 0.0)) {
            return Err(Error::InvalidConfig(format!("target rates must be positive, got {r}")));
        }
        if self.trials == 0 {
            return Err(Error::InvalidConfig("trials must be at least 1".into()));
        }
        self.params.validate_for(n)
    }

    fn power_at(&self, user: usize, theta: f64) -> f64 {
        match self.power_rule {
            PowerRule::Fixed => self.profile.powers()[user],
            PowerRule::Interpolated => interpolate_strategy(self.pop.thetas(), self.profile.powers(), theta),
        }
    }
}

/// `true` iff `log₂(1 + θ·a/(α·z + N₀)) > rate`.
pub fn decode_indicator(a: f64, theta: f64, z: f64, params: &ProtocolParams, rate: f64) -> bool {
    game::data_rate(a, theta, z, params) > rate
}

/// Closed-form outage under Rayleigh fading:
/// `1 − exp(−(2^R − 1)(α·z + N₀)/(a·σ²))`.
pub fn outage_probability_rayleigh(sigma: f64, a: f64, z: f64, params: &ProtocolParams, rate: f64) -> f64 {
    if a <= 0.0 {
        return 1.0;
    }
    let threshold = (rate.exp2() - 1.0) * (params.alpha * z + params.n0) / a;
    -(-threshold / (sigma * sigma)).exp_m1()
}

/// Fraction of `trials` gain draws from `dist` for which decoding fails.
pub fn outage_probability_mc(
    dist: &ChannelDistribution,
    a: f64,
    z: f64,
    params: &ProtocolParams,
    rate: f64,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    dist.validate()?;
    if trials == 0 {
        return Err(Error::InvalidConfig("trials must be at least 1".into()));
    }
    if a == 0.0 && rate > 0.0 {
        return Ok(1.0);
    }
    let chunks = trials.div_ceil(OUTAGE_CHUNK);
    let failures: usize = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = rng::stream(seed, rng::streams::OUTAGE + c as u64);
            let len = OUTAGE_CHUNK.min(trials - c * OUTAGE_CHUNK);
            (0..len)
                .filter(|_| !decode_indicator(a, dist.draw(&mut rng), z, params, rate))
                .count()
        })
        .sum();
    Ok(failures as f64 / trials as f64)
}

/// One SIC pass over realised gains. Returns the success indicator of each
/// user in population order.
pub fn sic_round(scenario: &DecodingScenario<'_>, realized_thetas: &[f64]) -> Result<Vec<bool>> {
    let n = scenario.pop.len();
    if realized_thetas.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            actual: realized_thetas.len(),
        });
    }
    let powers: Vec<f64> = realized_thetas
        .iter()
        .enumerate()
        .map(|(i, &t)| scenario.power_at(i, t))
        .collect();
    Ok(sic_decode(
        realized_thetas,
        &powers,
        &scenario.rates,
        scenario.params,
        scenario.sic_variant,
    ))
}

/// SIC in descending order of `thetas` (ties: lower index first).
pub fn sic_decode(
    thetas: &[f64],
    powers: &[f64],
    rates: &[f64],
    params: &ProtocolParams,
    variant: SicVariant,
) -> Vec<bool> {
    let n = thetas.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| thetas[j].total_cmp(&thetas[i]));

    let received: Vec<f64> = powers.iter().zip(thetas).map(|(a, t)| a * t).collect();
    let mut residual: f64 = received.iter().sum();
    let mut success = vec![false; n];

    for &v in &order {
        residual -= received[v];
        let z = residual.max(0.0) / n as f64;
        if decode_indicator(powers[v], thetas[v], z, params, rates[v]) {
            success[v] = true;
        } else {
            match variant {
                SicVariant::Strict => break,
                SicVariant::Improved => residual += received[v],
            }
        }
    }
    success
}

/// Per-user empirical success probability over independent trials. Trial
/// `t` draws from its own stream, so the result does not depend on how
/// trials are scheduled.
pub fn mpr_success_rates(scenario: &DecodingScenario<'_>) -> Result<Vec<f64>> {
    scenario.validate()?;
    let n = scenario.pop.len();
    let counts = (0..scenario.trials)
        .into_par_iter()
        .map(|t| {
            let thetas: Vec<f64> = match scenario.pop.source() {
                Some(dist) => {
                    let mut rng = rng::stream(scenario.seed, rng::streams::DECODING + t as u64);
                    (0..n).map(|_| dist.draw(&mut rng)).collect()
                }
                None => scenario.pop.thetas().to_vec(),
            };
            sic_round(scenario, &thetas).expect("realised gains are aligned")
        })
        .fold(
            || vec![0u64; n],
            |mut acc, outcome| {
                for (c, ok) in acc.iter_mut().zip(outcome) {
                    *c += ok as u64;
                }
                acc
            },
        )
        .reduce(
            || vec![0u64; n],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            },
        );
    Ok(counts.into_iter().map(|c| c as f64 / scenario.trials as f64).collect())
}

/// Piecewise-linear interpolation of `(thetas, powers)` at `theta`; flat
/// outside the sampled range. `thetas` must be sorted ascending.
pub fn interpolate_strategy(thetas: &[f64], powers: &[f64], theta: f64) -> f64 {
    let k = thetas.partition_point(|&t| t < theta);
    if k == 0 {
        return powers[0];
    }
    if k == thetas.len() {
        return powers[k - 1];
    }
    let (t0, t1) = (thetas[k - 1], thetas[k]);
    if t1 == t0 {
        return powers[k];
    }
    let w = (theta - t0) / (t1 - t0);
    powers[k - 1] + w * (powers[k] - powers[k - 1])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> ProtocolParams {
        ProtocolParams::reference(0.1)
    }

    #[test]
    fn indicator_cases() {
        let p = params();
        assert!(decode_indicator(1.0, 10.0, 0.0, &p, 1e-12));
        assert!(!decode_indicator(0.0, 10.0, 0.0, &p, 1e-12));
        assert!(!decode_indicator(5.3708, 10.0, 342.2469, &p, 1.0));
    }

    #[test]
    fn analytic_outage_value() {
        let o = outage_probability_rayleigh(5.0, 10.0, 342.2469, &params(), 1.0);
        assert!((o - 0.30389).abs() < 1e-5, "{o}");
    }

    #[test]
    fn outage_edge_cases() {
        let d = ChannelDistribution::RayleighSquared { sigma: 5.0 };
        assert_eq!(outage_probability_mc(&d, 0.0, 1.0, &params(), 1.0, 10, 1).unwrap(), 1.0);
        let tiny = outage_probability_mc(&d, 10.0, 0.0, &params(), 1e-9, 10_000, 1).unwrap();
        assert!(tiny < 1e-3);
        assert!(outage_probability_mc(&d, 10.0, 0.0, &params(), 1.0, 0, 1).is_err());
    }

    #[test]
    fn strict_halts_and_improved_continues() {
        // The strong user misses its rate; the weak user still clears its own
        // with the failed strong signal left in as interference.
        let p = params();
        let thetas = [1.0, 10.0];
        let powers = [10.0, 10.0];
        // Strong: SINR 100/(0.25·5 + 5) = 16, capacity log₂17 ≈ 4.09 < 5.
        // Weak with the strong signal uncancelled: SINR 10/(0.25·50 + 5) ≈ 0.571, capacity ≈ 0.652 > 0.5.
        let rates = [0.5, 5.0];
        let strict = sic_decode(&thetas, &powers, &rates, &p, SicVariant::Strict);
        let improved = sic_decode(&thetas, &powers, &rates, &p, SicVariant::Improved);
        assert_eq!(strict, vec![false, false]);
        assert_eq!(improved, vec![true, false]);
    }

    #[test]
    fn no_failures_means_identical_variants() {
        let p = params();
        let thetas = [3.0, 1.0, 7.0, 2.0];
        let powers = [5.0, 5.0, 5.0, 5.0];
        let rates = [1e-9; 4];
        let s = sic_decode(&thetas, &powers, &rates, &p, SicVariant::Strict);
        let i = sic_decode(&thetas, &powers, &rates, &p, SicVariant::Improved);
        assert_eq!(s, vec![true; 4]);
        assert_eq!(s, i);
    }

    #[test]
    fn first_failure_under_strict_fails_everyone() {
        let p = params();
        let thetas = [1.0, 2.0, 3.0];
        let powers = [1.0, 1.0, 1.0];
        let rates = [1e-9, 1e-9, 100.0];
        assert_eq!(
            sic_decode(&thetas, &powers, &rates, &p, SicVariant::Strict),
            vec![false; 3]
        );
        assert_eq!(
            sic_decode(&thetas, &powers, &rates, &p, SicVariant::Improved),
            vec![true, true, false]
        );
    }

    #[test]
    fn deterministic_success_scenario() {
        let p = params();
        let pop = Population::from_identifiers(vec![10.0, 20.0, 30.0]).unwrap();
        let profile = StrategyProfile::new(vec![5.0, 5.0, 5.0], &p).unwrap();
        let sc = DecodingScenario {
            rates: vec![1e-9; 3],
            profile: &profile,
            pop: &pop,
            params: &p,
            sic_variant: SicVariant::Strict,
            power_rule: PowerRule::Fixed,
            trials: 7,
            seed: 1,
        };
        assert_eq!(mpr_success_rates(&sc).unwrap(), vec![1.0; 3]);
        assert!(sic_round(&sc, &[1.0]).is_err());
        let bad = DecodingScenario {
            trials: 0,
            ..sc.clone()
        };
        assert!(mpr_success_rates(&bad).is_err());
        let bad = DecodingScenario {
            rates: vec![0.0; 3],
            ..sc
        };
        assert!(mpr_success_rates(&bad).is_err());
    }

    #[test]
    fn interpolation() {
        let t = [1.0, 2.0, 4.0];
        let p = [0.0, 10.0, 30.0];
        assert_eq!(interpolate_strategy(&t, &p, 0.5), 0.0);
        assert_eq!(interpolate_strategy(&t, &p, 1.5), 5.0);
        assert_eq!(interpolate_strategy(&t, &p, 3.0), 20.0);
        assert_eq!(interpolate_strategy(&t, &p, 9.0), 30.0);
        assert_eq!(interpolate_strategy(&t, &p, 2.0), 10.0);
    }
}
