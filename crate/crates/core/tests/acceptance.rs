//! Acceptance criteria. Each test prints one `[PASS]`/`[FAIL]` line with the
//! measured values; run with `--nocapture` to see them.

use std::time::{Duration, Instant};

use mfpc_core::channel::{ChannelDistribution, Population};
use mfpc_core::decoding::{self, DecodingScenario, PowerRule, SicVariant};
use mfpc_core::game::{self, Protocol, ProtocolParams};
use mfpc_core::oracle;
use mfpc_core::solver::{self, EquilibriumResult, InitialProfile, SolverConfig};
use mfpc_core::welfare;

const RAYLEIGH: ChannelDistribution = ChannelDistribution::RayleighSquared { sigma: 5.0 };
const BETAS: [f64; 4] = [0.1, 0.5, 1.0, 5.0];
const N_USERS: usize = 1000;

const CLOSED_FORM_TOL: f64 = 1e-8;
const CONTRACTION_LIMIT: f64 = 0.25 + 0.01;
const JAIN_TOL: f64 = 0.02;
const OUTAGE_TOL: f64 = 0.002;
const FAIRNESS_CDMA: [f64; 4] = [0.8829, 0.8802, 0.8768, 0.8518];
const FAIRNESS_NOMA: [f64; 4] = [0.9931, 0.9864, 0.9766, 0.9205];

fn verdict(id: u32, name: &str, pass: bool, detail: impl AsRef<str>) {
    let tag = if pass { "PASS" } else { "FAIL" };
    println!("[{tag}] criterion {id:>2}: {name} | {}", detail.as_ref());
    assert!(pass, "criterion {id} failed: {}", detail.as_ref());
}

fn reference_pop(seed: u64) -> Population {
    Population::sample(&RAYLEIGH, N_USERS, seed).unwrap()
}

fn solve(pop: &Population, beta: f64, protocol: Protocol) -> EquilibriumResult {
    solver::solve(
        pop,
        &ProtocolParams::reference(beta),
        protocol,
        &SolverConfig::default(),
    )
    .unwrap()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn criterion_01_closed_form_equivalence() {
    let start = Instant::now();
    let params = ProtocolParams::reference(0.1);

    let worked = Population::from_identifiers(vec![10.0, 50.0]).unwrap();
    let exact = oracle::cdma_closed_form(&worked, &params).unwrap();
    let z_star = oracle::cdma_closed_form_interference(&worked, &params).unwrap();
    let iterated = solver::solve(&worked, &params, Protocol::Cdma, &SolverConfig::default()).unwrap();
    let mut worst = max_abs_diff(exact.powers(), iterated.profile.powers());
    let worked_ok = (exact.powers()[0] - 5.3708).abs() < 1e-4
        && (exact.powers()[1] - 12.6157).abs() < 1e-4
        && (z_star - 342.2469).abs() < 1e-4
        && (iterated.interference.at(0) - z_star).abs() < 1e-8;

    let uniform = ChannelDistribution::BoundedUniform { lo: 10.0, hi: 50.0 };
    for (n, seed) in [(10, 1), (100, 2), (1000, 3), (10_000, 4)] {
        let pop = Population::sample(&uniform, n, seed).unwrap();
        let exact = oracle::cdma_closed_form(&pop, &params).unwrap();
        let res = solver::solve(&pop, &params, Protocol::Cdma, &SolverConfig::default()).unwrap();
        worst = worst.max(max_abs_diff(exact.powers(), res.profile.powers()));
    }
    let elapsed = start.elapsed();
    verdict(
        1,
        "closed-form CDMA equivalence",
        worked_ok && worst <= CLOSED_FORM_TOL && elapsed < Duration::from_secs(1),
        format!(
            "p*={:.4?} z*={z_star:.6} max err {worst:.2e} (tol {CLOSED_FORM_TOL:e}) in {elapsed:?}",
            exact.powers()
        ),
    );
}

#[test]
fn criterion_02_contraction() {
    let start = Instant::now();
    let pop = reference_pop(1);
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for beta in BETAS {
        for protocol in Protocol::ALL {
            let res = solve(&pop, beta, protocol);
            for w in res.residuals.windows(2) {
                // Ratios below the rounding floor carry no information.
                if w[1] >= 100.0 * f64::EPSILON {
                    worst = worst.max(w[1] / w[0]);
                    checked += 1;
                }
            }
        }
    }
    let elapsed = start.elapsed();
    verdict(
        2,
        "per-iteration contraction",
        checked > 0 && worst <= CONTRACTION_LIMIT && elapsed < Duration::from_secs(5),
        format!("worst ratio {worst:.4} over {checked} steps (limit {CONTRACTION_LIMIT}) in {elapsed:?}"),
    );
}

#[test]
fn criterion_03_initialisation_independence() {
    let cfg = SolverConfig::default();
    let mut worst_excess = f64::NEG_INFINITY;
    for seed in 0..5 {
        let pop = reference_pop(100 + seed);
        for beta in BETAS {
            let params = ProtocolParams::reference(beta);
            let bound = 2.0 * cfg.tol / (1.0 - params.alpha);
            for protocol in Protocol::ALL {
                let run = |init| {
                    let cfg = cfg.clone().with_initial(init);
                    solver::solve(&pop, &params, protocol, &cfg).unwrap()
                };
                let lo = run(InitialProfile::Constant(params.e_min));
                let hi = run(InitialProfile::Constant(params.e_max));
                let diff: Vec<f64> = lo
                    .profile
                    .powers()
                    .iter()
                    .zip(hi.profile.powers())
                    .map(|(a, b)| a - b)
                    .collect();
                let d = solver::residual_norm(&diff, &pop, lo.norm).unwrap();
                worst_excess = worst_excess.max(d - bound);
            }
        }
    }
    verdict(
        3,
        "uniqueness from e_min and e_max starts",
        worst_excess <= 0.0,
        format!("max (distance - 2 tol/(1-alpha)) = {worst_excess:.3e}"),
    );
}

#[test]
fn criterion_04_cdma_monotonicity() {
    let mut violations = 0;
    for seed in 0..3 {
        let pop = reference_pop(200 + seed);
        for beta in BETAS {
            let res = solve(&pop, beta, Protocol::Cdma);
            violations += res.profile.powers().windows(2).filter(|w| w[1] < w[0]).count();
        }
    }
    verdict(
        4,
        "CDMA equilibrium nondecreasing in gain",
        violations == 0,
        format!("{violations} violations"),
    );
}

#[test]
fn criterion_05_welfare_dominance() {
    let start = Instant::now();
    let cfg = SolverConfig::default();
    let mut min_gap = f64::INFINITY;
    let mut failures = 0;
    for seed in 0..20 {
        let pop = reference_pop(300 + seed);
        for beta in BETAS {
            let gap = welfare::welfare_dominance_check(&pop, &ProtocolParams::reference(beta), &cfg).unwrap();
            min_gap = min_gap.min(gap);
            failures += (gap <= 0.0) as usize;
        }
    }
    let elapsed = start.elapsed();
    verdict(
        5,
        "NOMA welfare strictly above CDMA",
        failures == 0 && elapsed < Duration::from_secs(30),
        format!("min gap {min_gap:.4e}, {failures}/80 failures, {elapsed:?}"),
    );
}

#[test]
fn criterion_06_fairness_reference_values() {
    let start = Instant::now();
    let seeds = 10;
    let mut mean_cdma = [0.0; 4];
    let mut mean_noma = [0.0; 4];
    for seed in 0..seeds {
        let pop = reference_pop(400 + seed);
        for (k, beta) in BETAS.into_iter().enumerate() {
            let params = ProtocolParams::reference(beta);
            let cdma = solve(&pop, beta, Protocol::Cdma);
            let noma = solve(&pop, beta, Protocol::Noma);
            mean_cdma[k] += welfare::jains_index(&welfare::equilibrium_rates(&cdma, &pop, &params).unwrap()).unwrap();
            mean_noma[k] += welfare::jains_index(&welfare::equilibrium_rates(&noma, &pop, &params).unwrap()).unwrap();
        }
    }
    let mut worst: f64 = 0.0;
    for k in 0..4 {
        mean_cdma[k] /= seeds as f64;
        mean_noma[k] /= seeds as f64;
        worst = worst
            .max((mean_cdma[k] - FAIRNESS_CDMA[k]).abs())
            .max((mean_noma[k] - FAIRNESS_NOMA[k]).abs());
    }
    let elapsed = start.elapsed();
    verdict(
        6,
        "Jain's index reproduction",
        worst <= JAIN_TOL && elapsed < Duration::from_secs(60),
        format!(
            "cdma {mean_cdma:.4?} vs {FAIRNESS_CDMA:?}; noma {mean_noma:.4?} vs {FAIRNESS_NOMA:?}; worst dev {worst:.4} (tol {JAIN_TOL})"
        ),
    );
}

#[test]
fn criterion_07_crossings() {
    let mut summary = Vec::new();
    let mut pass = true;
    for beta in BETAS {
        let pop = reference_pop(1);
        let params = ProtocolParams::reference(beta);
        let cdma = solve(&pop, beta, Protocol::Cdma);
        let noma = solve(&pop, beta, Protocol::Noma);
        let power = welfare::crossing_detect(&cdma.profile, &noma.profile, &pop).unwrap();
        let rates = welfare::curve_crossings(
            &welfare::equilibrium_rates(&cdma, &pop, &params).unwrap(),
            &welfare::equilibrium_rates(&noma, &pop, &params).unwrap(),
            &pop,
        )
        .unwrap();
        pass &= !power.is_empty() && !rates.is_empty();
        summary.push(format!("beta={beta}: {} power / {} rate", power.len(), rates.len()));
    }
    verdict(7, "power and rate curves cross", pass, summary.join(", "));
}

#[test]
fn criterion_08_high_gain_bound() {
    let mut worst = f64::NEG_INFINITY;
    for beta in BETAS {
        let pop = reference_pop(1);
        let params = ProtocolParams::reference(beta);
        let cdma = solve(&pop, beta, Protocol::Cdma);
        let noma = solve(&pop, beta, Protocol::Noma);
        worst = worst.max(welfare::high_gain_gap_check(&cdma.profile, &noma.profile, &pop, &params).unwrap());
    }
    verdict(
        8,
        "|p_cdma - p_noma| <= 2 alpha E_max m/theta",
        worst <= 0.0,
        format!("max violation {worst:.4}"),
    );
}

#[test]
fn criterion_09_best_response_oracles() {
    use rand::{Rng, SeedableRng};
    use rayon::prelude::*;

    let params = ProtocolParams::reference(0.1);
    let grid_points = 1_000_000;
    let resolution = (params.e_max - params.e_min) / grid_points as f64;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);
    let pairs: Vec<(f64, f64)> = (0..1000)
        .map(|_| (rng.random_range(1.0..150.0), rng.random_range(0.0..500.0)))
        .collect();
    let worst_br = pairs
        .par_iter()
        .map(|&(theta, z)| {
            let analytic = game::best_response(theta, z, &params, 0);
            let brute = oracle::brute_force_best_response(theta, z, &params, 0, grid_points);
            (analytic - brute).abs()
        })
        .reduce(|| 0.0, f64::max);
    let interior = pairs
        .iter()
        .filter(|&&(t, z)| game::best_response(t, z, &params, 0) > params.e_min)
        .count();

    let tiny_grid = 151;
    let cell = (params.e_max - params.e_min) / (tiny_grid - 1) as f64;
    let mut worst_tiny: f64 = 0.0;
    for thetas in [vec![10.0], vec![10.0, 30.0], vec![15.0, 25.0, 40.0]] {
        let pop = Population::from_identifiers(thetas).unwrap();
        for protocol in Protocol::ALL {
            let grid = oracle::tiny_equilibrium_search(&pop, &params, protocol, tiny_grid).unwrap();
            let res = solver::solve(&pop, &params, protocol, &SolverConfig::default()).unwrap();
            worst_tiny = worst_tiny.max(max_abs_diff(grid.powers(), res.profile.powers()));
        }
    }
    verdict(
        9,
        "best response vs grid search; tiny-N exhaustive equilibria",
        worst_br <= resolution && worst_tiny <= cell,
        format!(
            "BR max dev {worst_br:.2e} (res {resolution:.2e}, {interior}/1000 interior); tiny max dev {worst_tiny:.3} (cell {cell})"
        ),
    );
}

#[test]
fn criterion_10_outage_and_sic() {
    let params = ProtocolParams::reference(0.1);
    let analytic = decoding::outage_probability_rayleigh(5.0, 10.0, 342.2469, &params, 1.0);
    let mc = decoding::outage_probability_mc(&RAYLEIGH, 10.0, 342.2469, &params, 1.0, 1_000_000, 10).unwrap();
    let outage_ok = (mc - 0.30389).abs() <= OUTAGE_TOL && (analytic - 0.30389).abs() < 1e-5;

    let mut sic_ok = true;
    for seed in 0..3 {
        let pop = reference_pop(500 + seed);
        for protocol in Protocol::ALL {
            let eq = solve(&pop, 0.1, protocol);
            for rule in [PowerRule::Fixed, PowerRule::Interpolated] {
                let run = |variant| {
                    decoding::mpr_success_rates(&DecodingScenario {
                        rates: vec![1.0; pop.len()],
                        profile: &eq.profile,
                        pop: &pop,
                        params: &params,
                        sic_variant: variant,
                        power_rule: rule,
                        trials: 40,
                        seed,
                    })
                    .unwrap()
                };
                let strict = run(SicVariant::Strict);
                let improved = run(SicVariant::Improved);
                sic_ok &= strict.iter().zip(&improved).all(|(s, i)| i >= s);
            }
        }
    }
    verdict(
        10,
        "Monte-Carlo outage; improved SIC >= strict SIC",
        outage_ok && sic_ok,
        format!("outage mc {mc:.5} analytic {analytic:.5} (target 0.30389 +/- {OUTAGE_TOL}); sic dominance {sic_ok}"),
    );
}

#[test]
fn criterion_11_finite_population_trend() {
    let params = ProtocolParams::reference(0.1);
    let spread = |n: usize| {
        let z: Vec<f64> = (0..10u64)
            .map(|seed| {
                let pop = Population::sample(&RAYLEIGH, n, 600 + seed).unwrap();
                solver::solve(&pop, &params, Protocol::Cdma, &SolverConfig::default())
                    .unwrap()
                    .interference
                    .at(0)
            })
            .collect();
        let mean = z.iter().sum::<f64>() / z.len() as f64;
        (z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (z.len() - 1) as f64).sqrt()
    };
    let s = [spread(100), spread(1000), spread(10_000)];
    verdict(
        11,
        "seed spread of CDMA aggregate shrinks with N",
        s[0] > s[1] && s[1] > s[2],
        format!("std over seeds at N=1e2,1e3,1e4: {s:.3?}"),
    );
}
