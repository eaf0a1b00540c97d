use std::path::PathBuf;

use mfpc_core::decoding::{self, DecodingScenario};
use mfpc_core::error::Error as CoreError;
use mfpc_core::game::{self, Protocol, ProtocolParams};
use mfpc_core::rng::{self, streams};
use mfpc_core::solver::{self, EquilibriumResult};
use mfpc_core::{oracle, welfare, Population, WelfareReport};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::{Cell, OutDir, Provenance, Table};

/// Jain's index, or `None` when every rate is zero.
fn jain_or_none(rates: &[f64]) -> Result<Option<f64>, CliError> {
    match welfare::jains_index(rates) {
        Ok(j) => Ok(Some(j)),
        Err(CoreError::ZeroRates) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

fn population(cfg: &RunConfig, n: usize, seed: u64) -> Result<Population, CliError> {
    Ok(Population::sample(&cfg.distribution()?, n, seed)?)
}

#[derive(Serialize)]
struct SolveSummary {
    protocol: Protocol,
    beta: f64,
    users: usize,
    mean_gain: f64,
    converged: bool,
    iterations: usize,
    final_residual: Option<f64>,
    residuals: Vec<f64>,
    welfare: f64,
    jain: Option<f64>,
}

pub fn solve(cfg: &RunConfig, out: &OutDir) -> Result<Vec<PathBuf>, CliError> {
    let pop = population(cfg, cfg.channel.n, cfg.channel.seed)?;
    let params = cfg.params(cfg.protocol.beta)?;
    let protocol = cfg.protocol.kind;
    let res = solver::solve(&pop, &params, protocol, &cfg.solver_config())?;

    let rates = welfare::equilibrium_rates(&res, &pop, &params)?;
    let utilities = welfare::equilibrium_utilities(&res, &pop, &params)?;
    let mut table = Table::new(&["theta", "power", "interference", "rate", "utility"]);
    for (i, &theta) in pop.thetas().iter().enumerate() {
        table.push(vec![
            theta.into(),
            res.profile.powers()[i].into(),
            res.interference.at(i).into(),
            rates[i].into(),
            utilities[i].into(),
        ]);
    }
    let summary = SolveSummary {
        protocol,
        beta: cfg.protocol.beta,
        users: pop.len(),
        mean_gain: pop.empirical_mean_gain(),
        converged: res.converged,
        iterations: res.iterations,
        final_residual: res.final_residual(),
        residuals: res.residuals.clone(),
        welfare: utilities.iter().sum(),
        jain: jain_or_none(&rates)?,
    };
    let prov = Provenance::new(cfg.digest(), vec![cfg.channel.seed]);
    Ok(vec![
        out.table(&format!("solve_{protocol}.csv"), &table, &prov)?,
        out.json(&format!("solve_{protocol}.json"), &summary, &prov)?,
    ])
}

struct SweepCell {
    beta: f64,
    seed: u64,
    cdma: EquilibriumResult,
    noma: EquilibriumResult,
    report: WelfareReport,
    jain: [Option<f64>; 2],
}

#[derive(Serialize)]
struct SweepAggregate {
    beta: f64,
    protocol: Protocol,
    mean_welfare: f64,
    mean_jain: Option<f64>,
}

#[derive(Serialize)]
struct SweepSummary {
    betas: Vec<f64>,
    cells: usize,
    noma_dominates_every_cell: bool,
    min_welfare_gap: f64,
    every_cell_has_power_crossing: bool,
    every_cell_has_rate_crossing: bool,
    max_gap_violation: f64,
    aggregates: Vec<SweepAggregate>,
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, count) = values.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    sum / count as f64
}

/// Mean of the present values; `None` if any is missing.
fn mean_opt(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Option<Vec<f64>> = values.collect();
    v.map(|v| mean(v.into_iter()))
}

pub fn sweep(cfg: &RunConfig, out: &OutDir) -> Result<Vec<PathBuf>, CliError> {
    let solver_cfg = cfg.solver_config();
    let jobs: Vec<(f64, u64)> = cfg
        .sweep
        .betas
        .iter()
        .flat_map(|&b| cfg.sweep.seeds.iter().map(move |&s| (b, s)))
        .collect();

    let cells = jobs
        .par_iter()
        .map(|&(beta, seed)| -> Result<SweepCell, CliError> {
            let pop = population(cfg, cfg.channel.n, seed)?;
            let params = cfg.params(beta)?;
            let cdma = solver::solve(&pop, &params, Protocol::Cdma, &solver_cfg)?;
            let noma = solver::solve(&pop, &params, Protocol::Noma, &solver_cfg)?;
            let report = welfare::report(&cdma, &noma, &pop, &params)?;
            let jain = [
                jain_or_none(&welfare::equilibrium_rates(&cdma, &pop, &params)?)?,
                jain_or_none(&welfare::equilibrium_rates(&noma, &pop, &params)?)?,
            ];
            Ok(SweepCell {
                beta,
                seed,
                cdma,
                noma,
                report,
                jain,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut table = Table::new(&[
        "kind",
        "beta",
        "seed",
        "protocol",
        "welfare",
        "jain",
        "welfare_gap_noma_minus_cdma",
        "power_crossings",
        "rate_crossings",
        "max_gap_violation",
        "iterations",
    ]);
    for c in &cells {
        let gap = c.report.welfare_noma - c.report.welfare_cdma;
        for (k, (protocol, res)) in [(Protocol::Cdma, &c.cdma), (Protocol::Noma, &c.noma)]
            .into_iter()
            .enumerate()
        {
            let w = if k == 0 {
                c.report.welfare_cdma
            } else {
                c.report.welfare_noma
            };
            table.push(vec![
                "cell".into(),
                c.beta.into(),
                c.seed.into(),
                protocol.as_str().into(),
                w.into(),
                c.jain[k].into(),
                gap.into(),
                c.report.crossing_thetas.len().into(),
                c.report.rate_crossing_thetas.len().into(),
                c.report.max_gap_violation.into(),
                res.iterations.into(),
            ]);
        }
    }

    let mut aggregates = Vec::new();
    for &beta in &cfg.sweep.betas {
        let group: Vec<&SweepCell> = cells.iter().filter(|c| c.beta == beta).collect();
        for (k, protocol) in Protocol::ALL.into_iter().enumerate() {
            let welfare_of = |c: &SweepCell| {
                if k == 0 {
                    c.report.welfare_cdma
                } else {
                    c.report.welfare_noma
                }
            };
            let iterations_of = |c: &SweepCell| if k == 0 { c.cdma.iterations } else { c.noma.iterations } as f64;
            let agg = SweepAggregate {
                beta,
                protocol,
                mean_welfare: mean(group.iter().map(|c| welfare_of(c))),
                mean_jain: mean_opt(group.iter().map(|c| c.jain[k])),
            };
            table.push(vec![
                "mean".into(),
                beta.into(),
                Cell::Null,
                protocol.as_str().into(),
                agg.mean_welfare.into(),
                agg.mean_jain.into(),
                mean(group.iter().map(|c| c.report.welfare_noma - c.report.welfare_cdma)).into(),
                mean(group.iter().map(|c| c.report.crossing_thetas.len() as f64)).into(),
                mean(group.iter().map(|c| c.report.rate_crossing_thetas.len() as f64)).into(),
                mean(group.iter().map(|c| c.report.max_gap_violation)).into(),
                mean(group.iter().map(|c| iterations_of(c))).into(),
            ]);
            aggregates.push(agg);
        }
    }

    let gaps = cells.iter().map(|c| c.report.welfare_noma - c.report.welfare_cdma);
    let summary = SweepSummary {
        betas: cfg.sweep.betas.clone(),
        cells: cells.len(),
        noma_dominates_every_cell: cells.iter().all(|c| c.report.welfare_noma > c.report.welfare_cdma),
        min_welfare_gap: gaps.fold(f64::INFINITY, f64::min),
        every_cell_has_power_crossing: cells.iter().all(|c| !c.report.crossing_thetas.is_empty()),
        every_cell_has_rate_crossing: cells.iter().all(|c| !c.report.rate_crossing_thetas.is_empty()),
        max_gap_violation: cells
            .iter()
            .map(|c| c.report.max_gap_violation)
            .fold(f64::NEG_INFINITY, f64::max),
        aggregates,
    };
    let prov = Provenance::new(cfg.digest(), cfg.sweep.seeds.clone());
    Ok(vec![
        out.table("sweep.csv", &table, &prov)?,
        out.json("sweep.json", &summary, &prov)?,
    ])
}

const CLOSED_FORM_TOL: f64 = 1e-8;
const FIXED_POINT_TOL: f64 = 1e-8;
const SPOT_CHECKS: usize = 200;
const SPOT_GRID: usize = 100_001;
const TINY_GRID: usize = 151;

#[derive(Serialize, Clone, Copy, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
enum Status {
    Pass,
    Fail,
    Skipped,
}

#[derive(Serialize)]
struct CheckResult {
    name: String,
    status: Status,
    detail: String,
}

#[derive(Serialize)]
struct OracleReport {
    passed: usize,
    failed: usize,
    skipped: usize,
    checks: Vec<CheckResult>,
}

fn check(name: impl Into<String>, ok: bool, detail: String) -> CheckResult {
    CheckResult {
        name: name.into(),
        status: if ok { Status::Pass } else { Status::Fail },
        detail,
    }
}

/// Best response under test. `corrupt` shifts it by one power unit so the
/// failure path of the spot checks can be exercised.
fn candidate_best_response(theta: f64, z: f64, params: &ProtocolParams, corrupt: bool) -> f64 {
    let br = game::best_response(theta, z, params, 0);
    if !corrupt {
        br
    } else if br > 0.5 * (params.e_min + params.e_max) {
        br - 1.0
    } else {
        br + 1.0
    }
}

pub fn oracle_check(cfg: &RunConfig, out: &OutDir, corrupt: bool) -> Result<Vec<PathBuf>, CliError> {
    let pop = population(cfg, cfg.channel.n, cfg.channel.seed)?;
    let params = cfg.params(cfg.protocol.beta)?;
    let solver_cfg = cfg.solver_config();
    let mut checks = Vec::new();

    let cdma = solver::solve(&pop, &params, Protocol::Cdma, &solver_cfg)?;
    match oracle::cdma_closed_form(&pop, &params) {
        Ok(exact) => {
            let err = exact
                .powers()
                .iter()
                .zip(cdma.profile.powers())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            checks.push(check(
                "closed_form_cdma",
                err <= CLOSED_FORM_TOL,
                format!("max per-user error {err:e} (tol {CLOSED_FORM_TOL:e})"),
            ));
        }
        Err(CoreError::TruncationBinds { index, theta, power }) => checks.push(CheckResult {
            name: "closed_form_cdma".into(),
            status: Status::Skipped,
            detail: format!("TruncationBinds: user {index} (theta {theta}) would need power {power}"),
        }),
        Err(e) => return Err(e.into()),
    }

    for protocol in Protocol::ALL {
        let res = if protocol == Protocol::Cdma {
            cdma.clone()
        } else {
            solver::solve(&pop, &params, protocol, &solver_cfg)?
        };
        let dev = solver::verify_fixed_point(&res, &pop, &params)?;
        checks.push(check(
            format!("fixed_point_{protocol}"),
            dev <= FIXED_POINT_TOL,
            format!("max |p - BR(p)| {dev:e} (tol {FIXED_POINT_TOL:e})"),
        ));
    }

    let mut rng = rng::stream(cfg.channel.seed, streams::ORACLE);
    let z_max = params.e_max * pop.empirical_mean_gain() / 4.0;
    let pairs: Vec<(f64, f64)> = (0..SPOT_CHECKS)
        .map(|_| {
            (
                pop.thetas()[rng.random_range(0..pop.len())],
                rng.random_range(0.0..z_max),
            )
        })
        .collect();
    let resolution = (params.e_max - params.e_min) / (SPOT_GRID - 1) as f64;
    let worst = pairs
        .par_iter()
        .map(|&(theta, z)| {
            let brute = oracle::brute_force_best_response(theta, z, &params, 0, SPOT_GRID);
            (candidate_best_response(theta, z, &params, corrupt) - brute).abs()
        })
        .reduce(|| 0.0, f64::max);
    checks.push(check(
        "best_response_spot_checks",
        worst <= resolution,
        format!("{SPOT_CHECKS} pairs, max deviation {worst:e} (grid step {resolution:e})"),
    ));

    let cell = (params.e_max - params.e_min) / (TINY_GRID - 1) as f64;
    for n in 1..=3 {
        let tiny = population(cfg, n, cfg.channel.seed)?;
        for protocol in Protocol::ALL {
            let name = format!("tiny_n{n}_{protocol}");
            match oracle::tiny_equilibrium_search(&tiny, &params, protocol, TINY_GRID) {
                Ok(grid) => {
                    let res = solver::solve(&tiny, &params, protocol, &solver_cfg)?;
                    let dev = grid
                        .powers()
                        .iter()
                        .zip(res.profile.powers())
                        .map(|(a, b)| (a - b).abs())
                        .fold(0.0, f64::max);
                    checks.push(check(name, dev <= cell, format!("max deviation {dev} (cell {cell})")));
                }
                Err(CoreError::NoGridEquilibrium { grid_points }) => checks.push(CheckResult {
                    name,
                    status: Status::Skipped,
                    detail: format!("no pure equilibrium on the {grid_points}-point grid"),
                }),
                Err(e) => return Err(e.into()),
            }
        }
    }

    let count = |s| checks.iter().filter(|c| c.status == s).count();
    let report = OracleReport {
        passed: count(Status::Pass),
        failed: count(Status::Fail),
        skipped: count(Status::Skipped),
        checks,
    };
    for c in &report.checks {
        let tag = match c.status {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Skipped => "SKIP",
        };
        println!("[{tag}] {}: {}", c.name, c.detail);
    }
    let prov = Provenance::new(cfg.digest(), vec![cfg.channel.seed]);
    let path = out.json("oracle_check.json", &report, &prov)?;
    if report.failed > 0 {
        return Err(CliError::OracleFailure { failed: report.failed });
    }
    Ok(vec![path])
}

#[derive(Serialize)]
struct DecodeSummary {
    protocol: Protocol,
    beta: f64,
    variant: decoding::SicVariant,
    power_rule: decoding::PowerRule,
    target_rate: f64,
    trials: usize,
    decode_seed: u64,
    mean_success: f64,
}

pub fn decode_sim(cfg: &RunConfig, out: &OutDir) -> Result<Vec<PathBuf>, CliError> {
    let pop = population(cfg, cfg.channel.n, cfg.channel.seed)?;
    let params = cfg.params(cfg.protocol.beta)?;
    let protocol = cfg.protocol.kind;
    let d = &cfg.decode;
    let res = solver::solve(&pop, &params, protocol, &cfg.solver_config())?;
    let scenario = DecodingScenario {
        rates: vec![d.target_rate; pop.len()],
        profile: &res.profile,
        pop: &pop,
        params: &params,
        sic_variant: d.variant,
        power_rule: d.power_rule,
        trials: d.trials,
        seed: d.seed,
    };
    let success = decoding::mpr_success_rates(&scenario)?;

    let mut table = Table::new(&["theta", "power", "success_rate"]);
    for (i, &theta) in pop.thetas().iter().enumerate() {
        table.push(vec![theta.into(), res.profile.powers()[i].into(), success[i].into()]);
    }
    let summary = DecodeSummary {
        protocol,
        beta: cfg.protocol.beta,
        variant: d.variant,
        power_rule: d.power_rule,
        target_rate: d.target_rate,
        trials: d.trials,
        decode_seed: d.seed,
        mean_success: mean(success.iter().copied()),
    };
    let prov = Provenance::new(cfg.digest(), vec![cfg.channel.seed, d.seed]);
    let stem = format!("decode_{protocol}_{}", d.variant);
    Ok(vec![
        out.table(&format!("{stem}.csv"), &table, &prov)?,
        out.json(&format!("{stem}.json"), &summary, &prov)?,
    ])
}
