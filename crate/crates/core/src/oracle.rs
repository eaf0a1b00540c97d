//! Independent ground truth for the solver and the best-response map.
//!
//! Nothing here calls [`game::best_response`] or the iterative solver; the
//! closed form is the fixed point of the untruncated CDMA map solved by
//! hand, and the grid searches only ever evaluate [`game::utility`].

use crate::channel::Population;
use crate::error::{Error, Result};
use crate::game::{self, Protocol, ProtocolParams, StrategyProfile};

const LN_2: f64 = std::f64::consts::LN_2;

/// Largest population accepted by [`tiny_equilibrium_search`].
pub const TINY_MAX_USERS: usize = 4;
/// Largest grid accepted by [`tiny_equilibrium_search`].
pub const TINY_MAX_GRID: usize = 200;

/// Finite-population CDMA equilibrium when no user is clamped.
///
/// With `m̂ = (1/N) Σ θ_i`, the aggregate solves `z* = (m̂/(β ln 2) − N₀)/(1 + α)`
/// and each user transmits `1/(β ln 2) − (α z* + N₀)/θ_i`. Refuses with
/// [`Error::TruncationBinds`] if any power falls outside the open interval
/// `(e_min, e_max)`.
pub fn cdma_closed_form(pop: &Population, params: &ProtocolParams) -> Result<StrategyProfile> {
    params.validate()?;
    let beta = params.beta.scalar().ok_or(Error::NonScalarBeta)?;
    let inv = 1.0 / (beta * LN_2);
    let m_hat = pop.empirical_mean_gain();
    let z_star = (m_hat * inv - params.n0) / (1.0 + params.alpha);
    let noise = params.alpha * z_star + params.n0;

    let powers = pop
        .thetas()
        .iter()
        .enumerate()
        .map(|(index, &theta)| {
            let power = inv - noise / theta;
            if power > params.e_min && power < params.e_max {
                Ok(power)
            } else {
                Err(Error::TruncationBinds { index, theta, power })
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(StrategyProfile::from_feasible(powers))
}

/// Aggregate interference of the closed-form equilibrium.
pub fn cdma_closed_form_interference(pop: &Population, params: &ProtocolParams) -> Result<f64> {
    let beta = params.beta.scalar().ok_or(Error::NonScalarBeta)?;
    Ok((pop.empirical_mean_gain() / (beta * LN_2) - params.n0) / (1.0 + params.alpha))
}

/// `grid_points` evenly spaced powers spanning `[e_min, e_max]`.
pub fn power_grid(params: &ProtocolParams, grid_points: usize) -> Vec<f64> {
    let step = (params.e_max - params.e_min) / (grid_points - 1) as f64;
    (0..grid_points)
        .map(|k| {
            if k + 1 == grid_points {
                params.e_max
            } else {
                params.e_min + step * k as f64
            }
        })
        .collect()
}

/// Argmax of utility over a uniform grid of `[e_min, e_max]`; ties go to the
/// smaller power.
pub fn brute_force_best_response(
    theta: f64,
    z: f64,
    params: &ProtocolParams,
    user_index: usize,
    grid_points: usize,
) -> f64 {
    assert!(grid_points >= 2, "grid needs at least two points");
    let step = (params.e_max - params.e_min) / (grid_points - 1) as f64;
    let mut best = (params.e_min, game::utility(params.e_min, theta, z, params, user_index));
    for k in 1..grid_points {
        let a = if k + 1 == grid_points {
            params.e_max
        } else {
            params.e_min + step * k as f64
        };
        let u = game::utility(a, theta, z, params, user_index);
        if u > best.1 {
            best = (a, u);
        }
    }
    best.0
}

/// Exhaustive search of the `grid_points^N` power grid for a profile in which
/// every user's action is a grid-optimal response to the interference it
/// induces.
///
/// Grid optimality is tested against the two neighbouring grid points, which
/// is equivalent to global grid optimality because utility is concave in the
/// user's own power. Profiles are visited in lexicographic order and the
/// first equilibrium found is returned.
pub fn tiny_equilibrium_search(
    pop: &Population,
    params: &ProtocolParams,
    protocol: Protocol,
    grid_points: usize,
) -> Result<StrategyProfile> {
    params.validate_for(pop.len())?;
    if pop.len() > TINY_MAX_USERS {
        return Err(Error::InvalidConfig(format!(
            "exhaustive search supports at most {TINY_MAX_USERS} users, got {}",
            pop.len()
        )));
    }
    if !(2..=TINY_MAX_GRID).contains(&grid_points) {
        return Err(Error::InvalidConfig(format!(
            "grid_points must be in 2..={TINY_MAX_GRID}, got {grid_points}"
        )));
    }

    let grid = power_grid(params, grid_points);
    let thetas = pop.thetas();
    let n = thetas.len();
    let mut idx = vec![0usize; n];
    let mut powers = vec![0.0; n];
    let mut z = vec![0.0; n];

    loop {
        for (p, &k) in powers.iter_mut().zip(&idx) {
            *p = grid[k];
        }
        match protocol {
            Protocol::Cdma => z.fill(game::cdma_aggregate(&powers, thetas)),
            Protocol::Noma => game::noma_prefix(&powers, thetas, &mut z),
        }
        let stable = (0..n).all(|i| grid_optimal(&grid, idx[i], thetas[i], z[i], params, i));
        if stable {
            return Ok(StrategyProfile::from_feasible(powers));
        }

        // Odometer increment; the last user varies fastest.
        let mut pos = n;
        loop {
            if pos == 0 {
                return Err(Error::NoGridEquilibrium { grid_points });
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < grid_points {
                break;
            }
            idx[pos] = 0;
        }
    }
}

fn grid_optimal(grid: &[f64], k: usize, theta: f64, z: f64, params: &ProtocolParams, user: usize) -> bool {
    let u = |a: f64| game::utility(a, theta, z, params, user);
    let here = u(grid[k]);
    let slack = 1e-12 * here.abs().max(1.0);
    (k == 0 || here >= u(grid[k - 1]) - slack) && (k + 1 == grid.len() || here >= u(grid[k + 1]) - slack)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::Beta;

    fn params() -> ProtocolParams {
        ProtocolParams::reference(0.1)
    }

    #[test]
    fn worked_two_user_instance() {
        let pop = Population::from_identifiers(vec![10.0, 50.0]).unwrap();
        let p = cdma_closed_form(&pop, &params()).unwrap();
        let z = cdma_closed_form_interference(&pop, &params()).unwrap();
        assert!((z - 342.2469).abs() < 1e-4, "{z}");
        assert!((p.powers()[0] - 5.3708).abs() < 1e-4);
        assert!((p.powers()[1] - 12.6157).abs() < 1e-4);
        let consistency = 0.5 * (10.0 * p.powers()[0] + 50.0 * p.powers()[1]);
        assert!((consistency - z).abs() < 1e-9);
    }

    #[test]
    fn closed_form_refuses_truncation() {
        let pop = Population::from_identifiers(vec![10.0, 50.0]).unwrap();
        let costly = ProtocolParams::reference(100.0);
        assert!(matches!(
            cdma_closed_form(&pop, &costly),
            Err(Error::TruncationBinds { .. })
        ));
        let per_user = params().with_beta(Beta::PerUser(vec![0.1, 0.1]));
        assert!(matches!(cdma_closed_form(&pop, &per_user), Err(Error::NonScalarBeta)));
    }

    #[test]
    fn closed_form_symmetric_population() {
        let pop = Population::from_identifiers(vec![30.0; 5]).unwrap();
        let p = cdma_closed_form(&pop, &params()).unwrap();
        assert!(p.powers().windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn brute_force_edge_cases() {
        let p = ProtocolParams::reference(50.0);
        assert_eq!(brute_force_best_response(0.5, 10.0, &p, 0, 1001), 0.0);
        let p = params();
        let two = brute_force_best_response(10.0, 0.0, &p, 0, 2);
        let (lo, hi) = (
            game::utility(0.0, 10.0, 0.0, &p, 0),
            game::utility(150.0, 10.0, 0.0, &p, 0),
        );
        assert_eq!(two, if hi > lo { 150.0 } else { 0.0 });
    }

    #[test]
    fn single_user_grid_equilibria() {
        let pop = Population::from_identifiers(vec![10.0]).unwrap();
        let grid_points = 151;
        let cell = 150.0 / (grid_points - 1) as f64;

        // a = 14.42695 − (2.5a + 5)/10  ⇒  a = 13.92695 / 1.25.
        let exact = (1.0 / (0.1 * LN_2) - 0.5) / 1.25;
        assert!((exact - 11.14156).abs() < 1e-5);
        let cdma = tiny_equilibrium_search(&pop, &params(), Protocol::Cdma, grid_points).unwrap();
        assert!((cdma.powers()[0] - exact).abs() <= cell);

        let noma = tiny_equilibrium_search(&pop, &params(), Protocol::Noma, grid_points).unwrap();
        let exact = 1.0 / (0.1 * LN_2) - 0.5;
        assert!((noma.powers()[0] - exact).abs() <= cell);
    }

    #[test]
    fn symmetric_pair_gives_symmetric_profile() {
        let pop = Population::from_identifiers(vec![20.0, 20.0]).unwrap();
        let p = tiny_equilibrium_search(&pop, &params(), Protocol::Cdma, 151).unwrap();
        assert_eq!(p.powers()[0], p.powers()[1]);
        // At 101 points the rounded responses of the pair cycle without settling.
        assert!(matches!(
            tiny_equilibrium_search(&pop, &params(), Protocol::Cdma, 101),
            Err(Error::NoGridEquilibrium { grid_points: 101 })
        ));
    }

    #[test]
    fn tiny_search_limits() {
        let pop = Population::from_identifiers(vec![1.0; 5]).unwrap();
        assert!(tiny_equilibrium_search(&pop, &params(), Protocol::Cdma, 10).is_err());
        let pop = Population::from_identifiers(vec![1.0]).unwrap();
        assert!(tiny_equilibrium_search(&pop, &params(), Protocol::Cdma, 201).is_err());
        assert!(tiny_equilibrium_search(&pop, &params(), Protocol::Cdma, 1).is_err());
    }

    #[test]
    fn grid_endpoints_exact() {
        let g = power_grid(&params(), 7);
        assert_eq!(g[0], 0.0);
        assert_eq!(g[6], 150.0);
        assert_eq!(g.len(), 7);
    }
}
