//! Channel-gain distributions and sampled user populations.
//!
//! A user's identifier is its squared channel gain `θ = |h|²`. Populations
//! are stored sorted ascending; every downstream consumer relies on that
//! order (NOMA interference is a prefix sum over it).

use std::fmt;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng;

/// Distribution of the squared channel gain `θ`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ChannelDistribution {
    /// `|h|²` under Rayleigh fading: exponential with density
    /// `(1/σ²)·exp(−x/σ²)` and mean `σ²`.
    RayleighSquared { sigma: f64 },
    /// Uniform on `[lo, hi]` with `0 < lo < hi`.
    BoundedUniform { lo: f64, hi: f64 },
    /// Piecewise-linear density read from a table.
    Tabulated(TabulatedDensity),
}

impl ChannelDistribution {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ChannelDistribution::RayleighSquared { sigma } => {
                if !(sigma.is_finite() && sigma > 0.0) {
                    return Err(Error::InvalidDistribution(format!(
                        "rayleigh scale must be positive, got {sigma}"
                    )));
                }
            }
            ChannelDistribution::BoundedUniform { lo, hi } => {
                if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && lo < hi) {
                    return Err(Error::InvalidDistribution(format!(
                        "uniform bounds must satisfy 0 < lo < hi < inf, got [{lo}, {hi}]"
                    )));
                }
            }
            // Checked at construction.
            ChannelDistribution::Tabulated(_) => {}
        }
        Ok(())
    }

    /// `E[θ]`: closed form for the parametric families, exact integral of the
    /// interpolated density for tables.
    pub fn first_moment(&self) -> Result<f64> {
        self.validate()?;
        Ok(match self {
            ChannelDistribution::RayleighSquared { sigma } => sigma * sigma,
            ChannelDistribution::BoundedUniform { lo, hi } => 0.5 * (lo + hi),
            ChannelDistribution::Tabulated(t) => t.mean(),
        })
    }

    /// One strictly positive draw. Exact zeros are redrawn.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        loop {
            let x = match self {
                ChannelDistribution::RayleighSquared { sigma } => {
                    let e: f64 = Exp1.sample(rng);
                    sigma * sigma * e
                }
                ChannelDistribution::BoundedUniform { lo, hi } => rng.random_range(*lo..=*hi),
                ChannelDistribution::Tabulated(t) => t.inverse_cdf(rng.random::<f64>()),
            };
            if x > 0.0 {
                return x;
            }
        }
    }
}

impl fmt::Display for ChannelDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChannelDistribution::RayleighSquared { sigma } => write!(f, "rayleigh_squared(sigma={sigma})"),
            ChannelDistribution::BoundedUniform { lo, hi } => write!(f, "bounded_uniform(lo={lo}, hi={hi})"),
            ChannelDistribution::Tabulated(t) => write!(
                f,
                "tabulated({} points on [{}, {}])",
                t.grid.len(),
                t.grid[0],
                t.grid[t.grid.len() - 1]
            ),
        }
    }
}

/// Piecewise-linear density on a strictly increasing grid.
///
/// Densities are renormalised at construction so that the interpolant
/// integrates to one; a table truncated at a finite upper edge therefore
/// describes the conditional distribution on its support.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TabulatedDensity {
    grid: Vec<f64>,
    density: Vec<f64>,
    #[serde(skip)]
    cdf: Vec<f64>,
}

impl TabulatedDensity {
    pub fn new(grid: Vec<f64>, density: Vec<f64>) -> Result<Self> {
        if grid.len() != density.len() {
            return Err(Error::InvalidDistribution(format!(
                "grid has {} points but density has {}",
                grid.len(),
                density.len()
            )));
        }
        if grid.len() < 2 {
            return Err(Error::InvalidDistribution("table needs at least two points".into()));
        }
        if !grid.iter().all(|x| x.is_finite()) || grid[0] < 0.0 {
            return Err(Error::InvalidDistribution("grid must be finite and nonnegative".into()));
        }
        if grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidDistribution("grid must be strictly increasing".into()));
        }
        if density.iter().any(|d| !d.is_finite() || *d < 0.0) {
            return Err(Error::InvalidDistribution(
                "density must be finite and nonnegative".into(),
            ));
        }

        let mut cdf = Vec::with_capacity(grid.len());
        cdf.push(0.0);
        let mut acc = 0.0;
        for i in 1..grid.len() {
            acc += 0.5 * (grid[i] - grid[i - 1]) * (density[i] + density[i - 1]);
            cdf.push(acc);
        }
        if acc <= 0.0 || !acc.is_finite() {
            return Err(Error::InvalidDistribution("density has zero mass".into()));
        }
        let density = density.into_iter().map(|d| d / acc).collect();
        for c in &mut cdf {
            *c /= acc;
        }
        Ok(Self { grid, density, cdf })
    }

    /// Parses two whitespace-separated columns `grid density`. Blank lines
    /// and anything after `#` are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut grid = Vec::new();
        let mut density = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split_whitespace().collect();
            if cols.len() != 2 {
                return Err(Error::TableParse {
                    line: lineno + 1,
                    reason: format!("expected 2 columns, found {}", cols.len()),
                });
            }
            let parse = |s: &str| {
                s.parse::<f64>().map_err(|e| Error::TableParse {
                    line: lineno + 1,
                    reason: format!("{s:?}: {e}"),
                })
            };
            grid.push(parse(cols[0])?);
            density.push(parse(cols[1])?);
        }
        Self::new(grid, density)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    /// Normalised density values at the grid points.
    pub fn density(&self) -> &[f64] {
        &self.density
    }

    /// Integral of the interpolated density (1 up to rounding).
    pub fn total_mass(&self) -> f64 {
        self.cdf[self.cdf.len() - 1]
    }

    fn mean(&self) -> f64 {
        self.grid
            .windows(2)
            .zip(self.density.windows(2))
            .map(|(x, f)| {
                let h = x[1] - x[0];
                h / 6.0 * (x[0] * (2.0 * f[0] + f[1]) + x[1] * (f[0] + 2.0 * f[1]))
            })
            .sum()
    }

    fn inverse_cdf(&self, u: f64) -> f64 {
        let target = u * self.total_mass();
        // First segment whose upper cdf reaches the target.
        let k = self.cdf.partition_point(|&c| c < target).clamp(1, self.grid.len() - 1);
        let (x0, x1) = (self.grid[k - 1], self.grid[k]);
        let (f0, f1) = (self.density[k - 1], self.density[k]);
        let h = x1 - x0;
        let r = (target - self.cdf[k - 1]).max(0.0) / h;
        // Solve f0·t + (f1 − f0)·t²/2 = r on [0, 1] in cancellation-free form.
        let disc = (f0 * f0 + 2.0 * (f1 - f0) * r).max(0.0);
        let denom = f0 + disc.sqrt();
        let t = if denom > 0.0 { 2.0 * r / denom } else { 0.0 };
        x0 + h * t.clamp(0.0, 1.0)
    }
}

/// A finite user population: identifiers sorted ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    identifiers: Vec<f64>,
    seed: Option<u64>,
    source: Option<ChannelDistribution>,
}

impl Population {
    /// `n` i.i.d. draws from `dist`, sorted. Deterministic in `(dist, n, seed)`.
    pub fn sample(dist: &ChannelDistribution, n: usize, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyPopulation);
        }
        dist.validate()?;
        let mut rng = rng::stream(seed, rng::streams::POPULATION);
        let draws = (0..n).map(|_| dist.draw(&mut rng)).collect();
        let mut pop = Self::from_identifiers(draws)?;
        pop.seed = Some(seed);
        pop.source = Some(dist.clone());
        Ok(pop)
    }

    /// Population from explicit identifiers. The input is sorted with a
    /// stable sort, so tied identifiers keep their input order.
    pub fn from_identifiers(mut identifiers: Vec<f64>) -> Result<Self> {
        if identifiers.is_empty() {
            return Err(Error::EmptyPopulation);
        }
        if let Some(&bad) = identifiers.iter().find(|x| !(x.is_finite() && **x > 0.0)) {
            return Err(Error::InvalidIdentifier(bad));
        }
        identifiers.sort_by(f64::total_cmp);
        Ok(Self {
            identifiers,
            seed: None,
            source: None,
        })
    }

    pub fn thetas(&self) -> &[f64] {
        &self.identifiers
    }

    pub fn len(&self) -> usize {
        self.identifiers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.identifiers.is_empty()
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn source(&self) -> Option<&ChannelDistribution> {
        self.source.as_ref()
    }

    /// Sample mean `(1/N) Σ θ_i`.
    pub fn empirical_mean_gain(&self) -> f64 {
        self.identifiers.iter().sum::<f64>() / self.len() as f64
    }

    pub fn is_sorted(&self) -> bool {
        self.identifiers.windows(2).all(|w| w[0] <= w[1])
    }
}
