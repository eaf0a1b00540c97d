//! Run configuration: a flat `key = value` file with `[section]` headers.
//!
//! ```text
//! [channel]
//! distribution = rayleigh   # rayleigh | uniform | tabulated
//! sigma = 5
//! n = 1000
//! seed = 1
//!
//! [protocol]
//! kind = cdma
//! alpha = 0.25
//! n0 = 5
//! beta = 0.1
//! e_min = 0
//! e_max = 150
//! ```
//!
//! Every key is optional; omitted keys take the values of `RunConfig::default`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use mfpc_core::channel::{ChannelDistribution, TabulatedDensity};
use mfpc_core::decoding::{PowerRule, SicVariant};
use mfpc_core::game::{Protocol, ProtocolParams};
use mfpc_core::solver::{InitialProfile, NormChoice, SolverConfig};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "distribution", rename_all = "snake_case")]
pub enum DistributionSpec {
    Rayleigh {
        sigma: f64,
    },
    Uniform {
        lo: f64,
        hi: f64,
    },
    /// `path` is resolved against the config file's directory; the digest of
    /// the table contents is part of the config digest.
    Tabulated {
        path: String,
        table_sha256: String,
        #[serde(skip)]
        density: TabulatedDensity,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChannelSection {
    #[serde(flatten)]
    pub distribution: DistributionSpec,
    pub n: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProtocolSection {
    pub kind: Protocol,
    pub alpha: f64,
    pub n0: f64,
    pub beta: f64,
    pub e_min: f64,
    pub e_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InitSpec {
    Midpoint,
    Constant(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverSection {
    pub tol: f64,
    pub max_iter: usize,
    pub init: InitSpec,
    pub norm: NormChoice,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSection {
    pub betas: Vec<f64>,
    pub seeds: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecodeSection {
    pub trials: usize,
    pub variant: SicVariant,
    pub target_rate: f64,
    pub power_rule: PowerRule,
    /// Defaults to the channel seed.
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub channel: ChannelSection,
    pub protocol: ProtocolSection,
    pub solver: SolverSection,
    pub sweep: SweepSection,
    pub decode: DecodeSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            channel: ChannelSection {
                distribution: DistributionSpec::Rayleigh { sigma: 5.0 },
                n: 1000,
                seed: 1,
            },
            protocol: ProtocolSection {
                kind: Protocol::Cdma,
                alpha: 0.25,
                n0: 5.0,
                beta: 0.1,
                e_min: 0.0,
                e_max: 150.0,
            },
            solver: SolverSection {
                tol: 1e-10,
                max_iter: 10_000,
                init: InitSpec::Midpoint,
                norm: NormChoice::Auto,
            },
            sweep: SweepSection {
                betas: vec![0.1, 0.5, 1.0, 5.0],
                seeds: (0..10).collect(),
            },
            decode: DecodeSection {
                trials: 1000,
                variant: SicVariant::Strict,
                target_rate: 1.0,
                power_rule: PowerRule::Fixed,
                seed: 1,
            },
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub protocol: Option<Protocol>,
    pub betas: Option<Vec<f64>>,
    pub seeds: Option<Vec<u64>>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub trials: Option<usize>,
    pub variant: Option<SicVariant>,
}

impl RunConfig {
    /// Reads `path`, or the reference configuration when `path` is `None`.
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, &base)
    }

    /// Parses config text; relative table paths resolve against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self, CliError> {
        let sections = split_sections(text)?;
        let mut cfg = Self::default();
        let mut decode_seed = None;

        for (section, entries) in &sections {
            let mut e = Entries {
                section,
                entries,
                used: Vec::new(),
            };
            match section.as_str() {
                "channel" => {
                    cfg.channel.n = e.parse("n")?.unwrap_or(cfg.channel.n);
                    cfg.channel.seed = e.parse("seed")?.unwrap_or(cfg.channel.seed);
                    let kind = e.get("distribution").unwrap_or("rayleigh").to_string();
                    cfg.channel.distribution = match kind.as_str() {
                        "rayleigh" => DistributionSpec::Rayleigh {
                            sigma: e.parse("sigma")?.unwrap_or(5.0),
                        },
                        "uniform" => DistributionSpec::Uniform {
                            lo: e.require("lo")?,
                            hi: e.require("hi")?,
                        },
                        "tabulated" => {
                            let rel: String = e.require("table")?;
                            let full: PathBuf = base.join(&rel);
                            let bytes = std::fs::read(&full).map_err(|err| {
                                CliError::Config(format!("cannot read table {}: {err}", full.display()))
                            })?;
                            let text = String::from_utf8(bytes.clone())
                                .map_err(|_| CliError::Config(format!("table {} is not UTF-8", full.display())))?;
                            DistributionSpec::Tabulated {
                                path: rel,
                                table_sha256: hex::encode(Sha256::digest(&bytes)),
                                density: TabulatedDensity::parse(&text)?,
                            }
                        }
                        other => return Err(CliError::Config(format!(
                            "[channel] distribution: unknown value {other:?} (expected rayleigh, uniform or tabulated)"
                        ))),
                    };
                }
                "protocol" => {
                    let p = &mut cfg.protocol;
                    p.kind = e.parse("kind")?.unwrap_or(p.kind);
                    p.alpha = e.parse("alpha")?.unwrap_or(p.alpha);
                    p.n0 = e.parse("n0")?.unwrap_or(p.n0);
                    p.beta = e.parse("beta")?.unwrap_or(p.beta);
                    p.e_min = e.parse("e_min")?.unwrap_or(p.e_min);
                    p.e_max = e.parse("e_max")?.unwrap_or(p.e_max);
                }
                "solver" => {
                    let s = &mut cfg.solver;
                    s.tol = e.parse("tol")?.unwrap_or(s.tol);
                    s.max_iter = e.parse("max_iter")?.unwrap_or(s.max_iter);
                    if let Some(init) = e.get("init") {
                        s.init = parse_init(init)?;
                    }
                    if let Some(norm) = e.get("norm") {
                        s.norm = parse_norm(norm)?;
                    }
                }
                "sweep" => {
                    if let Some(v) = e.get("betas") {
                        cfg.sweep.betas =
                            parse_f64_list(v).map_err(|m| CliError::Config(format!("[sweep] betas: {m}")))?;
                    }
                    if let Some(v) = e.get("seeds") {
                        cfg.sweep.seeds =
                            parse_seed_list(v).map_err(|m| CliError::Config(format!("[sweep] seeds: {m}")))?;
                    }
                }
                "decode" => {
                    let d = &mut cfg.decode;
                    d.trials = e.parse("trials")?.unwrap_or(d.trials);
                    d.variant = e.parse("variant")?.unwrap_or(d.variant);
                    d.target_rate = e.parse("target_rate")?.unwrap_or(d.target_rate);
                    if let Some(rule) = e.get("power_rule") {
                        d.power_rule = match rule {
                            "fixed" => PowerRule::Fixed,
                            "interpolated" => PowerRule::Interpolated,
                            other => {
                                return Err(CliError::Config(format!(
                                    "[decode] power_rule: unknown value {other:?} (expected fixed or interpolated)"
                                )))
                            }
                        };
                    }
                    decode_seed = e.parse("seed")?;
                }
                other => return Err(CliError::Config(format!("unknown section [{other}]"))),
            }
            e.reject_unused()?;
        }
        cfg.decode.seed = decode_seed.unwrap_or(cfg.channel.seed);
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<(), CliError> {
        if let Some(p) = o.protocol {
            self.protocol.kind = p;
        }
        if let Some(betas) = &o.betas {
            self.sweep.betas.clone_from(betas);
            self.protocol.beta = betas[0];
        }
        if let Some(seeds) = &o.seeds {
            self.sweep.seeds.clone_from(seeds);
            self.channel.seed = seeds[0];
            self.decode.seed = seeds[0];
        }
        if let Some(tol) = o.tol {
            self.solver.tol = tol;
        }
        if let Some(max_iter) = o.max_iter {
            self.solver.max_iter = max_iter;
        }
        if let Some(trials) = o.trials {
            self.decode.trials = trials;
        }
        if let Some(variant) = o.variant {
            self.decode.variant = variant;
        }
        Ok(())
    }

    /// Checks that everything can be turned into library types.
    pub fn validate(&self) -> Result<(), CliError> {
        self.distribution()?.validate()?;
        if self.channel.n == 0 {
            return Err(CliError::Config("[channel] n must be at least 1".into()));
        }
        self.params(self.protocol.beta)?;
        for &beta in &self.sweep.betas {
            self.params(beta)?;
        }
        if self.sweep.betas.is_empty() || self.sweep.seeds.is_empty() {
            return Err(CliError::Config("[sweep] betas and seeds must be nonempty".into()));
        }
        self.solver_config().validate()?;
        Ok(())
    }

    pub fn distribution(&self) -> Result<ChannelDistribution, CliError> {
        Ok(match &self.channel.distribution {
            DistributionSpec::Rayleigh { sigma } => ChannelDistribution::RayleighSquared { sigma: *sigma },
            DistributionSpec::Uniform { lo, hi } => ChannelDistribution::BoundedUniform { lo: *lo, hi: *hi },
            DistributionSpec::Tabulated { density, .. } => ChannelDistribution::Tabulated(density.clone()),
        })
    }

    pub fn params(&self, beta: f64) -> Result<ProtocolParams, CliError> {
        let p = &self.protocol;
        Ok(ProtocolParams::new(
            p.alpha,
            p.n0,
            mfpc_core::Beta::Scalar(beta),
            p.e_min,
            p.e_max,
        )?)
    }

    pub fn solver_config(&self) -> SolverConfig {
        let s = &self.solver;
        let initial = match s.init {
            InitSpec::Midpoint => InitialProfile::MidpointOfE,
            InitSpec::Constant(a) => InitialProfile::Constant(a),
        };
        SolverConfig {
            norm: s.norm,
            ..SolverConfig::default()
        }
        .with_tol(s.tol)
        .with_max_iter(s.max_iter)
        .with_initial(initial)
    }

    /// SHA-256 of the canonical JSON form of the resolved configuration, so
    /// command-line overrides and table contents are covered.
    pub fn digest(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serialises");
        hex::encode(Sha256::digest(&canonical))
    }
}

type Sections = Vec<(String, BTreeMap<String, (usize, String)>)>;

fn split_sections(text: &str) -> Result<Sections, CliError> {
    let mut sections: Sections = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            let name = name.trim().to_string();
            if sections.iter().any(|(s, _)| *s == name) {
                return Err(CliError::Config(format!("line {lineno}: duplicate section [{name}]")));
            }
            sections.push((name, BTreeMap::new()));
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(CliError::Config(format!(
                "line {lineno}: expected `key = value`, got {line:?}"
            )));
        };
        let Some((_, entries)) = sections.last_mut() else {
            return Err(CliError::Config(format!("line {lineno}: key outside of any [section]")));
        };
        let key = key.trim().to_string();
        if entries
            .insert(key.clone(), (lineno, value.trim().to_string()))
            .is_some()
        {
            return Err(CliError::Config(format!("line {lineno}: duplicate key {key:?}")));
        }
    }
    Ok(sections)
}

struct Entries<'a> {
    section: &'a str,
    entries: &'a BTreeMap<String, (usize, String)>,
    used: Vec<&'static str>,
}

impl Entries<'_> {
    fn get(&mut self, key: &'static str) -> Option<&str> {
        self.used.push(key);
        self.entries.get(key).map(|(_, v)| v.as_str())
    }

    fn parse<T: std::str::FromStr>(&mut self, key: &'static str) -> Result<Option<T>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        self.used.push(key);
        match self.entries.get(key) {
            None => Ok(None),
            Some((line, v)) => v.parse().map(Some).map_err(|e| {
                CliError::Config(format!(
                    "line {line}: [{}] {key}: cannot parse {v:?}: {e}",
                    self.section
                ))
            }),
        }
    }

    fn require<T: std::str::FromStr>(&mut self, key: &'static str) -> Result<T, CliError>
    where
        T::Err: std::fmt::Display,
    {
        self.parse(key)?
            .ok_or_else(|| CliError::Config(format!("[{}] missing required key {key:?}", self.section)))
    }

    fn reject_unused(&self) -> Result<(), CliError> {
        match self.entries.iter().find(|(k, _)| !self.used.contains(&k.as_str())) {
            Some((k, (line, _))) => Err(CliError::Config(format!(
                "line {line}: unknown key {k:?} in [{}]",
                self.section
            ))),
            None => Ok(()),
        }
    }
}

fn parse_init(v: &str) -> Result<InitSpec, CliError> {
    match v {
        "midpoint" => Ok(InitSpec::Midpoint),
        other => other
            .parse()
            .map(InitSpec::Constant)
            .map_err(|_| CliError::Config(format!("[solver] init: expected `midpoint` or a power, got {other:?}"))),
    }
}

fn parse_norm(v: &str) -> Result<NormChoice, CliError> {
    match v {
        "auto" => Ok(NormChoice::Auto),
        "weighted_l1" => Ok(NormChoice::WeightedL1),
        "sup" => Ok(NormChoice::SupNorm),
        other => Err(CliError::Config(format!(
            "[solver] norm: expected auto, weighted_l1 or sup, got {other:?}"
        ))),
    }
}

/// Comma-separated floats.
pub fn parse_f64_list(v: &str) -> Result<Vec<f64>, String> {
    let out = v
        .split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|e| format!("{s:?}: {e}")))
        .collect::<Result<Vec<_>, _>>()?;
    if out.is_empty() {
        return Err("empty list".into());
    }
    Ok(out)
}

/// Comma-separated seeds; `a..b` expands to the half-open range.
pub fn parse_seed_list(v: &str) -> Result<Vec<u64>, String> {
    let mut out = Vec::new();
    for item in v.split(',').map(str::trim) {
        let num = |s: &str| s.trim().parse::<u64>().map_err(|e| format!("{s:?}: {e}"));
        match item.split_once("..") {
            Some((a, b)) => {
                let (a, b) = (num(a)?, num(b)?);
                if a >= b {
                    return Err(format!("empty range {item:?}"));
                }
                out.extend(a..b);
            }
            None => out.push(num(item)?),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<RunConfig, CliError> {
        RunConfig::parse(text, Path::new("."))
    }

    #[test]
    fn empty_file_is_reference() {
        assert_eq!(parse("").unwrap(), RunConfig::default());
    }

    #[test]
    fn shipped_reference_config_matches_defaults() {
        let cfg = parse(include_str!("../../../configs/reference.cfg")).unwrap();
        assert_eq!(cfg, RunConfig::default());
    }

    #[test]
    fn full_file() {
        let cfg = parse(
            "# comment\n[channel]\ndistribution = uniform\nlo = 10\nhi = 50 # inline\nn = 20\nseed = 3\n\
             [protocol]\nkind = noma\nbeta = 0.5\n[solver]\ninit = 75\nnorm = sup\n\
             [sweep]\nbetas = 0.1, 1\nseeds = 0..3, 9\n[decode]\nvariant = improved\npower_rule = interpolated\n",
        )
        .unwrap();
        assert_eq!(
            cfg.channel.distribution,
            DistributionSpec::Uniform { lo: 10.0, hi: 50.0 }
        );
        assert_eq!(cfg.channel.n, 20);
        assert_eq!(cfg.protocol.kind, Protocol::Noma);
        assert_eq!(cfg.solver.init, InitSpec::Constant(75.0));
        assert_eq!(cfg.solver.norm, NormChoice::SupNorm);
        assert_eq!(cfg.sweep.seeds, vec![0, 1, 2, 9]);
        assert_eq!(cfg.decode.seed, 3);
        assert_eq!(cfg.decode.variant, SicVariant::Improved);
    }

    #[test]
    fn rejects_bad_input() {
        for bad in [
            "alpha = 1",
            "[nope]\n",
            "[protocol]\nalpha = x\n",
            "[protocol]\ngamma = 1\n",
            "[protocol]\nalpha = 1\nalpha = 2\n",
            "[channel]\ndistribution = uniform\nlo = 1\n",
            "[channel]\ndistribution = tabulated\ntable = does-not-exist.txt\n",
            "[protocol]\njust text\n",
        ] {
            assert!(matches!(parse(bad), Err(CliError::Config(_))), "{bad}");
        }
    }

    #[test]
    fn digest_tracks_overrides() {
        let mut cfg = RunConfig::default();
        let before = cfg.digest();
        assert_eq!(before, RunConfig::default().digest());
        cfg.apply(&Overrides {
            betas: Some(vec![0.5]),
            ..Overrides::default()
        })
        .unwrap();
        assert_ne!(before, cfg.digest());
    }

    #[test]
    fn seed_lists() {
        assert_eq!(parse_seed_list("1, 2,5..7").unwrap(), vec![1, 2, 5, 6]);
        assert!(parse_seed_list("3..3").is_err());
        assert!(parse_seed_list("x").is_err());
    }
}
