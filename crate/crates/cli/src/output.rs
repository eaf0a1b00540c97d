//! Deterministic table and summary writers.
//!
//! Tables are CSV with a block of `#` comment lines followed by one header
//! row. Summaries are single JSON documents. Both carry the same provenance
//! fields so an output file can be traced back to the run that made it.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use mfpc_core::rng::RNG_ALGORITHM;
use serde::Serialize;

use crate::error::CliError;

pub const GENERATOR: &str = concat!("mfpc ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub generator: &'static str,
    pub config_sha256: String,
    pub rng: &'static str,
    pub seeds: Vec<u64>,
}

impl Provenance {
    pub fn new(config_sha256: String, seeds: Vec<u64>) -> Self {
        Self {
            generator: GENERATOR,
            config_sha256,
            rng: RNG_ALGORITHM,
            seeds,
        }
    }

    fn comment_block(&self) -> String {
        let seeds: Vec<String> = self.seeds.iter().map(u64::to_string).collect();
        format!(
            "# generator: {}\n# config_sha256: {}\n# rng: {}\n# seeds: {}\n",
            self.generator,
            self.config_sha256,
            self.rng,
            seeds.join(",")
        )
    }
}

/// A CSV cell.
pub enum Cell {
    F(f64),
    U(u64),
    S(String),
    Null,
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::F(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::U(v as u64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::U(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::S(v.to_string())
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Null, Cell::F)
    }
}

fn render(cell: &Cell, out: &mut String) {
    // `{}` on f64 is the shortest representation that round-trips.
    match cell {
        Cell::F(v) => write!(out, "{v}"),
        Cell::U(v) => write!(out, "{v}"),
        Cell::S(s) => {
            debug_assert!(!s.contains([',', '"', '\n']));
            out.push_str(s);
            Ok(())
        }
        Cell::Null => Ok(()),
    }
    .expect("writing to a String cannot fail");
}

pub struct Table {
    header: &'static [&'static str],
    rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: &'static [&'static str]) -> Self {
        Self {
            header,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.header.len(), "row width");
        self.rows.push(row);
    }

    pub fn to_csv(&self, prov: &Provenance) -> String {
        let mut out = prov.comment_block();
        out.push_str(&self.header.join(","));
        out.push('\n');
        for row in &self.rows {
            for (k, cell) in row.iter().enumerate() {
                if k > 0 {
                    out.push(',');
                }
                render(cell, &mut out);
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Serialize)]
struct Document<'a, T: Serialize> {
    #[serde(flatten)]
    provenance: &'a Provenance,
    #[serde(flatten)]
    body: &'a T,
}

pub struct OutDir(PathBuf);

impl OutDir {
    pub fn create(path: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(path).map_err(|source| CliError::Write {
            path: path.display().to_string(),
            source,
        })?;
        Ok(Self(path.to_path_buf()))
    }

    fn write(&self, name: &str, contents: &str) -> Result<PathBuf, CliError> {
        let path = self.0.join(name);
        fs::write(&path, contents).map_err(|source| CliError::Write {
            path: path.display().to_string(),
            source,
        })?;
        Ok(path)
    }

    pub fn table(&self, name: &str, table: &Table, prov: &Provenance) -> Result<PathBuf, CliError> {
        self.write(name, &table.to_csv(prov))
    }

    pub fn json<T: Serialize>(&self, name: &str, body: &T, prov: &Provenance) -> Result<PathBuf, CliError> {
        let mut text = serde_json::to_string_pretty(&Document { provenance: prov, body }).expect("summary serialises");
        text.push('\n');
        self.write(name, &text)
    }
}
