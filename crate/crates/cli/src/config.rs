//! Line-oriented `key = value` experiment files and field inputs given as
//! expressions in `x`, `y` or as `@path` to a FIELD2D file.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use ssl_core::fields::{read_field, Grid, ScalarField};

use crate::failure::Failure;

pub const KEYS: &[&str] = &[
    "alpha",
    "boundary",
    "c0",
    "deformation",
    "domain",
    "envelope_out",
    "eps",
    "f",
    "frozen",
    "grid",
    "h",
    "lambda",
    "load",
    "max_iter",
    "mu",
    "nq",
    "out",
    "tol",
    "u",
    "v",
    "v0",
];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Config {
    values: BTreeMap<String, String>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, Failure> {
        let mut values = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Failure::invalid("config", format!("line {}: expected key = value", n + 1)))?;
            let key = key.trim().replace('-', "_");
            if !KEYS.contains(&key.as_str()) {
                return Err(Failure::invalid(
                    "config",
                    format!("line {}: unknown key `{key}`", n + 1),
                ));
            }
            if values.insert(key.clone(), value.trim().to_string()).is_some() {
                return Err(Failure::invalid(
                    "config",
                    format!("line {}: `{key}` given twice", n + 1),
                ));
            }
        }
        Ok(Config { values })
    }

    pub fn load(path: &Path) -> Result<Self, Failure> {
        if !path.is_file() {
            return Err(Failure::invalid(
                "missing_file",
                format!("config file {} not found", path.display()),
            ));
        }
        let text = std::fs::read_to_string(path).map_err(|e| Failure::io(path, e))?;
        Self::parse(&text)
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    /// Command-line value if present, else the parsed config entry.
    pub fn pick<T: FromStr>(&self, cli: Option<T>, key: &str) -> Result<Option<T>, Failure>
    where
        T::Err: std::fmt::Display,
    {
        if cli.is_some() {
            return Ok(cli);
        }
        self.raw(key)
            .map(|s| {
                s.parse::<T>()
                    .map_err(|e| Failure::invalid("config", format!("`{key} = {s}`: {e}")))
            })
            .transpose()
    }

    pub fn pick_or<T: FromStr>(&self, cli: Option<T>, key: &str, default: T) -> Result<T, Failure>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.pick(cli, key)?.unwrap_or(default))
    }

    pub fn require<T: FromStr>(&self, cli: Option<T>, key: &str) -> Result<T, Failure>
    where
        T::Err: std::fmt::Display,
    {
        self.pick(cli, key)?
            .ok_or_else(|| Failure::invalid("missing_key", format!("`{key}` is required")))
    }
}

/// Comma-separated list of numbers.
#[derive(Debug, Clone, PartialEq)]
pub struct NumList(pub Vec<f64>);

impl FromStr for NumList {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        s.split(',')
            .map(|t| t.trim().parse::<f64>().map_err(|e| format!("`{}`: {e}", t.trim())))
            .collect::<Result<Vec<_>, _>>()
            .map(NumList)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    Square,
    Disk,
}

impl FromStr for Domain {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "square" => Ok(Domain::Square),
            "disk" => Ok(Domain::Disk),
            _ => Err(format!("unknown domain `{s}` (expected square or disk)")),
        }
    }
}

/// `square` is `[0, 1]²`, `disk` the unit disc about the origin.
pub fn make_grid(n: usize, domain: Domain) -> Result<Arc<Grid>, Failure> {
    if n < 5 {
        return Err(Failure::invalid("invalid_grid", format!("grid size {n} is below 5")));
    }
    Ok(match domain {
        Domain::Square => Grid::unit_square(n)?,
        Domain::Disk => Grid::disk(n, 0.0, 0.0, 1.0)?,
    })
}

/// A scalar input: expression or `@file`.
#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    Expr(String),
    File(PathBuf),
}

impl FromStr for Source {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        if let Some(p) = s.strip_prefix('@') {
            return Ok(Source::File(PathBuf::from(p)));
        }
        s.parse::<meval::Expr>().map_err(|e| e.to_string())?;
        Ok(Source::Expr(s.to_string()))
    }
}

impl Source {
    pub fn check_exists(&self) -> Result<(), Failure> {
        match self {
            Source::File(p) if !p.is_file() => Err(Failure::invalid(
                "missing_file",
                format!("input file {} not found", p.display()),
            )),
            _ => Ok(()),
        }
    }

    /// Samples the input on `grid`; a file must carry the same grid.
    pub fn field(&self, grid: &Arc<Grid>, name: &str) -> Result<ScalarField, Failure> {
        match self {
            Source::Expr(s) => {
                let f = s
                    .parse::<meval::Expr>()
                    .and_then(|e| e.bind2("x", "y"))
                    .map_err(|e| Failure::invalid("expression", format!("{name} = {s}: {e}")))?;
                let field = ScalarField::from_fn(grid, &f);
                if let Some(k) = grid.domain_nodes().into_iter().find(|&k| !field.at(k).is_finite()) {
                    let p = grid.point(k);
                    return Err(Failure::invalid(
                        "expression",
                        format!("{name} = {s} is not finite at ({}, {})", p[0], p[1]),
                    ));
                }
                Ok(field)
            }
            Source::File(p) => {
                self.check_exists()?;
                let file = File::open(p).map_err(|e| Failure::io(p, e))?;
                let ff = read_field(&mut BufReader::new(file))?;
                if *ff.grid != **grid {
                    return Err(Failure::invalid(
                        "grid_mismatch",
                        format!("{} does not carry the requested grid", p.display()),
                    ));
                }
                Ok(ScalarField::new(grid.clone(), ff.component(0)?.into_values())?)
            }
        }
    }
}
