//! Run configuration: a TOML document with `[space]`, `[system]`,
//! `[epsilon]` and `[params]` tables plus a few top-level keys.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::conley::SweepOptions;
use crate::error::{Error, Result};
use crate::lyapunov::Extension;
use crate::space::{Boundary, MetricKind};
use crate::systems::Escape;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pipeline {
    ChainRecurrence,
    Components,
    ConleyDecomposition,
    RegionLyapunov,
    GlobalLyapunov,
    FlowLyapunov,
    Verify,
}

impl Pipeline {
    pub fn name(self) -> &'static str {
        match self {
            Pipeline::ChainRecurrence => "chain-recurrence",
            Pipeline::Components => "components",
            Pipeline::ConleyDecomposition => "conley-decomposition",
            Pipeline::RegionLyapunov => "region-lyapunov",
            Pipeline::GlobalLyapunov => "global-lyapunov",
            Pipeline::FlowLyapunov => "flow-lyapunov",
            Pipeline::Verify => "verify",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpaceKind {
    #[default]
    Grid,
    /// Distance matrix from a header-free CSV.
    Finite,
    /// Coordinates from a CSV, one point per row.
    Points,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpaceConfig {
    pub kind: SpaceKind,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub cells: Vec<usize>,
    /// Put the outermost cell centers on `lo` and `hi` instead of the cell faces.
    pub centered: bool,
    pub metric: MetricKind,
    /// Per axis `[low face, high face]`; `domain` when omitted.
    pub boundary: Vec<[Boundary; 2]>,
    pub matrix: Option<PathBuf>,
    pub points: Option<PathBuf>,
}

impl Default for SpaceConfig {
    fn default() -> Self {
        SpaceConfig {
            kind: SpaceKind::Grid,
            lo: vec![0.0],
            hi: vec![1.0],
            cells: vec![200],
            centered: false,
            metric: MetricKind::Euclidean,
            boundary: Vec::new(),
            matrix: None,
            points: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SystemKind {
    #[default]
    Builtin,
    Ode,
    Map,
    Table,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    pub kind: SystemKind,
    pub name: String,
    pub param: Option<f64>,
    /// CSV of `point-index,image-index` rows.
    pub table: Option<PathBuf>,
    /// Discretization period `T` for continuous systems.
    pub period: f64,
    pub escape: Escape,
    pub semiflow: bool,
    /// Iterate of a discrete system to use.
    pub power: usize,
}

impl Default for SystemConfig {
    fn default() -> Self {
        SystemConfig {
            kind: SystemKind::Builtin,
            name: "logistic".into(),
            param: None,
            table: None,
            period: 1.0,
            escape: Escape::Absorb,
            semiflow: false,
            power: 1,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpsilonConfig {
    /// `ε₀`; a quarter of the space diameter when nothing is given.
    pub constant: Option<f64>,
    /// `x`, `y`, `|x|` or `|y|`, read as `offset + slope · formula`.
    pub formula: Option<String>,
    pub offset: Option<f64>,
    pub slope: Option<f64>,
    /// CSV of per-point values, last column read.
    pub values: Option<PathBuf>,
    /// Ladder depth; deepest level above the snap bound when omitted.
    pub levels: Option<usize>,
    /// Rescale `ε₀` so the ladder floor sits just above the snap bound.
    pub snap_floor: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegionConfig {
    /// Exclusive lower corner.
    pub lo: Vec<f64>,
    /// Inclusive upper corner.
    pub hi: Vec<f64>,
    pub points: Vec<usize>,
    /// Include the outside state.
    pub outside: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    pub horizon: f64,
    pub step: f64,
    pub k_max: usize,
    pub j_max: usize,
    pub seeds: Option<usize>,
    pub region_cap: usize,
    /// Seeds tried by the decomposition.
    pub budget: usize,
    pub nodes: usize,
    pub extension: Extension,
    pub region: Option<RegionConfig>,
    /// Field CSV read by the verify pipeline.
    pub field: Option<PathBuf>,
    pub trajectories: usize,
    pub dt: f64,
    pub t_end: f64,
    pub tolerance: f64,
}

impl Default for Params {
    fn default() -> Self {
        let sweep = SweepOptions::default();
        Params {
            horizon: sweep.horizon,
            step: sweep.step,
            k_max: 20,
            j_max: 20,
            seeds: None,
            region_cap: 20,
            budget: 64,
            nodes: 32,
            extension: Extension::Linear,
            region: None,
            field: None,
            trajectories: 20,
            dt: 0.1,
            t_end: 5.0,
            tolerance: 1e-6,
        }
    }
}

impl Params {
    pub fn sweep(&self) -> SweepOptions {
        SweepOptions { horizon: self.horizon, step: self.step }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub pipeline: Pipeline,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub space: SpaceConfig,
    #[serde(default)]
    pub system: SystemConfig,
    #[serde(default)]
    pub epsilon: EpsilonConfig,
    #[serde(default)]
    pub params: Params,
}

const TOP: &[&str] = &["pipeline", "out", "seed", "space", "system", "epsilon", "params"];
const SPACE: &[&str] = &["kind", "lo", "hi", "cells", "centered", "metric", "boundary", "matrix", "points"];
const SYSTEM: &[&str] = &["kind", "name", "param", "table", "period", "escape", "semiflow", "power"];
const EPSILON: &[&str] = &["constant", "formula", "offset", "slope", "values", "levels", "snap_floor"];
const PARAMS: &[&str] = &[
    "horizon", "step", "k_max", "j_max", "seeds", "region_cap", "budget", "nodes", "extension", "region", "field",
    "trajectories", "dt", "t_end", "tolerance",
];
const REGION: &[&str] = &["lo", "hi", "points", "outside"];

fn known_keys(path: &str) -> Option<&'static [&'static str]> {
    match path {
        "" => Some(TOP),
        "space" => Some(SPACE),
        "system" => Some(SYSTEM),
        "epsilon" => Some(EPSILON),
        "params" => Some(PARAMS),
        "params.region" => Some(REGION),
        _ => None,
    }
}

fn suggest(key: &str, known: &[&str]) -> Option<String> {
    known
        .iter()
        .map(|k| (strsim::damerau_levenshtein(key, k), *k))
        .filter(|(d, k)| *d <= 2.max(k.len() / 3))
        .min()
        .map(|(_, k)| k.to_string())
}

fn check_keys(table: &toml::Table, path: &str) -> Result<()> {
    let Some(known) = known_keys(path) else { return Ok(()) };
    for (key, value) in table {
        if !known.contains(&key.as_str()) {
            let place = if path.is_empty() { "top level".to_string() } else { format!("[{path}]") };
            let hint = match suggest(key, known) {
                Some(s) => format!("; did you mean `{s}`?"),
                None => format!("; expected one of {}", known.join(", ")),
            };
            return Err(Error::Config(format!("unknown key `{key}` at {place}{hint}")));
        }
        if let toml::Value::Table(t) = value {
            let sub = if path.is_empty() { key.clone() } else { format!("{path}.{key}") };
            check_keys(t, &sub)?;
        }
    }
    Ok(())
}

/// Parses `key=value` where the value is TOML, or a bare string otherwise.
pub fn parse_override(arg: &str) -> Result<(String, toml::Value)> {
    let (key, raw) = arg
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{arg}` is not of the form key=value")))?;
    let key = key.trim();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(Error::Config(format!("override `{arg}` has an empty key")));
    }
    let value = match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap(),
        Err(_) => toml::Value::String(raw.trim().to_string()),
    };
    Ok((key.to_string(), value))
}

fn apply_override(doc: &mut toml::Table, key: &str, value: toml::Value) -> Result<()> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().unwrap();
    let mut t = doc;
    for p in parts {
        let entry = t.entry(p).or_insert_with(|| toml::Value::Table(Default::default()));
        t = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override `{key}`: `{p}` is not a table")))?;
    }
    t.insert(last.to_string(), value);
    Ok(())
}

fn resolve(base: &Path, p: &mut Option<PathBuf>) -> Result<()> {
    if let Some(path) = p {
        if path.is_relative() {
            *path = base.join(&*path);
        }
        if !path.is_file() {
            return Err(Error::Config(format!("missing file: {}", path.display())));
        }
    }
    Ok(())
}

fn range(ok: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Config(msg()))
    }
}

impl RunConfig {
    /// Parses and validates a configuration; relative paths resolve against `base`.
    pub fn parse(text: &str, base: &Path, overrides: &[String]) -> Result<RunConfig> {
        let mut doc: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))?;
        for o in overrides {
            let (k, v) = parse_override(o)?;
            apply_override(&mut doc, &k, v)?;
        }
        check_keys(&doc, "")?;
        let mut cfg: RunConfig = toml::Value::Table(doc)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))?;
        cfg.validate(base)?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| Error::Io { path: path.display().to_string(), source })?;
        let base = path.parent().unwrap_or(Path::new("."));
        RunConfig::parse(&text, base, overrides)
    }

    /// The effective configuration as TOML.
    pub fn echo(&self) -> String {
        toml::to_string(self).unwrap_or_default()
    }

    fn validate(&mut self, base: &Path) -> Result<()> {
        let s = &self.space;
        match s.kind {
            SpaceKind::Grid => {
                let d = s.cells.len();
                range(d > 0 && s.lo.len() == d && s.hi.len() == d, || {
                    format!("grid needs lo, hi and cells of equal nonzero length, got {}, {}, {}", s.lo.len(), s.hi.len(), d)
                })?;
                for a in 0..d {
                    range(s.lo[a] < s.hi[a], || format!("grid axis {a}: lo {} is not below hi {}", s.lo[a], s.hi[a]))?;
                    range(s.cells[a] >= if s.centered { 2 } else { 1 }, || format!("grid axis {a}: too few cells"))?;
                }
                range(s.boundary.is_empty() || s.boundary.len() == d, || {
                    format!("boundary lists {} axes for a {d}-dimensional grid", s.boundary.len())
                })?;
            }
            SpaceKind::Finite => range(s.matrix.is_some(), || "finite space needs `matrix`".into())?,
            SpaceKind::Points => range(s.points.is_some(), || "points space needs `points`".into())?,
        }
        let y = &self.system;
        range(y.period > 0.0 && y.period.is_finite(), || format!("period must be positive, got {}", y.period))?;
        range(y.power >= 1, || "power must be at least 1".into())?;
        range(y.kind != SystemKind::Table || y.table.is_some(), || "table system needs `table`".into())?;
        let e = &self.epsilon;
        let given = [e.constant.is_some(), e.formula.is_some(), e.values.is_some()].iter().filter(|&&b| b).count();
        range(given <= 1, || "give at most one of epsilon.constant, epsilon.formula, epsilon.values".into())?;
        if let Some(c) = e.constant {
            range(c > 0.0 && c.is_finite(), || format!("epsilon.constant must be positive, got {c}"))?;
        }
        range(e.levels != Some(0), || "epsilon.levels must be at least 1".into())?;
        let p = &self.params;
        range(p.k_max >= 1 && p.j_max >= 1, || "k_max and j_max must be at least 1".into())?;
        range(p.region_cap >= 1 && p.budget >= 1, || "region_cap and budget must be at least 1".into())?;
        range(p.seeds != Some(0), || "seeds must be at least 1".into())?;
        range(p.nodes >= 8, || format!("nodes must be at least 8, got {}", p.nodes))?;
        range(p.step > 0.0 && p.horizon >= p.step, || "need 0 < step <= horizon".into())?;
        range(p.dt > 0.0 && p.t_end >= p.dt, || "need 0 < dt <= t_end".into())?;
        range(p.tolerance >= 0.0, || "tolerance must be nonnegative".into())?;
        match self.pipeline {
            Pipeline::RegionLyapunov => range(p.region.is_some(), || "region-lyapunov needs [params.region]".into())?,
            Pipeline::Verify => range(p.field.is_some(), || "verify needs params.field".into())?,
            _ => {}
        }
        resolve(base, &mut self.space.matrix)?;
        resolve(base, &mut self.space.points)?;
        resolve(base, &mut self.system.table)?;
        resolve(base, &mut self.epsilon.values)?;
        resolve(base, &mut self.params.field)?;
        if let Some(out) = &mut self.out {
            if out.is_relative() {
                *out = base.join(&*out);
            }
        }
        Ok(())
    }
}
