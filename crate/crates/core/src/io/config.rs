//! Flat key-value run configuration.
//!
//! ```text
//! # comment
//! params.b_exp = 6
//! [stepper]
//! splitting = lie
//! ```
//!
//! A `[section]` header prefixes the following bare keys; dotted keys are
//! taken as written. Every line is checked and all problems are reported
//! together.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::constitutive::{PhysParams, RegimeFlags};
use crate::error::{Error, Result};
use crate::grid::{Grid, IcFamily, OuterBoundary};
use crate::solver::{Splitting, StepperConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridSpec {
    pub n_cells: usize,
    pub dx: f64,
    pub outer: OuterBoundary,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { n_cells: 1024, dx: 50.0 / 1024.0, outer: OuterBoundary::FarField }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IcSpec {
    pub family: IcFamily,
    pub amplitude: f64,
    pub width: f64,
}

impl Default for IcSpec {
    fn default() -> Self {
        IcSpec { family: IcFamily::GaussianBump, amplitude: 0.2, width: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputSpec {
    /// Timeseries CSV file name inside the output directory.
    pub timeseries: String,
    pub jsonl: bool,
    /// Requested snapshot times; each is written at the first accepted
    /// step boundary at or after it.
    pub snapshot_times: Vec<f64>,
    pub audit: bool,
    pub audit_k: usize,
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec {
            timeseries: "timeseries.csv".to_string(),
            jsonl: false,
            snapshot_times: Vec::new(),
            audit: false,
            audit_k: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub params: PhysParams,
    pub grid: GridSpec,
    pub ic: IcSpec,
    pub stepper: StepperConfig,
    pub t_end: f64,
    pub sample_stride: usize,
    pub seed: u64,
    pub output: OutputSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            params: PhysParams::default(),
            grid: GridSpec::default(),
            ic: IcSpec::default(),
            stepper: StepperConfig::default(),
            t_end: 200.0,
            sample_stride: 100,
            seed: 0,
            output: OutputSpec::default(),
        }
    }
}

/// Every recognised key, in the order written by [`RunConfig::to_text`].
pub const KEYS: [&str; 38] = [
    "params.mu",
    "params.lambda1",
    "params.lambda_heat",
    "params.k_rate",
    "params.a_act",
    "params.beta",
    "params.d_diff",
    "params.r_gas",
    "params.c_v",
    "params.a_rad",
    "params.kappa1",
    "params.kappa2",
    "params.b_exp",
    "params.n_dim",
    "grid.n_cells",
    "grid.dx",
    "grid.outer",
    "ic.family",
    "ic.amplitude",
    "ic.width",
    "stepper.cfl_hyper",
    "stepper.diff_theta_impl",
    "stepper.newton_tol",
    "stepper.newton_max_iter",
    "stepper.dt_min",
    "stepper.dt_max",
    "stepper.splitting",
    "stepper.theta_weight",
    "stepper.fixed_dt",
    "stepper.species_fallback",
    "run.t_end",
    "run.sample_stride",
    "run.seed",
    "output.timeseries",
    "output.jsonl",
    "output.snapshot_times",
    "output.audit",
    "output.audit_k",
];

/// Alternative to `grid.dx`: the domain length `n_cells dx`.
const EXTENT_KEY: &str = "grid.x_max";

fn parse_num<T: std::str::FromStr>(key: &str, raw: &str, what: &str) -> std::result::Result<T, String> {
    raw.parse::<T>()
        .map_err(|_| format!("{key} expects {what}, got '{raw}'"))
}

fn parse_bool(key: &str, raw: &str) -> std::result::Result<bool, String> {
    match raw {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(format!("{key} expects true or false, got '{raw}'")),
    }
}

fn parse_list(key: &str, raw: &str) -> std::result::Result<Vec<f64>, String> {
    let body = raw.trim().trim_start_matches('[').trim_end_matches(']');
    if body.trim().is_empty() {
        return Ok(Vec::new());
    }
    body.split(',')
        .map(|t| parse_num::<f64>(key, t.trim(), "a comma-separated list of numbers"))
        .collect()
}

fn unquote(raw: &str) -> &str {
    let r = raw.trim();
    if r.len() >= 2 && r.starts_with('"') && r.ends_with('"') {
        &r[1..r.len() - 1]
    } else {
        r
    }
}

impl RunConfig {
    pub fn regime(&self) -> RegimeFlags {
        self.params.regime()
    }

    pub fn make_grid(&self) -> Result<Grid> {
        Grid::new(self.grid.n_cells, self.grid.dx)
    }

    /// Assigns one key. Errors name the key and the expected type.
    pub fn set(&mut self, key: &str, raw: &str) -> std::result::Result<(), String> {
        let v = unquote(raw);
        let p = &mut self.params;
        let f = |k: &str| parse_num::<f64>(k, v, "a number");
        match key {
            "params.mu" => p.mu = f(key)?,
            "params.lambda1" => p.lambda1 = f(key)?,
            "params.lambda_heat" => p.lambda_heat = f(key)?,
            "params.k_rate" => p.k_rate = f(key)?,
            "params.a_act" => p.a_act = f(key)?,
            "params.beta" => p.beta = f(key)?,
            "params.d_diff" => p.d_diff = f(key)?,
            "params.r_gas" => p.r_gas = f(key)?,
            "params.c_v" => p.c_v = f(key)?,
            "params.a_rad" => p.a_rad = f(key)?,
            "params.kappa1" => p.kappa1 = f(key)?,
            "params.kappa2" => p.kappa2 = f(key)?,
            "params.b_exp" => p.b_exp = f(key)?,
            "params.n_dim" => p.n_dim = parse_num(key, v, "a positive integer")?,
            "grid.n_cells" => self.grid.n_cells = parse_num(key, v, "a positive integer")?,
            "grid.dx" => self.grid.dx = f(key)?,
            "grid.x_max" => {
                let x: f64 = f(key)?;
                self.grid.dx = x / self.grid.n_cells as f64;
            }
            "grid.outer" => self.grid.outer = v.parse().map_err(|e| format!("{key}: {e}"))?,
            "ic.family" => self.ic.family = v.parse().map_err(|e| format!("{key}: {e}"))?,
            "ic.amplitude" => self.ic.amplitude = f(key)?,
            "ic.width" => self.ic.width = f(key)?,
            "stepper.cfl_hyper" => self.stepper.cfl_hyper = f(key)?,
            "stepper.diff_theta_impl" => self.stepper.diff_theta_impl = parse_bool(key, v)?,
            "stepper.newton_tol" => self.stepper.newton_tol = f(key)?,
            "stepper.newton_max_iter" => {
                self.stepper.newton_max_iter = parse_num(key, v, "a non-negative integer")?
            }
            "stepper.dt_min" => self.stepper.dt_min = f(key)?,
            "stepper.dt_max" => self.stepper.dt_max = f(key)?,
            "stepper.splitting" => {
                self.stepper.splitting =
                    v.parse::<Splitting>().map_err(|e| format!("{key}: {e}"))?
            }
            "stepper.theta_weight" => self.stepper.theta_weight = f(key)?,
            "stepper.fixed_dt" => {
                self.stepper.fixed_dt = match v {
                    "none" | "" => None,
                    _ => Some(f(key)?),
                }
            }
            "stepper.species_fallback" => self.stepper.species_fallback = parse_bool(key, v)?,
            "run.t_end" => self.t_end = f(key)?,
            "run.sample_stride" => self.sample_stride = parse_num(key, v, "a positive integer")?,
            "run.seed" => self.seed = parse_num(key, v, "a non-negative integer")?,
            "output.timeseries" => self.output.timeseries = v.to_string(),
            "output.jsonl" => self.output.jsonl = parse_bool(key, v)?,
            "output.snapshot_times" => self.output.snapshot_times = parse_list(key, v)?,
            "output.audit" => self.output.audit = parse_bool(key, v)?,
            "output.audit_k" => self.output.audit_k = parse_num(key, v, "a non-negative integer")?,
            _ => return Err(format!("unknown key '{key}'")),
        }
        Ok(())
    }

    /// Checks every invariant and returns all violations.
    pub fn violations(&self) -> Vec<String> {
        let mut bad = Vec::new();
        if let Err(Error::InvalidParams(msg)) = self.params.validate() {
            bad.extend(msg.split("; ").map(str::to_string));
        }
        if self.params.n_dim < 2 {
            bad.push(format!(
                "params.n_dim must be 2 or 3 for the exterior problem (got {})",
                self.params.n_dim
            ));
        }
        if let Err(e) = self.stepper.validate() {
            bad.push(e.to_string());
        }
        if let Err(e) = self.make_grid() {
            bad.push(e.to_string());
        }
        if !(self.t_end > 0.0) || !self.t_end.is_finite() {
            bad.push(format!("run.t_end must be positive (got {})", self.t_end));
        }
        if self.sample_stride == 0 {
            bad.push("run.sample_stride must be at least 1".to_string());
        }
        if !(self.ic.amplitude >= 0.0) || !(self.ic.width > 0.0) {
            bad.push(format!(
                "ic.amplitude must be non-negative and ic.width positive (got {}, {})",
                self.ic.amplitude, self.ic.width
            ));
        }
        if self.output.timeseries.is_empty() || self.output.timeseries.contains(['/', '\\']) {
            bad.push("output.timeseries must be a plain file name".to_string());
        }
        if self.output.snapshot_times.iter().any(|t| !(*t >= 0.0)) {
            bad.push("output.snapshot_times must be non-negative".to_string());
        }
        if self.output.audit && self.grid.dx * (self.grid.n_cells as f64) < (self.output.audit_k + 2) as f64 {
            bad.push(format!(
                "output.audit on [{k}, {k1}] needs x_max >= {k2}",
                k = self.output.audit_k,
                k1 = self.output.audit_k + 1,
                k2 = self.output.audit_k + 2
            ));
        }
        bad
    }

    /// Canonical text form; `parse_config(to_text(c)) == c`.
    pub fn to_text(&self) -> String {
        let p = &self.params;
        let s = &self.stepper;
        let list: Vec<String> = self.output.snapshot_times.iter().map(|t| format!("{t:?}")).collect();
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        };
        put("params.mu", format!("{:?}", p.mu));
        put("params.lambda1", format!("{:?}", p.lambda1));
        put("params.lambda_heat", format!("{:?}", p.lambda_heat));
        put("params.k_rate", format!("{:?}", p.k_rate));
        put("params.a_act", format!("{:?}", p.a_act));
        put("params.beta", format!("{:?}", p.beta));
        put("params.d_diff", format!("{:?}", p.d_diff));
        put("params.r_gas", format!("{:?}", p.r_gas));
        put("params.c_v", format!("{:?}", p.c_v));
        put("params.a_rad", format!("{:?}", p.a_rad));
        put("params.kappa1", format!("{:?}", p.kappa1));
        put("params.kappa2", format!("{:?}", p.kappa2));
        put("params.b_exp", format!("{:?}", p.b_exp));
        put("params.n_dim", p.n_dim.to_string());
        put("grid.n_cells", self.grid.n_cells.to_string());
        put("grid.dx", format!("{:?}", self.grid.dx));
        put("grid.outer", self.grid.outer.to_string());
        put("ic.family", self.ic.family.name().to_string());
        put("ic.amplitude", format!("{:?}", self.ic.amplitude));
        put("ic.width", format!("{:?}", self.ic.width));
        put("stepper.cfl_hyper", format!("{:?}", s.cfl_hyper));
        put("stepper.diff_theta_impl", s.diff_theta_impl.to_string());
        put("stepper.newton_tol", format!("{:?}", s.newton_tol));
        put("stepper.newton_max_iter", s.newton_max_iter.to_string());
        put("stepper.dt_min", format!("{:?}", s.dt_min));
        put("stepper.dt_max", format!("{:?}", s.dt_max));
        put("stepper.splitting", s.splitting.to_string());
        put("stepper.theta_weight", format!("{:?}", s.theta_weight));
        put("stepper.fixed_dt", s.fixed_dt.map_or("none".to_string(), |d| format!("{d:?}")));
        put("stepper.species_fallback", s.species_fallback.to_string());
        put("run.t_end", format!("{:?}", self.t_end));
        put("run.sample_stride", self.sample_stride.to_string());
        put("run.seed", self.seed.to_string());
        put("output.timeseries", self.output.timeseries.clone());
        put("output.jsonl", self.output.jsonl.to_string());
        put("output.snapshot_times", format!("[{}]", list.join(", ")));
        put("output.audit", self.output.audit.to_string());
        put("output.audit_k", self.output.audit_k.to_string());
        out
    }
}

/// Parses and validates a configuration. All syntax, key, type and
/// invariant errors are collected into one [`Error::Config`].
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    let mut errors = Vec::new();
    let mut section: Option<String> = None;
    let mut seen = BTreeSet::new();
    let mut x_max: Option<(usize, String)> = None;
    for (no, line) in text.lines().enumerate() {
        let no = no + 1;
        let line = match line.find('#') {
            Some(c) => &line[..c],
            None => line,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('[') {
            if line.ends_with(']') && line.len() > 2 {
                section = Some(line[1..line.len() - 1].trim().to_string());
            } else {
                errors.push(format!("line {no}: malformed section header '{line}'"));
            }
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            errors.push(format!("line {no}: expected 'key = value', got '{line}'"));
            continue;
        };
        let k = k.trim();
        let key = match (&section, k.contains('.')) {
            (Some(s), false) => format!("{s}.{k}"),
            _ => k.to_string(),
        };
        if !seen.insert(key.clone()) {
            errors.push(format!("line {no}: duplicate key '{key}'"));
            continue;
        }
        if !KEYS.contains(&key.as_str()) && key != EXTENT_KEY {
            errors.push(format!("line {no}: unknown key '{key}'"));
            continue;
        }
        if key == EXTENT_KEY {
            // Applied after grid.n_cells is known, wherever it appears.
            x_max = Some((no, v.trim().to_string()));
            continue;
        }
        if let Err(e) = cfg.set(&key, v.trim()) {
            errors.push(format!("line {no}: {e}"));
        }
    }
    if let Some((no, raw)) = x_max {
        if seen.contains("grid.dx") {
            errors.push(format!("line {no}: grid.x_max and grid.dx are mutually exclusive"));
        } else if let Err(e) = cfg.set("grid.x_max", &raw) {
            errors.push(format!("line {no}: {e}"));
        }
    }
    if errors.is_empty() {
        errors.extend(cfg.violations());
    }
    if errors.is_empty() {
        Ok(cfg)
    } else {
        Err(Error::Config(errors))
    }
}
