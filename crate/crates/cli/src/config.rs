use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use relheat::evolve::{Method, TimeStepConfig};
use relheat::grid::{BoundaryCondition, Grid, ScalarField};
use relheat::operators::ModelParams;
use relheat::stationary::{Scheme, StationaryProblem};
use relheat::verify::{self, ScorecardConfig};

use crate::CliError;

/// Overrides the root that relative `output_dir` values resolve against.
pub const OUTPUT_ROOT_ENV: &str = "RELHEAT_OUTPUT_ROOT";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Equation {
    Relativistic,
    Heat,
    Telegraph,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodSpec {
    Explicit,
    Implicit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BcSpec {
    Noflux,
    /// Constant per side; sides left unset take `value`.
    Dirichlet {
        value: f64,
        left: Option<f64>,
        right: Option<f64>,
        bottom: Option<f64>,
        top: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialSpec {
    Constant {
        value: f64,
    },
    /// `floor + height · exp(-|x - center|² / width²)`
    GaussianBump {
        #[serde(default = "mid")]
        center: Vec<f64>,
        width: f64,
        #[serde(default = "one")]
        height: f64,
        #[serde(default)]
        floor: f64,
    },
    /// `floor + height · cos²(π r / 2)` for `r = |x - center| / half_width < 1`
    CompactBump {
        #[serde(default = "mid")]
        center: Vec<f64>,
        half_width: f64,
        #[serde(default = "one")]
        height: f64,
        #[serde(default)]
        floor: f64,
    },
    /// Counter-propagating pulses of height 0.5 (one pulse if `two = false`).
    TwoPulses {
        #[serde(default = "yes")]
        two: bool,
    },
    Csv {
        path: PathBuf,
    },
}

fn mid() -> Vec<f64> {
    vec![0.5, 0.5]
}

fn one() -> f64 {
    1.0
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolveSection {
    pub fixed_dt: Option<f64>,
    pub cfl_parabolic: f64,
    pub cfl_hyperbolic: f64,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub record_every: usize,
    pub front_threshold: f64,
}

impl Default for EvolveSection {
    fn default() -> Self {
        let d = TimeStepConfig::default();
        Self {
            fixed_dt: None,
            cfl_parabolic: d.cfl_parabolic,
            cfl_hyperbolic: d.cfl_hyperbolic,
            newton_tol: d.newton_tol,
            newton_max_iter: d.newton_max_iter,
            record_every: d.record_every,
            front_threshold: d.front_threshold,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeSpec {
    Conservative,
    Pointwise,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StationarySection {
    pub scheme: SchemeSpec,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    /// Random balls (drawn from `seed`) for the flux-balance probe.
    pub balls: usize,
}

impl Default for StationarySection {
    fn default() -> Self {
        Self {
            scheme: SchemeSpec::Conservative,
            newton_tol: 1e-10,
            newton_max_iter: 100,
            balls: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifySection {
    pub cells: usize,
    pub front_h: f64,
}

impl Default for VerifySection {
    fn default() -> Self {
        let d = ScorecardConfig::default();
        Self {
            cells: d.cells,
            front_h: d.front_h,
        }
    }
}

/// One experiment. Every key has a default, so an empty file is valid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub equation: Equation,
    pub dim: usize,
    pub n: usize,
    /// Bounds of the x axis (and of y unless `y_extent` is set).
    pub extent: [f64; 2],
    pub y_extent: Option<[f64; 2]>,
    pub c: f64,
    pub method: MethodSpec,
    pub t_end: f64,
    pub snapshot_times: Vec<f64>,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub bc: BcSpec,
    pub initial: InitialSpec,
    pub evolve: EvolveSection,
    pub stationary: StationarySection,
    pub verify: VerifySection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            equation: Equation::Relativistic,
            dim: 1,
            n: 200,
            extent: [0.0, 1.0],
            y_extent: None,
            c: 1.0,
            method: MethodSpec::Explicit,
            t_end: 0.05,
            snapshot_times: Vec::new(),
            output_dir: PathBuf::from("relheat-out"),
            seed: 0,
            bc: BcSpec::Noflux,
            initial: InitialSpec::GaussianBump {
                center: mid(),
                width: 0.1,
                height: 1.0,
                floor: 0.1,
            },
            evolve: EvolveSection::default(),
            stationary: StationarySection::default(),
            verify: VerifySection::default(),
        }
    }
}

fn config_error(field: &str, reason: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{field}: {reason}"))
}

/// Loads the file (if any) as a TOML table and applies `key=value`
/// overrides; dotted keys reach into sections.
pub fn load_table(path: Option<&Path>, overrides: &[String]) -> Result<toml::Table, CliError> {
    let mut table = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| config_error("config", format!("{}: {e}", p.display())))?;
            text.parse::<toml::Table>()
                .map_err(|e| config_error("config", format!("{}: {}", p.display(), e.message())))?
        }
        None => toml::Table::new(),
    };
    for item in overrides {
        apply_override(&mut table, item)?;
    }
    Ok(table)
}

/// Strict deserialization (unknown keys rejected) followed by validation.
pub fn from_table(table: toml::Table) -> Result<ExperimentConfig, CliError> {
    let config: ExperimentConfig = serde_path_to_error::deserialize(toml::Value::Table(table)).map_err(|e| {
        let path = e.path().to_string();
        let field = if path == "." { "config".to_string() } else { path };
        config_error(&field, e.into_inner().message())
    })?;
    config.validate()?;
    Ok(config)
}

pub fn apply_override(table: &mut toml::Table, item: &str) -> Result<(), CliError> {
    let (key, raw) = item
        .split_once('=')
        .ok_or_else(|| config_error("--set", format!("expected key=value, got `{item}`")))?;
    let key = key.trim();
    let value = parse_value(raw.trim());
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().filter(|k| !k.is_empty()).ok_or_else(|| config_error("--set", "empty key"))?;
    let mut cur = table;
    for part in parts {
        let entry = cur.entry(part.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| config_error(key, format!("`{part}` is not a section")))?;
    }
    // switching the tag of an enum section drops keys of the old variant
    if last == "kind" || last == "family" {
        cur.clear();
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

/// TOML literal if it parses as one, plain string otherwise.
fn parse_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

impl ExperimentConfig {
    /// Range checks that need no computation; all referenced files must exist.
    pub fn validate(&self) -> Result<(), CliError> {
        if !(self.c.is_finite() && self.c > 0.0) {
            return Err(config_error("c", format!("must be positive and finite, got {}", self.c)));
        }
        if self.dim != 1 && self.dim != 2 {
            return Err(config_error("dim", format!("must be 1 or 2, got {}", self.dim)));
        }
        if !(self.t_end.is_finite() && self.t_end > 0.0) {
            return Err(config_error("t_end", format!("must be positive, got {}", self.t_end)));
        }
        if let Some(t) = self.snapshot_times.iter().find(|t| !(**t > 0.0 && **t <= self.t_end)) {
            return Err(config_error("snapshot_times", format!("{t} is outside (0, t_end]")));
        }
        self.grid()?;
        if let BcSpec::Dirichlet { value, left, right, bottom, top } = &self.bc {
            let all = [Some(*value), *left, *right, *bottom, *top];
            if all.iter().flatten().any(|v| !v.is_finite()) {
                return Err(config_error("bc", "Dirichlet values must be finite"));
            }
        }
        match &self.initial {
            InitialSpec::Csv { path } if !path.is_file() => {
                return Err(config_error("initial.path", format!("{} does not exist", path.display())));
            }
            InitialSpec::GaussianBump { width, center, .. } if !(*width > 0.0) || center.len() < self.dim => {
                return Err(config_error("initial", "gaussian-bump needs width > 0 and one center coordinate per axis"));
            }
            InitialSpec::CompactBump { half_width, center, .. } if !(*half_width > 0.0) || center.len() < self.dim => {
                return Err(config_error("initial", "compact-bump needs half_width > 0 and one center coordinate per axis"));
            }
            InitialSpec::TwoPulses { .. } if self.dim != 1 => {
                return Err(config_error("initial.family", "two-pulses is 1D only"));
            }
            _ => {}
        }
        if self.equation == Equation::Telegraph && self.method == MethodSpec::Implicit {
            return Err(config_error("method", "telegraph runs are explicit only"));
        }
        let e = &self.evolve;
        if e.fixed_dt.is_some_and(|dt| !(dt > 0.0 && dt.is_finite())) {
            return Err(config_error("evolve.fixed_dt", "must be positive"));
        }
        self.time_config().validate().map_err(|e| match e {
            relheat::Error::InvalidParameter { field, reason } if field != "t_end" && field != "snapshot_times" => {
                config_error(&format!("evolve.{field}"), reason)
            }
            other => core_config_error(other),
        })?;
        let s = &self.stationary;
        if !(s.newton_tol > 0.0) || s.newton_max_iter == 0 {
            return Err(config_error("stationary", "newton_tol must be positive and newton_max_iter at least 1"));
        }
        if self.verify.cells < 8 {
            return Err(config_error("verify.cells", format!("need at least 8, got {}", self.verify.cells)));
        }
        if !(self.verify.front_h > 0.0 && self.verify.front_h <= 0.05) {
            return Err(config_error("verify.front_h", format!("must lie in (0, 0.05], got {}", self.verify.front_h)));
        }
        Ok(())
    }

    pub fn params(&self) -> Result<ModelParams, CliError> {
        ModelParams::new(self.c).map_err(core_config_error)
    }

    pub fn grid(&self) -> Result<Grid, CliError> {
        let x = (self.extent[0], self.extent[1]);
        let g = if self.dim == 1 {
            Grid::new_1d(self.n, x)
        } else {
            let y = self.y_extent.map(|e| (e[0], e[1])).unwrap_or(x);
            Grid::new_2d([self.n, self.n], x, y)
        };
        g.map_err(core_config_error)
    }

    pub fn boundary(&self, grid: &Grid) -> Result<BoundaryCondition, CliError> {
        match &self.bc {
            BcSpec::Noflux => Ok(BoundaryCondition::NoFlux),
            BcSpec::Dirichlet { value, left, right, bottom, top } => {
                let [nl, nr, nb, nt] = grid.side_lengths();
                let side = |v: Option<f64>, len: usize| vec![v.unwrap_or(*value); len];
                BoundaryCondition::dirichlet(grid, [side(*left, nl), side(*right, nr), side(*bottom, nb), side(*top, nt)])
                    .map_err(core_config_error)
            }
        }
    }

    /// Initial density and (for telegraph runs) initial velocity.
    pub fn initial_data(&self, grid: &Grid) -> Result<(ScalarField, ScalarField), CliError> {
        let zero = || ScalarField::constant(*grid, 0.0).map_err(core_config_error);
        let dist = |p: [f64; 2], center: &[f64]| -> f64 {
            (0..grid.dim()).map(|a| (p[a] - center[a]).powi(2)).sum::<f64>().sqrt()
        };
        let u0 = match &self.initial {
            InitialSpec::Constant { value } => ScalarField::constant(*grid, *value),
            InitialSpec::GaussianBump { center, width, height, floor } => {
                ScalarField::from_fn(*grid, |p| floor + height * (-(dist(p, center) / width).powi(2)).exp())
            }
            InitialSpec::CompactBump { center, half_width, height, floor } => ScalarField::from_fn(*grid, |p| {
                let r = dist(p, center) / half_width;
                floor + if r < 1.0 { height * (0.5 * std::f64::consts::PI * r).cos().powi(2) } else { 0.0 }
            }),
            InitialSpec::TwoPulses { two } => {
                let (u0, v0, _) = verify::telegraph_pulses(&self.params()?, grid, *two).map_err(core_config_error)?;
                return Ok((u0, v0));
            }
            InitialSpec::Csv { path } => {
                let text = std::fs::read_to_string(path).map_err(|e| config_error("initial.path", e))?;
                ScalarField::from_csv(*grid, &text)
            }
        }
        .map_err(|e| config_error("initial", e))?;
        Ok((u0, zero()?))
    }

    pub fn time_config(&self) -> TimeStepConfig {
        let method = match self.method {
            MethodSpec::Explicit => Method::ExplicitEuler,
            MethodSpec::Implicit => Method::ImplicitEuler,
        };
        let e = &self.evolve;
        TimeStepConfig {
            snapshot_times: self.snapshot_times.clone(),
            fixed_dt: e.fixed_dt,
            cfl_parabolic: e.cfl_parabolic,
            cfl_hyperbolic: e.cfl_hyperbolic,
            newton_tol: e.newton_tol,
            newton_max_iter: e.newton_max_iter,
            record_every: e.record_every,
            front_threshold: e.front_threshold,
            ..TimeStepConfig::new(method, self.t_end)
        }
    }

    pub fn stationary_problem(&self) -> Result<StationaryProblem, CliError> {
        let grid = self.grid()?;
        let bc = self.boundary(&grid)?;
        if !bc.is_dirichlet() {
            return Err(config_error("bc.kind", "stationary problems need Dirichlet data (values of w = log u)"));
        }
        let mut problem = StationaryProblem::new(grid, bc).map_err(core_config_error)?;
        problem.newton_tol = self.stationary.newton_tol;
        problem.newton_max_iter = self.stationary.newton_max_iter;
        problem.scheme = match self.stationary.scheme {
            SchemeSpec::Conservative => Scheme::Conservative,
            SchemeSpec::Pointwise => Scheme::Pointwise,
        };
        Ok(problem)
    }

    pub fn scorecard(&self) -> ScorecardConfig {
        ScorecardConfig {
            cells: self.verify.cells,
            front_h: self.verify.front_h,
            c: self.c,
        }
    }

    /// Output directory after applying the output-root override.
    pub fn output_path(&self) -> PathBuf {
        match std::env::var_os(OUTPUT_ROOT_ENV) {
            Some(root) if self.output_dir.is_relative() => PathBuf::from(root).join(&self.output_dir),
            _ => self.output_dir.clone(),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).unwrap_or_default()
    }
}

/// Core errors raised while building inputs are configuration errors.
pub fn core_config_error(e: relheat::Error) -> CliError {
    match e {
        relheat::Error::InvalidParameter { field, reason } => config_error(field, reason),
        other => CliError::Config(other.to_string()),
    }
}
