//! Run reports: diagnostic time series plus field snapshots, and their
//! on-disk form (JSON document, series CSV, one snapshot CSV per time).

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::grid::{fmt17, Grid, ScalarField};
use crate::operators::ModelParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EquationTag {
    Relativistic,
    ClassicalHeat,
    Telegraph,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub time: f64,
    pub field: ScalarField,
}

/// Everything recorded during one evolution.
///
/// The series are sampled every `record_every` steps (always including the
/// first and last step); `global_max`/`global_min` cover every step and cell.
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub equation: EquationTag,
    pub params: ModelParams,
    pub grid: Grid,
    /// Uniform step actually used.
    pub dt: f64,
    pub steps: usize,
    pub times: Vec<f64>,
    pub mass_series: Vec<f64>,
    /// NaN where the field has negative values (telegraph runs).
    pub entropy_series: Vec<f64>,
    pub max_series: Vec<f64>,
    pub min_series: Vec<f64>,
    /// 1D only: center of the rightmost cell above `front_threshold` (NaN if none).
    pub front_position_series: Option<Vec<f64>>,
    pub front_threshold: f64,
    pub snapshots: Vec<Snapshot>,
    pub global_max: f64,
    pub global_min: f64,
    /// Cells reset from a negative value to zero.
    pub clip_count: usize,
    /// Most negative value seen before clipping (0 if none).
    pub worst_undershoot: f64,
    pub newton_iterations: usize,
}

#[derive(Serialize)]
struct SnapshotRef<'a> {
    time: f64,
    path: &'a str,
}

#[derive(Serialize)]
struct ReportDocument<'a> {
    equation: EquationTag,
    params: &'a ModelParams,
    grid: &'a Grid,
    dt: f64,
    steps: usize,
    times: &'a [f64],
    mass_series: &'a [f64],
    entropy_series: &'a [f64],
    max_series: &'a [f64],
    min_series: &'a [f64],
    front_position_series: Option<&'a [f64]>,
    front_threshold: f64,
    global_max: f64,
    global_min: f64,
    clip_count: usize,
    worst_undershoot: f64,
    newton_iterations: usize,
    series_csv: &'a str,
    snapshots: Vec<SnapshotRef<'a>>,
}

impl RunReport {
    pub fn t_end(&self) -> f64 {
        *self.times.last().unwrap_or(&0.0)
    }

    pub fn initial(&self) -> &ScalarField {
        &self.snapshots[0].field
    }

    pub fn final_field(&self) -> &ScalarField {
        &self.snapshots[self.snapshots.len() - 1].field
    }

    /// `t,mass,entropy,max,min,front` with 17 significant digits.
    pub fn series_csv(&self) -> String {
        let mut out = String::from("t,mass,entropy,max,min,front\n");
        for k in 0..self.times.len() {
            let front = self
                .front_position_series
                .as_ref()
                .map(|f| fmt17(f[k]))
                .unwrap_or_else(|| "NaN".into());
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                fmt17(self.times[k]),
                fmt17(self.mass_series[k]),
                fmt17(self.entropy_series[k]),
                fmt17(self.max_series[k]),
                fmt17(self.min_series[k]),
                front
            );
        }
        out
    }

    /// Writes `<stem>.json`, `<stem>_series.csv` and `<stem>_snap_<k>.csv`
    /// into `dir`; returns every path written (JSON last).
    pub fn write(&self, dir: &Path, stem: &str) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        let series_name = format!("{stem}_series.csv");
        std::fs::write(dir.join(&series_name), self.series_csv())?;
        written.push(dir.join(&series_name));
        let snap_names: Vec<String> = (0..self.snapshots.len())
            .map(|k| format!("{stem}_snap_{k:03}.csv"))
            .collect();
        for (snap, name) in self.snapshots.iter().zip(&snap_names) {
            snap.field.write_csv(&dir.join(name))?;
            written.push(dir.join(name));
        }
        let doc = ReportDocument {
            equation: self.equation,
            params: &self.params,
            grid: &self.grid,
            dt: self.dt,
            steps: self.steps,
            times: &self.times,
            mass_series: &self.mass_series,
            entropy_series: &self.entropy_series,
            max_series: &self.max_series,
            min_series: &self.min_series,
            front_position_series: self.front_position_series.as_deref(),
            front_threshold: self.front_threshold,
            global_max: self.global_max,
            global_min: self.global_min,
            clip_count: self.clip_count,
            worst_undershoot: self.worst_undershoot,
            newton_iterations: self.newton_iterations,
            series_csv: &series_name,
            snapshots: self
                .snapshots
                .iter()
                .zip(&snap_names)
                .map(|(s, p)| SnapshotRef {
                    time: s.time,
                    path: p,
                })
                .collect(),
        };
        let json_path = dir.join(format!("{stem}.json"));
        std::fs::write(&json_path, serde_json::to_string_pretty(&doc)?)?;
        written.push(json_path);
        Ok(written)
    }
}
