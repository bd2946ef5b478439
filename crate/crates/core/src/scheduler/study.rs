use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::sysmodel::{NetDemandQuantiles, SysError, SystemSpec};

use super::{
    curtailed_energy, emissions, load_factor, solve_rolling_horizon_with, CfsReport, LossMode, UcError, UcOptions,
    WindowSolver,
};

/// Wind levels and largest-loss modes of a study, with the system it runs on.
/// Relative paths resolve against the config file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub system: PathBuf,
    /// Defaults to the file named by the system's `[scenarios]` table.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenarios: Option<PathBuf>,
    /// Installed wind, MW.
    pub wind_capacities: Vec<f64>,
    pub modes: Vec<LossMode>,
    /// Simulated span; all demand periods when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub periods: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub first_stage: Option<usize>,
}

impl StudyConfig {
    pub fn from_toml_str(text: &str, origin: &Path) -> Result<Self, SysError> {
        let mut c: StudyConfig = toml::from_str(text)
            .map_err(|e| SysError::Parse { path: origin.to_path_buf(), message: e.to_string() })?;
        let dir = origin.parent().unwrap_or(Path::new(""));
        c.system = dir.join(&c.system);
        c.scenarios = c.scenarios.map(|s| dir.join(s));
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), SysError> {
        let bad = |field: &str, message: String| SysError::Validation { field: format!("study.{field}"), message };
        if self.wind_capacities.is_empty() {
            return Err(bad("wind_capacities", "at least one wind level is required".into()));
        }
        if let Some(w) = self.wind_capacities.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(bad("wind_capacities", format!("must be finite and non-negative, got {w}")));
        }
        if self.modes.is_empty() {
            return Err(bad("modes", "at least one largest-loss mode is required".into()));
        }
        if self.periods == Some(0) {
            return Err(bad("periods", "must be positive".into()));
        }
        Ok(())
    }

    /// `base` with the config's horizon and first-stage overrides.
    pub fn options(&self, base: &UcOptions) -> UcOptions {
        UcOptions {
            horizon: self.horizon.unwrap_or(base.horizon),
            first_stage: self.first_stage.unwrap_or(base.first_stage),
            ..base.clone()
        }
    }
}

pub fn load_study(path: impl AsRef<Path>) -> Result<StudyConfig, SysError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| SysError::Io { path: path.to_path_buf(), source: e })?;
    StudyConfig::from_toml_str(&text, path)
}

/// Metrics of one (wind level, mode) cell. Load factor, emissions and
/// curtailment come from the frequency-constrained run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StudyRow {
    pub wind_capacity: f64,
    pub mode: LossMode,
    pub cost_on: f64,
    pub cost_off: f64,
    pub cost_of_frequency_services: f64,
    pub largest_unit_load_factor: f64,
    pub emissions: f64,
    pub curtailed_energy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyCell {
    pub row: StudyRow,
    pub report: CfsReport,
}

/// Runs every cell of the study; cells are independent and run in parallel.
/// Rows come back in config order, wind level outermost.
pub fn run_study(
    system: &SystemSpec,
    scenarios: &NetDemandQuantiles,
    config: &StudyConfig,
    options: &UcOptions,
    solver: &dyn WindowSolver,
) -> Result<Vec<StudyCell>, UcError> {
    config.validate()?;
    let mut system = system.clone();
    if let Some(n) = config.periods {
        if n > system.periods() {
            return Err(UcError::Input(format!("study span {n} exceeds the {} demand periods", system.periods())));
        }
        system.demand.values.truncate(n);
    }
    let largest = system.largest_unit().ok_or_else(|| UcError::Input("no loss-eligible unit".into()))?;
    let largest_id = system.generators[largest].id.clone();
    let options = config.options(options);
    let cells: Vec<(f64, LossMode)> =
        config.wind_capacities.iter().flat_map(|&w| config.modes.iter().map(move |&m| (w, m))).collect();
    cells
        .into_par_iter()
        .map(|(wind, mode)| {
            let sys = system.with_wind_capacity(wind);
            let run = |frequency_constraints| {
                let o = UcOptions { frequency_constraints, mode, ..options.clone() };
                solve_rolling_horizon_with(&sys, scenarios, &o, solver)
            };
            let on = run(true)?;
            let off = run(false)?;
            let cost_on = on.trajectory.total_cost();
            let cost_off = off.trajectory.total_cost();
            let row = StudyRow {
                wind_capacity: wind,
                mode,
                cost_on,
                cost_off,
                cost_of_frequency_services: cost_on - cost_off,
                largest_unit_load_factor: load_factor(&on.trajectory, &largest_id)?,
                emissions: emissions(&on.trajectory, &sys),
                curtailed_energy: curtailed_energy(&on.trajectory),
            };
            Ok(StudyCell { row, report: CfsReport { on, off, cost_on, cost_off } })
        })
        .collect()
}

/// One row per cell.
pub fn study_csv(rows: &[StudyRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}
