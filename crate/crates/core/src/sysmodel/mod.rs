//! Power-system data model, configuration loading and the scenario tree.
//!
//! Powers are MW, inertia constants seconds, system inertia MW·s², costs in
//! the configured currency. No unit conversion happens on load.

mod scenario;

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use scenario::{build_scenario_tree, load_scenarios, midpoint_probabilities, NetDemandQuantiles, ScenarioTree};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Technology {
    Nuclear,
    Thermal,
    Wind,
}

fn yes() -> bool {
    true
}

fn is_true(b: &bool) -> bool {
    *b
}

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    pub id: String,
    pub technology: Technology,
    pub p_max: f64,
    pub p_min: f64,
    /// H_g in seconds.
    pub inertia_const: f64,
    /// Currency per MWh.
    pub marginal_cost: f64,
    /// Currency per hour while committed.
    pub no_load_cost: f64,
    pub startup_cost: f64,
    /// Hours.
    pub min_up: f64,
    /// Hours.
    pub min_down: f64,
    pub pfr_max: f64,
    /// tCO2 per MWh.
    pub emissions_rate: f64,
    pub deloadable: bool,
    pub max_deload_fraction: f64,
    /// Whether a trip of this record counts as a single credible loss.
    #[serde(default = "yes", skip_serializing_if = "is_true")]
    pub loss_eligible: bool,
    /// Committed in every period.
    #[serde(default, skip_serializing_if = "is_false")]
    pub must_run: bool,
    /// Commitment state before the first period; `None` leaves it free.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_on: Option<bool>,
}

impl GeneratorSpec {
    pub fn is_synchronous(&self) -> bool {
        self.technology != Technology::Wind
    }

    /// Candidate for the largest credible loss.
    pub fn is_loss_source(&self) -> bool {
        self.is_synchronous() && self.loss_eligible
    }

    fn validate(&self) -> Result<(), SysError> {
        let bad = |field: &str, message: String| SysError::Validation {
            field: format!("generators[{}].{}", self.id, field),
            message,
        };
        if self.id.is_empty() || !crate::milp::model::lp_safe_name(&self.id) {
            return Err(bad("id", format!("`{}` must be non-empty without spaces or operators", self.id)));
        }
        let nums = [
            ("p_max", self.p_max),
            ("p_min", self.p_min),
            ("inertia_const", self.inertia_const),
            ("marginal_cost", self.marginal_cost),
            ("no_load_cost", self.no_load_cost),
            ("startup_cost", self.startup_cost),
            ("min_up", self.min_up),
            ("min_down", self.min_down),
            ("pfr_max", self.pfr_max),
            ("emissions_rate", self.emissions_rate),
            ("max_deload_fraction", self.max_deload_fraction),
        ];
        for (name, v) in nums {
            if !v.is_finite() || v < 0.0 {
                return Err(bad(name, format!("must be finite and non-negative, got {v}")));
            }
        }
        if self.p_min > self.p_max {
            return Err(bad("p_min", format!("p_min {} exceeds p_max {}", self.p_min, self.p_max)));
        }
        if self.p_max <= 0.0 {
            return Err(bad("p_max", "must be positive".into()));
        }
        if !self.is_synchronous() && self.inertia_const != 0.0 {
            return Err(bad("inertia_const", "non-synchronous unit with inertia".into()));
        }
        if !self.is_synchronous() && self.pfr_max != 0.0 {
            return Err(bad("pfr_max", "non-synchronous unit with frequency response".into()));
        }
        if self.max_deload_fraction > 1.0 {
            return Err(bad("max_deload_fraction", format!("must lie in [0, 1], got {}", self.max_deload_fraction)));
        }
        if self.deloadable && self.max_deload_fraction <= 0.0 {
            return Err(bad("max_deload_fraction", "deloadable unit needs a positive deload fraction".into()));
        }
        if self.must_run && !self.is_synchronous() {
            return Err(bad("must_run", "wind records are not committed".into()));
        }
        if self.must_run && self.initial_on == Some(false) {
            return Err(bad("initial_on", "must-run unit cannot start offline".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrequencyParams {
    /// Nominal frequency, Hz.
    pub f0: f64,
    /// Maximum admissible nadir deviation, Hz.
    pub df_max: f64,
    /// Maximum admissible quasi-steady-state deviation, Hz.
    pub df_ss_max: f64,
    /// Hz/s.
    pub rocof_max: f64,
    /// PFR delivery time, s.
    pub t_d: f64,
    /// Load damping, fraction of demand per Hz.
    pub damping: f64,
    /// Governor deadband, Hz. Only zero is supported.
    #[serde(default)]
    pub deadband: f64,
    /// Discretisation of the largest loss, MW, strictly increasing.
    /// Filled with the default grid when omitted.
    #[serde(default)]
    pub nadir_segments: Vec<f64>,
    /// p_max of the largest loss source. Derived from the fleet.
    #[serde(default)]
    pub largest_unit_rating: f64,
    /// inertia_const of the largest loss source. Derived from the fleet.
    #[serde(default)]
    pub largest_unit_inertia: f64,
}

impl FrequencyParams {
    /// Damping product D·P^D in MW/Hz for a given demand.
    pub fn damping_product(&self, demand: f64) -> f64 {
        self.damping * demand
    }
}

/// Default nadir grid: ten evenly spaced values from `rating·(1 − fraction)`
/// to `rating`, or the single value `rating` when the unit cannot deload.
pub fn default_segment_grid(rating: f64, deload_fraction: f64) -> Vec<f64> {
    if deload_fraction <= 0.0 {
        return vec![rating];
    }
    let lo = rating * (1.0 - deload_fraction);
    let n = 10;
    (0..n).map(|i| if i == n - 1 { rating } else { lo + (rating - lo) * i as f64 / (n - 1) as f64 }).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemandProfile {
    /// Length of one period in hours.
    pub period_hours: f64,
    /// Total demand P^D per period, MW.
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSource {
    /// Net-demand quantile table, relative to the system file.
    pub file: PathBuf,
    /// Installed wind capacity, MW. Defaults to the sum of wind records.
    #[serde(default)]
    pub wind_capacity: Option<f64>,
    /// Wind capacity the quantile table was produced for. Defaults to `wind_capacity`.
    #[serde(default)]
    pub reference_wind_capacity: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    pub frequency: FrequencyParams,
    pub generators: Vec<GeneratorSpec>,
    pub demand: DemandProfile,
    pub scenarios: ScenarioSource,
}

#[derive(Debug, Error)]
pub enum SysError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("cannot parse {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid `{field}`: {message}")]
    Validation { field: String, message: String },
}

impl SystemSpec {
    pub fn periods(&self) -> usize {
        self.demand.values.len()
    }

    pub fn period_hours(&self) -> f64 {
        self.demand.period_hours
    }

    pub fn generator(&self, id: &str) -> Option<&GeneratorSpec> {
        self.generators.iter().find(|g| g.id == id)
    }

    /// Installed wind capacity, MW.
    pub fn wind_capacity(&self) -> f64 {
        self.scenarios.wind_capacity.unwrap_or_else(|| {
            self.generators.iter().filter(|g| !g.is_synchronous()).map(|g| g.p_max).sum()
        })
    }

    pub fn reference_wind_capacity(&self) -> f64 {
        self.scenarios.reference_wind_capacity.unwrap_or_else(|| self.wind_capacity())
    }

    pub fn with_wind_capacity(&self, capacity: f64) -> Self {
        let mut s = self.clone();
        s.scenarios.reference_wind_capacity = Some(self.reference_wind_capacity());
        s.scenarios.wind_capacity = Some(capacity);
        s
    }

    /// Index of the largest loss source: largest p_max, then larger inertia
    /// constant, then lexicographically smallest id.
    pub fn largest_unit(&self) -> Option<usize> {
        self.generators
            .iter()
            .enumerate()
            .filter(|(_, g)| g.is_loss_source())
            .min_by(|(_, a), (_, b)| {
                b.p_max
                    .total_cmp(&a.p_max)
                    .then(b.inertia_const.total_cmp(&a.inertia_const))
                    .then(a.id.cmp(&b.id))
            })
            .map(|(i, _)| i)
    }

    pub fn from_toml_str(text: &str, origin: &Path) -> Result<Self, SysError> {
        let mut spec: SystemSpec =
            toml::from_str(text).map_err(|e| SysError::Parse { path: origin.to_path_buf(), message: e.to_string() })?;
        spec.complete_and_validate()?;
        Ok(spec)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("system spec serialises")
    }

    /// Fills derived fields and checks every invariant.
    pub fn complete_and_validate(&mut self) -> Result<(), SysError> {
        if self.generators.is_empty() {
            return Err(SysError::Validation { field: "generators".into(), message: "at least one generator".into() });
        }
        let mut ids = HashSet::new();
        for g in &self.generators {
            g.validate()?;
            if !ids.insert(g.id.as_str()) {
                return Err(SysError::Validation {
                    field: format!("generators[{}].id", g.id),
                    message: "duplicate id".into(),
                });
            }
        }
        let Some(li) = self.largest_unit() else {
            return Err(SysError::Validation {
                field: "generators".into(),
                message: "no synchronous generator is eligible as the largest loss".into(),
            });
        };
        let largest = self.generators[li].clone();

        let f = &mut self.frequency;
        let derived = [
            ("largest_unit_rating", &mut f.largest_unit_rating, largest.p_max),
            ("largest_unit_inertia", &mut f.largest_unit_inertia, largest.inertia_const),
        ];
        for (name, slot, value) in derived {
            if *slot == 0.0 {
                *slot = value;
            } else if *slot != value {
                return Err(SysError::Validation {
                    field: format!("frequency.{name}"),
                    message: format!("is derived from unit `{}` ({value}); file states {}", largest.id, *slot),
                });
            }
        }
        if f.nadir_segments.is_empty() {
            let fraction = if largest.deloadable { largest.max_deload_fraction } else { 0.0 };
            f.nadir_segments = default_segment_grid(largest.p_max, fraction);
        }
        let positive = [
            ("f0", f.f0),
            ("df_max", f.df_max),
            ("df_ss_max", f.df_ss_max),
            ("rocof_max", f.rocof_max),
            ("t_d", f.t_d),
            ("largest_unit_rating", f.largest_unit_rating),
            ("largest_unit_inertia", f.largest_unit_inertia),
        ];
        for (name, v) in positive {
            if !v.is_finite() || v <= 0.0 {
                return Err(SysError::Validation {
                    field: format!("frequency.{name}"),
                    message: format!("must be positive, got {v}"),
                });
            }
        }
        if !f.damping.is_finite() || f.damping < 0.0 {
            return Err(SysError::Validation {
                field: "frequency.damping".into(),
                message: format!("must be non-negative, got {}", f.damping),
            });
        }
        if f.deadband != 0.0 {
            return Err(SysError::Validation {
                field: "frequency.deadband".into(),
                message: "governor deadbands are not modelled; only 0 is accepted".into(),
            });
        }
        let seg = &f.nadir_segments;
        if seg.iter().any(|v| !v.is_finite() || *v <= 0.0) || seg.windows(2).any(|w| w[1] <= w[0]) {
            return Err(SysError::Validation {
                field: "frequency.nadir_segments".into(),
                message: "must be positive and strictly increasing".into(),
            });
        }
        if *seg.last().unwrap() < f.largest_unit_rating {
            return Err(SysError::Validation {
                field: "frequency.nadir_segments".into(),
                message: format!("last segment must reach the largest unit rating {}", f.largest_unit_rating),
            });
        }

        if !self.demand.period_hours.is_finite() || self.demand.period_hours <= 0.0 {
            return Err(SysError::Validation { field: "demand.period_hours".into(), message: "must be positive".into() });
        }
        if self.demand.values.is_empty() {
            return Err(SysError::Validation { field: "demand.values".into(), message: "no periods".into() });
        }
        if let Some((t, v)) = self.demand.values.iter().enumerate().find(|(_, v)| !v.is_finite() || **v <= 0.0) {
            return Err(SysError::Validation {
                field: format!("demand.values[{t}]"),
                message: format!("demand must be positive, got {v}"),
            });
        }
        for (name, v) in [
            ("scenarios.wind_capacity", self.scenarios.wind_capacity),
            ("scenarios.reference_wind_capacity", self.scenarios.reference_wind_capacity),
        ] {
            if let Some(v) = v {
                if !v.is_finite() || v < 0.0 {
                    return Err(SysError::Validation { field: name.into(), message: format!("must be non-negative, got {v}") });
                }
            }
        }
        if self.wind_capacity() > 0.0 && self.reference_wind_capacity() <= 0.0 {
            return Err(SysError::Validation {
                field: "scenarios.reference_wind_capacity".into(),
                message: "must be positive to rescale wind".into(),
            });
        }
        Ok(())
    }
}

/// Reads and validates a system file.
pub fn load_system(path: impl AsRef<Path>) -> Result<SystemSpec, SysError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| SysError::Io { path: path.to_path_buf(), source })?;
    SystemSpec::from_toml_str(&text, path)
}

/// Scenario file location, resolved against the directory of the system file.
pub fn scenario_path(system_path: impl AsRef<Path>, spec: &SystemSpec) -> PathBuf {
    let f = &spec.scenarios.file;
    if f.is_absolute() {
        f.clone()
    } else {
        system_path.as_ref().parent().unwrap_or_else(|| Path::new(".")).join(f)
    }
}
