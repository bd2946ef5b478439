//! Stochastic frequency-secured unit commitment: window models over a
//! scenario tree, rolling-horizon simulation, verification and study metrics.

mod build;
mod metrics;
mod rolling;
mod study;
mod verify;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::freqsec::FreqSecError;
use crate::milp::{MilpError, MilpSolution, SolveOptions, SolveStatus};
use crate::sysmodel::{SysError, SystemSpec};

pub use build::{build_uc, build_window, CommitmentHistory, NodeIndex, UcModel, WindowInput};
pub use metrics::{
    cost_of_frequency_services, curtailed_energy, emissions, load_factor, node_csv, trajectory_csv, CfsReport,
};
pub use rolling::{
    solve_rolling_horizon, solve_rolling_horizon_with, solve_window, BuiltinSolver, PeriodRecord, RollingResult,
    Trajectory, WindowSolver,
};
pub use study::{load_study, run_study, study_csv, StudyCell, StudyConfig, StudyRow};
pub use verify::{verification_csv, verify_solution, verify_trajectory, NodeCheck};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossMode {
    /// The largest plant is committed and held at its rating.
    Fixed,
    /// The largest plant may deload within its band.
    Optimised,
}

impl fmt::Display for LossMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            LossMode::Fixed => "fixed",
            LossMode::Optimised => "optimised",
        })
    }
}

impl FromStr for LossMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "fixed" => Ok(LossMode::Fixed),
            "optimised" | "optimized" => Ok(LossMode::Optimised),
            other => Err(format!("unknown largest-loss mode `{other}` (expected fixed or optimised)")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct UcOptions {
    pub frequency_constraints: bool,
    pub deloading_enabled: bool,
    /// Window length, periods.
    pub horizon: usize,
    /// Periods whose commitment is fixed by each commitment decision.
    pub first_stage: usize,
    pub mode: LossMode,
    pub solver: SolveOptions,
}

impl Default for UcOptions {
    fn default() -> Self {
        Self {
            frequency_constraints: true,
            deloading_enabled: true,
            horizon: 2,
            first_stage: 1,
            mode: LossMode::Optimised,
            solver: SolveOptions::default(),
        }
    }
}

impl UcOptions {
    pub fn validate(&self) -> Result<(), UcError> {
        if self.horizon < 1 {
            return Err(UcError::Options("horizon must be at least 1 period".into()));
        }
        if self.first_stage < 1 || self.first_stage > self.horizon {
            return Err(UcError::Options(format!(
                "first-stage length {} must lie in 1..={}",
                self.first_stage, self.horizon
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum UcError {
    #[error("invalid options: {0}")]
    Options(String),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("unknown unit `{0}`")]
    UnknownUnit(String),
    #[error(transparent)]
    System(#[from] SysError),
    #[error(transparent)]
    FreqSec(#[from] FreqSecError),
    #[error(transparent)]
    Milp(#[from] MilpError),
    #[error("period {period}{}: infeasible by construction: {reason}", scenario_suffix(*scenario))]
    InfeasibleByConstruction { period: usize, scenario: Option<usize>, reason: String },
    #[error("window starting at period {start} stopped with status {status} after {nodes} nodes")]
    Window {
        start: usize,
        status: SolveStatus,
        nodes: usize,
        partial: Box<RollingResult>,
        /// The model that failed, for offline solving.
        model: Box<crate::milp::MilpModel>,
    },
    #[error("external solver: {0}")]
    External(String),
}

fn scenario_suffix(s: Option<usize>) -> String {
    s.map(|s| format!(" scenario {s}")).unwrap_or_default()
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CostBreakdown {
    pub fuel: f64,
    pub no_load: f64,
    pub startup: f64,
}

impl CostBreakdown {
    pub fn total(&self) -> f64 {
        self.fuel + self.no_load + self.startup
    }
}

/// Values of one (period, scenario) node.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeSolution {
    /// Absolute period.
    pub period: usize,
    pub scenario: Option<usize>,
    pub probability: f64,
    pub demand: f64,
    pub net_demand: f64,
    pub wind_available: f64,
    pub wind_used: f64,
    pub output: Vec<f64>,
    pub pfr: Vec<f64>,
    /// Largest infeed max_g P_g over loss sources.
    pub largest_loss: f64,
    /// P^L decision, when frequency rows are present.
    pub largest_loss_var: Option<f64>,
    /// Grid value of the tightest segment covering `largest_loss`.
    pub nadir_loss: Option<f64>,
    pub segment: Option<usize>,
    /// Raw segment binaries as solved.
    pub segment_values: Vec<f64>,
    /// Post-loss inertia from the rounded commitment, MW·s².
    pub inertia: f64,
    pub fuel_cost: f64,
}

impl NodeSolution {
    pub fn curtailment(&self) -> f64 {
        (self.wind_available - self.wind_used).max(0.0)
    }

    pub fn total_pfr(&self) -> f64 {
        self.pfr.iter().sum()
    }

    pub fn load_served(&self) -> f64 {
        self.output.iter().sum::<f64>() + self.wind_used
    }
}

/// Solution of one window model.
#[derive(Debug, Clone, PartialEq)]
pub struct UcSolution {
    pub start: usize,
    pub status: SolveStatus,
    pub objective: f64,
    pub gap: f64,
    pub nodes_explored: usize,
    pub root_bound: f64,
    pub frequency_constraints: bool,
    /// `commitment[t][g]` per window period.
    pub commitment: Vec<Vec<bool>>,
    /// No-load and start-up cost per window period.
    pub first_stage_costs: Vec<CostBreakdown>,
    /// Root node, then the branch nodes period by period.
    pub nodes: Vec<NodeSolution>,
    pub scenarios: usize,
}

impl UcSolution {
    /// Cost of each scenario path: the root period plus that scenario's later periods.
    pub fn scenario_costs(&self) -> Vec<CostBreakdown> {
        let mut out = vec![CostBreakdown::default(); self.scenarios.max(1)];
        for (t, fs) in self.first_stage_costs.iter().enumerate() {
            for c in out.iter_mut() {
                c.no_load += fs.no_load;
                c.startup += fs.startup;
            }
            for n in self.nodes.iter().filter(|n| n.period == self.start + t) {
                match n.scenario {
                    Some(s) => out[s].fuel += n.fuel_cost,
                    None => out.iter_mut().for_each(|c| c.fuel += n.fuel_cost),
                }
            }
        }
        out
    }

    pub fn root(&self) -> &NodeSolution {
        &self.nodes[0]
    }
}

/// Reads a solved window model back into per-node values.
pub fn extract_solution(
    system: &SystemSpec,
    uc: &UcModel,
    sol: &MilpSolution,
    frequency_constraints: bool,
) -> UcSolution {
    let gens = &system.generators;
    let freq = &system.frequency;
    let dt = system.period_hours();
    let val = |v: Option<crate::milp::VarId>| v.map_or(0.0, |v| sol.value(v));
    let commitment: Vec<Vec<bool>> =
        uc.commitment.iter().map(|row| row.iter().map(|x| val(*x) > 0.5).collect()).collect();
    let first_stage_costs = (0..uc.periods)
        .map(|t| {
            let mut c = CostBreakdown::default();
            for (g, u) in gens.iter().enumerate() {
                if commitment[t][g] {
                    c.no_load += u.no_load_cost * dt;
                }
                c.startup += u.startup_cost * val(uc.startup[t][g]);
            }
            c
        })
        .collect();
    let nodes = uc
        .nodes
        .iter()
        .map(|n| {
            let x = &commitment[n.t];
            let output: Vec<f64> = n.output.iter().map(|&p| val(p)).collect();
            let pfr: Vec<f64> = n.pfr.iter().map(|&r| val(r)).collect();
            let largest_loss = largest_infeed(system, &output);
            let fuel_cost = gens.iter().zip(&output).map(|(u, p)| u.marginal_cost * p * dt).sum();
            let (largest_loss_var, nadir_loss, segment, segment_values) = match &n.freq {
                Some(d) => {
                    let seg = crate::freqsec::tightest_segment(freq, largest_loss);
                    (
                        Some(sol.value(d.largest_loss)),
                        seg.map(|i| freq.nadir_segments[i]),
                        seg,
                        d.segments.iter().map(|&m| sol.value(m)).collect(),
                    )
                }
                None => (None, None, None, Vec::new()),
            };
            NodeSolution {
                period: uc.start + n.t,
                scenario: n.scenario,
                probability: n.probability,
                demand: n.demand,
                net_demand: n.net_demand,
                wind_available: n.wind_available,
                wind_used: sol.value(n.wind_used),
                output,
                pfr,
                largest_loss,
                largest_loss_var,
                nadir_loss,
                segment,
                segment_values,
                inertia: post_loss_inertia(system, x),
                fuel_cost,
            }
        })
        .collect();
    UcSolution {
        start: uc.start,
        status: sol.status,
        objective: sol.objective,
        gap: sol.gap,
        nodes_explored: sol.nodes,
        root_bound: sol.root_bound,
        frequency_constraints,
        commitment,
        first_stage_costs,
        nodes,
        scenarios: uc.nodes.iter().filter_map(|n| n.scenario).max().map_or(0, |s| s + 1),
    }
}

/// max P_g over loss-eligible synchronous units.
pub fn largest_infeed(system: &SystemSpec, output: &[f64]) -> f64 {
    system
        .generators
        .iter()
        .zip(output)
        .filter(|(g, _)| g.is_loss_source())
        .map(|(_, &p)| p)
        .fold(0.0, f64::max)
}

/// `(Σ H_g·P_g^max·x_g − P_max^L·H^L)/f0` for a commitment vector.
pub fn post_loss_inertia(system: &SystemSpec, commitment: &[bool]) -> f64 {
    let f = &system.frequency;
    let online: f64 = system
        .generators
        .iter()
        .zip(commitment)
        .filter(|(g, &x)| x && g.is_synchronous())
        .map(|(g, _)| g.inertia_const * g.p_max)
        .sum();
    (online - f.largest_unit_rating * f.largest_unit_inertia) / f.f0
}
