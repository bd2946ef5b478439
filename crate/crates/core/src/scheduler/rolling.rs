use crate::milp::{self, MilpModel, MilpSolution, SolveOptions, SolveStatus};
use crate::sysmodel::{build_scenario_tree, NetDemandQuantiles, SystemSpec};

use super::build::{build_window, CommitmentHistory, UcModel, WindowInput};
use super::{extract_solution, post_loss_inertia, UcError, UcOptions, UcSolution};

/// Committed values of one simulated period, taken from the root node of
/// the window that starts there.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodRecord {
    pub period: usize,
    pub demand: f64,
    pub net_demand: f64,
    pub wind_available: f64,
    pub wind_used: f64,
    pub commitment: Vec<bool>,
    pub output: Vec<f64>,
    pub pfr: Vec<f64>,
    pub largest_loss: f64,
    pub nadir_loss: Option<f64>,
    pub segment: Option<usize>,
    pub inertia: f64,
    pub fuel_cost: f64,
    pub no_load_cost: f64,
    pub startup_cost: f64,
}

impl PeriodRecord {
    pub fn curtailment(&self) -> f64 {
        (self.wind_available - self.wind_used).max(0.0)
    }

    pub fn cost(&self) -> f64 {
        self.fuel_cost + self.no_load_cost + self.startup_cost
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub unit_ids: Vec<String>,
    pub unit_p_max: Vec<f64>,
    pub period_hours: f64,
    pub periods: Vec<PeriodRecord>,
}

impl Trajectory {
    pub fn total_cost(&self) -> f64 {
        self.periods.iter().map(PeriodRecord::cost).sum()
    }

    pub fn unit_index(&self, id: &str) -> Option<usize> {
        self.unit_ids.iter().position(|u| u == id)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RollingResult {
    pub windows: Vec<UcSolution>,
    pub trajectory: Trajectory,
}

/// Solves the MILP of one window.
pub trait WindowSolver: Sync {
    fn solve_model(&self, start: usize, model: &MilpModel, options: &SolveOptions) -> Result<MilpSolution, UcError>;
}

/// The built-in branch-and-bound solver.
#[derive(Debug, Clone, Copy, Default)]
pub struct BuiltinSolver;

impl WindowSolver for BuiltinSolver {
    fn solve_model(&self, _start: usize, model: &MilpModel, options: &SolveOptions) -> Result<MilpSolution, UcError> {
        Ok(milp::solve(model, options)?)
    }
}

fn solve_built(
    system: &SystemSpec,
    w: &WindowInput<'_>,
    options: &UcOptions,
    solver: &dyn WindowSolver,
) -> Result<(UcSolution, UcModel), UcError> {
    let uc = build_window(system, w, options)?;
    let sol = solver.solve_model(w.start, &uc.model, &options.solver)?;
    if sol.values.is_empty() {
        let empty = UcSolution {
            start: w.start,
            status: sol.status,
            objective: f64::NAN,
            gap: sol.gap,
            nodes_explored: sol.nodes,
            root_bound: sol.root_bound,
            frequency_constraints: options.frequency_constraints,
            commitment: Vec::new(),
            first_stage_costs: Vec::new(),
            nodes: Vec::new(),
            scenarios: 0,
        };
        return Ok((empty, uc));
    }
    Ok((extract_solution(system, &uc, &sol, options.frequency_constraints), uc))
}

/// Builds and solves one window.
pub fn solve_window(system: &SystemSpec, w: &WindowInput<'_>, options: &UcOptions) -> Result<UcSolution, UcError> {
    solve_built(system, w, options, &BuiltinSolver).map(|(s, _)| s)
}

/// Simulates every period of `system`: each period is re-solved on its
/// realised net demand; commitments are fixed `first_stage` periods at a time.
pub fn solve_rolling_horizon(
    system: &SystemSpec,
    scenarios: &NetDemandQuantiles,
    options: &UcOptions,
) -> Result<RollingResult, UcError> {
    solve_rolling_horizon_with(system, scenarios, options, &BuiltinSolver)
}

/// [`solve_rolling_horizon`] with a caller-supplied window solver.
pub fn solve_rolling_horizon_with(
    system: &SystemSpec,
    scenarios: &NetDemandQuantiles,
    options: &UcOptions,
    solver: &dyn WindowSolver,
) -> Result<RollingResult, UcError> {
    options.validate()?;
    let n = system.periods();
    if scenarios.periods() < n {
        return Err(UcError::Input(format!("scenario data covers {} periods, system has {n}", scenarios.periods())));
    }
    if let Some(r) = &scenarios.realized {
        if r.len() < n {
            return Err(UcError::Input(format!("realised net demand covers {} periods, system has {n}", r.len())));
        }
    }
    let demand = &system.demand.values;
    let scen = scenarios.rescale_wind(&demand[..n], system.reference_wind_capacity(), system.wind_capacity());
    let gens = &system.generators;
    let mut result = RollingResult {
        windows: Vec::new(),
        trajectory: Trajectory {
            unit_ids: gens.iter().map(|g| g.id.clone()).collect(),
            unit_p_max: gens.iter().map(|g| g.p_max).collect(),
            period_hours: system.period_hours(),
            periods: Vec::new(),
        },
    };
    let mut history = CommitmentHistory::default();
    let mut decided: Vec<Vec<bool>> = Vec::new();
    for t in 0..n {
        let len = options.horizon.min(n - t);
        let tree = build_scenario_tree(&scen.levels, &scen.values[t..t + len], scen.realized_at(t))?;
        let w = WindowInput {
            start: t,
            demand: demand[t..t + len].to_vec(),
            tree,
            history: &history,
            fixed: decided[t..].to_vec(),
        };
        let (sol, uc) = solve_built(system, &w, options, solver)?;
        if sol.status != SolveStatus::Optimal {
            return Err(UcError::Window {
                start: t,
                status: sol.status,
                nodes: sol.nodes_explored,
                partial: Box::new(result),
                model: Box::new(uc.model),
            });
        }
        if decided.len() == t {
            let k = options.first_stage.min(len);
            decided.extend(sol.commitment[..k].iter().cloned());
        }
        let root = sol.root();
        let x = decided[t].clone();
        let dt = system.period_hours();
        let startup_cost = gens
            .iter()
            .enumerate()
            .filter(|&(g, u)| {
                let before = if t == 0 { u.initial_on } else { Some(history.states[t - 1][g]) };
                u.is_synchronous() && x[g] && before == Some(false)
            })
            .map(|(_, u)| u.startup_cost)
            .sum();
        let no_load_cost = gens.iter().zip(&x).filter(|(_, &on)| on).map(|(u, _)| u.no_load_cost * dt).sum();
        result.trajectory.periods.push(PeriodRecord {
            period: t,
            demand: root.demand,
            net_demand: root.net_demand,
            wind_available: root.wind_available,
            wind_used: root.wind_used,
            commitment: x.clone(),
            output: root.output.clone(),
            pfr: root.pfr.clone(),
            largest_loss: root.largest_loss,
            nadir_loss: root.nadir_loss,
            segment: root.segment,
            inertia: post_loss_inertia(system, &x),
            fuel_cost: root.fuel_cost,
            no_load_cost,
            startup_cost,
        });
        history.states.push(x);
        result.windows.push(sol);
    }
    Ok(result)
}
