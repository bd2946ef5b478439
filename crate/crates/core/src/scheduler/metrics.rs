use crate::sysmodel::{NetDemandQuantiles, SystemSpec};

use super::{solve_rolling_horizon, RollingResult, Trajectory, UcError, UcOptions, UcSolution};

#[derive(Debug, Clone, PartialEq)]
pub struct CfsReport {
    pub on: RollingResult,
    pub off: RollingResult,
    pub cost_on: f64,
    pub cost_off: f64,
}

impl CfsReport {
    /// cost_on − cost_off.
    pub fn value(&self) -> f64 {
        self.cost_on - self.cost_off
    }
}

/// Simulates with frequency constraints on and off, all other options equal.
pub fn cost_of_frequency_services(
    system: &SystemSpec,
    scenarios: &NetDemandQuantiles,
    options: &UcOptions,
) -> Result<CfsReport, UcError> {
    let on = solve_rolling_horizon(system, scenarios, &UcOptions { frequency_constraints: true, ..options.clone() })?;
    let off =
        solve_rolling_horizon(system, scenarios, &UcOptions { frequency_constraints: false, ..options.clone() })?;
    let cost_on = on.trajectory.total_cost();
    let cost_off = off.trajectory.total_cost();
    Ok(CfsReport { on, off, cost_on, cost_off })
}

/// Energy of unit `id` over p_max times the simulated hours.
pub fn load_factor(trajectory: &Trajectory, id: &str) -> Result<f64, UcError> {
    let g = trajectory.unit_index(id).ok_or_else(|| UcError::UnknownUnit(id.to_string()))?;
    let n = trajectory.periods.len();
    let p_max = trajectory.unit_p_max[g];
    if n == 0 || p_max <= 0.0 {
        return Ok(0.0);
    }
    let energy: f64 = trajectory.periods.iter().map(|p| p.output[g]).sum();
    Ok(energy / (p_max * n as f64))
}

/// Σ energy × emissions_rate, tCO2.
pub fn emissions(trajectory: &Trajectory, system: &SystemSpec) -> f64 {
    let dt = trajectory.period_hours;
    trajectory
        .periods
        .iter()
        .map(|p| system.generators.iter().zip(&p.output).map(|(g, e)| g.emissions_rate * e * dt).sum::<f64>())
        .sum()
}

/// Curtailed wind energy, MWh.
pub fn curtailed_energy(trajectory: &Trajectory) -> f64 {
    trajectory.periods.iter().map(|p| p.curtailment() * trajectory.period_hours).sum()
}

fn fmt_opt<T: ToString>(v: Option<T>) -> String {
    v.map_or(String::new(), |v| v.to_string())
}

/// One row per simulated period; per-unit columns `x_<id>`, `p_<id>`, `r_<id>` follow the totals.
pub fn trajectory_csv(trajectory: &Trajectory) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = [
        "period",
        "demand_mw",
        "net_demand_mw",
        "wind_available_mw",
        "wind_used_mw",
        "curtailment_mw",
        "largest_loss_mw",
        "nadir_loss_mw",
        "segment",
        "inertia_mws2",
        "pfr_mw",
        "fuel_cost",
        "no_load_cost",
        "startup_cost",
        "total_cost",
    ]
    .map(String::from)
    .to_vec();
    for prefix in ["x", "p", "r"] {
        header.extend(trajectory.unit_ids.iter().map(|id| format!("{prefix}_{id}")));
    }
    w.write_record(&header).expect("in-memory write");
    for p in &trajectory.periods {
        let mut row = vec![
            p.period.to_string(),
            p.demand.to_string(),
            p.net_demand.to_string(),
            p.wind_available.to_string(),
            p.wind_used.to_string(),
            p.curtailment().to_string(),
            p.largest_loss.to_string(),
            fmt_opt(p.nadir_loss),
            fmt_opt(p.segment),
            p.inertia.to_string(),
            p.pfr.iter().sum::<f64>().to_string(),
            p.fuel_cost.to_string(),
            p.no_load_cost.to_string(),
            p.startup_cost.to_string(),
            p.cost().to_string(),
        ];
        row.extend(p.commitment.iter().map(|&x| u8::from(x).to_string()));
        row.extend(p.output.iter().map(f64::to_string));
        row.extend(p.pfr.iter().map(f64::to_string));
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}

/// One row per node of every window.
pub fn node_csv(unit_ids: &[String], windows: &[UcSolution]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = [
        "window_start",
        "period",
        "scenario",
        "probability",
        "demand_mw",
        "net_demand_mw",
        "wind_used_mw",
        "curtailment_mw",
        "load_served_mw",
        "largest_loss_mw",
        "nadir_loss_mw",
        "segment",
        "inertia_mws2",
        "pfr_mw",
        "fuel_cost",
    ]
    .map(String::from)
    .to_vec();
    for prefix in ["x", "p", "r"] {
        header.extend(unit_ids.iter().map(|id| format!("{prefix}_{id}")));
    }
    w.write_record(&header).expect("in-memory write");
    for sol in windows {
        for n in &sol.nodes {
            let mut row = vec![
                sol.start.to_string(),
                n.period.to_string(),
                n.scenario.map_or("root".to_string(), |s| s.to_string()),
                n.probability.to_string(),
                n.demand.to_string(),
                n.net_demand.to_string(),
                n.wind_used.to_string(),
                n.curtailment().to_string(),
                n.load_served().to_string(),
                n.largest_loss.to_string(),
                fmt_opt(n.nadir_loss),
                fmt_opt(n.segment),
                n.inertia.to_string(),
                n.total_pfr().to_string(),
                n.fuel_cost.to_string(),
            ];
            row.extend(sol.commitment[n.period - sol.start].iter().map(|&x| u8::from(x).to_string()));
            row.extend(n.output.iter().map(f64::to_string));
            row.extend(n.pfr.iter().map(f64::to_string));
            w.write_record(&row).expect("in-memory write");
        }
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}
