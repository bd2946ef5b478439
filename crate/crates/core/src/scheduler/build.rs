use crate::freqsec::{self, FreqDecisionSet};
use crate::milp::{LinearExpr, LinearRow, MilpModel, RowSense, VarId};
use crate::sysmodel::{ScenarioTree, SystemSpec};

use super::{LossMode, UcError, UcOptions};

/// Commitment state handed from one window to the next.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CommitmentHistory {
    /// `states[t][g]` for every period already simulated.
    pub states: Vec<Vec<bool>>,
}

/// One rolling-horizon window.
#[derive(Debug, Clone)]
pub struct WindowInput<'a> {
    /// Absolute index of the first window period.
    pub start: usize,
    /// Demand per window period, MW.
    pub demand: Vec<f64>,
    /// Net-demand tree; branch series have one value per window period.
    pub tree: ScenarioTree,
    pub history: &'a CommitmentHistory,
    /// Commitments already decided for the leading window periods.
    pub fixed: Vec<Vec<bool>>,
}

/// Variables of one period in one scenario (or of the root period).
#[derive(Debug, Clone, PartialEq)]
pub struct NodeIndex {
    /// Window-relative period.
    pub t: usize,
    /// `None` at the root period.
    pub scenario: Option<usize>,
    pub probability: f64,
    pub demand: f64,
    pub net_demand: f64,
    pub wind_available: f64,
    pub output: Vec<Option<VarId>>,
    pub pfr: Vec<Option<VarId>>,
    pub wind_used: VarId,
    pub freq: Option<FreqDecisionSet>,
    /// Linearised H·R of the node, when frequency rows are present.
    pub hr: Option<LinearExpr>,
}

#[derive(Debug, Clone)]
pub struct UcModel {
    pub model: MilpModel,
    pub start: usize,
    pub periods: usize,
    /// `commitment[t][g]`; `None` for wind records.
    pub commitment: Vec<Vec<Option<VarId>>>,
    pub startup: Vec<Vec<Option<VarId>>>,
    pub shutdown: Vec<Vec<Option<VarId>>>,
    /// Root node first, then every (period ≥ 1, scenario) node.
    pub nodes: Vec<NodeIndex>,
    /// True when no unit is eligible as a loss source.
    pub no_loss_source: bool,
}

fn periods_for(hours: f64, period_hours: f64) -> usize {
    if hours <= 0.0 {
        0
    } else {
        (hours / period_hours - 1e-9).ceil() as usize
    }
}

/// Output band of a unit while committed.
pub(crate) fn output_band(system: &SystemSpec, g: usize, options: &UcOptions) -> (f64, f64) {
    let u = &system.generators[g];
    let largest = system.largest_unit() == Some(g);
    if largest && options.mode == LossMode::Fixed {
        return (u.p_max, u.p_max);
    }
    if u.deloadable {
        if options.deloading_enabled && options.mode == LossMode::Optimised {
            let lo = (u.p_max * (1.0 - u.max_deload_fraction)).max(u.p_min);
            return (lo, u.p_max);
        }
        return (u.p_max, u.p_max);
    }
    (u.p_min, u.p_max)
}

/// Units whose commitment is forced on.
pub(crate) fn forced_on(system: &SystemSpec, g: usize, options: &UcOptions) -> bool {
    let u = &system.generators[g];
    u.must_run || (options.mode == LossMode::Fixed && system.largest_unit() == Some(g))
}

/// Builds the deterministic-equivalent MILP of one window.
pub fn build_window(system: &SystemSpec, w: &WindowInput<'_>, options: &UcOptions) -> Result<UcModel, UcError> {
    let gens = &system.generators;
    let n_t = w.demand.len();
    let dt = system.period_hours();
    let freq = &system.frequency;
    if w.tree.periods() != n_t {
        return Err(UcError::Input(format!(
            "scenario tree covers {} periods, window has {n_t}",
            w.tree.periods()
        )));
    }
    let mut m = MilpModel::new();
    let mut objective = LinearExpr::new();

    let mut commitment = vec![vec![None; gens.len()]; n_t];
    let mut startup = vec![vec![None; gens.len()]; n_t];
    let mut shutdown = vec![vec![None; gens.len()]; n_t];
    for t in 0..n_t {
        let a = w.start + t;
        for (g, u) in gens.iter().enumerate() {
            if !u.is_synchronous() {
                continue;
            }
            let x = m.add_binary(format!("x[{a}][{}]", u.id));
            m.set_priority(x, 2);
            if forced_on(system, g, options) {
                m.fix(x, 1.0);
            }
            if let Some(row) = w.fixed.get(t) {
                let want = f64::from(u8::from(row[g]));
                if forced_on(system, g, options) && want == 0.0 {
                    return Err(UcError::Input(format!("unit `{}` is forced on but fixed off in period {a}", u.id)));
                }
                m.fix(x, want);
            }
            commitment[t][g] = Some(x);
            objective.add_term(x, u.no_load_cost * dt);
            let su = m.add_continuous(format!("su[{a}][{}]", u.id), 0.0, 1.0);
            let sd = m.add_continuous(format!("sd[{a}][{}]", u.id), 0.0, 1.0);
            objective.add_term(su, u.startup_cost);
            startup[t][g] = Some(su);
            shutdown[t][g] = Some(sd);
        }
    }

    // Commitment state of an absolute period before the window.
    let past_state = |g: usize, a: isize| -> Option<bool> {
        if a < 0 {
            gens[g].initial_on
        } else {
            w.history.states.get(a as usize).map(|s| s[g])
        }
    };
    let past_change = |g: usize, a: isize, on: bool| -> f64 {
        match (past_state(g, a), past_state(g, a - 1)) {
            (Some(now), Some(before)) if now == on && before != on => 1.0,
            _ => 0.0,
        }
    };

    for (g, u) in gens.iter().enumerate() {
        if !u.is_synchronous() {
            continue;
        }
        let up = periods_for(u.min_up, dt);
        let down = periods_for(u.min_down, dt);
        for t in 0..n_t {
            let a = (w.start + t) as isize;
            let x = commitment[t][g].unwrap();
            let su = startup[t][g].unwrap();
            let sd = shutdown[t][g].unwrap();
            // su ≥ x_t − x_{t−1}, sd ≥ x_{t−1} − x_t.
            let prev: Option<LinearExpr> = if t > 0 {
                Some(LinearExpr::term(commitment[t - 1][g].unwrap(), 1.0))
            } else {
                past_state(g, a - 1).map(|b| LinearExpr::constant(f64::from(u8::from(b))))
            };
            if let Some(prev) = prev {
                let mut e = LinearExpr::term(su, 1.0).with_term(x, -1.0);
                e.add_scaled(&prev, 1.0);
                m.add_row(LinearRow::new(format!("startup[{a}][{}]", u.id), &e, RowSense::Ge, 0.0));
                let mut e = LinearExpr::term(sd, 1.0).with_term(x, 1.0);
                e.add_scaled(&prev, -1.0);
                m.add_row(LinearRow::new(format!("shutdown[{a}][{}]", u.id), &e, RowSense::Ge, 0.0));
            }
            if up > 1 {
                let mut e = LinearExpr::term(x, -1.0);
                for k in 0..up as isize {
                    let b = a - k;
                    if b >= w.start as isize {
                        e.add_term(startup[(b - w.start as isize) as usize][g].unwrap(), 1.0);
                    } else {
                        e.add_constant(past_change(g, b, true));
                    }
                }
                m.add_row(LinearRow::new(format!("min_up[{a}][{}]", u.id), &e, RowSense::Le, 0.0));
            }
            if down > 1 {
                let mut e = LinearExpr::term(x, 1.0);
                for k in 0..down as isize {
                    let b = a - k;
                    if b >= w.start as isize {
                        e.add_term(shutdown[(b - w.start as isize) as usize][g].unwrap(), 1.0);
                    } else {
                        e.add_constant(past_change(g, b, false));
                    }
                }
                m.add_row(LinearRow::new(format!("min_down[{a}][{}]", u.id), &e, RowSense::Le, 1.0));
            }
        }
    }

    let loss_cap = freq.largest_unit_rating;
    let r_max: f64 = gens.iter().filter(|g| g.is_synchronous()).map(|g| g.pfr_max).sum();
    let mut nodes = Vec::new();
    let mut no_loss_source = false;
    for t in 0..n_t {
        let a = w.start + t;
        let scen: Vec<(Option<usize>, f64, f64)> = if t == 0 {
            vec![(None, 1.0, w.tree.root)]
        } else {
            w.tree.branches.iter().enumerate().map(|(s, (series, p))| (Some(s), *p, series[t])).collect()
        };
        let demand = w.demand[t];
        for (s, prob, net) in scen {
            let tag = match s {
                None => format!("[{a}]"),
                Some(s) => format!("[{a}][{s}]"),
            };
            let avail = (demand - net).max(0.0);
            check_node_capacity(system, options, demand, avail, a, s)?;
            let mut output = vec![None; gens.len()];
            let mut pfr = vec![None; gens.len()];
            let mut balance = LinearExpr::new();
            for (g, u) in gens.iter().enumerate() {
                let Some(x) = commitment[t][g] else { continue };
                let (lo, hi) = output_band(system, g, options);
                let p = m.add_continuous(format!("p{tag}[{}]", u.id), 0.0, hi);
                output[g] = Some(p);
                balance.add_term(p, 1.0);
                objective.add_term(p, prob * u.marginal_cost * dt);
                // lo·x ≤ p ≤ hi·x
                m.add_row(LinearRow::new(
                    format!("p_min{tag}[{}]", u.id),
                    &LinearExpr::term(p, 1.0).with_term(x, -lo),
                    RowSense::Ge,
                    0.0,
                ));
                if u.pfr_max > 0.0 {
                    let r = m.add_continuous(format!("r{tag}[{}]", u.id), 0.0, u.pfr_max);
                    pfr[g] = Some(r);
                    m.add_row(LinearRow::new(
                        format!("pfr_cap{tag}[{}]", u.id),
                        &LinearExpr::term(r, 1.0).with_term(x, -u.pfr_max),
                        RowSense::Le,
                        0.0,
                    ));
                    m.add_row(LinearRow::new(
                        format!("headroom{tag}[{}]", u.id),
                        &LinearExpr::term(p, 1.0).with_term(r, 1.0).with_term(x, -hi),
                        RowSense::Le,
                        0.0,
                    ));
                } else {
                    m.add_row(LinearRow::new(
                        format!("p_max{tag}[{}]", u.id),
                        &LinearExpr::term(p, 1.0).with_term(x, -hi),
                        RowSense::Le,
                        0.0,
                    ));
                }
                if options.mode == LossMode::Fixed && system.largest_unit() == Some(g) {
                    m.add_row(LinearRow::new(
                        format!("fixed_loss{tag}[{}]", u.id),
                        &LinearExpr::term(p, 1.0),
                        RowSense::Eq,
                        u.p_max,
                    ));
                }
            }
            let wind_used = m.add_continuous(format!("wind{tag}"), 0.0, avail);
            balance.add_term(wind_used, 1.0);
            m.add_row(LinearRow::new(format!("balance{tag}"), &balance, RowSense::Eq, demand));

            let (fd, hr) = if options.frequency_constraints {
                let d = FreqDecisionSet::register(
                    &mut m,
                    &tag,
                    gens,
                    freq,
                    commitment[t].clone(),
                    output.clone(),
                    pfr.clone(),
                    loss_cap,
                    r_max,
                );
                let (rows, warn) = freqsec::largest_loss_rows(&d, gens);
                no_loss_source |= warn;
                m.add_rows(rows);
                let h = freqsec::inertia_expression(&d, gens, freq);
                m.add_row(freqsec::rocof_row(&d, &h, freq));
                m.add_row(freqsec::inertia_nonnegative_row(&d, &h));
                m.add_row(freqsec::qss_row(&d, freq, demand));
                let hr = if r_max > 0.0 {
                    let (hr, rows) = freqsec::linearize_inertia_pfr(&d, gens, freq, r_max)?;
                    m.add_rows(rows);
                    hr
                } else {
                    LinearExpr::new()
                };
                m.add_rows(freqsec::nadir_discretization_rows(&d, &hr, freq, demand)?);
                m.add_row(nadir_hull_row(&d, &hr, freq, demand));
                (Some(d), Some(hr))
            } else {
                (None, None)
            };
            nodes.push(NodeIndex {
                t,
                scenario: s,
                probability: prob,
                demand,
                net_demand: net,
                wind_available: avail,
                output,
                pfr,
                wind_used,
                freq: fd,
                hr,
            });
        }
    }
    m.objective = objective;
    m.validate().map_err(crate::milp::MilpError::from)?;
    Ok(UcModel { model: m, start: w.start, periods: n_t, commitment, startup, shutdown, nodes, no_loss_source })
}

/// `H·R ≥ Σ_i m_i·(k_i − β·P_i)`: valid because exactly one segment is
/// selected; by convexity of the requirement it keeps fractional segment
/// choices at or above the continuous requirement.
fn nadir_hull_row(
    d: &FreqDecisionSet,
    hr: &LinearExpr,
    freq: &crate::sysmodel::FrequencyParams,
    demand: f64,
) -> LinearRow {
    let mut e = hr.clone();
    for (&p_i, &m) in freq.nadir_segments.iter().zip(&d.segments) {
        e.add_term(m, -freqsec::nadir_requirement(p_i, freq, demand));
    }
    LinearRow::new(format!("nadir_hull{}", d.tag), &e, RowSense::Ge, 0.0)
}

fn check_node_capacity(
    system: &SystemSpec,
    options: &UcOptions,
    demand: f64,
    avail: f64,
    period: usize,
    scenario: Option<usize>,
) -> Result<(), UcError> {
    let gens = &system.generators;
    let max_thermal: f64 =
        (0..gens.len()).filter(|&g| gens[g].is_synchronous()).map(|g| output_band(system, g, options).1).sum();
    if max_thermal + avail < demand - 1e-9 {
        return Err(UcError::InfeasibleByConstruction {
            period,
            scenario,
            reason: format!("demand {demand} MW exceeds capacity {max_thermal} MW plus available wind {avail} MW"),
        });
    }
    let min_forced: f64 = (0..gens.len())
        .filter(|&g| gens[g].is_synchronous() && forced_on(system, g, options))
        .map(|g| output_band(system, g, options).0)
        .sum();
    if min_forced > demand + 1e-9 {
        return Err(UcError::InfeasibleByConstruction {
            period,
            scenario,
            reason: format!("must-run minimum output {min_forced} MW exceeds demand {demand} MW"),
        });
    }
    Ok(())
}

/// Model of the first `tree.periods()` periods with no prior history.
pub fn build_uc(system: &SystemSpec, tree: &ScenarioTree, options: &UcOptions) -> Result<UcModel, UcError> {
    let n = tree.periods();
    if n > system.periods() {
        return Err(UcError::Input(format!("tree has {n} periods, system has {}", system.periods())));
    }
    let history = CommitmentHistory::default();
    let w = WindowInput {
        start: 0,
        demand: system.demand.values[..n].to_vec(),
        tree: tree.clone(),
        history: &history,
        fixed: Vec::new(),
    };
    build_window(system, &w, options)
}
