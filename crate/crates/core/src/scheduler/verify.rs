use crate::freqdyn::{self, Check, SecurityReport, SwingInputs};
use crate::sysmodel::SystemSpec;

use super::{RollingResult, UcSolution};

/// Swing-equation check of one solved node.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeCheck {
    pub window_start: usize,
    pub period: usize,
    pub scenario: Option<usize>,
    pub inputs: SwingInputs,
    pub nadir: f64,
    pub initial_rocof: f64,
    pub deviation_60s: f64,
    pub report: SecurityReport,
}

impl NodeCheck {
    pub fn secure(&self) -> bool {
        self.report.secure()
    }
}

fn failed() -> SecurityReport {
    let bad = Check { ok: false, margin: f64::NEG_INFINITY };
    SecurityReport { rocof: bad, nadir: bad, qss: bad }
}

/// Simulates the loss of the largest infeed at every node of a window.
/// The loss is `max(P^L, max_g P_g)`, the inertia comes from the rounded
/// commitment and the damping from the node's demand.
pub fn verify_solution(system: &SystemSpec, sol: &UcSolution) -> Vec<NodeCheck> {
    let freq = &system.frequency;
    sol.nodes
        .iter()
        .map(|n| {
            let loss = n.largest_loss_var.map_or(n.largest_loss, |v| v.max(n.largest_loss));
            let inputs = SwingInputs::new(n.inertia, freq.damping_product(n.demand), n.total_pfr(), freq.t_d, loss);
            let (nadir, initial_rocof, deviation_60s, report) = match freqdyn::simulate_swing(&inputs) {
                Ok(trace) => {
                    let report = freqdyn::check_security(&trace, freq);
                    (trace.nadir, trace.initial_rocof, trace.deviation_60s, report)
                }
                Err(_) => (f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY, failed()),
            };
            NodeCheck {
                window_start: sol.start,
                period: n.period,
                scenario: n.scenario,
                inputs,
                nadir,
                initial_rocof,
                deviation_60s,
                report,
            }
        })
        .collect()
}

/// Checks of every node of every window.
pub fn verify_trajectory(system: &SystemSpec, result: &RollingResult) -> Vec<NodeCheck> {
    result.windows.iter().flat_map(|w| verify_solution(system, w)).collect()
}

pub fn verification_csv(checks: &[NodeCheck]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "window_start",
        "period",
        "scenario",
        "inertia_mws2",
        "damping_mw_per_hz",
        "pfr_mw",
        "loss_mw",
        "nadir_hz",
        "initial_rocof_hz_per_s",
        "deviation_60s_hz",
        "rocof_ok",
        "nadir_ok",
        "qss_ok",
        "secure",
    ])
    .expect("in-memory write");
    for c in checks {
        w.write_record([
            c.window_start.to_string(),
            c.period.to_string(),
            c.scenario.map_or("root".to_string(), |s| s.to_string()),
            c.inputs.inertia.to_string(),
            c.inputs.damping_product.to_string(),
            c.inputs.pfr.to_string(),
            c.inputs.loss.to_string(),
            c.nadir.to_string(),
            c.initial_rocof.to_string(),
            c.deviation_60s.to_string(),
            c.report.rocof.ok.to_string(),
            c.report.nadir.ok.to_string(),
            c.report.qss.ok.to_string(),
            c.secure().to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}
