//! Mixed-integer linear programming: model IR, a bounded-variable simplex,
//! best-bound branch-and-bound, an enumeration oracle, and LP-format I/O.

mod branch;
mod exhaustive;
pub mod lpformat;
pub mod model;
mod simplex;

use std::fmt;

use thiserror::Error;

pub use branch::solve;
pub use exhaustive::{solve_exhaustive, MAX_EXHAUSTIVE_BINARIES};
pub use lpformat::{export_model, export_solution, import_model, import_solution, ImportedSolution};
pub use model::{LinearExpr, LinearRow, MilpModel, ModelError, RowSense, VarId, VarKind, Variable};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// A node or iteration limit stopped the search; the best incumbent (if
    /// any) is reported.
    Limit,
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::Unbounded => "unbounded",
            SolveStatus::Limit => "limit",
        })
    }
}

impl std::str::FromStr for SolveStatus {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "optimal" => Ok(SolveStatus::Optimal),
            "infeasible" => Ok(SolveStatus::Infeasible),
            "unbounded" => Ok(SolveStatus::Unbounded),
            "limit" => Ok(SolveStatus::Limit),
            other => Err(format!("unknown solve status `{other}`")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    /// Row feasibility tolerance, measured on rows normalised by their largest coefficient.
    pub feasibility_tol: f64,
    /// Relative optimality gap at which branch-and-bound stops.
    pub gap_tol: f64,
    pub integer_tol: f64,
    pub node_limit: usize,
    pub lp_iteration_limit: usize,
    /// Threads used to evaluate a batch of open nodes.
    pub workers: usize,
    /// Nodes taken from the queue per round. Results are independent of
    /// `workers` for a fixed batch size.
    pub batch: usize,
    /// Run a diving heuristic every this many nodes (0 disables periodic dives).
    pub dive_every: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            feasibility_tol: 1e-6,
            gap_tol: 1e-6,
            integer_tol: 1e-6,
            node_limit: 200_000,
            lp_iteration_limit: 200_000,
            workers: 1,
            batch: 1,
            dive_every: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MilpSolution {
    pub status: SolveStatus,
    /// Value per variable id; empty when no feasible point is known.
    pub values: Vec<f64>,
    pub objective: f64,
    pub gap: f64,
    pub nodes: usize,
    /// Objective of the root LP relaxation (a lower bound on the optimum).
    pub root_bound: f64,
}

impl MilpSolution {
    pub fn value(&self, id: VarId) -> f64 {
        self.values[id.0]
    }

    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }

    pub(crate) fn without_point(status: SolveStatus, nodes: usize, root_bound: f64) -> Self {
        Self { status, values: Vec::new(), objective: f64::NAN, gap: f64::INFINITY, nodes, root_bound }
    }
}

#[derive(Debug, Error)]
pub enum MilpError {
    #[error("invalid model: {0}")]
    Model(#[from] ModelError),
    #[error("exhaustive enumeration supports at most {max} binaries, model has {found}")]
    TooManyBinaries { found: usize, max: usize },
    #[error("basis factorisation dropped dependent columns {columns:?} (rows: {rows})")]
    SingularBasis { columns: Vec<String>, rows: usize },
}
