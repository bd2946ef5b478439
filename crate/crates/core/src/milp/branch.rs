//! Best-bound branch-and-bound over binary variables.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::Arc;

use rayon::prelude::*;

use super::model::MilpModel;
use super::simplex::{Basis, LpProblem, LpResult, LpStatus};
use super::{MilpError, MilpSolution, SolveOptions, SolveStatus};

struct Node {
    bound: f64,
    depth: usize,
    index: usize,
    fixings: Vec<(usize, f64)>,
    basis: Arc<Basis>,
}

// Heap order: lower bound first, then deeper, then earlier creation.
impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then(self.depth.cmp(&other.depth))
            .then(other.index.cmp(&self.index))
    }
}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

struct Search<'a> {
    model: &'a MilpModel,
    lp: LpProblem,
    options: &'a SolveOptions,
    binaries: Vec<usize>,
    priority: Vec<u32>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    incumbent: Option<(f64, Vec<f64>)>,
    created: usize,
    nodes: usize,
}

impl<'a> Search<'a> {
    fn bounds_for(&self, fixings: &[(usize, f64)]) -> (Vec<f64>, Vec<f64>) {
        let mut lo = self.lower.clone();
        let mut up = self.upper.clone();
        for &(j, v) in fixings {
            lo[j] = v;
            up[j] = v;
        }
        (lo, up)
    }

    fn solve_lp(&self, fixings: &[(usize, f64)], warm: Option<&Basis>) -> LpResult {
        let (lo, up) = self.bounds_for(fixings);
        self.lp.solve(&lo, &up, warm, self.options.lp_iteration_limit)
    }

    fn cutoff(&self) -> f64 {
        match &self.incumbent {
            Some((obj, _)) => obj - self.options.gap_tol * obj.abs().max(1.0),
            None => f64::INFINITY,
        }
    }

    /// Most fractional binary of the highest priority class present, ties
    /// to the lowest index.
    fn branching_var(&self, x: &[f64]) -> Option<usize> {
        let mut best: Option<(u32, usize)> = None;
        let mut best_dist = 0.0;
        for (k, &j) in self.binaries.iter().enumerate() {
            let f = x[j] - x[j].floor();
            let dist = f.min(1.0 - f);
            if dist <= self.options.integer_tol {
                continue;
            }
            let p = self.priority[k];
            let better = match best {
                None => true,
                Some((bp, _)) => p > bp || (p == bp && dist > best_dist),
            };
            if better {
                best = Some((p, j));
                best_dist = dist;
            }
        }
        best.map(|(_, j)| j)
    }

    /// Least fractional unfixed binary of the highest priority class present.
    fn least_fractional(&self, x: &[f64], fixings: &[(usize, f64)]) -> Option<usize> {
        let mut best: Option<(u32, usize)> = None;
        let mut best_dist = f64::INFINITY;
        for (k, &j) in self.binaries.iter().enumerate() {
            let f = x[j] - x[j].floor();
            let dist = f.min(1.0 - f);
            if dist <= self.options.integer_tol || fixings.iter().any(|&(i, _)| i == j) {
                continue;
            }
            let p = self.priority[k];
            let better = match best {
                None => true,
                Some((bp, _)) => p > bp || (p == bp && dist < best_dist),
            };
            if better {
                best = Some((p, j));
                best_dist = dist;
            }
        }
        best.map(|(_, j)| j)
    }

    /// Fixes every binary to its rounded value and re-solves the continuous
    /// part, producing an exactly integral point.
    fn polish(&mut self, x: &[f64], warm: &Basis) -> bool {
        let fixings: Vec<(usize, f64)> = self.binaries.iter().map(|&j| (j, x[j].round())).collect();
        let r = self.solve_lp(&fixings, Some(warm));
        if r.status != LpStatus::Optimal {
            return false;
        }
        let mut values = r.x;
        for &(j, v) in &fixings {
            values[j] = v;
        }
        if self.model.first_violated(&values, self.options.feasibility_tol).is_some() {
            return false;
        }
        let obj = self.model.objective.evaluate(&values);
        let better = match &self.incumbent {
            None => true,
            Some((best, _)) => obj < *best,
        };
        if better {
            self.incumbent = Some((obj, values));
        }
        better
    }

    fn dive(&mut self, mut fixings: Vec<(usize, f64)>, start: &LpResult) {
        let mut current = start.clone();
        for _ in 0..=self.binaries.len() {
            if current.objective >= self.cutoff() {
                return;
            }
            let Some(j) = self.least_fractional(&current.x, &fixings) else {
                let basis = current.basis.clone();
                self.polish(&current.x, &basis);
                return;
            };
            let preferred = current.x[j].round();
            let mut next = None;
            for v in [preferred, 1.0 - preferred] {
                fixings.push((j, v));
                let r = self.solve_lp(&fixings, Some(&current.basis));
                if r.status == LpStatus::Optimal && r.objective < self.cutoff() {
                    next = Some(r);
                    break;
                }
                fixings.pop();
            }
            match next {
                Some(r) => current = r,
                None => return,
            }
        }
    }

    fn best_open_gap(&self, heap: &BinaryHeap<Node>) -> f64 {
        match &self.incumbent {
            None => f64::INFINITY,
            Some((obj, _)) => {
                let open = heap.peek().map_or(*obj, |n| n.bound.min(*obj));
                ((obj - open) / obj.abs().max(1.0)).max(0.0)
            }
        }
    }
}

/// Solves a minimisation MILP by best-bound branch-and-bound with LP
/// relaxations from the bounded-variable simplex.
pub fn solve(model: &MilpModel, options: &SolveOptions) -> Result<MilpSolution, MilpError> {
    model.validate()?;
    let mut search = Search {
        model,
        lp: LpProblem::new(model),
        options,
        binaries: model.binaries().map(|v| v.0).collect(),
        priority: model.binaries().map(|v| model.priority(v)).collect(),
        lower: model.variables.iter().map(|v| v.lower).collect(),
        upper: model.variables.iter().map(|v| v.upper).collect(),
        incumbent: None,
        created: 1,
        nodes: 1,
    };
    let root = search.solve_lp(&[], None);
    match root.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => return Ok(MilpSolution::without_point(SolveStatus::Infeasible, 1, f64::NAN)),
        LpStatus::Unbounded => return Ok(MilpSolution::without_point(SolveStatus::Unbounded, 1, f64::NAN)),
        LpStatus::IterationLimit => {
            if !root.repaired.is_empty() {
                return Err(MilpError::SingularBasis {
                    columns: root.repaired.iter().map(|&j| model.variables[j].name.clone()).collect(),
                    rows: model.rows.len(),
                });
            }
            return Ok(MilpSolution::without_point(SolveStatus::Limit, 1, f64::NAN));
        }
    }
    let root_bound = root.objective;

    let pool = if options.workers > 1 && options.batch > 1 {
        rayon::ThreadPoolBuilder::new().num_threads(options.workers).build().ok()
    } else {
        None
    };

    let mut heap = BinaryHeap::new();
    let mut limit_hit = false;
    // The root is processed like any other node.
    let mut pending: Vec<(Node, LpResult)> = vec![(
        Node { bound: root.objective, depth: 0, index: 0, fixings: Vec::new(), basis: Arc::new(root.basis.clone()) },
        root,
    )];
    let mut since_dive = 0usize;

    loop {
        for (node, r) in pending.drain(..) {
            match r.status {
                LpStatus::Optimal => {}
                LpStatus::Infeasible | LpStatus::Unbounded => continue,
                LpStatus::IterationLimit => {
                    limit_hit = true;
                    continue;
                }
            }
            if r.objective >= search.cutoff() {
                continue;
            }
            match search.branching_var(&r.x) {
                None => {
                    search.polish(&r.x, &r.basis);
                }
                Some(j) => {
                    if node.depth == 0 || (options.dive_every > 0 && since_dive >= options.dive_every) {
                        since_dive = 0;
                        search.dive(node.fixings.clone(), &r);
                        if r.objective >= search.cutoff() {
                            continue;
                        }
                    }
                    let basis = Arc::new(r.basis);
                    for v in [0.0, 1.0] {
                        let mut fixings = node.fixings.clone();
                        fixings.push((j, v));
                        heap.push(Node {
                            bound: r.objective,
                            depth: node.depth + 1,
                            index: search.created,
                            fixings,
                            basis: Arc::clone(&basis),
                        });
                        search.created += 1;
                    }
                }
            }
        }

        let cutoff = search.cutoff();
        let mut batch = Vec::with_capacity(options.batch.max(1));
        while batch.len() < options.batch.max(1) {
            match heap.pop() {
                Some(n) if n.bound < cutoff => batch.push(n),
                Some(_) => heap.clear(),
                None => break,
            }
        }
        if batch.is_empty() {
            break;
        }
        if search.nodes + batch.len() > options.node_limit {
            limit_hit = true;
            heap.extend(batch);
            break;
        }
        search.nodes += batch.len();
        since_dive += batch.len();
        let search_ref = &search;
        let results: Vec<LpResult> = match &pool {
            Some(pool) => pool.install(|| {
                batch.par_iter().map(|n| search_ref.solve_lp(&n.fixings, Some(&n.basis))).collect()
            }),
            None => batch.iter().map(|n| search_ref.solve_lp(&n.fixings, Some(&n.basis))).collect(),
        };
        pending = batch.into_iter().zip(results).collect();
    }

    let gap = search.best_open_gap(&heap);
    let nodes = search.nodes;
    Ok(match search.incumbent {
        Some((objective, values)) => MilpSolution {
            status: if limit_hit && gap > options.gap_tol { SolveStatus::Limit } else { SolveStatus::Optimal },
            values,
            objective,
            gap: if limit_hit { gap } else { gap.min(options.gap_tol) },
            nodes,
            root_bound,
        },
        None if limit_hit => MilpSolution::without_point(SolveStatus::Limit, nodes, root_bound),
        None => MilpSolution::without_point(SolveStatus::Infeasible, nodes, root_bound),
    })
}
