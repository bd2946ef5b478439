//! Bounded-variable primal simplex.
//!
//! Every row `i` gets a logical variable `r_i = a_i · x` whose bounds encode the
//! row sense, so the working system is `A x - r = 0` with all variables boxed.
//! The basis inverse is kept in product form (an eta file on top of `-I`) and
//! rebuilt from scratch every [`REFACTOR_EVERY`] pivots. Phase 1 minimises the
//! sum of bound violations of the basic variables, which lets a solve start
//! from any basis; branch-and-bound relies on this to warm start children
//! from their parent's optimal basis.

use super::model::{MilpModel, RowSense};

const PRIMAL_TOL: f64 = 1e-9;
const DUAL_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
const SINGULAR_TOL: f64 = 1e-9;
const DROP_TOL: f64 = 1e-14;
const REFACTOR_EVERY: usize = 64;
const DEGENERATE_LIMIT: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

/// Snapshot of a simplex basis, used to warm start related solves.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Basis {
    head: Vec<usize>,
    at_upper: Vec<bool>,
}

#[derive(Debug, Clone)]
pub(crate) struct LpResult {
    pub status: LpStatus,
    /// Structural values in model units.
    pub x: Vec<f64>,
    /// Objective in model units, including the constant.
    pub objective: f64,
    pub basis: Basis,
    /// Structural columns dropped while factorising a singular basis.
    pub repaired: Vec<usize>,
}

/// Scaled LP relaxation of a [`MilpModel`], reusable across bound changes.
#[derive(Debug, Clone)]
pub(crate) struct LpProblem {
    n: usize,
    m: usize,
    cols: Vec<Vec<(usize, f64)>>,
    cost: Vec<f64>,
    raw_cost: Vec<f64>,
    obj_constant: f64,
    row_lower: Vec<f64>,
    row_upper: Vec<f64>,
    col_scale: Vec<f64>,
}

impl LpProblem {
    pub fn new(model: &MilpModel) -> Self {
        let n = model.variables.len();
        let m = model.rows.len();
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (i, row) in model.rows.iter().enumerate() {
            for (v, c) in row.coeffs.iter() {
                cols[v.0].push((i, *c));
            }
        }
        let (row_scale, col_scale) = geometric_scaling(&cols, m);

        for (j, col) in cols.iter_mut().enumerate() {
            for (i, a) in col.iter_mut() {
                *a *= row_scale[*i] * col_scale[j];
            }
        }
        let mut raw_cost = vec![0.0; n];
        for (v, c) in model.objective.terms() {
            raw_cost[v.0] = c;
        }
        let cmax = raw_cost
            .iter()
            .zip(&col_scale)
            .fold(0.0_f64, |acc, (c, s)| acc.max((c * s).abs()));
        let obj_scale = if cmax > 0.0 { pow2_round(1.0 / cmax) } else { 1.0 };
        let cost = raw_cost.iter().zip(&col_scale).map(|(c, s)| c * s * obj_scale).collect();

        let mut row_lower = vec![f64::NEG_INFINITY; m];
        let mut row_upper = vec![f64::INFINITY; m];
        for (i, row) in model.rows.iter().enumerate() {
            let rhs = row.rhs * row_scale[i];
            match row.sense {
                RowSense::Le => row_upper[i] = rhs,
                RowSense::Ge => row_lower[i] = rhs,
                RowSense::Eq => {
                    row_lower[i] = rhs;
                    row_upper[i] = rhs;
                }
            }
        }
        Self {
            n,
            m,
            cols,
            cost,
            raw_cost,
            obj_constant: model.objective.constant_term(),
            row_lower,
            row_upper,
            col_scale,
        }
    }

    /// Solves with the given structural bounds (model units), optionally
    /// starting from `warm`.
    pub fn solve(&self, lower: &[f64], upper: &[f64], warm: Option<&Basis>, iteration_limit: usize) -> LpResult {
        let mut s = Simplex::new(self, lower, upper, warm);
        let status = s.run(iteration_limit);
        let x: Vec<f64> = (0..self.n).map(|j| s.x[j] * self.col_scale[j]).collect();
        let objective = self.obj_constant + x.iter().zip(&self.raw_cost).map(|(a, b)| a * b).sum::<f64>();
        LpResult {
            status,
            objective,
            basis: s.snapshot(),
            repaired: s.repaired,
            x,
        }
    }

    fn column_into(&self, j: usize, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        if j < self.n {
            for &(i, a) in &self.cols[j] {
                out[i] = a;
            }
        } else {
            out[j - self.n] = -1.0;
        }
    }

    fn dot_column(&self, j: usize, y: &[f64]) -> f64 {
        if j < self.n {
            self.cols[j].iter().map(|&(i, a)| a * y[i]).sum()
        } else {
            -y[j - self.n]
        }
    }

    fn column_nnz(&self, j: usize) -> usize {
        if j < self.n {
            self.cols[j].len()
        } else {
            1
        }
    }
}

fn pow2_round(v: f64) -> f64 {
    if v <= 0.0 || !v.is_finite() {
        1.0
    } else {
        2f64.powi(v.log2().round() as i32)
    }
}

/// Alternating geometric-mean row/column scaling, rounded to powers of two.
fn geometric_scaling(cols: &[Vec<(usize, f64)>], m: usize) -> (Vec<f64>, Vec<f64>) {
    let n = cols.len();
    let mut r = vec![1.0; m];
    let mut s = vec![1.0; n];
    for _ in 0..6 {
        let mut rmin = vec![f64::INFINITY; m];
        let mut rmax = vec![0.0_f64; m];
        for (j, col) in cols.iter().enumerate() {
            for &(i, a) in col {
                let v = (a * s[j]).abs();
                if v > 0.0 {
                    rmin[i] = rmin[i].min(v);
                    rmax[i] = rmax[i].max(v);
                }
            }
        }
        for i in 0..m {
            if rmax[i] > 0.0 {
                r[i] = 1.0 / (rmin[i] * rmax[i]).sqrt();
            }
        }
        for (j, col) in cols.iter().enumerate() {
            let (mut lo, mut hi) = (f64::INFINITY, 0.0_f64);
            for &(i, a) in col {
                let v = (a * r[i]).abs();
                if v > 0.0 {
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
            }
            if hi > 0.0 {
                s[j] = 1.0 / (lo * hi).sqrt();
            }
        }
    }
    // Finish by equilibrating rows so every row's largest entry is about one.
    let mut rmax = vec![0.0_f64; m];
    for (j, col) in cols.iter().enumerate() {
        for &(i, a) in col {
            rmax[i] = rmax[i].max((a * s[j]).abs());
        }
    }
    for i in 0..m {
        r[i] = if rmax[i] > 0.0 { pow2_round(1.0 / rmax[i]) } else { 1.0 };
    }
    for v in s.iter_mut() {
        *v = pow2_round(*v);
    }
    (r, s)
}

struct Eta {
    row: usize,
    pivot: f64,
    entries: Vec<(usize, f64)>,
}

/// Product-form inverse `B^-1 = E_k^-1 ... E_1^-1 (-I)`.
struct Factor {
    etas: Vec<Eta>,
}

impl Factor {
    fn ftran(&self, v: &mut [f64]) {
        v.iter_mut().for_each(|x| *x = -*x);
        for eta in &self.etas {
            let vr = v[eta.row];
            if vr == 0.0 {
                continue;
            }
            let vr = vr / eta.pivot;
            v[eta.row] = vr;
            for &(i, e) in &eta.entries {
                v[i] -= e * vr;
            }
        }
    }

    fn btran(&self, y: &mut [f64]) {
        for eta in self.etas.iter().rev() {
            let mut s = y[eta.row];
            for &(i, e) in &eta.entries {
                s -= e * y[i];
            }
            y[eta.row] = s / eta.pivot;
        }
        y.iter_mut().for_each(|x| *x = -*x);
    }

    fn push(&mut self, row: usize, w: &[f64]) {
        let entries = w
            .iter()
            .enumerate()
            .filter(|&(i, &v)| i != row && v.abs() > DROP_TOL)
            .map(|(i, &v)| (i, v))
            .collect();
        self.etas.push(Eta { row, pivot: w[row], entries });
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum VarState {
    Basic,
    Lower,
    Upper,
}

struct Simplex<'a> {
    lp: &'a LpProblem,
    lower: Vec<f64>,
    upper: Vec<f64>,
    x: Vec<f64>,
    state: Vec<VarState>,
    head: Vec<usize>,
    factor: Factor,
    iterations: usize,
    repaired: Vec<usize>,
    work: Vec<f64>,
    duals: Vec<f64>,
}

struct Candidate {
    pos: usize,
    ratio: f64,
    alpha: f64,
    value: f64,
    state: VarState,
}

impl<'a> Simplex<'a> {
    fn new(lp: &'a LpProblem, lower: &[f64], upper: &[f64], warm: Option<&Basis>) -> Self {
        let (n, m) = (lp.n, lp.m);
        let total = n + m;
        let mut lo = Vec::with_capacity(total);
        let mut up = Vec::with_capacity(total);
        for j in 0..n {
            lo.push(lower[j] / lp.col_scale[j]);
            up.push(upper[j] / lp.col_scale[j]);
        }
        lo.extend_from_slice(&lp.row_lower);
        up.extend_from_slice(&lp.row_upper);

        let mut state = vec![VarState::Lower; total];
        let head: Vec<usize> = match warm {
            Some(b) if b.head.len() == m && b.at_upper.len() == total => {
                for (j, &u) in b.at_upper.iter().enumerate() {
                    if u {
                        state[j] = VarState::Upper;
                    }
                }
                b.head.clone()
            }
            _ => (n..total).collect(),
        };
        for &j in &head {
            state[j] = VarState::Basic;
        }
        let mut x = vec![0.0; total];
        for j in 0..total {
            if state[j] == VarState::Basic {
                continue;
            }
            let (l, u) = (lo[j], up[j]);
            let (st, v) = match state[j] {
                VarState::Upper if u.is_finite() => (VarState::Upper, u),
                _ if l.is_finite() => (VarState::Lower, l),
                _ if u.is_finite() => (VarState::Upper, u),
                _ => (VarState::Lower, 0.0),
            };
            state[j] = st;
            x[j] = v;
        }
        let mut s = Self {
            lp,
            lower: lo,
            upper: up,
            x,
            state,
            head,
            factor: Factor { etas: Vec::new() },
            iterations: 0,
            repaired: Vec::new(),
            work: vec![0.0; m],
            duals: vec![0.0; m],
        };
        s.reinvert();
        s
    }

    fn snapshot(&self) -> Basis {
        Basis {
            head: self.head.clone(),
            at_upper: self.state.iter().map(|&s| s == VarState::Upper).collect(),
        }
    }

    /// Rebuilds the eta file for the current basis. Structural columns that
    /// turn out dependent are swapped for logicals and moved to a bound.
    fn reinvert(&mut self) {
        let (n, m) = (self.lp.n, self.lp.m);
        self.factor.etas.clear();
        let mut slot_free: Vec<bool> = (0..m).map(|i| self.state[n + i] != VarState::Basic).collect();
        let mut structurals: Vec<usize> = self.head.iter().copied().filter(|&j| j < n).collect();
        structurals.sort_by_key(|&j| (self.lp.column_nnz(j), j));
        let mut new_head: Vec<usize> = (n..n + m).collect();
        let mut w = std::mem::take(&mut self.work);
        for j in structurals {
            self.lp.column_into(j, &mut w);
            self.factor.ftran(&mut w);
            let mut best = None;
            let mut best_abs = SINGULAR_TOL;
            for (r, &free) in slot_free.iter().enumerate() {
                if free && w[r].abs() > best_abs {
                    best_abs = w[r].abs();
                    best = Some(r);
                }
            }
            match best {
                Some(r) => {
                    self.factor.push(r, &w);
                    new_head[r] = j;
                    slot_free[r] = false;
                }
                None => {
                    self.repaired.push(j);
                    let (l, u) = (self.lower[j], self.upper[j]);
                    let v = self.x[j];
                    let to_upper = u.is_finite() && (!l.is_finite() || (u - v).abs() < (v - l).abs());
                    self.state[j] = if to_upper { VarState::Upper } else { VarState::Lower };
                    self.x[j] = if to_upper { u } else if l.is_finite() { l } else { 0.0 };
                }
            }
        }
        self.work = w;
        for (r, free) in slot_free.into_iter().enumerate() {
            if free {
                self.state[n + r] = VarState::Basic;
            }
        }
        self.head = new_head;
        self.recompute_basics();
    }

    fn recompute_basics(&mut self) {
        let (n, m) = (self.lp.n, self.lp.m);
        let mut v = vec![0.0; m];
        for j in 0..n + m {
            if self.state[j] == VarState::Basic || self.x[j] == 0.0 {
                continue;
            }
            let xj = self.x[j];
            if j < n {
                for &(i, a) in &self.lp.cols[j] {
                    v[i] -= a * xj;
                }
            } else {
                v[j - n] += xj;
            }
        }
        self.factor.ftran(&mut v);
        for (p, &j) in self.head.iter().enumerate() {
            self.x[j] = v[p];
        }
    }

    fn cost(&self, j: usize) -> f64 {
        if j < self.lp.n {
            self.lp.cost[j]
        } else {
            0.0
        }
    }

    /// Fills `duals` with basic costs for the current phase; returns whether
    /// any basic variable is out of bounds (phase 1).
    fn load_basic_costs(&mut self) -> bool {
        let mut infeasible = false;
        for p in 0..self.head.len() {
            let j = self.head[p];
            let v = self.x[j];
            self.duals[p] = if v < self.lower[j] - PRIMAL_TOL {
                infeasible = true;
                -1.0
            } else if v > self.upper[j] + PRIMAL_TOL {
                infeasible = true;
                1.0
            } else {
                0.0
            };
        }
        if !infeasible {
            for p in 0..self.head.len() {
                self.duals[p] = self.cost(self.head[p]);
            }
        }
        infeasible
    }

    fn price(&self, phase1: bool, bland: bool) -> Option<usize> {
        let total = self.lp.n + self.lp.m;
        let mut best = None;
        let mut best_score = DUAL_TOL;
        for j in 0..total {
            let st = self.state[j];
            if st == VarState::Basic || self.lower[j] == self.upper[j] {
                continue;
            }
            let cj = if phase1 { 0.0 } else { self.cost(j) };
            let d = cj - self.lp.dot_column(j, &self.duals);
            let score = match st {
                VarState::Lower if d < -DUAL_TOL && self.x[j] < self.upper[j] => -d,
                VarState::Upper if d > DUAL_TOL && self.x[j] > self.lower[j] => d,
                _ => continue,
            };
            if bland {
                return Some(j);
            }
            if score > best_score {
                best_score = score;
                best = Some(j);
            }
        }
        best
    }

    /// Blocking bound for basic position `p` when it moves by `-theta * alpha`.
    fn block(&self, p: usize, alpha: f64, tol: f64) -> Option<Candidate> {
        let j = self.head[p];
        let (v, l, u) = (self.x[j], self.lower[j], self.upper[j]);
        if v < l - PRIMAL_TOL {
            // below its lower bound: blocks only when rising back to it
            return (alpha < 0.0).then(|| Candidate {
                pos: p,
                ratio: (l - v + tol) / -alpha,
                alpha,
                value: l,
                state: VarState::Lower,
            });
        }
        if v > u + PRIMAL_TOL {
            return (alpha > 0.0).then(|| Candidate {
                pos: p,
                ratio: (v - u + tol) / alpha,
                alpha,
                value: u,
                state: VarState::Upper,
            });
        }
        if alpha > 0.0 && l.is_finite() {
            Some(Candidate { pos: p, ratio: ((v - l).max(0.0) + tol) / alpha, alpha, value: l, state: VarState::Lower })
        } else if alpha < 0.0 && u.is_finite() {
            Some(Candidate { pos: p, ratio: ((u - v).max(0.0) + tol) / -alpha, alpha, value: u, state: VarState::Upper })
        } else {
            None
        }
    }

    fn run(&mut self, iteration_limit: usize) -> LpStatus {
        let m = self.lp.m;
        let mut since_refactor = 0usize;
        let mut degenerate = 0usize;
        let mut w = vec![0.0; m];
        loop {
            if self.iterations >= iteration_limit {
                return LpStatus::IterationLimit;
            }
            if since_refactor >= REFACTOR_EVERY {
                self.reinvert();
                since_refactor = 0;
            }
            let phase1 = self.load_basic_costs();
            let mut duals = std::mem::take(&mut self.duals);
            self.factor.btran(&mut duals);
            self.duals = duals;
            let bland = degenerate >= DEGENERATE_LIMIT;
            let Some(q) = self.price(phase1, bland) else {
                if since_refactor > 0 {
                    self.reinvert();
                    since_refactor = 0;
                    continue;
                }
                return if phase1 { LpStatus::Infeasible } else { LpStatus::Optimal };
            };

            self.lp.column_into(q, &mut w);
            self.factor.ftran(&mut w);
            let dir = if self.state[q] == VarState::Lower { 1.0 } else { -1.0 };
            let flip = self.upper[q] - self.lower[q];

            let chosen = if bland {
                self.ratio_bland(&w, dir)
            } else {
                self.ratio_harris(&w, dir, flip)
            };
            let theta;
            match chosen {
                Some(c) if c.ratio < flip => {
                    theta = c.ratio.max(0.0);
                    self.x[q] += dir * theta;
                    for p in 0..m {
                        if w[p] != 0.0 {
                            let j = self.head[p];
                            self.x[j] -= theta * dir * w[p];
                        }
                    }
                    let leaving = self.head[c.pos];
                    self.x[leaving] = c.value;
                    self.state[leaving] = c.state;
                    self.state[q] = VarState::Basic;
                    self.head[c.pos] = q;
                    self.factor.push(c.pos, &w);
                    since_refactor += 1;
                }
                _ if flip.is_finite() => {
                    theta = flip;
                    for p in 0..m {
                        if w[p] != 0.0 {
                            let j = self.head[p];
                            self.x[j] -= theta * dir * w[p];
                        }
                    }
                    let (st, v) = if dir > 0.0 {
                        (VarState::Upper, self.upper[q])
                    } else {
                        (VarState::Lower, self.lower[q])
                    };
                    self.state[q] = st;
                    self.x[q] = v;
                }
                _ => return LpStatus::Unbounded,
            }
            self.iterations += 1;
            if theta <= 1e-12 {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
        }
    }

    fn ratio_harris(&self, w: &[f64], dir: f64, flip: f64) -> Option<Candidate> {
        let mut theta_max = flip;
        let mut cands = Vec::new();
        for (p, &wp) in w.iter().enumerate() {
            let alpha = dir * wp;
            if alpha.abs() < PIVOT_TOL {
                continue;
            }
            if let Some(c) = self.block(p, alpha, PRIMAL_TOL) {
                theta_max = theta_max.min(c.ratio);
                cands.push(c);
            }
        }
        let mut best: Option<Candidate> = None;
        for c in cands {
            let exact = (c.ratio - PRIMAL_TOL / c.alpha.abs()).max(0.0);
            if exact <= theta_max {
                let better = match &best {
                    None => true,
                    Some(b) => c.alpha.abs() > b.alpha.abs(),
                };
                if better {
                    best = Some(Candidate { ratio: exact, ..c });
                }
            }
        }
        best
    }

    fn ratio_bland(&self, w: &[f64], dir: f64) -> Option<Candidate> {
        let mut best: Option<Candidate> = None;
        for (p, &wp) in w.iter().enumerate() {
            let alpha = dir * wp;
            if alpha.abs() < PIVOT_TOL {
                continue;
            }
            if let Some(c) = self.block(p, alpha, 0.0) {
                let better = match &best {
                    None => true,
                    Some(b) => c.ratio < b.ratio || (c.ratio == b.ratio && self.head[c.pos] < self.head[b.pos]),
                };
                if better {
                    best = Some(c);
                }
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::model::{LinearExpr, LinearRow, VarId};

    fn lp(model: &MilpModel) -> LpResult {
        let p = LpProblem::new(model);
        let lo: Vec<f64> = model.variables.iter().map(|v| v.lower).collect();
        let up: Vec<f64> = model.variables.iter().map(|v| v.upper).collect();
        p.solve(&lo, &up, None, 10_000)
    }

    #[test]
    fn bound_binding_lp() {
        let mut m = MilpModel::new();
        let x = m.add_continuous("x", 0.0, 10.0);
        m.objective = LinearExpr::term(x, 1.0);
        m.add_row(LinearRow::new("lb", &LinearExpr::term(x, 1.0), RowSense::Ge, 3.0));
        let r = lp(&m);
        assert_eq!(r.status, LpStatus::Optimal);
        assert!((r.x[0] - 3.0).abs() < 1e-9);
    }

    #[test]
    fn textbook_lp() {
        // max 3x + 5y  s.t. x <= 4, 2y <= 12, 3x + 2y <= 18  ->  x=2, y=6, obj 36
        let mut m = MilpModel::new();
        let x = m.add_continuous("x", 0.0, 100.0);
        let y = m.add_continuous("y", 0.0, 100.0);
        m.objective = LinearExpr::term(x, -3.0).with_term(y, -5.0);
        m.add_row(LinearRow::new("a", &LinearExpr::term(x, 1.0), RowSense::Le, 4.0));
        m.add_row(LinearRow::new("b", &LinearExpr::term(y, 2.0), RowSense::Le, 12.0));
        m.add_row(LinearRow::new("c", &LinearExpr::term(x, 3.0).with_term(y, 2.0), RowSense::Le, 18.0));
        let r = lp(&m);
        assert_eq!(r.status, LpStatus::Optimal);
        assert!((r.objective + 36.0).abs() < 1e-9, "{}", r.objective);
    }

    #[test]
    fn infeasible_lp() {
        let mut m = MilpModel::new();
        let x = m.add_continuous("x", 0.0, 1.0);
        let y = m.add_continuous("y", 0.0, 1.0);
        m.add_row(LinearRow::new("sum", &LinearExpr::term(x, 1.0).with_term(y, 1.0), RowSense::Ge, 3.0));
        assert_eq!(lp(&m).status, LpStatus::Infeasible);
    }

    #[test]
    fn equality_and_warm_start() {
        let mut m = MilpModel::new();
        let vars: Vec<VarId> = (0..4).map(|i| m.add_continuous(format!("v{i}"), 0.0, 5.0)).collect();
        let mut sum = LinearExpr::new();
        for (k, &v) in vars.iter().enumerate() {
            sum.add_term(v, 1.0);
            m.objective.add_term(v, (k + 1) as f64);
        }
        m.add_row(LinearRow::new("balance", &sum, RowSense::Eq, 7.0));
        let p = LpProblem::new(&m);
        let mut lo = vec![0.0; 4];
        let up = vec![5.0; 4];
        let first = p.solve(&lo, &up, None, 1000);
        assert!((first.objective - 9.0).abs() < 1e-9);
        lo[0] = 0.0;
        let mut up2 = up.clone();
        up2[0] = 1.0;
        let second = p.solve(&lo, &up2, Some(&first.basis), 1000);
        assert_eq!(second.status, LpStatus::Optimal);
        assert!((second.objective - (1.0 + 2.0 * 5.0 + 3.0 * 1.0)).abs() < 1e-9, "{}", second.objective);
    }

    #[test]
    fn badly_scaled_rows() {
        // z >= 1e7 * m - 1e3 * y style rows, as in the nadir constraints
        let mut m = MilpModel::new();
        let z = m.add_continuous("z", 0.0, 1e5);
        let b = m.add_continuous("b", 0.0, 1.0);
        m.objective = LinearExpr::term(z, 1.0);
        m.add_row(LinearRow::new("big", &LinearExpr::term(z, 180.0).with_term(b, -1.0e7), RowSense::Ge, 0.0));
        m.add_row(LinearRow::new("pin", &LinearExpr::term(b, 1.0), RowSense::Ge, 0.75));
        let r = lp(&m);
        assert_eq!(r.status, LpStatus::Optimal);
        assert!((r.x[0] - 0.75e7 / 180.0).abs() < 1e-6);
    }
}
