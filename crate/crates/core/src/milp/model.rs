//! Solver-agnostic MILP representation.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use thiserror::Error;

/// Index of a variable inside a [`MilpModel`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub usize);

impl VarId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Continuous,
    Binary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub lower: f64,
    pub upper: f64,
}

/// Sparse linear expression with a constant offset.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinearExpr {
    terms: BTreeMap<VarId, f64>,
    constant: f64,
}

impl LinearExpr {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn constant(value: f64) -> Self {
        Self { terms: BTreeMap::new(), constant: value }
    }

    pub fn term(var: VarId, coeff: f64) -> Self {
        let mut e = Self::new();
        e.add_term(var, coeff);
        e
    }

    /// Adds `coeff * var`, merging with an existing term for the same variable.
    pub fn add_term(&mut self, var: VarId, coeff: f64) -> &mut Self {
        let entry = self.terms.entry(var).or_insert(0.0);
        *entry += coeff;
        if *entry == 0.0 {
            self.terms.remove(&var);
        }
        self
    }

    pub fn add_constant(&mut self, value: f64) -> &mut Self {
        self.constant += value;
        self
    }

    /// Adds `scale * other` to this expression.
    pub fn add_scaled(&mut self, other: &LinearExpr, scale: f64) -> &mut Self {
        for (&v, &c) in &other.terms {
            self.add_term(v, scale * c);
        }
        self.constant += scale * other.constant;
        self
    }

    pub fn with_term(mut self, var: VarId, coeff: f64) -> Self {
        self.add_term(var, coeff);
        self
    }

    pub fn terms(&self) -> impl Iterator<Item = (VarId, f64)> + '_ {
        self.terms.iter().map(|(&v, &c)| (v, c))
    }

    pub fn coeff(&self, var: VarId) -> f64 {
        self.terms.get(&var).copied().unwrap_or(0.0)
    }

    pub fn constant_term(&self) -> f64 {
        self.constant
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn evaluate(&self, values: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|(v, c)| c * values[v.0]).sum::<f64>()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowSense {
    Le,
    Ge,
    Eq,
}

impl fmt::Display for RowSense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RowSense::Le => "<=",
            RowSense::Ge => ">=",
            RowSense::Eq => "=",
        })
    }
}

/// A labelled linear constraint `coeffs · x (sense) rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearRow {
    pub label: String,
    pub coeffs: BTreeMap<VarId, f64>,
    pub sense: RowSense,
    pub rhs: f64,
}

impl LinearRow {
    /// Builds `expr (sense) rhs`; the expression constant is moved to the right-hand side.
    pub fn new(label: impl Into<String>, expr: &LinearExpr, sense: RowSense, rhs: f64) -> Self {
        Self {
            label: label.into(),
            coeffs: expr.terms.clone(),
            sense,
            rhs: rhs - expr.constant,
        }
    }

    pub fn activity(&self, values: &[f64]) -> f64 {
        self.coeffs.iter().map(|(v, c)| c * values[v.0]).sum()
    }

    pub fn coeff(&self, var: VarId) -> f64 {
        self.coeffs.get(&var).copied().unwrap_or(0.0)
    }

    /// Largest absolute coefficient, floored at one. Row violations are
    /// measured relative to this norm.
    pub fn norm(&self) -> f64 {
        self.coeffs.values().fold(1.0_f64, |m, c| m.max(c.abs()))
    }

    /// Amount by which `values` violates the row (zero when satisfied).
    pub fn violation(&self, values: &[f64]) -> f64 {
        let a = self.activity(values);
        match self.sense {
            RowSense::Le => (a - self.rhs).max(0.0),
            RowSense::Ge => (self.rhs - a).max(0.0),
            RowSense::Eq => (a - self.rhs).abs(),
        }
    }

    pub fn is_satisfied(&self, values: &[f64], tol: f64) -> bool {
        self.violation(values) <= tol * self.norm()
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("variable `{name}` has non-finite or inverted bounds [{lower}, {upper}]")]
    InvalidBounds { name: String, lower: f64, upper: f64 },
    #[error("binary variable `{name}` has bounds [{lower}, {upper}] outside [0, 1]")]
    BinaryBounds { name: String, lower: f64, upper: f64 },
    #[error("row `{label}` references unknown variable id {var}")]
    UnknownVariable { label: String, var: usize },
    #[error("row `{0}` has no coefficients")]
    EmptyRow(String),
    #[error("row `{0}` has a non-finite coefficient or right-hand side")]
    NonFiniteRow(String),
    #[error("objective has a non-finite coefficient")]
    NonFiniteObjective,
    #[error("duplicate variable name `{0}`")]
    DuplicateName(String),
    #[error("variable name `{0}` is not usable in LP text format")]
    BadName(String),
    #[error("row label `{0}` is empty, duplicated, or not usable in LP text format")]
    BadLabel(String),
}

/// A minimisation MILP with finite variable bounds.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MilpModel {
    pub variables: Vec<Variable>,
    pub rows: Vec<LinearRow>,
    pub objective: LinearExpr,
    /// Branching priority per binary; unlisted binaries have priority 0.
    /// Not carried by the LP text format.
    pub priorities: BTreeMap<VarId, u32>,
}

impl MilpModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self, name: impl Into<String>, kind: VarKind, lower: f64, upper: f64) -> VarId {
        let id = VarId(self.variables.len());
        self.variables.push(Variable { name: name.into(), kind, lower, upper });
        id
    }

    pub fn add_continuous(&mut self, name: impl Into<String>, lower: f64, upper: f64) -> VarId {
        self.add_var(name, VarKind::Continuous, lower, upper)
    }

    pub fn add_binary(&mut self, name: impl Into<String>) -> VarId {
        self.add_var(name, VarKind::Binary, 0.0, 1.0)
    }

    pub fn add_row(&mut self, row: LinearRow) -> usize {
        self.rows.push(row);
        self.rows.len() - 1
    }

    pub fn add_rows(&mut self, rows: impl IntoIterator<Item = LinearRow>) {
        self.rows.extend(rows);
    }

    pub fn var(&self, id: VarId) -> &Variable {
        &self.variables[id.0]
    }

    pub fn var_mut(&mut self, id: VarId) -> &mut Variable {
        &mut self.variables[id.0]
    }

    /// Sets both bounds of a variable to `value`.
    pub fn fix(&mut self, id: VarId, value: f64) {
        let v = &mut self.variables[id.0];
        v.lower = value;
        v.upper = value;
    }

    pub fn set_priority(&mut self, id: VarId, priority: u32) {
        self.priorities.insert(id, priority);
    }

    pub fn priority(&self, id: VarId) -> u32 {
        self.priorities.get(&id).copied().unwrap_or(0)
    }

    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn binaries(&self) -> impl Iterator<Item = VarId> + '_ {
        self.variables
            .iter()
            .enumerate()
            .filter(|(_, v)| v.kind == VarKind::Binary)
            .map(|(i, _)| VarId(i))
    }

    pub fn find_var(&self, name: &str) -> Option<VarId> {
        self.variables.iter().position(|v| v.name == name).map(VarId)
    }

    pub fn rows_with_prefix<'a>(&'a self, prefix: &'a str) -> impl Iterator<Item = &'a LinearRow> + 'a {
        self.rows.iter().filter(move |r| r.label.starts_with(prefix))
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let mut names = HashSet::with_capacity(self.variables.len());
        for v in &self.variables {
            if !lp_safe_name(&v.name) {
                return Err(ModelError::BadName(v.name.clone()));
            }
            if !names.insert(v.name.as_str()) {
                return Err(ModelError::DuplicateName(v.name.clone()));
            }
            if !v.lower.is_finite() || !v.upper.is_finite() || v.lower > v.upper {
                return Err(ModelError::InvalidBounds { name: v.name.clone(), lower: v.lower, upper: v.upper });
            }
            if v.kind == VarKind::Binary && (v.lower < 0.0 || v.upper > 1.0) {
                return Err(ModelError::BinaryBounds { name: v.name.clone(), lower: v.lower, upper: v.upper });
            }
        }
        let mut labels = HashSet::with_capacity(self.rows.len());
        for row in &self.rows {
            if !lp_safe_name(&row.label) || !labels.insert(row.label.as_str()) {
                return Err(ModelError::BadLabel(row.label.clone()));
            }
            if row.coeffs.is_empty() {
                return Err(ModelError::EmptyRow(row.label.clone()));
            }
            if !row.rhs.is_finite() || row.coeffs.values().any(|c| !c.is_finite()) {
                return Err(ModelError::NonFiniteRow(row.label.clone()));
            }
            if let Some(v) = row.coeffs.keys().find(|v| v.0 >= self.variables.len()) {
                return Err(ModelError::UnknownVariable { label: row.label.clone(), var: v.0 });
            }
        }
        if !self.objective.constant.is_finite() || self.objective.terms().any(|(_, c)| !c.is_finite()) {
            return Err(ModelError::NonFiniteObjective);
        }
        if let Some((v, _)) = self.objective.terms().find(|(v, _)| v.0 >= self.variables.len()) {
            return Err(ModelError::UnknownVariable { label: "objective".into(), var: v.0 });
        }
        Ok(())
    }

    /// Worst row violation (normalised by the row norm) together with the row index.
    pub fn max_violation(&self, values: &[f64]) -> Option<(usize, f64)> {
        self.rows
            .iter()
            .enumerate()
            .map(|(i, r)| (i, r.violation(values) / r.norm()))
            .fold(None, |best, cur| match best {
                Some((_, b)) if b >= cur.1 => best,
                _ => Some(cur),
            })
    }

    /// First row violated beyond `tol`, if any.
    pub fn first_violated(&self, values: &[f64], tol: f64) -> Option<&LinearRow> {
        self.rows.iter().find(|r| !r.is_satisfied(values, tol))
    }

    pub fn bounds_violation(&self, values: &[f64]) -> f64 {
        self.variables
            .iter()
            .zip(values)
            .map(|(v, &x)| (v.lower - x).max(x - v.upper).max(0.0))
            .fold(0.0, f64::max)
    }
}

/// Names accepted by the LP exporter: non-empty, no whitespace, no operator
/// characters, and not starting with a digit, sign, or period.
pub fn lp_safe_name(name: &str) -> bool {
    let Some(first) = name.chars().next() else {
        return false;
    };
    if first.is_ascii_digit() || matches!(first, '.' | '+' | '-') {
        return false;
    }
    name.chars()
        .all(|c| c.is_ascii_graphic() && !matches!(c, '+' | '-' | '*' | '^' | ':' | '<' | '>' | '=' | '\\'))
}
