//! LP text format export/import and the external-solver solution format.
//!
//! Exported models use the CPLEX LP dialect: `Minimize`, `Subject To`,
//! `Bounds`, `Binaries`, `End`. Every variable gets an explicit bounds line,
//! emitted in id order, so importing restores variable ids.

use std::collections::HashMap;
use std::fmt::Write as _;

use thiserror::Error;

use super::model::{LinearExpr, LinearRow, MilpModel, ModelError, RowSense, VarId, VarKind};
use super::{MilpSolution, SolveStatus};

const TERMS_PER_LINE: usize = 8;

/// Relative objective difference above which an imported objective is flagged.
pub const OBJECTIVE_MISMATCH_TOL: f64 = 1e-5;
/// Absolute row and bound tolerance applied to imported solutions.
pub const IMPORT_FEASIBILITY_TOL: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum LpFormatError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("missing `{0}` section")]
    MissingSection(&'static str),
    #[error("imported model is invalid: {0}")]
    Model(#[from] ModelError),
}

#[derive(Debug, Error, PartialEq)]
pub enum SolutionImportError {
    #[error("solution file has no status line")]
    MissingStatus,
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("solution references unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("solution violates row `{label}` by {violation:e}")]
    RowViolated { label: String, violation: f64 },
    #[error("solution value {value} for `{name}` lies outside its bounds")]
    BoundViolated { name: String, value: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImportedSolution {
    pub solution: MilpSolution,
    /// Objective line from the file, if present.
    pub reported_objective: Option<f64>,
    /// True when the reported objective differs from the recomputed one by
    /// more than [`OBJECTIVE_MISMATCH_TOL`] relative.
    pub objective_mismatch: bool,
}

fn write_expr(out: &mut String, model: &MilpModel, terms: impl Iterator<Item = (VarId, f64)>) {
    for (k, (v, c)) in terms.enumerate() {
        if k > 0 && k % TERMS_PER_LINE == 0 {
            out.push_str("\n   ");
        }
        let name = &model.variables[v.0].name;
        if k == 0 {
            if c < 0.0 {
                let _ = write!(out, " - {} {}", -c, name);
            } else {
                let _ = write!(out, " {} {}", c, name);
            }
        } else if c < 0.0 {
            let _ = write!(out, " - {} {}", -c, name);
        } else {
            let _ = write!(out, " + {} {}", c, name);
        }
    }
}

/// Emits `model` in LP text format. Rows keep their labels verbatim.
pub fn export_model(model: &MilpModel) -> String {
    let mut out = String::new();
    out.push_str("Minimize\n obj:");
    if model.objective.is_empty() {
        match model.variables.first() {
            Some(v) => {
                let _ = write!(out, " 0 {}", v.name);
            }
            None => out.push_str(" 0"),
        }
    } else {
        write_expr(&mut out, model, model.objective.terms());
    }
    let k = model.objective.constant_term();
    if k != 0.0 {
        if k < 0.0 {
            let _ = write!(out, " - {}", -k);
        } else {
            let _ = write!(out, " + {}", k);
        }
    }
    out.push_str("\nSubject To\n");
    for row in &model.rows {
        let _ = write!(out, " {}:", row.label);
        write_expr(&mut out, model, row.coeffs.iter().map(|(&v, &c)| (v, c)));
        let _ = writeln!(out, " {} {}", row.sense, row.rhs);
    }
    out.push_str("Bounds\n");
    for v in &model.variables {
        if v.lower == v.upper {
            let _ = writeln!(out, " {} = {}", v.name, v.lower);
        } else {
            let _ = writeln!(out, " {} <= {} <= {}", v.lower, v.name, v.upper);
        }
    }
    let binaries: Vec<&str> =
        model.variables.iter().filter(|v| v.kind == VarKind::Binary).map(|v| v.name.as_str()).collect();
    if !binaries.is_empty() {
        out.push_str("Binaries\n");
        for chunk in binaries.chunks(TERMS_PER_LINE) {
            let _ = writeln!(out, " {}", chunk.join(" "));
        }
    }
    out.push_str("End\n");
    out
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Sign(f64),
    Op(RowSense),
    Label(String),
    Word(String),
}

fn tokenize(text: &str, line: usize) -> Result<Vec<Tok>, LpFormatError> {
    let chars: Vec<char> = text.chars().collect();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c == '+' || c == '-' {
            toks.push(Tok::Sign(if c == '+' { 1.0 } else { -1.0 }));
            i += 1;
        } else if c == '<' || c == '>' || c == '=' {
            let mut j = i + 1;
            if j < chars.len() && matches!(chars[j], '<' | '>' | '=') {
                j += 1;
            }
            let op: String = chars[i..j].iter().collect();
            let sense = match op.as_str() {
                "<" | "<=" | "=<" => RowSense::Le,
                ">" | ">=" | "=>" => RowSense::Ge,
                "=" | "==" => RowSense::Eq,
                _ => {
                    return Err(LpFormatError::Syntax { line, message: format!("bad operator `{op}`") });
                }
            };
            toks.push(Tok::Op(sense));
            i = j;
        } else if c == ':' {
            return Err(LpFormatError::Syntax { line, message: "unexpected `:`".into() });
        } else {
            let start = i;
            while i < chars.len() {
                let d = chars[i];
                if d.is_whitespace() || matches!(d, '<' | '>' | '=' | ':') {
                    break;
                }
                if d == '+' || d == '-' {
                    // Exponent sign inside a numeric literal such as `1e-7`.
                    let word: String = chars[start..i].iter().collect();
                    let numeric_prefix = word.starts_with(|ch: char| ch.is_ascii_digit() || ch == '.');
                    if numeric_prefix && (word.ends_with('e') || word.ends_with('E')) {
                        i += 1;
                        continue;
                    }
                    break;
                }
                i += 1;
            }
            let word: String = chars[start..i].iter().collect();
            if i < chars.len() && chars[i] == ':' {
                toks.push(Tok::Label(word));
                i += 1;
            } else {
                toks.push(Tok::Word(word));
            }
        }
    }
    Ok(toks)
}

fn parse_number(word: &str) -> Option<f64> {
    match word.to_ascii_lowercase().as_str() {
        "inf" | "infinity" => Some(f64::INFINITY),
        _ => {
            if word.starts_with(|c: char| c.is_ascii_digit() || c == '.') {
                word.parse().ok()
            } else {
                None
            }
        }
    }
}

struct Parser {
    names: HashMap<String, VarId>,
    model: MilpModel,
    seen_bounds: Vec<bool>,
}

impl Parser {
    fn var(&mut self, name: &str, line: usize) -> Result<VarId, LpFormatError> {
        if let Some(&id) = self.names.get(name) {
            return Ok(id);
        }
        if !super::model::lp_safe_name(name) {
            return Err(LpFormatError::Syntax { line, message: format!("bad variable name `{name}`") });
        }
        let id = self.model.add_continuous(name, 0.0, f64::INFINITY);
        self.names.insert(name.to_string(), id);
        self.seen_bounds.push(false);
        Ok(id)
    }

    /// Parses `[sign] [coef] [name]` terms until an operator or the end.
    fn expr(&mut self, toks: &[Tok], pos: &mut usize, line: usize) -> Result<LinearExpr, LpFormatError> {
        let mut e = LinearExpr::new();
        let mut sign = 1.0;
        let mut coef: Option<f64> = None;
        let mut pending_sign = false;
        while *pos < toks.len() {
            match &toks[*pos] {
                Tok::Op(_) => break,
                Tok::Sign(s) => {
                    if let Some(c) = coef.take() {
                        e.add_constant(sign * c);
                        sign = 1.0;
                    }
                    sign *= s;
                    pending_sign = true;
                }
                Tok::Word(w) => {
                    if let Some(n) = parse_number(w) {
                        if let Some(c) = coef.take() {
                            e.add_constant(sign * c);
                            sign = 1.0;
                        }
                        coef = Some(n);
                    } else {
                        let id = self.var(w, line)?;
                        let c = coef.take().unwrap_or(1.0);
                        e.add_term(id, sign * c);
                        sign = 1.0;
                        pending_sign = false;
                        *pos += 1;
                        continue;
                    }
                    pending_sign = false;
                }
                Tok::Label(l) => {
                    return Err(LpFormatError::Syntax { line, message: format!("unexpected label `{l}:`") });
                }
            }
            *pos += 1;
        }
        if let Some(c) = coef {
            e.add_constant(sign * c);
        } else if pending_sign {
            return Err(LpFormatError::Syntax { line, message: "dangling sign".into() });
        }
        Ok(e)
    }

    fn signed_number(toks: &[Tok], pos: &mut usize, line: usize) -> Result<f64, LpFormatError> {
        let mut sign = 1.0;
        while let Some(Tok::Sign(s)) = toks.get(*pos) {
            sign *= s;
            *pos += 1;
        }
        match toks.get(*pos) {
            Some(Tok::Word(w)) => match parse_number(w) {
                Some(n) => {
                    *pos += 1;
                    Ok(sign * n)
                }
                None => Err(LpFormatError::Syntax { line, message: format!("expected a number, found `{w}`") }),
            },
            _ => Err(LpFormatError::Syntax { line, message: "expected a number".into() }),
        }
    }

    fn bound_line(&mut self, toks: &[Tok], line: usize) -> Result<(), LpFormatError> {
        let err = |m: &str| LpFormatError::Syntax { line, message: m.to_string() };
        let name_at = |p: usize| match toks.get(p) {
            Some(Tok::Word(w)) if parse_number(w).is_none() => Some(w.clone()),
            _ => None,
        };
        let mut pos = 0;
        // `lo <= x <= hi`, `lo <= x`, `x <= hi`, `x >= lo`, `x = v`, `x free`.
        if let Some(name) = name_at(0) {
            let id = self.var(&name, line)?;
            self.seen_bounds[id.0] = true;
            match toks.get(1) {
                Some(Tok::Word(w)) if w.eq_ignore_ascii_case("free") => {
                    let v = self.model.var_mut(id);
                    v.lower = f64::NEG_INFINITY;
                    v.upper = f64::INFINITY;
                }
                Some(Tok::Op(sense)) => {
                    pos = 2;
                    let n = Self::signed_number(toks, &mut pos, line)?;
                    let v = self.model.var_mut(id);
                    match sense {
                        RowSense::Le => v.upper = n,
                        RowSense::Ge => v.lower = n,
                        RowSense::Eq => {
                            v.lower = n;
                            v.upper = n;
                        }
                    }
                }
                _ => return Err(err("malformed bound")),
            }
            return if pos == toks.len() || toks.len() == 2 { Ok(()) } else { Err(err("trailing tokens in bound")) };
        }
        let first = Self::signed_number(toks, &mut pos, line)?;
        let Some(Tok::Op(s1)) = toks.get(pos) else { return Err(err("expected operator")) };
        let s1 = *s1;
        pos += 1;
        let name = name_at(pos).ok_or_else(|| err("expected variable name"))?;
        pos += 1;
        let id = self.var(&name, line)?;
        self.seen_bounds[id.0] = true;
        let apply = |v: &mut super::model::Variable, sense: RowSense, n: f64, number_left: bool| {
            match (sense, number_left) {
                (RowSense::Le, true) | (RowSense::Ge, false) => v.lower = n,
                (RowSense::Ge, true) | (RowSense::Le, false) => v.upper = n,
                (RowSense::Eq, _) => {
                    v.lower = n;
                    v.upper = n;
                }
            }
        };
        apply(self.model.var_mut(id), s1, first, true);
        if let Some(Tok::Op(s2)) = toks.get(pos) {
            let s2 = *s2;
            pos += 1;
            let second = Self::signed_number(toks, &mut pos, line)?;
            apply(self.model.var_mut(id), s2, second, false);
        }
        if pos != toks.len() {
            return Err(err("trailing tokens in bound"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    None,
    Objective,
    Constraints,
    Bounds,
    Binaries,
    Generals,
    End,
}

fn section_header(line: &str) -> Option<Section> {
    let lower = line.trim().to_ascii_lowercase();
    let collapsed: String = lower.split_whitespace().collect::<Vec<_>>().join(" ");
    match collapsed.as_str() {
        "minimize" | "minimise" | "min" => Some(Section::Objective),
        "subject to" | "such that" | "st" | "s.t." => Some(Section::Constraints),
        "bounds" | "bound" => Some(Section::Bounds),
        "binaries" | "binary" | "bin" => Some(Section::Binaries),
        "generals" | "general" | "gen" => Some(Section::Generals),
        "end" => Some(Section::End),
        _ => None,
    }
}

/// Parses LP text produced by [`export_model`] (and the common subset of the
/// dialect: continuation lines, `free` bounds, one-sided bounds).
pub fn import_model(text: &str) -> Result<MilpModel, LpFormatError> {
    let mut p = Parser { names: HashMap::new(), model: MilpModel::new(), seen_bounds: Vec::new() };
    let mut section = Section::None;
    // Objective and row statements may span lines; gather them first.
    let mut objective_text: Option<(usize, String)> = None;
    let mut row_chunks: Vec<(usize, String)> = Vec::new();
    let mut bound_lines: Vec<(usize, String)> = Vec::new();
    let mut binary_lines: Vec<(usize, String)> = Vec::new();
    let mut seen_objective = false;
    let mut seen_constraints = false;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('\\').next().unwrap_or("");
        if line.trim().is_empty() {
            continue;
        }
        if let Some(s) = section_header(line) {
            if s == Section::Objective {
                seen_objective = true;
            }
            if s == Section::Constraints {
                seen_constraints = true;
            }
            if s == Section::Generals {
                return Err(LpFormatError::Syntax { line: line_no, message: "general integers are not supported".into() });
            }
            section = s;
            continue;
        }
        match section {
            Section::None => {
                return Err(LpFormatError::Syntax { line: line_no, message: "content before `Minimize`".into() });
            }
            Section::Objective => match &mut objective_text {
                Some((_, t)) => {
                    t.push(' ');
                    t.push_str(line);
                }
                None => objective_text = Some((line_no, line.to_string())),
            },
            Section::Constraints => {
                let starts_labelled = matches!(tokenize(line, line_no)?.first(), Some(Tok::Label(_)));
                match row_chunks.last_mut() {
                    Some((_, t)) if !starts_labelled && !statement_complete(t, line_no)? => {
                        t.push(' ');
                        t.push_str(line);
                    }
                    _ => row_chunks.push((line_no, line.to_string())),
                }
            }
            Section::Bounds => bound_lines.push((line_no, line.to_string())),
            Section::Binaries => binary_lines.push((line_no, line.to_string())),
            Section::Generals => unreachable!(),
            Section::End => {
                return Err(LpFormatError::Syntax { line: line_no, message: "content after `End`".into() });
            }
        }
    }
    if !seen_objective {
        return Err(LpFormatError::MissingSection("Minimize"));
    }
    if !seen_constraints {
        return Err(LpFormatError::MissingSection("Subject To"));
    }
    if section != Section::End {
        return Err(LpFormatError::MissingSection("End"));
    }

    // Bounds first: they fix the variable order.
    for (line_no, l) in &bound_lines {
        let toks = tokenize(l, *line_no)?;
        p.bound_line(&toks, *line_no)?;
    }
    if let Some((line_no, t)) = objective_text {
        let toks = tokenize(&t, line_no)?;
        let mut pos = 0;
        if let Some(Tok::Label(_)) = toks.first() {
            pos = 1;
        }
        let e = p.expr(&toks, &mut pos, line_no)?;
        if pos != toks.len() {
            return Err(LpFormatError::Syntax { line: line_no, message: "operator in objective".into() });
        }
        p.model.objective = e;
    }
    for (k, (line_no, t)) in row_chunks.iter().enumerate() {
        let toks = tokenize(t, *line_no)?;
        let mut pos = 0;
        let label = match toks.first() {
            Some(Tok::Label(l)) => {
                pos = 1;
                l.clone()
            }
            _ => format!("r{k}"),
        };
        let e = p.expr(&toks, &mut pos, *line_no)?;
        let Some(Tok::Op(sense)) = toks.get(pos) else {
            return Err(LpFormatError::Syntax { line: *line_no, message: format!("row `{label}` has no operator") });
        };
        let sense = *sense;
        pos += 1;
        let rhs = Parser::signed_number(&toks, &mut pos, *line_no)?;
        if pos != toks.len() {
            return Err(LpFormatError::Syntax { line: *line_no, message: format!("trailing tokens in row `{label}`") });
        }
        p.model.add_row(LinearRow::new(label, &e, sense, rhs));
    }
    for (line_no, l) in &binary_lines {
        for tok in tokenize(l, *line_no)? {
            let Tok::Word(w) = tok else {
                return Err(LpFormatError::Syntax { line: *line_no, message: "expected variable names".into() });
            };
            let id = p.var(&w, *line_no)?;
            let bounded = p.seen_bounds[id.0];
            let v = p.model.var_mut(id);
            v.kind = VarKind::Binary;
            if !bounded {
                v.lower = 0.0;
                v.upper = 1.0;
            }
        }
    }
    p.model.validate()?;
    Ok(p.model)
}

/// A constraint statement is complete once it has an operator followed by a number.
fn statement_complete(text: &str, line: usize) -> Result<bool, LpFormatError> {
    let toks = tokenize(text, line)?;
    Ok(match toks.iter().position(|t| matches!(t, Tok::Op(_))) {
        Some(i) => toks[i + 1..].iter().any(|t| matches!(t, Tok::Word(_))),
        None => false,
    })
}

/// Writes `solution` in the format read by [`import_solution`]. Values use
/// the shortest representation that parses back to the same `f64`.
pub fn export_solution(model: &MilpModel, solution: &MilpSolution) -> String {
    let mut out = format!("status {}\n", solution.status);
    if solution.values.is_empty() {
        return out;
    }
    let _ = writeln!(out, "objective {}", solution.objective);
    for (v, x) in model.variables.iter().zip(&solution.values) {
        let _ = writeln!(out, "{} {}", v.name, x);
    }
    out
}

/// Parses an external-solver solution: a `status <word>` line, an optional
/// `objective <value>` line, then `name value` pairs. Variables absent from
/// the file take the value zero. Returned points are re-checked against the
/// model rows and bounds.
pub fn import_solution(text: &str, model: &MilpModel) -> Result<ImportedSolution, SolutionImportError> {
    let mut status: Option<SolveStatus> = None;
    let mut reported: Option<f64> = None;
    let mut values = vec![0.0; model.num_vars()];
    let index: HashMap<&str, usize> =
        model.variables.iter().enumerate().map(|(i, v)| (v.name.as_str(), i)).collect();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let body = raw.split('#').next().unwrap_or("");
        let mut parts = body.split_whitespace();
        let Some(key) = parts.next() else { continue };
        let value = parts.next();
        if parts.next().is_some() {
            return Err(SolutionImportError::Syntax { line, message: "expected two fields".into() });
        }
        let Some(value) = value else {
            return Err(SolutionImportError::Syntax { line, message: format!("`{key}` has no value") });
        };
        match key {
            "status" => {
                let s = value.parse().map_err(|m| SolutionImportError::Syntax { line, message: m })?;
                status = Some(s);
            }
            "objective" => {
                let v = value.parse::<f64>().map_err(|_| SolutionImportError::Syntax {
                    line,
                    message: format!("bad objective `{value}`"),
                })?;
                reported = Some(v);
            }
            name => {
                let &j = index.get(name).ok_or_else(|| SolutionImportError::UnknownVariable(name.to_string()))?;
                values[j] = value.parse::<f64>().map_err(|_| SolutionImportError::Syntax {
                    line,
                    message: format!("bad value `{value}` for `{name}`"),
                })?;
            }
        }
    }
    let status = status.ok_or(SolutionImportError::MissingStatus)?;
    let has_point = matches!(status, SolveStatus::Optimal | SolveStatus::Limit);
    if !has_point {
        return Ok(ImportedSolution {
            solution: MilpSolution::without_point(status, 0, f64::NAN),
            reported_objective: reported,
            objective_mismatch: false,
        });
    }
    for (v, &x) in model.variables.iter().zip(&values) {
        if !x.is_finite() || x < v.lower - IMPORT_FEASIBILITY_TOL || x > v.upper + IMPORT_FEASIBILITY_TOL {
            return Err(SolutionImportError::BoundViolated { name: v.name.clone(), value: x });
        }
    }
    if let Some(row) = model.rows.iter().find(|r| r.violation(&values) > IMPORT_FEASIBILITY_TOL) {
        return Err(SolutionImportError::RowViolated { label: row.label.clone(), violation: row.violation(&values) });
    }
    let objective = model.objective.evaluate(&values);
    let objective_mismatch = reported
        .map(|r| (r - objective).abs() > OBJECTIVE_MISMATCH_TOL * objective.abs().max(1.0))
        .unwrap_or(false);
    Ok(ImportedSolution {
        solution: MilpSolution {
            status,
            values,
            objective,
            gap: if status == SolveStatus::Optimal { 0.0 } else { f64::NAN },
            nodes: 0,
            root_bound: f64::NAN,
        },
        reported_objective: reported,
        objective_mismatch,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_var() -> MilpModel {
        let mut m = MilpModel::new();
        let x = m.add_binary("x");
        let y = m.add_continuous("y", 0.0, 10.0);
        m.objective = LinearExpr::term(x, 3.0).with_term(y, -1.5);
        m.objective.add_constant(2.0);
        m.add_row(LinearRow::new("rocof[0]", &LinearExpr::term(x, 4.0).with_term(y, -1.0), RowSense::Ge, -2.0));
        m.add_row(LinearRow::new("cap", &LinearExpr::term(y, 1.0), RowSense::Le, 5.0));
        m
    }

    #[test]
    fn one_variable_model() {
        let mut m = MilpModel::new();
        let x = m.add_continuous("x", 0.0, 4.0);
        m.objective = LinearExpr::term(x, 1.0);
        let text = export_model(&m);
        assert!(text.contains("obj: 1 x"));
        assert_eq!(text.lines().filter(|l| l.contains("<= x <=")).count(), 1);
    }

    #[test]
    fn label_verbatim() {
        let text = export_model(&two_var());
        assert!(text.contains(" rocof[0]: 4 x - 1 y >= -2"));
    }

    #[test]
    fn round_trip() {
        let m = two_var();
        let back = import_model(&export_model(&m)).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn long_rows_wrap_and_reparse() {
        let mut m = MilpModel::new();
        let mut e = LinearExpr::new();
        for i in 0..30 {
            let v = m.add_continuous(format!("v{i}"), -1.0, 1.0);
            e.add_term(v, (i as f64 + 1.0) * 1e-7);
        }
        m.add_row(LinearRow::new("long", &e, RowSense::Eq, 0.25));
        m.objective = e.clone();
        let text = export_model(&m);
        assert!(text.lines().count() > 10);
        assert_eq!(import_model(&text).unwrap(), m);
    }

    #[test]
    fn tokenizer_handles_exponents() {
        let toks = tokenize("a: 1e-7 x - 2.5E+3 y >= -4", 1).unwrap();
        assert_eq!(toks[0], Tok::Label("a".into()));
        assert_eq!(toks[1], Tok::Word("1e-7".into()));
        assert_eq!(toks[4], Tok::Word("2.5E+3".into()));
    }

    #[test]
    fn missing_end_is_rejected() {
        assert_eq!(import_model("Minimize\n obj: 0\nSubject To\n"), Err(LpFormatError::MissingSection("End")));
    }

    #[test]
    fn solution_parse() {
        let m = two_var();
        let s = import_solution("status optimal\nobjective 0.5\nx 0\ny 1\n", &m).unwrap();
        assert_eq!(s.solution.values.len(), 2);
        assert_eq!(s.solution.values, vec![0.0, 1.0]);
        assert!(!s.objective_mismatch);
    }

    #[test]
    fn solution_objective_mismatch_flagged() {
        let m = two_var();
        let s = import_solution("status optimal\nobjective 0.6\nx 0\ny 1\n", &m).unwrap();
        assert!(s.objective_mismatch);
    }

    #[test]
    fn solution_unknown_variable() {
        let err = import_solution("status optimal\nz 1\n", &two_var()).unwrap_err();
        assert_eq!(err, SolutionImportError::UnknownVariable("z".into()));
        assert!(err.to_string().contains('z'));
    }

    #[test]
    fn solution_missing_status() {
        assert_eq!(import_solution("x 1\n", &two_var()), Err(SolutionImportError::MissingStatus));
    }

    #[test]
    fn solution_row_violation_names_row() {
        let m = two_var();
        // 4*0 - 2.000002 = -2.000002 violates `>= -2` by 2e-6.
        let err = import_solution("status optimal\nx 0\ny 2.000002\n", &m).unwrap_err();
        match err {
            SolutionImportError::RowViolated { label, .. } => assert_eq!(label, "rocof[0]"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn infeasible_status_has_no_point() {
        let s = import_solution("status infeasible\n", &two_var()).unwrap();
        assert_eq!(s.solution.status, SolveStatus::Infeasible);
        assert!(s.solution.values.is_empty());
    }

    #[test]
    fn solution_round_trip() {
        let m = two_var();
        let sol = crate::milp::solve(&m, &crate::milp::SolveOptions::default()).unwrap();
        let back = import_solution(&export_solution(&m, &sol), &m).unwrap();
        assert_eq!(back.solution.values, sol.values);
        assert_eq!(back.solution.objective, sol.objective);
        assert!(!back.objective_mismatch);
        let none = crate::milp::MilpSolution::without_point(SolveStatus::Infeasible, 0, f64::NAN);
        assert_eq!(export_solution(&m, &none), "status infeasible\n");
    }
}
