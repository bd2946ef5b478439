//! Reference solver: enumerate every binary assignment and solve the
//! remaining LP. Only meant for small models in tests and verification.

use super::model::MilpModel;
use super::simplex::{Basis, LpProblem, LpStatus};
use super::{MilpError, MilpSolution, SolveStatus};

pub const MAX_EXHAUSTIVE_BINARIES: usize = 20;

pub fn solve_exhaustive(model: &MilpModel) -> Result<MilpSolution, MilpError> {
    model.validate()?;
    let binaries: Vec<usize> = model.binaries().map(|v| v.0).collect();
    if binaries.len() > MAX_EXHAUSTIVE_BINARIES {
        return Err(MilpError::TooManyBinaries { found: binaries.len(), max: MAX_EXHAUSTIVE_BINARIES });
    }
    let lp = LpProblem::new(model);
    let base_lo: Vec<f64> = model.variables.iter().map(|v| v.lower).collect();
    let base_up: Vec<f64> = model.variables.iter().map(|v| v.upper).collect();

    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut warm: Option<Basis> = None;
    let mut solved = 0usize;
    let mut limited = false;
    let count = 1usize << binaries.len();
    for k in 0..count {
        // Gray-code order keeps consecutive subproblems one flip apart.
        let gray = k ^ (k >> 1);
        let mut lo = base_lo.clone();
        let mut up = base_up.clone();
        let mut skip = false;
        for (bit, &j) in binaries.iter().enumerate() {
            let v = ((gray >> bit) & 1) as f64;
            if v < base_lo[j] || v > base_up[j] {
                skip = true;
                break;
            }
            lo[j] = v;
            up[j] = v;
        }
        if skip {
            continue;
        }
        let r = lp.solve(&lo, &up, warm.as_ref(), 200_000);
        solved += 1;
        match r.status {
            LpStatus::Optimal => {
                let mut x = r.x;
                for &j in &binaries {
                    x[j] = lo[j];
                }
                let obj = model.objective.evaluate(&x);
                if best.as_ref().is_none_or(|(b, _)| obj < *b) {
                    best = Some((obj, x));
                }
                warm = Some(r.basis);
            }
            LpStatus::Unbounded => {
                return Ok(MilpSolution::without_point(SolveStatus::Unbounded, solved, f64::NAN));
            }
            LpStatus::IterationLimit => limited = true,
            LpStatus::Infeasible => {}
        }
    }
    Ok(match best {
        Some((objective, values)) => MilpSolution {
            status: if limited { SolveStatus::Limit } else { SolveStatus::Optimal },
            values,
            objective,
            gap: 0.0,
            nodes: solved,
            root_bound: f64::NAN,
        },
        None => MilpSolution::without_point(
            if limited { SolveStatus::Limit } else { SolveStatus::Infeasible },
            solved,
            f64::NAN,
        ),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::model::{LinearExpr, LinearRow, RowSense};

    #[test]
    fn no_binaries_is_one_lp() {
        let mut m = MilpModel::new();
        let x = m.add_continuous("x", 0.0, 10.0);
        m.objective = LinearExpr::term(x, 1.0);
        m.add_row(LinearRow::new("lb", &LinearExpr::term(x, 1.0), RowSense::Ge, 3.0));
        let s = solve_exhaustive(&m).unwrap();
        assert_eq!(s.nodes, 1);
        assert!((s.objective - 3.0).abs() < 1e-9);
    }

    #[test]
    fn infeasible_model() {
        let mut m = MilpModel::new();
        let x = m.add_binary("x");
        let y = m.add_binary("y");
        m.add_row(LinearRow::new("r", &LinearExpr::term(x, 1.0).with_term(y, 1.0), RowSense::Ge, 3.0));
        assert_eq!(solve_exhaustive(&m).unwrap().status, SolveStatus::Infeasible);
    }

    #[test]
    fn rejects_large_models() {
        let mut m = MilpModel::new();
        for i in 0..=MAX_EXHAUSTIVE_BINARIES {
            m.add_binary(format!("b{i}"));
        }
        assert!(matches!(solve_exhaustive(&m), Err(MilpError::TooManyBinaries { .. })));
    }
}
