//! Frequency-security constraints as linear rows: largest loss, post-loss
//! inertia, RoCoF, quasi-steady state, and the linearised nadir condition
//! with its damping term, loss discretisation and big-M product of inertia
//! and PFR.
//!
//! Every builder works on one node (a period in one scenario) described by a
//! [`FreqDecisionSet`]. Labels are `name` followed by the node `tag`, for
//! example `rocof[4]` or `nadir_seg[4][2][7]`.

use thiserror::Error;

use crate::milp::{LinearExpr, LinearRow, MilpModel, RowSense, VarId};
use crate::sysmodel::{FrequencyParams, GeneratorSpec};

#[derive(Debug, Error, PartialEq)]
pub enum FreqSecError {
    #[error("nadir segment grid tops out at {last} MW, below the largest unit rating {rating} MW")]
    GridDoesNotCover { last: f64, rating: f64 },
    #[error(
        "nadir segment {segment} MW lies below D·P^D·Δf_max/2 = {threshold} MW, where the requirement is not monotone"
    )]
    GridBelowMonotoneRange { segment: f64, threshold: f64 },
    #[error("big-M bound on total PFR must be positive, got {0}")]
    NonPositiveRmax(f64),
    #[error("decision set has {found} segment binaries for a grid of {expected}")]
    SegmentCount { found: usize, expected: usize },
}

/// Variable ids of one node. Generator-indexed vectors follow the fleet
/// order; `None` marks units without that variable (wind has no commitment,
/// units with zero `pfr_max` have no PFR).
#[derive(Debug, Clone, PartialEq)]
pub struct FreqDecisionSet {
    pub tag: String,
    pub commitment: Vec<Option<VarId>>,
    pub output: Vec<Option<VarId>>,
    pub pfr: Vec<Option<VarId>>,
    pub largest_loss: VarId,
    pub nadir_loss: VarId,
    pub segments: Vec<VarId>,
    /// `order[k]` = Σ_{i>k} m_i, binary: the selected segment lies above `k`.
    pub order: Vec<VarId>,
    /// z_g = x_g·R for every committed unit with a positive inertia constant.
    pub bilinear: Vec<Option<VarId>>,
}

impl FreqDecisionSet {
    /// Registers P^L, P^L_nadir, the segment binaries and the z_g variables
    /// for one node. `loss_cap` bounds P^L, `r_max` bounds each z_g.
    #[allow(clippy::too_many_arguments)]
    pub fn register(
        model: &mut MilpModel,
        tag: &str,
        fleet: &[GeneratorSpec],
        freq: &FrequencyParams,
        commitment: Vec<Option<VarId>>,
        output: Vec<Option<VarId>>,
        pfr: Vec<Option<VarId>>,
        loss_cap: f64,
        r_max: f64,
    ) -> Self {
        let largest_loss = model.add_continuous(format!("p_loss{tag}"), 0.0, loss_cap);
        let top = freq.nadir_segments.last().copied().unwrap_or(0.0);
        let nadir_loss = model.add_continuous(format!("p_loss_nadir{tag}"), 0.0, top);
        let segments =
            (0..freq.nadir_segments.len()).map(|i| model.add_binary(format!("m_seg{tag}[{i}]"))).collect();
        let order = (1..freq.nadir_segments.len())
            .map(|k| {
                let y = model.add_binary(format!("m_above{tag}[{}]", k - 1));
                model.set_priority(y, 1);
                y
            })
            .collect();
        let bilinear = fleet
            .iter()
            .zip(&commitment)
            .map(|(g, x)| match x {
                Some(_) if g.inertia_const > 0.0 => {
                    Some(model.add_continuous(format!("z_hr{tag}[{}]", g.id), 0.0, r_max.max(0.0)))
                }
                _ => None,
            })
            .collect();
        Self { tag: tag.to_string(), commitment, output, pfr, largest_loss, nadir_loss, segments, order, bilinear }
    }

    /// Total PFR R = Σ_g R_g.
    pub fn total_pfr(&self) -> LinearExpr {
        let mut e = LinearExpr::new();
        for r in self.pfr.iter().flatten() {
            e.add_term(*r, 1.0);
        }
        e
    }

    fn label(&self, name: &str) -> String {
        format!("{name}{}", self.tag)
    }
}

/// `P^L ≥ P_g` for every loss source. The flag is set when no unit is eligible.
pub fn largest_loss_rows(d: &FreqDecisionSet, fleet: &[GeneratorSpec]) -> (Vec<LinearRow>, bool) {
    let rows: Vec<LinearRow> = fleet
        .iter()
        .zip(&d.output)
        .filter(|(g, _)| g.is_loss_source())
        .filter_map(|(g, p)| p.map(|p| (g, p)))
        .map(|(g, p)| {
            let e = LinearExpr::term(d.largest_loss, 1.0).with_term(p, -1.0);
            LinearRow::new(format!("{}[{}]", d.label("largest_loss"), g.id), &e, RowSense::Ge, 0.0)
        })
        .collect();
    let warn = rows.is_empty();
    (rows, warn)
}

/// Post-loss inertia `Σ_g H_g·P_g^max·x_g/f0 − P_max^L·H^L/f0`, MW·s².
pub fn inertia_expression(d: &FreqDecisionSet, fleet: &[GeneratorSpec], freq: &FrequencyParams) -> LinearExpr {
    let mut e = LinearExpr::constant(-freq.largest_unit_rating * freq.largest_unit_inertia / freq.f0);
    for (g, x) in fleet.iter().zip(&d.commitment) {
        if let Some(x) = x {
            if g.inertia_const > 0.0 {
                e.add_term(*x, g.inertia_const * g.p_max / freq.f0);
            }
        }
    }
    e
}

/// `H ≥ P^L/(2·RoCoF_max)`.
pub fn rocof_row(d: &FreqDecisionSet, inertia: &LinearExpr, freq: &FrequencyParams) -> LinearRow {
    let mut e = inertia.clone();
    e.add_term(d.largest_loss, -1.0 / (2.0 * freq.rocof_max));
    LinearRow::new(d.label("rocof"), &e, RowSense::Ge, 0.0)
}

/// `H ≥ 0`.
pub fn inertia_nonnegative_row(d: &FreqDecisionSet, inertia: &LinearExpr) -> LinearRow {
    LinearRow::new(d.label("inertia_nonneg"), inertia, RowSense::Ge, 0.0)
}

/// `R − P^L ≥ −D·P^D·Δf_ss_max`.
pub fn qss_row(d: &FreqDecisionSet, freq: &FrequencyParams, demand: f64) -> LinearRow {
    let mut e = d.total_pfr();
    e.add_term(d.largest_loss, -1.0);
    LinearRow::new(d.label("qss"), &e, RowSense::Ge, -freq.damping_product(demand) * freq.df_ss_max)
}

/// `β = D·P^D·T_d/4`, MW·s.
pub fn beta(freq: &FrequencyParams, demand: f64) -> f64 {
    freq.damping_product(demand) * freq.t_d / 4.0
}

/// Required H·R for a loss `p_loss`: `p²·T_d/(4·Δf_max) − β·p`, MW²·s.
pub fn nadir_requirement(p_loss: f64, freq: &FrequencyParams, demand: f64) -> f64 {
    p_loss * p_loss * freq.t_d / (4.0 * freq.df_max) - beta(freq, demand) * p_loss
}

/// Big-M linearisation of H·R. Returns the expression
/// `Σ_g (H_g·P_g^max/f0)·z_g − (P_max^L·H^L/f0)·R` and the rows
/// `z_g ≤ R`, `z_g ≤ r_max·x_g`, `z_g ≥ R − r_max·(1 − x_g)`; `z_g ≥ 0` is a bound.
pub fn linearize_inertia_pfr(
    d: &FreqDecisionSet,
    fleet: &[GeneratorSpec],
    freq: &FrequencyParams,
    r_max: f64,
) -> Result<(LinearExpr, Vec<LinearRow>), FreqSecError> {
    if !(r_max > 0.0) {
        return Err(FreqSecError::NonPositiveRmax(r_max));
    }
    let r = d.total_pfr();
    let mut expr = LinearExpr::new();
    expr.add_scaled(&r, -freq.largest_unit_rating * freq.largest_unit_inertia / freq.f0);
    let mut rows = Vec::new();
    for ((g, z), x) in fleet.iter().zip(&d.bilinear).zip(&d.commitment) {
        let (Some(z), Some(x)) = (z, x) else { continue };
        expr.add_term(*z, g.inertia_const * g.p_max / freq.f0);
        let mut upper_r = LinearExpr::term(*z, 1.0);
        upper_r.add_scaled(&r, -1.0);
        rows.push(LinearRow::new(format!("{}[{}]", d.label("hr_le_r"), g.id), &upper_r, RowSense::Le, 0.0));
        let upper_x = LinearExpr::term(*z, 1.0).with_term(*x, -r_max);
        rows.push(LinearRow::new(format!("{}[{}]", d.label("hr_le_x"), g.id), &upper_x, RowSense::Le, 0.0));
        let mut lower = LinearExpr::term(*z, 1.0).with_term(*x, -r_max);
        lower.add_scaled(&r, -1.0);
        rows.push(LinearRow::new(format!("{}[{}]", d.label("hr_ge"), g.id), &lower, RowSense::Ge, -r_max));
    }
    Ok((expr, rows))
}

/// Segment rows of the nadir condition. For each grid value P_i with
/// `k_i = P_i²·T_d/(4·Δf_max)`: `H·R + β·P_i ≥ k_i·m_i`, so only the selected
/// segment binds. Also `Σ m_i = 1`, `P^L_nadir = Σ m_i·P_i` and
/// `P^L_nadir ≥ P^L`, and `m_i = y_{i−1} − y_i` tying the segment binaries
/// to the ordering binaries.
pub fn nadir_discretization_rows(
    d: &FreqDecisionSet,
    hr: &LinearExpr,
    freq: &FrequencyParams,
    demand: f64,
) -> Result<Vec<LinearRow>, FreqSecError> {
    check_grid(freq, demand)?;
    if d.segments.len() != freq.nadir_segments.len() {
        return Err(FreqSecError::SegmentCount { found: d.segments.len(), expected: freq.nadir_segments.len() });
    }
    let b = beta(freq, demand);
    let mut rows = Vec::with_capacity(d.segments.len() + 3);
    for (i, (&p_i, &m)) in freq.nadir_segments.iter().zip(&d.segments).enumerate() {
        let k = p_i * p_i * freq.t_d / (4.0 * freq.df_max);
        let mut e = hr.clone();
        e.add_term(m, -k);
        rows.push(LinearRow::new(format!("{}[{i}]", d.label("nadir_seg")), &e, RowSense::Ge, -b * p_i));
    }
    let mut pick = LinearExpr::new();
    let mut def = LinearExpr::term(d.nadir_loss, 1.0);
    for (&p_i, &m) in freq.nadir_segments.iter().zip(&d.segments) {
        pick.add_term(m, 1.0);
        def.add_term(m, -p_i);
    }
    rows.push(LinearRow::new(d.label("nadir_pick"), &pick, RowSense::Eq, 1.0));
    // m_i = y_{i−1} − y_i with y_{−1} = 1 and y_{n−1} = 0.
    for (i, &m) in d.segments.iter().enumerate() {
        let mut e = LinearExpr::term(m, 1.0);
        let mut rhs = 0.0;
        match i.checked_sub(1).and_then(|k| d.order.get(k)) {
            Some(&y) => {
                e.add_term(y, -1.0);
            }
            None => rhs = 1.0,
        }
        if let Some(&y) = d.order.get(i) {
            e.add_term(y, 1.0);
        }
        rows.push(LinearRow::new(format!("{}[{i}]", d.label("nadir_order")), &e, RowSense::Eq, rhs));
    }
    rows.push(LinearRow::new(d.label("nadir_loss_def"), &def, RowSense::Eq, 0.0));
    let cover = LinearExpr::term(d.nadir_loss, 1.0).with_term(d.largest_loss, -1.0);
    rows.push(LinearRow::new(d.label("nadir_cover"), &cover, RowSense::Ge, 0.0));
    Ok(rows)
}

/// The grid must reach P_max^L and stay where the requirement is
/// non-decreasing in the loss (P ≥ D·P^D·Δf_max/2).
pub fn check_grid(freq: &FrequencyParams, demand: f64) -> Result<(), FreqSecError> {
    let last = freq.nadir_segments.last().copied().unwrap_or(0.0);
    if last < freq.largest_unit_rating {
        return Err(FreqSecError::GridDoesNotCover { last, rating: freq.largest_unit_rating });
    }
    let threshold = freq.damping_product(demand) * freq.df_max / 2.0;
    if let Some(&segment) = freq.nadir_segments.iter().find(|&&p| p < threshold) {
        return Err(FreqSecError::GridBelowMonotoneRange { segment, threshold });
    }
    Ok(())
}

/// Slack, MW, when matching a solved loss to the grid.
pub const SEGMENT_MATCH_TOL: f64 = 1e-6;

/// Index of the smallest grid value covering `p_loss` up to [`SEGMENT_MATCH_TOL`].
pub fn tightest_segment(freq: &FrequencyParams, p_loss: f64) -> Option<usize> {
    freq.nadir_segments.iter().position(|&p| p >= p_loss - SEGMENT_MATCH_TOL)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::{solve, SolveOptions};
    use crate::sysmodel::Technology;

    pub(crate) fn unit(id: &str, p_max: f64, h: f64, pfr: f64) -> GeneratorSpec {
        GeneratorSpec {
            id: id.into(),
            technology: Technology::Thermal,
            p_max,
            p_min: 0.0,
            inertia_const: h,
            marginal_cost: 1.0,
            no_load_cost: 0.0,
            startup_cost: 0.0,
            min_up: 0.0,
            min_down: 0.0,
            pfr_max: pfr,
            emissions_rate: 0.0,
            deloadable: false,
            max_deload_fraction: 0.0,
            loss_eligible: true,
            must_run: false,
            initial_on: None,
        }
    }

    pub(crate) fn freq(rating: f64, inertia: f64, segments: Vec<f64>, damping: f64) -> FrequencyParams {
        FrequencyParams {
            f0: 50.0,
            df_max: 0.8,
            df_ss_max: 0.5,
            rocof_max: 0.5,
            t_d: 10.0,
            damping,
            deadband: 0.0,
            nadir_segments: segments,
            largest_unit_rating: rating,
            largest_unit_inertia: inertia,
        }
    }

    fn node(model: &mut MilpModel, fleet: &[GeneratorSpec], f: &FrequencyParams) -> FreqDecisionSet {
        let x = fleet.iter().map(|g| Some(model.add_binary(format!("x[{}]", g.id)))).collect();
        let p = fleet.iter().map(|g| Some(model.add_continuous(format!("p[{}]", g.id), 0.0, g.p_max))).collect();
        let r = fleet
            .iter()
            .map(|g| (g.pfr_max > 0.0).then(|| model.add_continuous(format!("r[{}]", g.id), 0.0, g.pfr_max)))
            .collect();
        let r_max = fleet.iter().map(|g| g.pfr_max).sum();
        let cap = fleet.iter().map(|g| g.p_max).fold(0.0, f64::max);
        FreqDecisionSet::register(model, "[0]", fleet, f, x, p, r, cap, r_max)
    }

    #[test]
    fn one_row_per_loss_source() {
        let fleet = vec![unit("a", 100.0, 1.0, 0.0), unit("b", 200.0, 1.0, 0.0), unit("c", 300.0, 1.0, 0.0)];
        let f = freq(300.0, 1.0, vec![300.0], 0.0);
        let mut m = MilpModel::new();
        let d = node(&mut m, &fleet, &f);
        let (rows, warn) = largest_loss_rows(&d, &fleet);
        assert_eq!(rows.len(), 3);
        assert!(!warn);
        for (row, g) in rows.iter().zip(&d.output) {
            assert_eq!(row.coeff(d.largest_loss), 1.0);
            assert_eq!(row.coeff(g.unwrap()), -1.0);
            assert_eq!(row.sense, RowSense::Ge);
            assert_eq!(row.rhs, 0.0);
        }
        let mut none = fleet.clone();
        for g in &mut none {
            g.loss_eligible = false;
        }
        let (rows, warn) = largest_loss_rows(&d, &none);
        assert!(rows.is_empty() && warn);
    }

    #[test]
    fn minimised_loss_matches_fixed_output() {
        let fleet = vec![unit("a", 1320.0, 1.0, 0.0)];
        let f = freq(1320.0, 1.0, vec![1320.0], 0.0);
        let mut m = MilpModel::new();
        let d = node(&mut m, &fleet, &f);
        m.fix(d.output[0].unwrap(), 1320.0);
        m.add_rows(largest_loss_rows(&d, &fleet).0);
        m.objective = LinearExpr::term(d.largest_loss, 1.0);
        let s = solve(&m, &SolveOptions::default()).unwrap();
        assert!((s.value(d.largest_loss) - 1320.0).abs() < 1e-9);
    }

    #[test]
    fn inertia_expression_values() {
        let fleet = vec![unit("A", 2000.0, 5.0, 0.0), unit("B", 500.0, 4.0, 0.0)];
        let f = freq(2000.0, 5.0, vec![2000.0], 0.0);
        let mut m = MilpModel::new();
        let d = node(&mut m, &fleet, &f);
        let h = inertia_expression(&d, &fleet, &f);
        let mut v = vec![0.0; m.num_vars()];
        let (xa, xb) = (d.commitment[0].unwrap(), d.commitment[1].unwrap());
        v[xa.0] = 1.0;
        v[xb.0] = 1.0;
        assert!((h.evaluate(&v) - 40.0).abs() < 1e-12);
        v[xb.0] = 0.0;
        assert_eq!(h.evaluate(&v), 0.0);
        v[xa.0] = 0.0;
        assert_eq!(h.evaluate(&v), -200.0);
    }

    #[test]
    fn rocof_requirements() {
        for (p, rocof, need) in [(1800.0, 0.125, 7200.0), (1320.0, 0.5, 1320.0), (0.0, 0.5, 0.0)] {
            let fleet = vec![unit("a", 2000.0, 5.0, 0.0)];
            let mut f = freq(2000.0, 5.0, vec![2000.0], 0.0);
            f.rocof_max = rocof;
            let mut m = MilpModel::new();
            let d = node(&mut m, &fleet, &f);
            let h = inertia_expression(&d, &fleet, &f);
            let row = rocof_row(&d, &h, &f);
            // With x = 1 the expression is 0 MW·s²; the row reads 0 − P/(2·RoCoF) ≥ rhs.
            let mut v = vec![0.0; m.num_vars()];
            v[d.commitment[0].unwrap().0] = 1.0;
            v[d.largest_loss.0] = p;
            assert!((row.rhs - row.activity(&v) - need).abs() < 1e-9);
        }
    }

    #[test]
    fn qss_requirements() {
        let fleet = vec![unit("a", 2000.0, 5.0, 3000.0)];
        let mut m = MilpModel::new();
        let f = freq(2000.0, 5.0, vec![2000.0], 0.01);
        let d = node(&mut m, &fleet, &f);
        let row = qss_row(&d, &f, 30000.0);
        assert!((row.rhs + 150.0).abs() < 1e-9);
        // P^L = 1800 → R ≥ 1650.
        let mut v = vec![0.0; m.num_vars()];
        v[d.largest_loss.0] = 1800.0;
        v[d.pfr[0].unwrap().0] = 1650.0;
        assert!(row.is_satisfied(&v, 0.0));
        v[d.pfr[0].unwrap().0] = 1649.0;
        assert!(!row.is_satisfied(&v, 1e-9));
        let f0 = freq(2000.0, 5.0, vec![2000.0], 0.0);
        assert_eq!(qss_row(&d, &f0, 30000.0).rhs, 0.0);
    }

    #[test]
    fn nadir_requirement_values() {
        let f = freq(1800.0, 5.0, vec![1800.0], 0.0);
        assert_eq!(nadir_requirement(1800.0, &f, 20000.0), 10_125_000.0);
        let f = freq(1800.0, 5.0, vec![1800.0], 0.01);
        assert_eq!(beta(&f, 20000.0), 500.0);
        assert_eq!(nadir_requirement(1800.0, &f, 20000.0), 9_225_000.0);
        assert_eq!(nadir_requirement(0.0, &f, 20000.0), 0.0);
    }

    #[test]
    fn grid_checks() {
        let f = freq(1800.0, 5.0, vec![600.0, 1200.0], 0.0);
        assert!(matches!(check_grid(&f, 1000.0), Err(FreqSecError::GridDoesNotCover { .. })));
        let f = freq(1800.0, 5.0, vec![100.0, 1800.0], 0.01);
        // Threshold 0.01·30000·0.8/2 = 120 MW.
        assert!(matches!(check_grid(&f, 30000.0), Err(FreqSecError::GridBelowMonotoneRange { .. })));
        assert!(check_grid(&f, 20000.0).is_ok());
    }

    #[test]
    fn big_m_rejects_non_positive_bound() {
        let fleet = vec![unit("a", 100.0, 1.0, 0.0)];
        let f = freq(100.0, 1.0, vec![100.0], 0.0);
        let mut m = MilpModel::new();
        let d = node(&mut m, &fleet, &f);
        assert_eq!(linearize_inertia_pfr(&d, &fleet, &f, 0.0), Err(FreqSecError::NonPositiveRmax(0.0)));
    }

    /// Minimises z_g for fixed x and R; the rows must pin z_g = x·R.
    fn forced_z(x: f64, r: f64) -> (f64, f64) {
        let fleet = vec![unit("a", 2000.0, 5.0, 1000.0)];
        let f = freq(2000.0, 5.0, vec![2000.0], 0.0);
        let mut m = MilpModel::new();
        let d = node(&mut m, &fleet, &f);
        let (_, rows) = linearize_inertia_pfr(&d, &fleet, &f, 1000.0).unwrap();
        m.add_rows(rows);
        m.fix(d.commitment[0].unwrap(), x);
        m.fix(d.pfr[0].unwrap(), r);
        let z = d.bilinear[0].unwrap();
        m.objective = LinearExpr::term(z, 1.0);
        let lo = solve(&m, &SolveOptions::default()).unwrap().value(z);
        m.objective = LinearExpr::term(z, -1.0);
        let hi = solve(&m, &SolveOptions::default()).unwrap().value(z);
        (lo, hi)
    }

    #[test]
    fn big_m_pins_product() {
        let (lo, hi) = forced_z(1.0, 700.0);
        assert!((lo - 700.0).abs() < 1e-9 && (hi - 700.0).abs() < 1e-9);
        let (lo, hi) = forced_z(0.0, 700.0);
        assert!(lo.abs() < 1e-9 && hi.abs() < 1e-9);
    }

    /// Minimising R for a fixed P^L must select the tightest segment covering
    /// P^L and leave H·R exactly at that segment's requirement.
    #[test]
    fn discretisation_selects_segment() {
        let mut big = unit("a", 1800.0, 5.0, 0.0);
        big.loss_eligible = true;
        let mut other = unit("b", 10000.0, 6.0, 10000.0);
        other.loss_eligible = false;
        let fleet = vec![big, other];
        let f = freq(1800.0, 5.0, vec![600.0, 1200.0, 1800.0], 0.01);
        let demand = 20000.0;
        // Both committed: H = 6·10000/50 = 1200 MW·s².
        let h = 1200.0;
        for (p_loss, expected) in [(1000.0, 1usize), (1800.0, 2), (0.0, 0)] {
            let mut m = MilpModel::new();
            let d = node(&mut m, &fleet, &f);
            let (hr, rows) = linearize_inertia_pfr(&d, &fleet, &f, 10000.0).unwrap();
            m.add_rows(rows);
            m.add_rows(nadir_discretization_rows(&d, &hr, &f, demand).unwrap());
            m.fix(d.largest_loss, p_loss);
            for x in d.commitment.iter().flatten() {
                m.fix(*x, 1.0);
            }
            m.objective = d.total_pfr();
            let s = solve(&m, &SolveOptions::default()).unwrap();
            assert!(s.is_optimal(), "{:?}", s.status);
            let picked: Vec<usize> =
                d.segments.iter().enumerate().filter(|(_, v)| s.value(**v) > 0.5).map(|(i, _)| i).collect();
            assert_eq!(picked, vec![expected]);
            assert_eq!(tightest_segment(&f, p_loss), Some(expected));
            let seg = f.nadir_segments[expected];
            assert!((s.value(d.nadir_loss) - seg).abs() < 1e-9);
            let r = s.objective;
            let need = nadir_requirement(seg, &f, demand).max(0.0);
            assert!((h * r - need).abs() <= 1e-6 * need.max(1.0), "H·R {} vs {need}", h * r);
        }
    }
}
