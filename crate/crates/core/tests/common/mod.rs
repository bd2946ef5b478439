#![allow(dead_code)]

use fsuc::freqsec::FreqDecisionSet;
use fsuc::freqsec::{largest_loss_rows, linearize_inertia_pfr, nadir_discretization_rows};
use fsuc::milp::{solve, LinearExpr, LinearRow, MilpModel, RowSense, SolveOptions};
use fsuc::scheduler::{solve_window, CommitmentHistory, RollingResult, UcOptions, UcSolution, WindowInput};
use fsuc::sysmodel::{build_scenario_tree, default_segment_grid, FrequencyParams, GeneratorSpec, NetDemandQuantiles, SystemSpec, Technology};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Fixed-step RK4 integration of `2H·f′ + c·f = R·min(t, T_d)/T_d − P`,
/// returning the state at every `record_every`-th step.
pub fn rk4_swing(h: f64, c: f64, r: f64, t_d: f64, p: f64, step: f64, t_end: f64, record_every: usize) -> Vec<(f64, f64)> {
    let rhs = |t: f64, f: f64| (r * t.min(t_d) / t_d - p - c * f) / (2.0 * h);
    let n = (t_end / step).round() as usize;
    let mut f = 0.0;
    let mut out = vec![(0.0, 0.0)];
    for k in 0..n {
        let t = k as f64 * step;
        let k1 = rhs(t, f);
        let k2 = rhs(t + step / 2.0, f + step / 2.0 * k1);
        let k3 = rhs(t + step / 2.0, f + step / 2.0 * k2);
        let k4 = rhs(t + step, f + step * k3);
        f += step / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if (k + 1) % record_every == 0 {
            out.push(((k + 1) as f64 * step, f));
        }
    }
    out
}

/// Minimum of an RK4 trajectory sampled every step.
pub fn rk4_nadir(h: f64, c: f64, r: f64, t_d: f64, p: f64, step: f64, t_end: f64) -> f64 {
    rk4_swing(h, c, r, t_d, p, step, t_end, 1).into_iter().map(|(_, f)| f).fold(0.0, f64::min)
}

pub fn toy_dir() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/toy")
}

/// Bundled toy system and its net-demand quantiles.
pub fn toy() -> (SystemSpec, NetDemandQuantiles) {
    let sys = fsuc::sysmodel::load_system(toy_dir().join("system.toml")).expect("toy system loads");
    let q = fsuc::sysmodel::load_scenarios(toy_dir().join("net_demand.csv")).expect("toy scenarios load");
    (sys, q)
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

/// Random MILP; most instances are built around a planted feasible point.
pub fn random_model(seed: u64, n_bin: usize, n_cont: usize, n_rows: usize) -> MilpModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = MilpModel::new();
    let mut vars = Vec::new();
    for i in 0..n_bin {
        vars.push(m.add_binary(format!("b{i}")));
    }
    for i in 0..n_cont {
        let lo = rng.gen_range(-3.0..1.0_f64).round();
        let hi = lo + rng.gen_range(0.5..6.0_f64);
        vars.push(m.add_continuous(format!("c{i}"), lo, hi));
    }
    let mut obj = LinearExpr::new();
    for &v in &vars {
        obj.add_term(v, rng.gen_range(-10.0..10.0_f64));
    }
    m.objective = obj;
    let plant = rng.gen_bool(0.7);
    let point: Vec<f64> = m
        .variables
        .iter()
        .map(|v| if v.upper == 1.0 && v.lower == 0.0 && v.name.starts_with('b') {
            f64::from(rng.gen_bool(0.5) as u8)
        } else {
            rng.gen_range(v.lower..=v.upper)
        })
        .collect();
    for r in 0..n_rows {
        let mut e = LinearExpr::new();
        let k = rng.gen_range(1..=vars.len().min(6));
        for _ in 0..k {
            let v = vars[rng.gen_range(0..vars.len())];
            e.add_term(v, rng.gen_range(-5.0..5.0_f64));
        }
        if e.is_empty() {
            e.add_term(vars[0], 1.0);
        }
        let sense = match rng.gen_range(0..5) {
            0 => RowSense::Eq,
            1 | 2 => RowSense::Ge,
            _ => RowSense::Le,
        };
        let rhs = if plant {
            let a = e.evaluate(&point);
            match sense {
                RowSense::Eq => a,
                RowSense::Ge => a - rng.gen_range(0.0..2.0_f64),
                RowSense::Le => a + rng.gen_range(0.0..2.0_f64),
            }
        } else {
            rng.gen_range(-6.0..6.0_f64)
        };
        m.add_row(LinearRow::new(format!("r{r}"), &e, sense, rhs));
    }
    m
}

pub fn unit(id: &str, p_max: f64, h: f64, pfr: f64) -> GeneratorSpec {
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

pub fn params(rating: f64, inertia: f64, segments: Vec<f64>, damping: f64) -> FrequencyParams {
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

/// Commitment, output and PFR variables of one node, registered with freqsec.
pub fn node(model: &mut MilpModel, fleet: &[GeneratorSpec], f: &FrequencyParams) -> (FreqDecisionSet, f64) {
    let x = fleet.iter().map(|g| Some(model.add_binary(format!("x[{}]", g.id)))).collect();
    let p = fleet.iter().map(|g| Some(model.add_continuous(format!("p[{}]", g.id), 0.0, g.p_max))).collect();
    let r = fleet
        .iter()
        .map(|g| (g.pfr_max > 0.0).then(|| model.add_continuous(format!("r[{}]", g.id), 0.0, g.pfr_max)))
        .collect();
    let r_max: f64 = fleet.iter().map(|g| g.pfr_max).sum();
    let cap = fleet.iter().map(|g| g.p_max).fold(0.0, f64::max);
    (FreqDecisionSet::register(model, "[0]", fleet, f, x, p, r, cap, r_max), r_max)
}

/// Replays every window of a finished run with modified options, on the
/// commitment history of that run. Assumes a first-stage length of one.
pub fn replay(
    sys: &SystemSpec,
    q: &NetDemandQuantiles,
    run: &RollingResult,
    options: &UcOptions,
) -> Vec<UcSolution> {
    let n = sys.periods();
    let demand = &sys.demand.values;
    let scen = q.rescale_wind(&demand[..n], sys.reference_wind_capacity(), sys.wind_capacity());
    let mut history = CommitmentHistory::default();
    let mut out = Vec::new();
    for t in 0..n {
        let len = options.horizon.min(n - t);
        let w = WindowInput {
            start: t,
            demand: demand[t..t + len].to_vec(),
            tree: build_scenario_tree(&scen.levels, &scen.values[t..t + len], scen.realized_at(t)).unwrap(),
            history: &history,
            fixed: Vec::new(),
        };
        out.push(solve_window(sys, &w, options).unwrap());
        history.states.push(run.trajectory.periods[t].commitment.clone());
    }
    out
}

pub const RATING: f64 = 1800.0;

/// Solves one node whose largest unit is fixed at `output`, minimising PFR.
/// Returns (P^L, P^L_nadir, linearised H·R, direct H·R).
pub fn discretised_instance(demand: f64, output: f64) -> (f64, f64, f64, f64) {
    let fleet = vec![
        GeneratorSpec { deloadable: true, max_deload_fraction: 0.33, ..unit("big", RATING, 5.0, 0.0) },
        unit("a", 5000.0, 5.0, 2500.0),
        unit("b", 5000.0, 5.0, 2500.0),
        unit("c", 5000.0, 5.0, 2500.0),
    ];
    let f = params(RATING, 5.0, default_segment_grid(RATING, 0.33), 0.01);
    let mut model = MilpModel::new();
    let (d, r_max) = node(&mut model, &fleet, &f);
    for x in d.commitment.iter().flatten() {
        model.fix(*x, 1.0);
    }
    for (g, p) in d.output.iter().enumerate() {
        model.fix(p.unwrap(), if g == 0 { output } else { 0.0 });
    }
    model.add_rows(largest_loss_rows(&d, &fleet).0);
    let (hr, rows) = linearize_inertia_pfr(&d, &fleet, &f, r_max).unwrap();
    model.add_rows(rows);
    model.add_rows(nadir_discretization_rows(&d, &hr, &f, demand).unwrap());
    let mut objective = d.total_pfr();
    objective.add_term(d.largest_loss, 1e-3);
    model.objective = objective;
    let sol = solve(&model, &SolveOptions::default()).unwrap();
    assert!(sol.is_optimal());
    let p_loss = sol.value(d.largest_loss);
    let p_nadir = sol.value(d.nadir_loss);
    let h = (fleet.iter().map(|g| g.inertia_const * g.p_max).sum::<f64>() - RATING * 5.0) / f.f0;
    (p_loss, p_nadir, hr.evaluate(&sol.values), h * d.total_pfr().evaluate(&sol.values))
}

/// One fleet row per unit: (p_max, H, pfr_max, committed, share of pfr_max delivered).
pub type FleetSample = (f64, f64, f64, bool, f64);

/// Fixes commitment and PFR from `spec`, then minimises and maximises the
/// big-M expression of H·R. Returns the direct product and the two extremes.
pub fn big_m_values(spec: &[FleetSample]) -> (f64, [f64; 2]) {
    let mut fleet: Vec<GeneratorSpec> =
        spec.iter().enumerate().map(|(i, &(p, h, r, _, _))| unit(&format!("g{i}"), p, h, r)).collect();
    if fleet.iter().all(|g| g.pfr_max == 0.0) {
        fleet[0].pfr_max = 100.0;
    }
    let largest = fleet.iter().max_by(|a, b| a.p_max.total_cmp(&b.p_max)).unwrap().clone();
    let f = params(largest.p_max, largest.inertia_const, vec![largest.p_max], 0.0);
    let mut model = MilpModel::new();
    let (d, r_max) = node(&mut model, &fleet, &f);
    let (hr, rows) = linearize_inertia_pfr(&d, &fleet, &f, r_max).unwrap();
    model.add_rows(rows);
    let mut h_direct = -f.largest_unit_rating * f.largest_unit_inertia / f.f0;
    let mut r_direct = 0.0;
    for (g, (u, &(_, _, _, on, share))) in fleet.iter().zip(spec).enumerate() {
        model.fix(d.commitment[g].unwrap(), f64::from(u8::from(on)));
        if on {
            h_direct += u.inertia_const * u.p_max / f.f0;
        }
        if let Some(r) = d.pfr[g] {
            // committed units deliver a share of their capability, others none
            let v = if on { share * u.pfr_max } else { 0.0 };
            model.fix(r, v);
            r_direct += v;
        }
    }
    let direct = h_direct * r_direct;
    let mut extremes = [0.0; 2];
    for (k, sign) in [1.0, -1.0].into_iter().enumerate() {
        let mut objective = LinearExpr::new();
        objective.add_scaled(&hr, sign);
        model.objective = objective;
        let sol = solve(&model, &SolveOptions::default()).unwrap();
        assert!(sol.is_optimal());
        extremes[k] = hr.evaluate(&sol.values);
    }
    (direct, extremes)
}
