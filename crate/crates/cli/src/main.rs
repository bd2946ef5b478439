mod external;
mod manifest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use fsuc::freqdyn::{damping_grid, region_csv, region_curve};
use fsuc::freqsec::check_grid;
use fsuc::milp::{self, export_model, export_solution, import_model, SolveOptions};
use fsuc::scheduler::{
    curtailed_energy, emissions, load_factor, load_study, node_csv, run_study, solve_rolling_horizon_with, study_csv,
    trajectory_csv, verification_csv, verify_trajectory, BuiltinSolver, LossMode, NodeCheck, UcError, UcOptions,
    WindowSolver,
};
use fsuc::sysmodel::{
    build_scenario_tree, load_scenarios, load_system, scenario_path, NetDemandQuantiles, SysError, SystemSpec,
};
use serde_json::json;

use external::ExternalSolver;
use manifest::RunManifest;

#[derive(Debug, Parser)]
#[command(name = "fsuc", version, about = "Frequency-secured stochastic unit commitment")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Load and validate systems, their scenario files and an optional study config.
    Validate(ValidateArgs),
    /// Rolling-horizon schedule followed by swing-equation verification of every node.
    Solve(SolveArgs),
    /// Cost of frequency services, load factor, emissions and curtailment per wind level and mode.
    Study(StudyArgs),
    /// Exact and linear nadir boundaries in the (D·P^D, H·R) plane.
    Region(RegionArgs),
    /// Repeat the run recorded in a manifest into another directory.
    Rerun(RerunArgs),
    /// Solve an LP file with the built-in solver and write a solution file.
    LpSolve(LpSolveArgs),
}

#[derive(Debug, Args)]
struct ValidateArgs {
    /// System TOML files.
    #[arg(required = true)]
    systems: Vec<PathBuf>,
    /// Scenario CSV overriding the one named in each system file.
    #[arg(long)]
    scenarios: Option<PathBuf>,
    /// Study config to validate as well.
    #[arg(long)]
    study: Option<PathBuf>,
}

#[derive(Debug, Args, Clone)]
struct SolverArgs {
    /// Window length, periods.
    #[arg(long)]
    horizon: Option<usize>,
    /// Periods whose commitment each solve fixes.
    #[arg(long)]
    first_stage: Option<usize>,
    /// Branch-and-bound node limit per window.
    #[arg(long, default_value_t = SolveOptions::default().node_limit)]
    node_limit: usize,
    /// Relative optimality gap.
    #[arg(long, default_value_t = SolveOptions::default().gap_tol)]
    gap: f64,
}

impl SolverArgs {
    fn apply(&self, base: UcOptions) -> UcOptions {
        let mut o = UcOptions {
            horizon: self.horizon.unwrap_or(base.horizon),
            first_stage: self.first_stage.unwrap_or(base.first_stage),
            ..base
        };
        o.solver.node_limit = self.node_limit;
        o.solver.gap_tol = self.gap;
        o
    }

    fn record(&self, options: &UcOptions, m: &mut RunManifest) {
        m.option("horizon", options.horizon)
            .option("first_stage", options.first_stage)
            .option("node_limit", options.solver.node_limit)
            .option("gap", options.solver.gap_tol);
    }
}

#[derive(Debug, Args)]
struct SolveArgs {
    #[arg(long)]
    system: PathBuf,
    /// Defaults to the file named in the system's `[scenarios]` table.
    #[arg(long)]
    scenarios: Option<PathBuf>,
    /// Largest-loss mode: fixed or optimised.
    #[arg(long, default_value_t = LossMode::Optimised)]
    mode: LossMode,
    /// Drop the RoCoF, nadir and quasi-steady-state rows.
    #[arg(long)]
    no_frequency: bool,
    /// Pin deloadable units at their rating.
    #[arg(long)]
    no_deloading: bool,
    /// Installed wind, MW; the scenario file is rescaled to it.
    #[arg(long)]
    wind: Option<f64>,
    /// Simulate only the first N periods.
    #[arg(long)]
    periods: Option<usize>,
    #[command(flatten)]
    solver: SolverArgs,
    /// Output directory.
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct StudyArgs {
    /// Study config TOML.
    config: PathBuf,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct RegionArgs {
    /// Loss size, MW; repeat for several curves.
    #[arg(long = "loss", required = true)]
    losses: Vec<f64>,
    /// Take T_d, Δf_max and D from this system file.
    #[arg(long)]
    system: Option<PathBuf>,
    /// PFR delivery time, s.
    #[arg(long)]
    t_d: Option<f64>,
    /// Nadir limit, Hz.
    #[arg(long)]
    df_max: Option<f64>,
    /// Load damping, fraction of demand per Hz.
    #[arg(long)]
    damping: Option<f64>,
    #[arg(long, default_value_t = 20_000.0)]
    demand_min: f64,
    #[arg(long, default_value_t = 60_000.0)]
    demand_max: f64,
    /// Demand samples; the D·P^D = 0 point is always added.
    #[arg(long, default_value_t = 41)]
    points: usize,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct RerunArgs {
    manifest: PathBuf,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct LpSolveArgs {
    model: PathBuf,
    solution: PathBuf,
    #[arg(long, default_value_t = SolveOptions::default().node_limit)]
    node_limit: usize,
}

#[derive(Debug)]
enum Failure {
    Validation(String),
    Solver(String),
    Verification(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Validation(_) => 1,
            Failure::Solver(_) => 2,
            Failure::Verification(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Validation(m) | Failure::Solver(m) | Failure::Verification(m) => m,
        }
    }
}

impl From<SysError> for Failure {
    fn from(e: SysError) -> Self {
        Failure::Validation(e.to_string())
    }
}

/// Maps scheduler errors to exit classes; a stopped window is exported for offline solving.
fn uc_failure(e: UcError, out: &Path) -> Failure {
    match e {
        UcError::Window { start, status, nodes, partial, model } => {
            let path = out.join(format!("failed_window_{start:04}.lp"));
            let written = std::fs::write(&path, export_model(&model)).map(|_| path.display().to_string());
            let _ = std::fs::write(out.join("trajectory_partial.csv"), trajectory_csv(&partial.trajectory));
            Failure::Solver(format!(
                "window starting at period {start} stopped with status {status} after {nodes} nodes; model: {}",
                written.unwrap_or_else(|e| format!("not written ({e})"))
            ))
        }
        e @ (UcError::External(_) | UcError::Milp(_)) => Failure::Solver(e.to_string()),
        e => Failure::Validation(e.to_string()),
    }
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| Failure::Validation(format!("cannot write {}: {e}", path.display())))
}

fn create_dir(dir: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).map_err(|e| Failure::Validation(format!("cannot create {}: {e}", dir.display())))
}

fn window_solver(out: &Path, m: &mut RunManifest) -> Box<dyn WindowSolver> {
    match ExternalSolver::from_env(out.join("lp")) {
        Some(s) => {
            m.option("solver", s.exe.display());
            Box::new(s)
        }
        None => {
            m.option("solver", "builtin");
            Box::new(BuiltinSolver)
        }
    }
}

/// System, its scenarios and the scenario path actually read.
fn load_bundle(system: &Path, scenarios: Option<&Path>) -> Result<(SystemSpec, NetDemandQuantiles, PathBuf), Failure> {
    let sys = load_system(system)?;
    let path = scenarios.map(Path::to_path_buf).unwrap_or_else(|| scenario_path(system, &sys));
    let q = load_scenarios(&path)?;
    if q.periods() < sys.periods() {
        return Err(Failure::Validation(format!(
            "{}: {} periods of net demand for {} demand periods",
            path.display(),
            q.periods(),
            sys.periods()
        )));
    }
    build_scenario_tree(&q.levels, &q.values[..1], q.realized_at(0))?;
    for &d in &sys.demand.values {
        check_grid(&sys.frequency, d).map_err(|e| Failure::Validation(format!("{}: {e}", system.display())))?;
    }
    Ok((sys, q, path))
}

fn cmd_validate(a: &ValidateArgs) -> Result<(), Failure> {
    let mut bad = 0;
    for path in &a.systems {
        match load_bundle(path, a.scenarios.as_deref()) {
            Ok((sys, q, scen)) => {
                let largest = sys.largest_unit().map(|g| &sys.generators[g]);
                println!(
                    "ok {}: {} units, {} periods, {} quantile levels from {}, largest loss {}",
                    path.display(),
                    sys.generators.len(),
                    sys.periods(),
                    q.levels.len(),
                    scen.display(),
                    largest.map_or("none".to_string(), |g| format!("{} ({} MW)", g.id, g.p_max))
                );
            }
            Err(e) => {
                bad += 1;
                println!("error {}: {}", path.display(), e.message());
            }
        }
    }
    if let Some(study) = &a.study {
        let checked = load_study(study).map_err(Failure::from).and_then(|c| {
            let scen = c.scenarios.clone();
            load_bundle(&c.system, scen.as_deref()).map(|_| c)
        });
        match checked {
            Ok(c) => println!(
                "ok {}: {} wind levels x {} modes",
                study.display(),
                c.wind_capacities.len(),
                c.modes.len()
            ),
            Err(e) => {
                bad += 1;
                println!("error {}: {}", study.display(), e.message());
            }
        }
    }
    if bad > 0 {
        return Err(Failure::Validation(format!("{bad} input(s) failed validation")));
    }
    Ok(())
}

fn insecure(checks: &[NodeCheck]) -> usize {
    checks.iter().filter(|c| !c.secure()).count()
}

fn cmd_solve(a: &SolveArgs, raw: &[String]) -> Result<(), Failure> {
    let (mut sys, q, scen_path) = load_bundle(&a.system, a.scenarios.as_deref())?;
    if let Some(w) = a.wind {
        if !(w.is_finite() && w >= 0.0) {
            return Err(Failure::Validation(format!("--wind must be finite and non-negative, got {w}")));
        }
        sys = sys.with_wind_capacity(w);
    }
    if let Some(n) = a.periods {
        if n == 0 || n > sys.periods() {
            return Err(Failure::Validation(format!("--periods must lie in 1..={}, got {n}", sys.periods())));
        }
        sys.demand.values.truncate(n);
    }
    let options = a.solver.apply(UcOptions {
        frequency_constraints: !a.no_frequency,
        deloading_enabled: !a.no_deloading,
        mode: a.mode,
        ..UcOptions::default()
    });
    options.validate().map_err(|e| Failure::Validation(e.to_string()))?;
    create_dir(&a.out)?;
    let mut m = RunManifest::new("solve", raw, &a.out);
    m.inputs = vec![a.system.clone(), scen_path];
    m.option("mode", options.mode)
        .option("frequency_constraints", options.frequency_constraints)
        .option("deloading_enabled", options.deloading_enabled)
        .option("wind_capacity", sys.wind_capacity())
        .option("periods", sys.periods());
    a.solver.record(&options, &mut m);
    let solver = window_solver(&a.out, &mut m);
    let t0 = Instant::now();
    let result = solve_rolling_horizon_with(&sys, &q, &options, solver.as_ref()).map_err(|e| uc_failure(e, &a.out))?;
    let elapsed = t0.elapsed();
    let checks = verify_trajectory(&sys, &result);
    let traj = &result.trajectory;
    write(&a.out.join("trajectory.csv"), &trajectory_csv(traj))?;
    write(&a.out.join("nodes.csv"), &node_csv(&traj.unit_ids, &result.windows))?;
    write(&a.out.join("verification.csv"), &verification_csv(&checks))?;
    let largest = sys.largest_unit().map(|g| sys.generators[g].id.clone());
    let summary = json!({
        "periods": traj.periods.len(),
        "mode": options.mode.to_string(),
        "frequency_constraints": options.frequency_constraints,
        "total_cost": traj.total_cost(),
        "fuel_cost": traj.periods.iter().map(|p| p.fuel_cost).sum::<f64>(),
        "no_load_cost": traj.periods.iter().map(|p| p.no_load_cost).sum::<f64>(),
        "startup_cost": traj.periods.iter().map(|p| p.startup_cost).sum::<f64>(),
        "emissions_t": emissions(traj, &sys),
        "curtailed_mwh": curtailed_energy(traj),
        "largest_unit": largest,
        "largest_unit_load_factor": largest.as_deref().map(|id| load_factor(traj, id).unwrap_or(f64::NAN)),
        "verification": { "nodes": checks.len(), "insecure": insecure(&checks) },
        "windows": result.windows.iter().map(|w| json!({
            "start": w.start,
            "status": w.status.to_string(),
            "objective": w.objective,
            "gap": w.gap,
            "nodes": w.nodes_explored,
        })).collect::<Vec<_>>(),
    });
    write(&a.out.join("summary.json"), &(serde_json::to_string_pretty(&summary).expect("json") + "\n"))?;
    m.write().map_err(|e| Failure::Validation(format!("cannot write manifest: {e}")))?;
    println!(
        "solved {} periods in {:.2} s: total cost {:.2}, emissions {:.1} t, curtailment {:.1} MWh",
        traj.periods.len(),
        elapsed.as_secs_f64(),
        traj.total_cost(),
        emissions(traj, &sys),
        curtailed_energy(traj)
    );
    let bad = insecure(&checks);
    if bad == 0 {
        println!("verification: all {} nodes secure", checks.len());
        return Ok(());
    }
    let msg = format!("verification: {bad} of {} nodes insecure, see {}", checks.len(), a.out.join("verification.csv").display());
    if options.frequency_constraints {
        return Err(Failure::Verification(msg));
    }
    println!("{msg} (expected with frequency constraints off)");
    Ok(())
}

fn cmd_study(a: &StudyArgs, raw: &[String]) -> Result<(), Failure> {
    let config = load_study(&a.config)?;
    let (sys, q, scen_path) = load_bundle(&config.system, config.scenarios.as_deref())?;
    let base = a.solver.apply(UcOptions::default());
    let options = config.options(&base);
    options.validate().map_err(|e| Failure::Validation(e.to_string()))?;
    create_dir(&a.out)?;
    let mut m = RunManifest::new("study", raw, &a.out);
    m.inputs = vec![a.config.clone(), config.system.clone(), scen_path];
    a.solver.record(&options, &mut m);
    let solver = window_solver(&a.out, &mut m);
    let t0 = Instant::now();
    let cells = run_study(&sys, &q, &config, &base, solver.as_ref()).map_err(|e| uc_failure(e, &a.out))?;
    let mut bad = 0;
    for c in &cells {
        let stem = format!("{}_{}", c.row.wind_capacity, c.row.mode);
        write(&a.out.join(format!("trajectory_{stem}_on.csv")), &trajectory_csv(&c.report.on.trajectory))?;
        write(&a.out.join(format!("trajectory_{stem}_off.csv")), &trajectory_csv(&c.report.off.trajectory))?;
        let checks = verify_trajectory(&sys, &c.report.on);
        bad += insecure(&checks);
        write(&a.out.join(format!("verification_{stem}.csv")), &verification_csv(&checks))?;
    }
    let rows: Vec<_> = cells.iter().map(|c| c.row).collect();
    write(&a.out.join("study.csv"), &study_csv(&rows))?;
    m.write().map_err(|e| Failure::Validation(format!("cannot write manifest: {e}")))?;
    println!("{:>10} {:>10} {:>16} {:>12} {:>14} {:>14}", "wind_mw", "mode", "cfs", "load_factor", "emissions_t", "curtailed_mwh");
    for r in &rows {
        println!(
            "{:>10} {:>10} {:>16.2} {:>12.4} {:>14.1} {:>14.1}",
            r.wind_capacity, r.mode, r.cost_of_frequency_services, r.largest_unit_load_factor, r.emissions, r.curtailed_energy
        );
    }
    println!("{} cells in {:.2} s", rows.len(), t0.elapsed().as_secs_f64());
    if bad > 0 {
        return Err(Failure::Verification(format!("{bad} insecure nodes across frequency-constrained runs")));
    }
    Ok(())
}

fn cmd_region(a: &RegionArgs, raw: &[String]) -> Result<(), Failure> {
    let from_system = a.system.as_deref().map(load_system).transpose()?.map(|s| s.frequency);
    let pick = |flag: Option<f64>, sys: Option<f64>, default: f64| flag.or(sys).unwrap_or(default);
    let t_d = pick(a.t_d, from_system.as_ref().map(|f| f.t_d), 10.0);
    let df_max = pick(a.df_max, from_system.as_ref().map(|f| f.df_max), 0.8);
    let damping = pick(a.damping, from_system.as_ref().map(|f| f.damping), 0.01);
    let bad = |m: String| Err(Failure::Validation(m));
    if let Some(p) = a.losses.iter().find(|p| !(p.is_finite() && **p > 0.0)) {
        return bad(format!("--loss must be positive, got {p}"));
    }
    if !(t_d > 0.0 && df_max > 0.0 && damping >= 0.0) || !t_d.is_finite() || !df_max.is_finite() || !damping.is_finite() {
        return bad(format!("need T_d > 0, Δf_max > 0, D ≥ 0; got {t_d}, {df_max}, {damping}"));
    }
    if !(a.demand_min > 0.0 && a.demand_min <= a.demand_max && a.demand_max.is_finite()) {
        return bad(format!("demand range must satisfy 0 < min ≤ max, got [{}, {}]", a.demand_min, a.demand_max));
    }
    if a.points == 0 {
        return bad("--points must be positive".into());
    }
    let mut grid = vec![0.0];
    grid.extend(damping_grid(damping, a.demand_min, a.demand_max, a.points));
    let curves: Vec<_> = a.losses.iter().map(|&p| (p, region_curve(p, t_d, df_max, &grid))).collect();
    create_dir(&a.out)?;
    write(&a.out.join("region.csv"), &region_csv(&curves))?;
    let mut m = RunManifest::new("region", raw, &a.out);
    m.inputs = a.system.iter().cloned().collect();
    m.option("t_d", t_d)
        .option("df_max", df_max)
        .option("damping", damping)
        .option("demand_min", a.demand_min)
        .option("demand_max", a.demand_max)
        .option("points", a.points)
        .option("losses", format!("{:?}", a.losses));
    m.write().map_err(|e| Failure::Validation(format!("cannot write manifest: {e}")))?;
    println!("{} curves x {} points written to {}", curves.len(), grid.len(), a.out.join("region.csv").display());
    Ok(())
}

fn cmd_rerun(a: &RerunArgs) -> Result<(), Failure> {
    let m = RunManifest::read(&a.manifest).map_err(Failure::Validation)?;
    let out = std::path::absolute(&a.out)
        .map_err(|e| Failure::Validation(format!("bad output path {}: {e}", a.out.display())))?;
    std::env::set_current_dir(&m.working_dir)
        .map_err(|e| Failure::Validation(format!("cannot enter {}: {e}", m.working_dir.display())))?;
    let mut args = m.args.clone();
    args.push("--out".into());
    args.push(out.display().to_string());
    let cli = Cli::try_parse_from(std::iter::once("fsuc".to_string()).chain(args.iter().cloned()))
        .map_err(|e| Failure::Validation(format!("manifest arguments do not parse: {e}")))?;
    if matches!(cli.command, Cmd::Rerun(_)) {
        return Err(Failure::Validation("a manifest cannot record a rerun".into()));
    }
    run(cli.command, &args)
}

fn cmd_lp_solve(a: &LpSolveArgs) -> Result<(), Failure> {
    let text = std::fs::read_to_string(&a.model)
        .map_err(|e| Failure::Validation(format!("cannot read {}: {e}", a.model.display())))?;
    let model = import_model(&text).map_err(|e| Failure::Validation(format!("{}: {e}", a.model.display())))?;
    let options = SolveOptions { node_limit: a.node_limit, ..SolveOptions::default() };
    let sol = milp::solve(&model, &options).map_err(|e| Failure::Solver(e.to_string()))?;
    write(&a.solution, &export_solution(&model, &sol))?;
    println!("{}: {} after {} nodes, objective {}", a.model.display(), sol.status, sol.nodes, sol.objective);
    Ok(())
}

fn run(cmd: Cmd, raw: &[String]) -> Result<(), Failure> {
    match cmd {
        Cmd::Validate(a) => cmd_validate(&a),
        Cmd::Solve(a) => cmd_solve(&a, raw),
        Cmd::Study(a) => cmd_study(&a, raw),
        Cmd::Region(a) => cmd_region(&a, raw),
        Cmd::Rerun(a) => cmd_rerun(&a),
        Cmd::LpSolve(a) => cmd_lp_solve(&a),
    }
}

fn main() -> ExitCode {
    let raw: Vec<String> = std::env::args_os().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            // usage errors are validation failures; --help and --version succeed
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli.command, &raw) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
