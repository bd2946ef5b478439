use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_fsuc");

fn toy(file: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/toy").join(file)
}

fn fsuc(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env_remove("FSUC_EXTERNAL_SOLVER").output().expect("binary runs")
}

fn text(o: &Output) -> String {
    format!("{}{}", String::from_utf8_lossy(&o.stdout), String::from_utf8_lossy(&o.stderr))
}

fn summary(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path).unwrap().lines().map(|l| l.split(',').map(String::from).collect()).collect()
}

fn column(rows: &[Vec<String>], name: &str) -> usize {
    rows[0].iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name} in {:?}", rows[0]))
}

#[test]
fn validate_accepts_the_toy_system() {
    let o = fsuc(&["validate", toy("system.toml").to_str().unwrap(), "--study", toy("study.toml").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    assert!(text(&o).contains("6 units"));
}

#[test]
fn validate_names_the_broken_field() {
    let dir = tempfile::tempdir().unwrap();
    let broken = std::fs::read_to_string(toy("system.toml")).unwrap().replacen("t_d = 10.0", "t_d = -1.0", 1);
    assert!(broken.contains("t_d = -1.0"), "toy system no longer sets t_d = 10.0");
    let path = dir.path().join("system.toml");
    std::fs::write(&path, broken).unwrap();
    std::fs::copy(toy("net_demand.csv"), dir.path().join("net_demand.csv")).unwrap();
    let o = fsuc(&["validate", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(text(&o).contains("t_d"), "{}", text(&o));
}

#[test]
fn validate_reports_a_missing_file() {
    let o = fsuc(&["validate", "/nonexistent/system.toml"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(text(&o).contains("/nonexistent/system.toml"));
}

#[test]
fn usage_errors_exit_one_and_help_exits_zero() {
    assert_eq!(fsuc(&["solve"]).status.code(), Some(1));
    assert_eq!(fsuc(&["--help"]).status.code(), Some(0));
    assert_eq!(fsuc(&["region", "--loss", "-5", "--out", "/tmp/never"]).status.code(), Some(1));
}

#[test]
fn solve_writes_a_verified_schedule() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = fsuc(&["solve", "--system", toy("system.toml").to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    for f in ["trajectory.csv", "nodes.csv", "verification.csv", "summary.json", "manifest.json"] {
        assert!(out.join(f).exists(), "missing {f}");
    }
    let s = summary(&out);
    assert_eq!(s["periods"], 24);
    assert_eq!(s["verification"]["insecure"], 0);
    let rows = csv_rows(&out.join("verification.csv"));
    let secure = column(&rows, "secure");
    assert!(rows[1..].iter().all(|r| r[secure] == "true"));
}

#[test]
fn unconstrained_run_reports_insecure_nodes_without_failing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("off");
    let o = fsuc(&[
        "solve",
        "--system",
        toy("system.toml").to_str().unwrap(),
        "--no-frequency",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    assert!(summary(&out)["verification"]["insecure"].as_u64().unwrap() > 0);
}

#[test]
fn optimised_first_window_costs_no_more_than_fixed() {
    let dir = tempfile::tempdir().unwrap();
    let objective = |mode: &str| {
        let out = dir.path().join(mode);
        let o = fsuc(&[
            "solve",
            "--system",
            toy("system.toml").to_str().unwrap(),
            "--periods",
            "2",
            "--mode",
            mode,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", text(&o));
        summary(&out)["windows"][0]["objective"].as_f64().unwrap()
    };
    let (opt, fixed) = (objective("optimised"), objective("fixed"));
    assert!(opt <= fixed * (1.0 + 1e-6), "optimised {opt} > fixed {fixed}");
}

#[test]
fn study_table_has_one_row_per_cell() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("study");
    let o = fsuc(&["study", toy("study.toml").to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    let rows = csv_rows(&out.join("study.csv"));
    assert_eq!(rows.len(), 1 + 8);
    let (wind, mode, cfs, em) = (
        column(&rows, "wind_capacity"),
        column(&rows, "mode"),
        column(&rows, "cost_of_frequency_services"),
        column(&rows, "emissions"),
    );
    let num = |r: &Vec<String>, c: usize| r[c].parse::<f64>().unwrap();
    for r in &rows[1..] {
        assert!(num(r, cfs) >= -1e-6 * 1e7, "negative CFS in {r:?}");
    }
    let top = rows[1..].iter().map(|r| num(r, wind)).fold(0.0, f64::max);
    let at = |m: &str| rows[1..].iter().find(|r| num(r, wind) == top && r[mode] == m).map(|r| num(r, em)).unwrap();
    assert!(at("optimised") <= at("fixed"));
    assert!(out.join("trajectory_20000_optimised_on.csv").exists());
}

#[test]
fn region_curves_order_by_loss_and_start_at_the_undamped_point() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("region");
    let o = fsuc(&["region", "--loss", "1320", "--loss", "1800", "--points", "5", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    let rows = csv_rows(&out.join("region.csv"));
    let (loss, d, exact, linear) = (
        column(&rows, "loss_mw"),
        column(&rows, "damping_mw_per_hz"),
        column(&rows, "exact_hr_mw2s"),
        column(&rows, "linear_hr_mw2s"),
    );
    let curve = |p: &str| -> Vec<(f64, f64, f64)> {
        rows[1..]
            .iter()
            .filter(|r| r[loss] == p)
            .map(|r| (r[d].parse().unwrap(), r[exact].parse().unwrap(), r[linear].parse().unwrap()))
            .collect()
    };
    let (small, large) = (curve("1320"), curve("1800"));
    assert_eq!(small.len(), 6);
    assert_eq!(large.len(), 6);
    for (s, l) in small.iter().zip(&large) {
        assert_eq!(s.0, l.0);
        assert!(l.1 > s.1 && l.2 > s.2);
        assert!(s.2 >= s.1 && l.2 >= l.1);
    }
    // zero damping: exact and linear meet at P²·T_d / (4·Δf)
    let expected = 1800.0f64.powi(2) * 10.0 / (4.0 * 0.8);
    assert_eq!(large[0].0, 0.0);
    assert!((large[0].1 - expected).abs() <= 1e-9 * expected);
    assert!((large[0].2 - expected).abs() <= 1e-9 * expected);
}

#[test]
fn rerun_reproduces_outputs_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let o = fsuc(&[
        "solve",
        "--system",
        toy("system.toml").to_str().unwrap(),
        "--periods",
        "6",
        "--mode",
        "fixed",
        "--out",
        a.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    let o = fsuc(&["rerun", a.join("manifest.json").to_str().unwrap(), "--out", b.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    for f in ["trajectory.csv", "nodes.csv", "verification.csv", "summary.json"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f} differs");
    }
}

#[cfg(unix)]
#[test]
fn external_solver_round_trip_matches_builtin() {
    use std::os::unix::fs::PermissionsExt;
    let dir = tempfile::tempdir().unwrap();
    let script = dir.path().join("solver.sh");
    std::fs::write(&script, format!("#!/bin/sh\nexec '{BIN}' lp-solve \"$1\" \"$2\"\n")).unwrap();
    std::fs::set_permissions(&script, std::fs::Permissions::from_mode(0o755)).unwrap();
    let run = |name: &str, solver: Option<&Path>| {
        let out = dir.path().join(name);
        let mut cmd = Command::new(BIN);
        cmd.args(["solve", "--system", toy("system.toml").to_str().unwrap(), "--periods", "3", "--out"])
            .arg(&out)
            .env_remove("FSUC_EXTERNAL_SOLVER");
        if let Some(s) = solver {
            cmd.env("FSUC_EXTERNAL_SOLVER", s);
        }
        let o = cmd.output().unwrap();
        (o, out)
    };
    let (o, builtin) = run("builtin", None);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    let (o, external) = run("external", Some(&script));
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    assert!(external.join("lp").read_dir().unwrap().count() >= 2 * 3);
    let cost = |d: &Path| summary(d)["total_cost"].as_f64().unwrap();
    let (x, y) = (cost(&builtin), cost(&external));
    assert!((x - y).abs() <= 1e-9 * x.abs(), "builtin {x} vs external {y}");

    let (o, _) = run("false", Some(Path::new("/bin/false")));
    assert_eq!(o.status.code(), Some(2));
    assert!(text(&o).contains(".lp"), "{}", text(&o));
}

#[test]
fn node_limit_exports_the_failing_window() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("limit");
    let o = fsuc(&[
        "solve",
        "--system",
        toy("system.toml").to_str().unwrap(),
        "--node-limit",
        "1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", text(&o));
    let lp = out.join("failed_window_0000.lp");
    assert!(text(&o).contains(lp.to_str().unwrap()));
    let reload = fsuc(&["lp-solve", lp.to_str().unwrap(), dir.path().join("sol").to_str().unwrap()]);
    assert_eq!(reload.status.code(), Some(0), "{}", text(&reload));
    assert!(std::fs::read_to_string(dir.path().join("sol")).unwrap().starts_with("status optimal"));
}
