use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use funnel_cli::{parse_grid, run_scenario, sweep};
use funnel_core::scenario::builtin;

fn funnel(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_funnel")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn run_writes_resampled_csv_and_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let res = funnel(&["run", "moc-r3", "--out", path(&out), "--quiet"]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    assert!(res.stdout.is_empty());

    let csv = fs::read_to_string(out.join("trajectory.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows[0], "t,y,y',y'',e,e2,e3,psi,psi_des,k,v,u,kappa");
    assert_eq!(rows.len() - 1, 20001);
    assert!(rows[1].starts_with("0.0000000000000000e0,"));
    assert!(rows[20001].starts_with("2.0000000000000000e1,"));
    for f in ["metrics.json", "report.txt", "scenario.toml"] {
        assert!(out.join(f).exists(), "{f}");
    }

    let verify = funnel(&["verify", path(&out.join("trajectory.csv")), path(&out.join("scenario.toml"))]);
    assert_eq!(code(&verify), 0);
    let stored = String::from_utf8(verify.stdout).unwrap();
    let simulated = fs::read_to_string(out.join("report.txt")).unwrap();
    let section = |s: &str| s[s.find("[metrics]").unwrap()..].to_string();
    assert_eq!(section(&stored), section(&simulated));
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        assert_eq!(code(&funnel(&["run", "integrator-chain-r2", "--out", path(d), "--quiet"])), 0);
    }
    for f in ["report.txt", "metrics.json", "trajectory.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn edited_psi_fails_verification() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    assert_eq!(code(&funnel(&["run", "moc-r3", "--out", path(&out), "--quiet"])), 0);
    let csv_path = out.join("trajectory.csv");
    let text = fs::read_to_string(&csv_path).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let psi_col = lines[0].split(',').position(|c| c == "psi").unwrap();
    let mut fields: Vec<String> = lines[5001].split(',').map(String::from).collect();
    fields[psi_col] = format!("{:.16e}", 0.05);
    lines[5001] = fields.join(",");
    fs::write(&csv_path, lines.join("\n") + "\n").unwrap();

    let res = funnel(&["verify", path(&csv_path), "moc-r3"]);
    assert_eq!(code(&res), 1);
    let report = String::from_utf8(res.stdout).unwrap();
    assert!(report.contains("FAIL funnel_lower_bound"), "{report}");
}

#[test]
fn malformed_and_empty_inputs_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "name = \"x\"\n[plant\nkind = 3").unwrap();
    assert_eq!(code(&funnel(&["run", path(&bad)])), 2);

    let unknown = dir.path().join("unknown.toml");
    let text = builtin("moc-r3").unwrap().to_toml() + "\nextra = 1\n";
    fs::write(&unknown, text).unwrap();
    assert_eq!(code(&funnel(&["run", path(&unknown)])), 2);

    let empty = dir.path().join("empty.csv");
    fs::write(&empty, "").unwrap();
    assert_eq!(code(&funnel(&["verify", path(&empty), "moc-r3"])), 2);

    let wrong = dir.path().join("wrong.csv");
    fs::write(&wrong, "t,y,e,psi,psi_des,k,v,u,kappa\n0,0,0,1,1,1,0,0,0\n").unwrap();
    assert_eq!(code(&funnel(&["verify", path(&wrong), "moc-r3"])), 2);
}

#[test]
fn psi0_below_equilibrium_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let mut sc = builtin("moc-r3").unwrap();
    sc.controller.psi0 = 0.05;
    let file = dir.path().join("low.toml");
    fs::write(&file, sc.to_toml()).unwrap();
    let res = funnel(&["run", path(&file)]);
    assert_eq!(code(&res), 3);
    assert!(String::from_utf8_lossy(&res.stderr).contains("psi0 ≤ beta/alpha"));
}

#[test]
fn sweep_over_saturation_level() {
    let sc = builtin("moc-r3").unwrap();
    let axes = parse_grid("M=4,8,16").unwrap();
    let results = sweep(&sc, &axes, None);
    assert_eq!(results.len(), 3);
    let duty: Vec<f64> = results.iter().map(|r| r.metrics.as_ref().unwrap().sat_duty).collect();
    assert!(duty.windows(2).all(|w| w[1] <= w[0]), "{duty:?}");
    for (r, level) in results.iter().zip([4.0, 8.0, 16.0]) {
        let mut single = sc.clone();
        single.saturation.level = level;
        let rep = run_scenario(&single, None).unwrap();
        assert_eq!(r.metrics.as_ref(), Some(&rep.metrics));
    }
}

#[test]
fn sweep_command_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep");
    assert_eq!(code(&funnel(&["sweep", "moc-r3", "--grid", "", "--quiet"])), 0);

    let res = funnel(&["sweep", "integrator-chain-r1", "--grid", "psi0=0.01,2", "--out", path(&out), "--quiet"]);
    assert_eq!(code(&res), 3);
    let table = fs::read_to_string(out.join("summary.tsv")).unwrap();
    assert_eq!(table.lines().count(), 3);
    assert!(out.join("point-001").join("trajectory.csv").exists());
    assert!(!out.join("point-000").exists());
}

#[test]
fn builtin_listing() {
    let res = funnel(&["builtin"]);
    assert_eq!(code(&res), 0);
    assert!(String::from_utf8(res.stdout).unwrap().lines().any(|l| l == "moc-r3"));
    let res = funnel(&["builtin", "moc-r3"]);
    assert!(String::from_utf8(res.stdout).unwrap().contains("psi0 = 3.1"));
}
