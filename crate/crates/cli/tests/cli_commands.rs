use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_robin-cde");

const SMOKE: &str = r#"
[params]
R = 1.0
D = 0.1
v = 1.0
ell = 1.0
t_end = 2.0

[g]
kind = "constant"
value = 1.0
"#;

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn run(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(BIN)
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .arg("--quiet")
        .output()
        .unwrap()
}

fn column(path: &Path, name: &str) -> Vec<f64> {
    let mut reader = csv::Reader::from_path(path).unwrap();
    let idx = reader.headers().unwrap().iter().position(|h| h == name).unwrap();
    reader.records().map(|r| r.unwrap()[idx].parse().unwrap()).collect()
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

fn assert_ok(out: &Output) {
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn zero_data_gives_zero_csvs() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "zero.toml",
        "[params]\nR = 1.3\nD = 0.4\nv = 0.7\nmu = 0.2\nell = 1.5\nt_end = 3.0\n",
    );
    let out = tmp.path().join("out");
    assert_ok(&run(&["solve"], &cfg, &out));
    assert!(column(&out.join("profile.csv"), "C").iter().all(|&c| c == 0.0));
    for name in ["C_exit", "C_flux_exit"] {
        assert!(column(&out.join("breakthrough.csv"), name).iter().all(|&c| c == 0.0));
    }
}

#[test]
fn zero_data_verifies_trivially() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "zero.toml", "[params]\nR = 1.0\nD = 0.3\nv = 1.0\nell = 1.0\nt_end = 1.0\n");
    let out = tmp.path().join("out");
    assert_ok(&run(&["verify"], &cfg, &out));
    let m = manifest(&out);
    assert_eq!(m["results"]["balance_relative_integrated"], 0.0);
    assert_eq!(m["results"]["fd_relative_l2"], 0.0);
}

#[test]
fn equilibrium_config_stays_at_gamma_over_mu() {
    let tmp = TempDir::new().unwrap();
    let text = r#"
        [params]
        R = 1.5
        D = 0.2
        v = 0.8
        mu = 0.1
        gamma = 0.3
        ell = 2.0
        t_end = 5.0
        [phi]
        kind = "constant"
        value = 3.0
        [g]
        kind = "constant"
        value = 3.0
        [policy]
        n_max = 800
    "#;
    let cfg = write_config(tmp.path(), "eq.toml", text);
    let out = tmp.path().join("out");
    assert_ok(&run(&["solve"], &cfg, &out));
    let worst = |v: Vec<f64>| v.iter().map(|c| (c - 3.0).abs()).fold(0.0, f64::max);
    assert!(worst(column(&out.join("profile.csv"), "C")) <= 1e-6);
    assert!(worst(column(&out.join("breakthrough.csv"), "C_exit")) <= 1e-6);
    assert!(worst(column(&out.join("breakthrough.csv"), "C_flux_exit")) <= 1e-6);
}

#[test]
fn step_breakthrough_is_monotone() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "smoke.toml", SMOKE);
    let out = tmp.path().join("out");
    assert_ok(&run(&["verify"], &cfg, &out));
    assert_ok(&run(&["solve"], &cfg, &out));
    let tail = manifest(&out)["results"]["max_tail"].as_f64().unwrap();
    for name in ["C_exit", "C_flux_exit"] {
        let v = column(&out.join("breakthrough.csv"), name);
        for w in v.windows(2) {
            assert!(w[1] >= w[0] - tail, "{name}: {} then {}", w[0], w[1]);
        }
        assert!(v[v.len() - 1] > 0.9);
    }
    // The oracle rises monotonically at the exit as well.
    let xs = column(&out.join("fd_compare.csv"), "x");
    let fd = column(&out.join("fd_compare.csv"), "C_fd");
    let exit: Vec<f64> = xs.iter().zip(&fd).filter(|(x, _)| **x == 1.0).map(|(_, c)| *c).collect();
    assert_eq!(exit.len(), 101);
    assert!(exit.windows(2).all(|w| w[1] >= w[0]));
}

#[test]
fn smoke_test_verifies() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "smoke.toml", SMOKE);
    let out = tmp.path().join("out");
    assert_ok(&run(&["verify"], &cfg, &out));
    let r = &manifest(&out)["results"];
    assert!(r["balance_relative_integrated"].as_f64().unwrap() <= 1e-4);
    assert!(r["fd_relative_l2"].as_f64().unwrap() <= 1e-3);
    assert_eq!(column(&out.join("balance.csv"), "t").len(), 100);
}

#[test]
fn truncated_run_fails_and_reports_the_tail() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "smoke.toml", SMOKE);
    let out = tmp.path().join("out");
    let res = Command::new(BIN)
        .args(["verify", "--modes", "2", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(res.status.code(), Some(3));
    let stdout = String::from_utf8_lossy(&res.stdout);
    let stderr = String::from_utf8_lossy(&res.stderr);
    assert!(stdout.contains("FAIL finite differences"), "{stdout}");
    assert!(stderr.contains("tail bound"), "{stderr}");
    let r = &manifest(&out)["results"];
    assert!(r["solve"]["max_tail"].as_f64().unwrap() > r["fd_tol"].as_f64().unwrap());
}

#[test]
fn eigenvalue_table_is_bracketed() {
    let tmp = TempDir::new().unwrap();
    let text = format!("{SMOKE}\n[compare]\neigen_rows = 30\n");
    let cfg = write_config(tmp.path(), "cmp.toml", &text);
    let out = tmp.path().join("out");
    assert_ok(&run(&["compare-danckwerts"], &cfg, &out));
    let path = out.join("eigenvalues.csv");
    let (lo, d, hi) = (column(&path, "lower"), column(&path, "lambda_D"), column(&path, "upper"));
    assert_eq!(d.len(), 30);
    for i in 0..30 {
        assert!(lo[i] < d[i] && d[i] < hi[i], "row {i}");
    }
    assert!(fs::read_to_string(&path).unwrap().lines().skip(1).all(|l| l.ends_with(",true")));
    assert!(manifest(&out)["results"]["bound"].is_null());
}

#[test]
fn danckwerts_exit_drains_without_production() {
    let tmp = TempDir::new().unwrap();
    let text = r#"
        [params]
        R = 1.0
        D = 0.5
        v = 1.0
        mu = 0.05
        ell = 1.0
        t_end = 20.0
        [phi]
        kind = "constant"
        value = 1.0
    "#;
    let cfg = write_config(tmp.path(), "drain.toml", text);
    let out = tmp.path().join("out");
    assert_ok(&run(&["compare-danckwerts"], &cfg, &out));
    let cd = column(&out.join("compare.csv"), "C_exit_danckwerts");
    assert!(cd[cd.len() - 1].abs() < 1e-3, "{}", cd[cd.len() - 1]);
    assert!(cd[50..].windows(2).all(|w| w[1].abs() <= w[0].abs()));
    assert_eq!(manifest(&out)["results"]["bound"], 0.0);
}

#[test]
fn single_segment_chain_matches_solve() {
    let tmp = TempDir::new().unwrap();
    let solve_cfg = write_config(
        tmp.path(),
        "one.toml",
        &SMOKE.replace("value = 1.0", "value = 1.0\n[exit]\nkind = \"computed\""),
    );
    let chain_cfg = write_config(
        tmp.path(),
        "chain.toml",
        r#"
        [g]
        kind = "constant"
        value = 1.0
        [chain]
        t_end = 2.0
        [[segment]]
        R = 1.0
        D = 0.1
        v = 1.0
        ell = 1.0
        "#,
    );
    let (a, b) = (tmp.path().join("solve"), tmp.path().join("chain"));
    assert_ok(&run(&["solve"], &solve_cfg, &a));
    assert_ok(&run(&["chain"], &chain_cfg, &b));
    for f in ["profile.csv", "breakthrough.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join("segment-1").join(f)).unwrap(), "{f}");
    }
    let flux = column(&a.join("breakthrough.csv"), "C_flux_exit");
    assert_eq!(flux, column(&b.join("chain_breakthrough.csv"), "C_flux_exit_1"));
}

#[test]
fn zero_input_chain_is_zero() {
    let tmp = TempDir::new().unwrap();
    let seg = "[[segment]]\nR = 1.2\nD = 0.2\nv = 0.9\nmu = 0.1\nell = 0.7\n";
    let cfg = write_config(tmp.path(), "chain.toml", &format!("[chain]\nt_end = 1.5\n{seg}{seg}{seg}"));
    let out = tmp.path().join("out");
    assert_ok(&run(&["chain"], &cfg, &out));
    let text = fs::read_to_string(out.join("chain_breakthrough.csv")).unwrap();
    assert!(text.lines().next().unwrap().ends_with("C_flux_exit_3"));
    for i in 1..=3 {
        assert!(column(&out.join("chain_breakthrough.csv"), &format!("C_flux_exit_{i}"))
            .iter()
            .all(|&c| c == 0.0));
        let dir = out.join(format!("segment-{i}"));
        assert!(column(&dir.join("profile.csv"), "C").iter().all(|&c| c == 0.0));
    }
    assert_eq!(manifest(&out)["results"]["segments"].as_array().unwrap().len(), 3);
}

#[test]
fn config_errors_exit_with_two() {
    let tmp = TempDir::new().unwrap();
    fs::write(tmp.path().join("bad.csv"), "t,g\n0,0\n1,1\n0.5,2\n").unwrap();
    let cases = [
        ("missing.toml", None, "cannot read"),
        ("syntax.toml", Some("[params]\nR = \n"), "line 2"),
        ("unknown.toml", Some(&*format!("{SMOKE}\n[policy]\nmodez = 3\n")), "modez"),
        ("negative.toml", Some(&*SMOKE.replace("D = 0.1", "D = -0.1")), "D"),
        (
            "table.toml",
            Some(&*SMOKE.replace("kind = \"constant\"\nvalue = 1.0", "kind = \"table\"\nfile = \"bad.csv\"")),
            "strictly increasing",
        ),
        (
            "nest.toml",
            Some("[chain]\nt_end = 2.0\n[[segment]]\nR = 1.0\nD = 0.1\nv = 1.0\nell = 1.0\nt_end = 1.0\n[[segment]]\nR = 1.0\nD = 0.1\nv = 1.0\nell = 1.0\n"),
            "upstream horizon",
        ),
    ];
    for (name, text, needle) in cases {
        let path = tmp.path().join(name);
        if let Some(t) = text {
            fs::write(&path, t).unwrap();
        }
        let res = run(&["solve"], &path, &tmp.path().join("out"));
        let stderr = String::from_utf8_lossy(&res.stderr);
        assert_eq!(res.status.code(), Some(2), "{name}: {stderr}");
        assert!(stderr.contains(needle), "{name}: {stderr}");
    }
}

#[test]
fn usage_errors_exit_with_one() {
    let res = Command::new(BIN).arg("solve").output().unwrap();
    assert_eq!(res.status.code(), Some(1));
    let res = Command::new(BIN).arg("frobnicate").output().unwrap();
    assert_eq!(res.status.code(), Some(1));
    let res = Command::new(BIN).args(["solve", "--nx", "many"]).output().unwrap();
    assert_eq!(res.status.code(), Some(1));
    let res = Command::new(BIN).arg("--help").output().unwrap();
    assert_eq!(res.status.code(), Some(0));
}

#[test]
fn manifest_records_the_run() {
    let tmp = TempDir::new().unwrap();
    fs::write(tmp.path().join("g.csv"), "t,g\n0,0\n0.5,1\n2,1\n").unwrap();
    let text = SMOKE.replace("kind = \"constant\"\nvalue = 1.0", "kind = \"table\"\nfile = \"g.csv\"");
    let cfg = write_config(tmp.path(), "t.toml", &text);
    let out = tmp.path().join("out");
    let res = Command::new(BIN)
        .args(["solve", "--quiet", "--nx", "21", "--nt", "31", "--tail-tol", "1e-6", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_ok(&res);
    assert!(res.stdout.is_empty());
    let m = manifest(&out);
    assert_eq!(m["config"]["grid"]["nx"], 21);
    assert_eq!(m["config"]["grid"]["nt"], 31);
    assert_eq!(m["config"]["policy"]["tail_tol"], 1e-6);
    assert_eq!(m["config"]["policy"]["n_max"], 200);
    assert_eq!(m["config"]["column"]["D"], 0.1);
    assert_eq!(m["tables"][0]["x"], serde_json::json!([0.0, 0.5, 2.0]));
    assert!(!m["git_rev"].as_str().unwrap().is_empty());
    assert!(m["version"].is_string());
    assert!(m["results"]["modes_max"].as_u64().unwrap() > 0);
    assert_eq!(column(&out.join("profile.csv"), "C").len(), 21 * 31);
}
