use std::f64::consts::FRAC_PI_2;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const TAN: &str = r#"
n = 2
seed = 9

[signal]
kind = "constant"
a = [[1, 0], [0, 0], [-1, 0]]

[integration]
t1 = 2.0
samples = 41
"#;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wei-norman")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn write(dir: &TempDir, name: &str, text: &str) -> String {
    let p = dir.path().join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

fn path(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).to_str().unwrap().to_owned()
}

#[test]
fn derive_prints_the_sl2_system() {
    let out = run(&["derive", "--n", "2"]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout(&out), "u1' = a1 + 2 a2 u1 - a3 u1^2\nu2' = a2 - a3 u1\nu3' = a3 e^(2 u2)\n");
}

#[test]
fn derive_writes_json_that_parses_back() {
    let dir = TempDir::new().unwrap();
    let out_path = path(&dir, "sl3.json");
    let out = run(&["derive", "--n", "3", "--format", "json", "--ordering", "descending", "--out", &out_path]);
    assert_eq!(code(&out), 0);
    let schedule = wei_norman::parse_schedule(&fs::read_to_string(&out_path).unwrap()).unwrap();
    assert_eq!(schedule.num_unknowns(), 8);
}

#[test]
fn derive_rejects_invalid_input() {
    assert_eq!(code(&run(&["derive", "--n", "1"])), 1);
    assert_eq!(code(&run(&["derive", "--n", "2", "--format", "xml"])), 1);
    assert_eq!(code(&run(&["derive", "--n", "2", "--out", "/nonexistent/dir/out.txt"])), 1);
}

#[test]
fn integrate_reanchors_through_the_tangent_escape() {
    let dir = TempDir::new().unwrap();
    let config = write(&dir, "tan.toml", TAN);
    let traj_path = path(&dir, "tan.json");
    let out = run(&["integrate", "--config", &config, "--out", &traj_path, "--check-oracle"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("oracle max"));
    let traj = wei_norman::Trajectory::from_json(&fs::read_to_string(&traj_path).unwrap()).unwrap();
    assert_eq!(traj.seed, Some(9));
    assert_eq!(traj.samples.len(), 41);
    assert_eq!(traj.singularities.len(), 1);
    assert!((traj.singularities[0].time - FRAC_PI_2).abs() < 1e-3);
}

#[test]
fn integrate_without_reanchoring_reports_the_breakdown() {
    let dir = TempDir::new().unwrap();
    let config = write(&dir, "tan.toml", TAN);
    let out = run(&["integrate", "--config", &config, "--out", &path(&dir, "t.json"), "--no-reanchor"]);
    assert_eq!(code(&out), 2);
    let report: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!((report["time"].as_f64().unwrap() - FRAC_PI_2).abs() < 1e-3);
    assert_eq!(report["action"], "abort");
}

#[test]
fn integrate_reads_json_configs_and_signal_files() {
    let dir = TempDir::new().unwrap();
    write(&dir, "signal.json", r#"{"kind": "random-hamiltonian", "seed": 4}"#);
    let config = write(
        &dir,
        "run.json",
        r#"{"n": 3, "signal": {"file": "signal.json"}, "output": {"path": "out.csv", "oracle_path": "oracle.json"}}"#,
    );
    let out = run(&["integrate", "--config", &config]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("out.csv")).unwrap();
    assert!(csv.starts_with("t,re_u1,im_u1,"));
    assert_eq!(csv.lines().count(), 102);
    assert!(Path::new(&path(&dir, "oracle.json")).exists());
}

#[test]
fn integrate_rejects_bad_configs() {
    let dir = TempDir::new().unwrap();
    let bad = write(&dir, "bad.toml", "n = 2\n[signal]\nkind = \"constant\"\na = [[1, 0]]\n");
    assert_eq!(code(&run(&["integrate", "--config", &bad])), 1);
    let unknown = write(&dir, "unknown.toml", &format!("{TAN}\n[extra]\nx = 1\n"));
    assert_eq!(code(&run(&["integrate", "--config", &unknown])), 1);
    assert_eq!(code(&run(&["integrate", "--config", &path(&dir, "missing.toml")])), 1);
    let config = write(&dir, "tan.toml", TAN);
    assert_eq!(code(&run(&["integrate", "--config", &config, "--tol-abs", "0"])), 1);
}

#[test]
fn verify_passes_and_fails_with_documented_codes() {
    let dir = TempDir::new().unwrap();
    let report_path = path(&dir, "report.json");
    let out = run(&["verify", "--n", "2..3", "--trials", "2", "--seed", "3", "--out", &report_path]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report_path).unwrap()).unwrap();
    assert_eq!(report["seed"], 3);
    let corrupt = run(&["verify", "--n", "3", "--trials", "1", "--corrupt-ordering"]);
    assert_eq!(code(&corrupt), 3);
    assert!(stdout(&corrupt).contains("FAIL lemmas N=3"));
    assert_eq!(code(&run(&["verify", "--n", "1..3"])), 1);
}

#[test]
fn compare_reports_metrics_and_rejects_disjoint_ranges() {
    let dir = TempDir::new().unwrap();
    let a = write(&dir, "a.toml", &format!("{TAN}\n[output]\npath = \"a.json\"\n"));
    let b = write(&dir, "b.toml", &format!("{}\n[output]\npath = \"b.json\"\n", TAN.replace("t1 = 2.0", "t0 = 3.0\nt1 = 4.0")));
    assert_eq!(code(&run(&["integrate", "--config", &a])), 0);
    let out = run(&["compare", &path(&dir, "a.json"), &path(&dir, "a.json")]);
    assert_eq!(code(&out), 0);
    let metrics: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(metrics["max_frobenius"], 0.0);
    assert_eq!(metrics["matched"], 41);
    assert_eq!(code(&run(&["integrate", "--config", &b])), 0);
    assert_eq!(code(&run(&["compare", &path(&dir, "a.json"), &path(&dir, "b.json")])), 1);
}
