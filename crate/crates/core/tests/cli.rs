use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn probint(args: &[&str], config: Option<&Path>, out: &Path) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_probint"));
    cmd.args(args).arg("--out").arg(out);
    if let Some(c) = config {
        cmd.arg("--config").arg(c);
    }
    cmd.output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

const SCALAR: &str = r#"
[problem]
kind = "scalar"
lambda = 1.0

[grid_family]
N = [8, 16, 32, 64]

[method]
method = "heun"

[noise]
kind = "centred_gaussian"
p = 1.0
c_xi = 0.5

[ensemble]
M = 200
seed = 5
"#;

#[test]
fn converge_writes_fixed_columns_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", SCALAR);
    let out = dir.path().join("out");
    let res = probint(&["converge"], Some(&cfg), &out);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let csv = fs::read_to_string(out.join("series.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "h,err_l2_maxnorm,err_l2_normmax,err_psi2,bound");
    assert_eq!(lines.count(), 4);
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["fingerprint"].as_str().unwrap().len(), 64);
    assert_eq!(report["report"]["series"].as_array().unwrap().len(), 4);
    assert!(report["report"]["slope"].as_f64().unwrap().is_finite());
    assert!(report["report"]["r2"].as_f64().is_some());
    assert_eq!(report["report"]["theoretical_slope"].as_f64().unwrap(), 1.5);
}

#[test]
fn seed_override_changes_results_and_fingerprint() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", SCALAR);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(probint(&["converge"], Some(&cfg), &a).status.success());
    assert!(probint(&["converge", "--seed", "6"], Some(&cfg), &b).status.success());
    assert_ne!(fs::read(a.join("series.csv")).unwrap(), fs::read(b.join("series.csv")).unwrap());
    let fa = fs::read_to_string(a.join("report.json")).unwrap();
    let fb = fs::read_to_string(b.join("report.json")).unwrap();
    let fp = |s: &str| serde_json::from_str::<serde_json::Value>(s).unwrap()["fingerprint"].clone();
    assert_ne!(fp(&fa), fp(&fb));
}

#[test]
fn invalid_grading_exits_one_naming_the_section() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", &SCALAR.replace("N = [8, 16, 32, 64]", "N = [8, 16]\ngamma = 0.5"));
    let res = probint(&["converge"], Some(&cfg), dir.path());
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stderr).contains("grid_family"));
}

#[test]
fn missing_or_malformed_config_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let res = probint(&["converge"], Some(&dir.path().join("absent.toml")), dir.path());
    assert_eq!(res.status.code(), Some(1));
    let cfg = write_config(dir.path(), "bad.toml", "[problem\nkind=");
    assert_eq!(probint(&["converge"], Some(&cfg), dir.path()).status.code(), Some(1));
    let cfg = write_config(dir.path(), "nomethod.toml", &SCALAR.replace("method = \"heun\"", "method = \"rk9\""));
    let res = probint(&["converge"], Some(&cfg), dir.path());
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stderr).contains("method"));
}

#[test]
fn bayes_sweep_csv() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"
[bayes]
lambda = [1.0]
h = 0.1
gamma0 = 1.0
gamma_obs = 1.0
gamma1 = 1.0
m0 = 0.0
theta = 1.0
deltas = [1.0, 0.1, 0.01, 0.0]
"#;
    let cfg = write_config(dir.path(), "b.toml", text);
    let res = probint(&["bayes"], Some(&cfg), dir.path());
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let csv = fs::read_to_string(dir.path().join("series.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows[0], "delta,err_exact_mean,err_tilde_mean_vs_biased_limit,min_hat_variance");
    assert_eq!(rows.len(), 5);
    let last: Vec<f64> = rows[4].split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(last[0], 0.0);
    assert!(last[1] < 1e-15);
    assert!((last[3] - 0.011_955_340_381).abs() < 1e-11);
}

#[test]
fn check_subcommands_succeed() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"
[noise]
p = 1.0
c_xi = 2.0
dim = 4

[gronwall]
sequences = 200

[noise_check]
samples = 50000
"#;
    let cfg = write_config(dir.path(), "k.toml", text);
    let res = probint(&["gronwall-check"], Some(&cfg), &dir.path().join("g"));
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let res = probint(&["noise-check"], Some(&cfg), &dir.path().join("n"));
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("n/report.json")).unwrap()).unwrap();
    assert_eq!(report["scaling"]["normalised"].as_array().unwrap().len(), 3);
}

#[test]
fn example_configs_parse() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for entry in fs::read_dir(root).unwrap() {
        let path = entry.unwrap().path();
        probint::cli::ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    }
}
