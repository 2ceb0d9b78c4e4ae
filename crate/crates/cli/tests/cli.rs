//! End-to-end runs of the `wavehom` binary on small configurations.

use std::path::Path;
use std::process::Command;

const SMALL: &str = r#"
ell = [1, 2]
eps_list = [0.0625, 0.03125]
t_list = [1.0, 2.0]
variant = "base"

[field]
name = "sine"
params = [2.0, 1.0]

[grid]
N = 64
M = 32
dt = 1e-4

[impulse]
R = 4.0
t0 = 0.0
width = 1.0

[out]
dir = "unused"
"#;

fn run(dir: &Path, args: &[&str]) -> (i32, String) {
    let cfg = dir.join("cfg.toml");
    std::fs::write(&cfg, SMALL).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_wavehom"))
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir)
        .args(args)
        .output()
        .unwrap();
    (out.status.code().unwrap(), String::from_utf8_lossy(&out.stderr).into_owned())
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

fn scratch(name: &str) -> std::path::PathBuf {
    let d = std::env::temp_dir().join(format!("wavehom-cli-{name}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    std::fs::create_dir_all(&d).unwrap();
    d
}

#[test]
fn correctors_table_carries_hash() {
    let dir = scratch("correctors");
    let (code, err) = run(&dir, &["correctors", "--hyperbolic"]);
    assert_eq!(code, 0, "{err}");
    let (header, rows) = read_csv(&dir.join("correctors.csv"));
    assert_eq!(header[0], "config_hash");
    let hash = &rows[0][0];
    assert_eq!(hash.len(), 12);
    assert!(rows.iter().all(|r| &r[0] == hash));
    let b1: f64 = rows.iter().find(|r| r[1] == "1").unwrap()[2].parse().unwrap();
    assert!((b1 - 3f64.sqrt()).abs() < 1e-8);
    let (_, checks) = read_csv(&dir.join("checks.csv"));
    assert!(checks.iter().all(|r| r[4] == "true"));
}

#[test]
fn expand_writes_field_and_summary() {
    let dir = scratch("expand");
    let (code, err) = run(&dir, &["expand", "--kind", "hyperbolic", "--ell", "2", "--eps", "0.0625", "--t", "2"]);
    assert_eq!(code, 0, "{err}");
    let (header, rows) = read_csv(&dir.join("expansion_summary.csv"));
    assert_eq!(header, ["config_hash", "kind", "ell", "eps", "t", "err_l2", "err_energy"]);
    let e: f64 = rows[0][6].parse().unwrap();
    assert!(e > 0.0 && e < 1e-1);
    assert!(dir.join("expansion_field.csv").exists());
}

#[test]
fn failing_check_sets_exit_code() {
    let dir = scratch("failing");
    // A structural tolerance far below round-off cannot be met.
    let cfg = SMALL.replace("[out]", "[tol]\nstructural = 1e-30\n\n[out]");
    std::fs::write(dir.join("strict.toml"), cfg).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_wavehom"))
        .args(["--config", dir.join("strict.toml").to_str().unwrap(), "--out", dir.to_str().unwrap(), "correctors", "--hyperbolic"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn bad_config_is_an_error() {
    let dir = scratch("bad");
    std::fs::write(dir.join("bad.toml"), "ell = [1]\nunknown_key = 3\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_wavehom"))
        .args(["--config", dir.join("bad.toml").to_str().unwrap(), "bloch"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}
