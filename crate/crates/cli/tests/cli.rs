use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

const ASYM: &str = r#"{"family":"one_d_asym1","left_exponent":1,"right_exponent":2,"n":12}"#;

fn gridgap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gridgap"))
        .args(args)
        .env_remove("GRIDGAP_OUT")
        .output()
        .unwrap()
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("gridgap-cli-{}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn build_gap_and_bound() {
    let out = gridgap(&["build", ASYM, "--edges"]);
    assert!(out.status.success());
    let v = json(&out);
    assert_eq!(v["edges"].as_array().unwrap().len(), 24);

    let out = gridgap(&["gap", ASYM, "--solver", "dense"]);
    assert!(out.status.success());
    let gap = json(&out)["spectral"]["gap"].as_f64().unwrap();

    let csv = scratch("edges.csv");
    let out = gridgap(&["bound", ASYM, "--edge-csv", csv.to_str().unwrap()]);
    assert!(out.status.success());
    let v = json(&out);
    assert!(v["bound"]["lower_bound"].as_f64().unwrap() <= gap);
    assert_eq!(v["certified"], true);
    assert_eq!(fs::read_to_string(&csv).unwrap().lines().count(), 25);
}

#[test]
fn mix_and_check() {
    let curve = scratch("curve.csv");
    let out = gridgap(&["mix", ASYM, "--curve-csv", curve.to_str().unwrap()]);
    assert!(out.status.success());
    assert_eq!(json(&out)["sandwich"], true);
    assert!(fs::read_to_string(&curve)
        .unwrap()
        .starts_with("t,tv_worst,sup_worst\n"));

    let out = gridgap(&[
        "check",
        r#"{"family":"flat_class","shape":{"kind":"power","scale":8,"power":1},"n":8}"#,
        "--seed",
        "3",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v = json(&out);
    assert_eq!(v["passed"], true);
    assert_eq!(v["class"]["violations"].as_array().unwrap().len(), 0);
}

#[test]
fn sweep_fit_and_exit_codes() {
    let cfg = scratch("sweep.toml");
    fs::write(
        &cfg,
        r#"
[[cell]]
name = "asym"
family = "one_d_asym1"
sizes = [16, 32, 64, 128]
left_exponent = 2
right_exponent = 2
n = "N"
"#,
    )
    .unwrap();
    let a = scratch("a.csv");
    let b = scratch("b.csv");
    let out = gridgap(&["sweep", cfg.to_str().unwrap(), "--out", a.to_str().unwrap()]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let out = Command::new(env!("CARGO_BIN_EXE_gridgap"))
        .args(["sweep", cfg.to_str().unwrap()])
        .env("GRIDGAP_OUT", &b)
        .env("GRIDGAP_THREADS", "2")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());

    let out = gridgap(&["fit", a.to_str().unwrap(), "--exponent", "-3"]);
    assert!(out.status.success());
    assert_eq!(json(&out)["fit"]["pass"], true);
    let out = gridgap(&["fit", a.to_str().unwrap(), "--exponent", "-2"]);
    assert_eq!(out.status.code(), Some(1));

    let out = gridgap(&["gap", r#"{"family":"valley"}"#]);
    assert_eq!(out.status.code(), Some(2));
    let out = gridgap(&["bound", ASYM, "--pair-cap", "10"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("budget"));
}
