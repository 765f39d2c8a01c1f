use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn spancert(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spancert"))
        .args(args)
        .current_dir(cwd)
        .env_remove("SPANCERT_SEED")
        .output()
        .unwrap()
}

fn stdout_json(o: &Output) -> serde_json::Value {
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).unwrap()
}

#[test]
fn geometry_of_the_square() {
    let dir = fixtures();
    let v = stdout_json(&spancert(&["geometry", "--dict", "square.json"], &dir));
    assert!((v["r0"].as_f64().unwrap() - 0.5f64.sqrt()).abs() < 1e-9);
    assert!((v["gamma0_deg"].as_f64().unwrap() - 45.0).abs() < 1e-9);
    assert_eq!(v["num_dual_vertices"], 4);
}

#[test]
fn certify_reports_every_condition() {
    let dir = fixtures();
    let v = stdout_json(&spancert(&["certify", "--dict", "eq311.json", "--signal", "b100.json"], &dir));
    let reports = v.as_array().or_else(|| v["reports"].as_array()).unwrap();
    let verdict = |id: &str| {
        reports.iter().find(|r| r["id"] == id).unwrap_or_else(|| panic!("{id} missing"))["verdict"].clone()
    };
    assert_eq!(verdict("IRC"), "fails");
    assert_eq!(verdict("T-IDC"), "holds");
    assert_eq!(verdict("UDC"), "fails");
}

#[test]
fn strict_mode_exits_one_when_a_condition_fails() {
    let dir = fixtures();
    let o = spancert(
        &["--strict", "certify", "--dict", "eq311.json", "--signal", "b100.json", "--conditions", "IRC"],
        &dir,
    );
    assert_eq!(o.status.code(), Some(1));
    let o = spancert(&["--strict", "certify", "--dict", "square.json", "--conditions", "UDC"], &dir);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn bad_input_exits_two() {
    let dir = fixtures();
    assert_eq!(spancert(&["geometry", "--dict", "missing.json"], &dir).status.code(), Some(2));
    assert_eq!(spancert(&["no-such-command"], &dir).status.code(), Some(2));
    let o = spancert(&["certify", "--dict", "eq311.json", "--conditions", "IRC"], &dir);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn generated_instances_are_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let args = [
        "gen", "--ambient-dim", "6", "--subspace-dim", "3", "--num-inside", "5", "--num-outside", "2", "--min-angle",
        "20", "--seed", "11", "--out", "a.json",
    ];
    spancert(&args, tmp.path());
    let first = std::fs::read(tmp.path().join("a.json")).unwrap();
    spancert(&args, tmp.path());
    assert_eq!(first, std::fs::read(tmp.path().join("a.json")).unwrap());
    let v = stdout_json(&spancert(&["geometry", "--dict", "a.json"], tmp.path()));
    assert!(v["r0"].as_f64().unwrap() > 0.0);
}

#[test]
fn seed_environment_variable_changes_the_sweep() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::copy(fixtures().join("small.toml"), tmp.path().join("small.toml")).unwrap();
    let run = |seed: Option<&str>| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_spancert"));
        c.args(["sweep", "--config", "small.toml", "--out", "s.csv"]).current_dir(tmp.path());
        match seed {
            Some(s) => c.env("SPANCERT_SEED", s),
            None => c.env_remove("SPANCERT_SEED"),
        };
        assert!(c.output().unwrap().status.success());
        std::fs::read(tmp.path().join("s.csv")).unwrap()
    };
    let base = run(None);
    assert_eq!(base, run(None));
    assert_ne!(base, run(Some("7")));
}
