use std::path::Path;
use std::process::{Command, Output};

use covforge::registry::{Construction, GeneratorRecord, Registry};
use covforge::{FormContext, Poly, SemiInvariant};

fn covforge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_covforge"))
        .args(args)
        .env_remove("COVFORGE_REGISTRY")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn ok(args: &[&str]) -> String {
    let o = covforge(args);
    assert!(
        o.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    stdout(&o)
}

fn poly(s: &str) -> Poly {
    s.trim().parse().unwrap()
}

#[test]
fn dim_values() {
    assert_eq!(ok(&["dim", "7", "14", "2"]).trim(), "30");
    assert_eq!(ok(&["dim", "7", "2", "15"]).trim(), "0");
    assert_eq!(ok(&["dim", "7", "25", "1"]).trim(), "114");
}

#[test]
fn dim_checks_arity() {
    let o = covforge(&["dim", "7", "14"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(o.stdout.is_empty());
}

#[test]
fn semitransvectants() {
    let out = ok(&["semitransvect", "--d", "7", "t", "t", "2"]);
    assert_eq!(poly(&out), poly("x2*t - x1^2"));
    let out = ok(&["semitransvect", "--d", "7", "t", "t", "4", "--oracle"]);
    assert_eq!(poly(&out), poly("x4*t - 4*x1*x3 + 3*x2^2"));
    assert_eq!(
        ok(&["semitransvect", "--d", "7", "t", "t", "3"]).trim(),
        "0"
    );
}

#[test]
fn semitransvect_rejects_non_semiinvariants() {
    let o = covforge(&["semitransvect", "--d", "7", "x1", "t", "1"]);
    assert_eq!(o.status.code(), Some(1));
    let o = covforge(&["semitransvect", "--d", "7", "t +* x1", "t", "1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("malformed"));
}

#[test]
fn transvectant_of_quadratics() {
    let f = "t*Y1^2 + 2*x1*Y1*Y2 + x2*Y2^2";
    assert_eq!(
        poly(&ok(&["transvect", f, f, "2"])),
        poly("2*t*x2 - 2*x1^2")
    );
}

#[test]
fn kappa_and_reconstruct_round_trip() {
    let form = ok(&["reconstruct", "--d", "7", "t"]);
    assert_eq!(
        poly(&form),
        poly(
            "t*Y1^7 + 7*x1*Y1^6*Y2 + 21*x2*Y1^5*Y2^2 + 35*x3*Y1^4*Y2^3 \
             + 35*x4*Y1^3*Y2^4 + 21*x5*Y1^2*Y2^5 + 7*x6*Y1*Y2^6 + x7*Y2^7"
        )
    );
    assert_eq!(poly(&ok(&["kappa", "--d", "7", form.trim()])), poly("t"));
}

#[test]
fn inputs_from_files() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("f.txt");
    std::fs::write(&f, "x2*t - x1^2\n").unwrap();
    let arg = format!("@{}", f.display());
    let out = ok(&["semitransvect", "--d", "7", &arg, "t", "0"]);
    assert_eq!(poly(&out), poly("x2*t^2 - x1^2*t"));
    let missing = format!("@{}", dir.path().join("none").display());
    assert_eq!(
        covforge(&["transvect", &missing, "t", "0"]).status.code(),
        Some(1)
    );
}

fn replay_to(path: &Path, max_degree: &str) {
    ok(&[
        "replay",
        "--max-degree",
        max_degree,
        "--out",
        path.to_str().unwrap(),
    ]);
}

#[test]
fn replay_table_verify_audit() {
    let dir = tempfile::tempdir().unwrap();
    let reg = dir.path().join("septic.reg");
    replay_to(&reg, "4");
    let r = reg.to_str().unwrap();

    let grid = ok(&["table", "--registry", r]);
    assert!(grid.contains("sum"));
    let records: serde_json::Value =
        serde_json::from_str(&ok(&["table", "--registry", r, "--format", "records"])).unwrap();
    let total: u64 = records
        .as_array()
        .unwrap()
        .iter()
        .map(|e| e["delta"].as_u64().unwrap())
        .sum();
    assert_eq!(total, 1 + 3 + 6 + 8);

    assert!(ok(&["verify", "--registry", r]).contains("through degree 4"));
    assert!(ok(&["verify", "--registry", r, "--recount"]).contains("through degree 4"));
    let audit = ok(&["audit", "--registry", r, "--check-orders"]);
    assert_eq!(audit.lines().count(), 17);
    assert!(audit.lines().all(|l| l.ends_with(": Ok")));

    // The registry path may also come from the environment.
    let o = Command::new(env!("CARGO_BIN_EXE_covforge"))
        .args(["table", "--expected"])
        .output()
        .unwrap();
    assert!(stdout(&o).contains("147"));
    let o = Command::new(env!("CARGO_BIN_EXE_covforge"))
        .args(["verify"])
        .env("COVFORGE_REGISTRY", r)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn verify_reports_differences() {
    let dir = tempfile::tempdir().unwrap();
    let reg = dir.path().join("septic.reg");
    replay_to(&reg, "2");
    // Drop dv2, the generator at (2,2).
    let text = std::fs::read_to_string(&reg).unwrap();
    let start = text.find("record dv2\n").unwrap();
    let end = start + text[start..].find("end\n").unwrap() + 4;
    std::fs::write(&reg, format!("{}{}", &text[..start], &text[end..])).unwrap();
    let o = covforge(&["verify", "--registry", reg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("(2,2): expected 1 found 0"));
}

#[test]
fn audit_flags_reducible_records() {
    let ctx = FormContext::new(7).unwrap();
    let mut reg = Registry::new(&ctx);
    let t = SemiInvariant::base(&ctx);
    let c = Construction::parse("[t,t]^0").unwrap();
    reg.push(GeneratorRecord::new("tsq", c, t.mul(&t))).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.reg");
    reg.save(&path).unwrap();
    let o = covforge(&["audit", "--registry", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("tsq (2,14): Reducible"));
}

#[test]
fn registry_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("junk.reg");
    std::fs::write(&path, "covforge-registry 99\n").unwrap();
    let o = covforge(&["table", "--registry", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(covforge(&["verify"]).status.code(), Some(1));
}

#[test]
fn discover_small_forms() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("quartic.reg");
    let out = ok(&[
        "discover",
        "4",
        "--max-degree",
        "6",
        "--registry",
        path.to_str().unwrap(),
    ]);
    assert!(out.contains("generators: 5"));
    let reg = Registry::load(&path).unwrap();
    assert_eq!(reg.len(), 5);
    assert_eq!(reg.complete_through(), 6);

    let out = ok(&[
        "discover",
        "3",
        "--max-degree",
        "6",
        "--modular",
        "--jobs",
        "1",
    ]);
    assert!(out.contains("generators: 4"));
}

#[test]
fn discover_reports_budget_exhaustion() {
    let o = covforge(&["discover", "7", "--max-degree", "3", "--budget", "0"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("budget exhausted at (2,"));
}
