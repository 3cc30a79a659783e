mod common;

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use common::*;
use tmcurv::cli::{verify_scenario, write_atomic, Report, Scenario};

fn tmcurv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tmcurv"))
        .args(args)
        .env("TMCURV_THREADS", "2")
        .output()
        .unwrap()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

fn strip_timing(text: &str) -> String {
    let mut r = Report::from_json(text).unwrap();
    r.timing = None;
    r.to_json()
}

/// Rewrites the golden files when `UPDATE_GOLDEN` is set.
#[test]
fn golden_files() {
    let (sc, digest) = Scenario::load(&golden_dir().join("golden_flat.json")).unwrap();
    let mut report = verify_scenario(&sc, digest, None).unwrap();
    report.timing = None;
    let json_path = golden_dir().join("golden_flat.report.json");
    let csv_path = golden_dir().join("golden_flat.report.csv");
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::create_dir_all(golden_dir()).unwrap();
        write_atomic(&json_path, report.to_json().as_bytes()).unwrap();
        write_atomic(&csv_path, report.to_csv().as_bytes()).unwrap();
    }
    assert_eq!(std::fs::read_to_string(&json_path).unwrap(), report.to_json());
    assert_eq!(std::fs::read_to_string(&csv_path).unwrap(), report.to_csv());
}

#[test]
fn verify_flat_exits_zero_with_zero_residuals() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let o = tmcurv(&["verify", "--scenario", path_str(&scenario_path("sasaki_flat")), "--out", path_str(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = Report::from_json(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(r.point_count, 100);
    assert_eq!(r.seed, 42);
    assert_eq!(r.scenario_digest.len(), 64);
    for c in r.checks.iter().filter(|c| !c.check_id.starts_with("invariant.") && !c.check_id.starts_with("oracle.")) {
        assert_eq!(c.max_abs, 0.0, "{}", c.check_id);
    }
}

#[test]
fn verify_sphere_passes() {
    let o = tmcurv(&["verify", "--scenario", path_str(&scenario_path("sasaki_sphere"))]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = Report::from_json(std::str::from_utf8(&o.stdout).unwrap()).unwrap();
    for s in r.summaries.iter().filter(|s| s.check_id.starts_with("curvature.")) {
        assert!(s.max_rel <= 1e-8, "{} {}", s.check_id, s.max_rel);
    }
}

#[test]
fn seed_flag_overrides_scenario_seed() {
    let p = scenario_path("sasaki_flat");
    let a = tmcurv(&["verify", "--scenario", path_str(&p), "--seed", "7"]);
    let b = tmcurv(&["verify", "--scenario", path_str(&p), "--seed", "7"]);
    let c = tmcurv(&["verify", "--scenario", path_str(&p)]);
    let (a, b, c) = (
        strip_timing(std::str::from_utf8(&a.stdout).unwrap()),
        strip_timing(std::str::from_utf8(&b.stdout).unwrap()),
        strip_timing(std::str::from_utf8(&c.stdout).unwrap()),
    );
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert!(a.contains("\"seed\": 7"));
}

#[test]
fn thread_count_does_not_change_payload() {
    let p = scenario_path("energy_alpha_flat");
    let one = Command::new(env!("CARGO_BIN_EXE_tmcurv"))
        .args(["verify", "--scenario", path_str(&p)])
        .env("TMCURV_THREADS", "1")
        .output()
        .unwrap();
    let many = tmcurv(&["verify", "--scenario", path_str(&p)]);
    assert_eq!(
        strip_timing(std::str::from_utf8(&one.stdout).unwrap()),
        strip_timing(std::str::from_utf8(&many.stdout).unwrap())
    );
}

#[test]
fn failing_checks_exit_one() {
    let o = tmcurv(&["verify", "--scenario", path_str(&scenario_path("sigma_const_sphere"))]);
    assert_eq!(o.status.code(), Some(1));
    let r = Report::from_json(std::str::from_utf8(&o.stdout).unwrap()).unwrap();
    assert!(r.summaries.iter().any(|s| s.check_id == "connection.hh" && s.failed > 0));
}

#[test]
fn non_positive_alpha_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(scenario_path("sasaki_flat")).unwrap();
    let p = dir.path().join("s.json");
    std::fs::write(&p, text.replace("\"alpha\": \"1\"", "\"alpha\": \"u1\"")).unwrap();
    let o = tmcurv(&["verify", "--scenario", path_str(&p)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("alpha must be positive on the sampled domain"));
    assert!(o.stdout.is_empty());
}

#[test]
fn invalid_scenarios_name_the_field() {
    let text = std::fs::read_to_string(scenario_path("sasaki_sphere")).unwrap();
    let cases = [
        (text.replace("\"dimension\": 2", "\"dimension\": 3"), "metric"),
        (text.replace("\"sin(x1)^2\"", "\"sin(x1\""), "metric[1][1]"),
        (text.replace("\"sin(x1)^2\"", "\"u1\""), "metric[1][1]"),
        (text.replace("\"sin(x1)^2\"", "\"-1\""), "metric"),
        (text.replace("\"alpha\": \"1\"", "\"alpha\": \"1+\""), "alpha"),
        (text.replace("\"jet_order\": 3", "\"jet_order\": 2"), "jet_order"),
        (text.replace("\"margin\": 0.3", "\"margin\": 4.0"), "sample"),
        (text.replace("\"count\": 100", "\"count\": 0"), "sample.count"),
        (text.replace("\"name\"", "\"nmae\""), "<document>"),
    ];
    for (bad, field) in cases {
        let err = Scenario::from_json(&bad)
            .and_then(|sc| verify_scenario(&sc, String::new(), None))
            .unwrap_err();
        assert!(err.to_string().contains(&format!("`{field}`")), "{field}: {err}");
    }
    let v2 = text.replace("\"schema_version\": 1", "\"schema_version\": 2");
    let err = Scenario::from_json(&v2).unwrap_err().to_string();
    assert!(err.contains('2') && err.contains('1'), "{err}");
}

#[test]
fn missing_scenario_file_exits_two() {
    let o = tmcurv(&["verify", "--scenario", "/nonexistent/scenario.json"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn audit_hhh_sphere_has_nineteen_terms() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("a.json");
    let o = tmcurv(&[
        "audit",
        "--scenario",
        path_str(&scenario_path("sasaki_sphere")),
        "--equation",
        "hhh",
        "--out",
        path_str(&out),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let r = Report::from_json(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let a = &r.audits[0];
    assert!(a.records.iter().all(|rec| rec.terms.len() == 19 && rec.residual_rel <= 1e-8));
    assert_eq!(a.summary.literal_agrees, a.summary.records);
}

#[test]
fn audit_flagged_equation_reports_both_readings() {
    let o = tmcurv(&[
        "audit",
        "--scenario",
        path_str(&scenario_path("energy_alpha_sphere")),
        "--equation",
        "hhv",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let r = Report::from_json(std::str::from_utf8(&o.stdout).unwrap()).unwrap();
    let a = &r.audits[0];
    assert!(a.summary.flagged);
    assert_eq!(a.summary.readings.len(), 1);
    assert!(a.records.iter().all(|rec| rec.readings.len() == 1));
    assert!(a.summary.verdict.contains("dot=composition"));
}

#[test]
fn unknown_equation_exits_two() {
    let o = tmcurv(&["audit", "--scenario", path_str(&scenario_path("sasaki_sphere")), "--equation", "xyz"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("xyz"));
}

#[test]
fn report_csv_has_one_row_per_check_and_point() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(scenario_path("sasaki_flat")).unwrap();
    let sc_path = dir.path().join("small.json");
    let small = text
        .replace("\"count\": 100", "\"count\": 10")
        .replace(
            "\"audit\"",
            "\"checks\": [\"connection\", \"laplacian\"],\n  \"audit\"",
        );
    std::fs::write(&sc_path, small).unwrap();
    let out = dir.path().join("r.json");
    assert_eq!(
        tmcurv(&["verify", "--scenario", path_str(&sc_path), "--out", path_str(&out)])
            .status
            .code(),
        Some(0)
    );
    let o = tmcurv(&["report", path_str(&out), "--format", "csv"]);
    assert_eq!(o.status.code(), Some(0));
    let csv_text = String::from_utf8(o.stdout).unwrap();
    let mut rdr = csv::Reader::from_reader(csv_text.as_bytes());
    assert_eq!(
        rdr.headers().unwrap().iter().collect::<Vec<_>>(),
        ["check_id", "suite", "point_index", "x", "u", "max_abs", "max_rel", "status"]
    );
    // 4 connection cases + laplacian, 10 points each
    assert_eq!(rdr.records().count(), 50);
}

#[test]
fn report_json_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    tmcurv(&["verify", "--scenario", path_str(&scenario_path("sasaki_hyperbolic")), "--out", path_str(&out)]);
    let original = std::fs::read_to_string(&out).unwrap();
    let o = tmcurv(&["report", path_str(&out), "--format", "json"]);
    assert_eq!(o.status.code(), Some(0));
    let again = String::from_utf8(o.stdout).unwrap();
    assert_eq!(Report::from_json(&original).unwrap(), Report::from_json(&again).unwrap());
    assert_eq!(original, again);
}

#[test]
fn report_schema_mismatch_prints_both_versions() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    tmcurv(&["verify", "--scenario", path_str(&scenario_path("sasaki_flat")), "--out", path_str(&out)]);
    let text = std::fs::read_to_string(&out).unwrap().replacen("\"schema_version\": 1", "\"schema_version\": 9", 1);
    std::fs::write(&out, text).unwrap();
    let o = tmcurv(&["report", path_str(&out), "--format", "json"]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("version 9") && err.contains("expected 1"), "{err}");
}

#[test]
fn failed_write_leaves_no_partial_file() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("missing-dir").join("r.json");
    let o = tmcurv(&["verify", "--scenario", path_str(&scenario_path("sasaki_flat")), "--out", path_str(&target)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!target.exists());

    let existing = dir.path().join("keep.json");
    std::fs::write(&existing, "old").unwrap();
    write_atomic(&existing, b"new").unwrap();
    assert_eq!(std::fs::read_to_string(&existing).unwrap(), "new");
    let leftovers = std::fs::read_dir(dir.path()).unwrap().count();
    assert_eq!(leftovers, 1);
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(tmcurv(&[]).status.code(), Some(2));
    assert_eq!(tmcurv(&["verify"]).status.code(), Some(2));
    assert_eq!(tmcurv(&["report", "x.json", "--format", "xml"]).status.code(), Some(2));
    assert_eq!(tmcurv(&["--help"]).status.code(), Some(0));
}
