//! Closed forms on a 3-dimensional base without constant curvature, where
//! every curvature term and every derivative of α contributes.

mod common;

use common::*;
use tmcurv::tm_geom::ScenarioGeometry;
use tmcurv::verify::{audit_equation, run_checks, sample_points, summarize, SampleSpec, Status, EQUATIONS};

fn base3(alpha: &str) -> ScenarioGeometry {
    geometry(
        &[&["1", "0", "0"], &["0", "1+x1^2", "0.3*x1"], &["0", "0.3*x1", "exp(x2)"]],
        vec![(-0.8, 0.8); 3],
        alpha,
        "0",
    )
}

const ALPHAS: [&str; 3] = ["1", "1+u1^2+u2^2+u3^2", "exp(0.3*x3+0.2*u1)"];

fn spec(count: usize) -> SampleSpec {
    SampleSpec {
        count,
        seed: 11,
        margin: 0.0,
        fiber_radius: 1.0,
        alpha_floor: 0.0,
    }
}

#[test]
fn all_suites_but_vertical_ricci_agree() {
    let suites: Vec<String> = tmcurv::verify::SUITES.iter().map(|s| s.to_string()).collect();
    for alpha in ALPHAS {
        let sg = base3(alpha);
        let pts = sample_points(&sg, &spec(15)).unwrap();
        for s in summarize(&run_checks(&sg, &pts, &suites, 11).unwrap()) {
            let expect_fail = s.check_id == "ricci.v" && alpha != "1";
            let want = if expect_fail { Status::Fail } else { Status::Pass };
            assert_eq!(s.status, want, "{alpha}: {} max_rel {:e}", s.check_id, s.max_rel);
        }
    }
}

#[test]
fn audit_readings_on_general_base() {
    let sg = base3("exp(0.3*x3+0.2*u1)");
    let pts = sample_points(&sg, &spec(4)).unwrap();
    for eq in EQUATIONS {
        let (records, summary) = audit_equation(&sg, &pts, eq).unwrap();
        let reading = |name: &str| summary.readings.iter().find(|r| r.name == name).map(|r| r.agrees);
        match eq {
            "ricci_v" => {
                assert_eq!(summary.literal_agrees, 0);
                assert_eq!(reading("net=3/(2α⁴)"), Some(records.len()));
                assert_eq!(reading("frame-trace"), Some(records.len()));
            }
            "hhv" => {
                assert_eq!(summary.literal_agrees, records.len());
                assert!(reading("dot=composition").unwrap() < records.len());
            }
            "vhv" => {
                assert_eq!(summary.literal_agrees, records.len());
                assert_eq!(reading("coef=1/(4α²)"), Some(0));
            }
            _ => assert_eq!(summary.literal_agrees, records.len(), "{eq}"),
        }
    }
}
