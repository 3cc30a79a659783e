#![allow(dead_code)]

use std::path::PathBuf;

use tmcurv::base_geom::ChartMetric;
use tmcurv::cli::Scenario;
use tmcurv::tm_geom::{IsotropicParams, ScenarioGeometry};

pub const BUNDLED: [&str; 6] = [
    "sasaki_flat",
    "sasaki_sphere",
    "sasaki_hyperbolic",
    "energy_alpha_flat",
    "energy_alpha_sphere",
    "sigma_const_sphere",
];

pub fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(format!("{name}.json"))
}

pub fn load(name: &str) -> (Scenario, String) {
    Scenario::load(&scenario_path(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn geometry(metric: &[&[&str]], domain: Vec<(f64, f64)>, alpha: &str, sigma: &str) -> ScenarioGeometry {
    let rows: Vec<Vec<String>> = metric.iter().map(|r| r.iter().map(|s| s.to_string()).collect()).collect();
    let n = rows.len();
    let m = ChartMetric::parse(&rows, domain).unwrap();
    ScenarioGeometry::new(m, IsotropicParams::parse(alpha, sigma, n).unwrap()).unwrap()
}

pub fn flat(alpha: &str, sigma: &str) -> ScenarioGeometry {
    geometry(&[&["1", "0"], &["0", "1"]], vec![(-1.0, 1.0); 2], alpha, sigma)
}

pub fn sphere(alpha: &str, sigma: &str) -> ScenarioGeometry {
    geometry(
        &[&["1", "0"], &["0", "sin(x1)^2"]],
        vec![(0.0, std::f64::consts::PI), (0.0, 2.0 * std::f64::consts::PI)],
        alpha,
        sigma,
    )
}

/// Prints the criterion line and returns whether it passed.
pub fn verdict(n: u32, ok: bool, detail: &str) -> bool {
    println!("criterion {n}: {} | {detail}", if ok { "PASS" } else { "FAIL" });
    ok
}
