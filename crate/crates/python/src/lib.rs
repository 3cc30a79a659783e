//! Python bindings: scenario loading, verification, audits and reports.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use tmcurv::cli::{self, CliError};
use tmcurv::expr;
use tmcurv::oracle::TmOracle;
use tmcurv::tm_geom::TangentPoint;
use tmcurv::verify::{EQUATIONS, FLAGGED, SUITES};

fn to_py(e: CliError) -> PyErr {
    match e {
        CliError::Read { .. } | CliError::Write { .. } => PyIOError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// A validated scenario document.
#[pyclass(module = "tmcurv_py", frozen)]
struct Scenario {
    inner: cli::Scenario,
    digest: String,
}

#[pymethods]
impl Scenario {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Scenario> {
        let inner = cli::Scenario::from_json(text).map_err(to_py)?;
        Ok(Scenario {
            inner,
            digest: cli::digest(text.as_bytes()),
        })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Scenario> {
        let (inner, digest) = cli::Scenario::load(&path).map_err(to_py)?;
        Ok(Scenario { inner, digest })
    }

    #[getter]
    fn name(&self) -> &str {
        &self.inner.name
    }

    #[getter]
    fn dimension(&self) -> usize {
        self.inner.dimension
    }

    #[getter]
    fn digest(&self) -> &str {
        &self.digest
    }

    #[pyo3(signature = (seed=None))]
    fn verify(&self, py: Python<'_>, seed: Option<u64>) -> PyResult<Report> {
        let r = py.allow_threads(|| cli::verify_scenario(&self.inner, self.digest.clone(), seed));
        Ok(Report { inner: r.map_err(to_py)? })
    }

    fn audit(&self, py: Python<'_>, equation: &str) -> PyResult<Report> {
        let r = py.allow_threads(|| cli::audit_scenario(&self.inner, self.digest.clone(), equation));
        Ok(Report { inner: r.map_err(to_py)? })
    }

    /// Closed-form and oracle Laplacian of α at `(x, u)`.
    fn laplacian(&self, x: Vec<f64>, u: Vec<f64>) -> PyResult<(f64, f64)> {
        let n = self.inner.dimension;
        if x.len() != n || u.len() != n {
            return Err(PyValueError::new_err(format!("x and u must have length {n}")));
        }
        let sg = self.inner.geometry().map_err(to_py)?;
        let pt = TangentPoint::new(x, u);
        let closed = sg.laplacian_bar(&pt).map_err(value_err)?;
        let oracle = TmOracle::new(&sg, &pt)
            .and_then(|o| o.laplace_beltrami(sg.params.alpha()))
            .map_err(value_err)?;
        Ok((closed, oracle))
    }

    fn __repr__(&self) -> String {
        format!("Scenario(name={:?}, dimension={})", self.inner.name, self.inner.dimension)
    }
}

/// Result of `verify` or `audit`.
#[pyclass(module = "tmcurv_py", frozen)]
struct Report {
    inner: cli::Report,
}

#[pymethods]
impl Report {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Report> {
        Ok(Report {
            inner: cli::Report::from_json(text).map_err(to_py)?,
        })
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    fn to_csv(&self) -> String {
        self.inner.to_csv()
    }

    fn write(&self, path: PathBuf, format: &str) -> PyResult<()> {
        let body = match format {
            "json" => self.inner.to_json(),
            "csv" => self.inner.to_csv(),
            other => return Err(PyValueError::new_err(format!("unknown format {other:?}"))),
        };
        cli::write_atomic(&path, body.as_bytes()).map_err(to_py)
    }

    #[getter]
    fn status(&self) -> String {
        format!("{:?}", self.inner.status).to_lowercase()
    }

    #[getter]
    fn exit_code(&self) -> i32 {
        self.inner.exit_code()
    }

    #[getter]
    fn point_count(&self) -> usize {
        self.inner.point_count
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    /// `(check_id, status, max_rel)` per check.
    fn summaries(&self) -> Vec<(String, String, f64)> {
        self.inner
            .summaries
            .iter()
            .map(|s| (s.check_id.clone(), format!("{:?}", s.status).to_lowercase(), s.max_rel))
            .collect()
    }

    /// `(equation, verdict)` per audited equation.
    fn verdicts(&self) -> Vec<(String, String)> {
        self.inner
            .audits
            .iter()
            .map(|a| (a.summary.equation.clone(), a.summary.verdict.clone()))
            .collect()
    }

    fn __eq__(&self, other: &Report) -> bool {
        self.inner == other.inner
    }

    fn __repr__(&self) -> String {
        format!(
            "Report(scenario={:?}, status={:?}, checks={})",
            self.inner.scenario,
            self.status(),
            self.inner.checks.len()
        )
    }
}

/// Evaluate an expression over `n` base and `n` fiber coordinates.
#[pyfunction]
fn eval_expr(source: &str, n: usize, point: Vec<f64>) -> PyResult<f64> {
    let e = expr::parse(source, n).map_err(value_err)?;
    e.eval(&point).map_err(value_err)
}

#[pymodule]
pub fn tmcurv_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Scenario>()?;
    m.add_class::<Report>()?;
    m.add_function(wrap_pyfunction!(eval_expr, m)?)?;
    m.add("SUITES", SUITES.to_vec())?;
    m.add("EQUATIONS", EQUATIONS.to_vec())?;
    m.add("FLAGGED", FLAGGED.to_vec())?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
