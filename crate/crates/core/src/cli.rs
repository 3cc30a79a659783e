//! Scenario loading, the `verify` / `audit` / `report` commands and report
//! serialization.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::base_geom::ChartMetric;
use crate::expr::{parse, Expr};
use crate::linalg;
use crate::tm_geom::{IsotropicParams, ScenarioGeometry, TangentPoint, Tolerance};
use crate::verify::{
    self, audit_equation, run_checks, sample_points, summarize, AuditRecord, AuditSummary, CheckResult, CheckSummary,
    SampleSpec, Status, VerifyError, EQUATIONS, FLAGGED, SUITES,
};

pub const SCENARIO_SCHEMA_VERSION: u32 = 1;
pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Exit status: all checks passed.
pub const EXIT_OK: i32 = 0;
/// Exit status: at least one non-audit check failed.
pub const EXIT_CHECK_FAILED: i32 = 1;
/// Exit status: usage, validation or I/O error.
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: malformed JSON: {source}")]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("scenario field `{field}`: {message}")]
    Scenario { field: String, message: String },
    #[error("{what} schema version {found} is not supported (expected {expected})")]
    SchemaVersion {
        what: &'static str,
        found: u64,
        expected: u32,
    },
    #[error(transparent)]
    Verify(#[from] VerifyError),
}

fn field_error(field: impl Into<String>, message: impl ToString) -> CliError {
    CliError::Scenario {
        field: field.into(),
        message: message.to_string(),
    }
}

fn default_sigma() -> String {
    "0".into()
}

fn default_jet_order() -> u8 {
    3
}

fn default_checks() -> Vec<String> {
    SUITES.iter().map(|s| s.to_string()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditSettings {
    /// Number of sampled points the audit runs on.
    pub points: usize,
}

impl Default for AuditSettings {
    fn default() -> Self {
        AuditSettings { points: 8 }
    }
}

/// Scenario file contents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub dimension: usize,
    pub metric: Vec<Vec<String>>,
    pub domain: Vec<[f64; 2]>,
    pub alpha: String,
    #[serde(default = "default_sigma")]
    pub sigma: String,
    #[serde(default = "default_jet_order")]
    pub jet_order: u8,
    #[serde(default)]
    pub tolerance: Tolerance,
    #[serde(default)]
    pub sample: SampleSpec,
    #[serde(default = "default_checks")]
    pub checks: Vec<String>,
    #[serde(default)]
    pub audit: AuditSettings,
}

/// Hex SHA-256 of a scenario document, as recorded in reports.
pub fn digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl Scenario {
    /// Parse and validate scenario JSON text.
    pub fn from_json(text: &str) -> Result<Scenario, CliError> {
        let raw: serde_json::Value = serde_json::from_str(text).map_err(|e| field_error("<document>", e))?;
        match raw.get("schema_version").and_then(|v| v.as_u64()) {
            Some(v) if v == SCENARIO_SCHEMA_VERSION as u64 => {}
            Some(v) => {
                return Err(CliError::SchemaVersion {
                    what: "scenario",
                    found: v,
                    expected: SCENARIO_SCHEMA_VERSION,
                })
            }
            None => return Err(field_error("schema_version", "missing or not an unsigned integer")),
        }
        let sc: Scenario = serde_json::from_value(raw).map_err(|e| field_error("<document>", e))?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn load(path: &Path) -> Result<(Scenario, String), CliError> {
        let bytes = std::fs::read(path).map_err(|source| CliError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let text = String::from_utf8(bytes.clone()).map_err(|e| field_error("<document>", e))?;
        let sc = Scenario::from_json(&text)?;
        Ok((sc, digest(&bytes)))
    }

    fn validate(&self) -> Result<(), CliError> {
        let n = self.dimension;
        if n == 0 {
            return Err(field_error("dimension", "must be at least 1"));
        }
        if self.metric.len() != n {
            return Err(field_error(
                "metric",
                format!("expected {n} rows for dimension {n}, got {}", self.metric.len()),
            ));
        }
        if let Some((i, row)) = self.metric.iter().enumerate().find(|(_, r)| r.len() != n) {
            return Err(field_error(
                format!("metric[{i}]"),
                format!("expected {n} entries, got {}", row.len()),
            ));
        }
        if self.domain.len() != n {
            return Err(field_error(
                "domain",
                format!("expected {n} intervals, got {}", self.domain.len()),
            ));
        }
        if self.jet_order != 3 {
            return Err(field_error(
                "jet_order",
                format!("curvature checks need third derivatives; only 3 is supported, got {}", self.jet_order),
            ));
        }
        let tol = &self.tolerance;
        if !(tol.rel > 0.0 && tol.abs > 0.0 && tol.rel.is_finite() && tol.abs.is_finite()) {
            return Err(field_error("tolerance", "rel and abs must be positive and finite"));
        }
        if self.sample.count == 0 {
            return Err(field_error("sample.count", "must be at least 1"));
        }
        if !(self.sample.margin >= 0.0) {
            return Err(field_error("sample.margin", "must be non-negative"));
        }
        if !(self.sample.fiber_radius >= 0.0 && self.sample.fiber_radius.is_finite()) {
            return Err(field_error("sample.fiber_radius", "must be non-negative and finite"));
        }
        if self.audit.points == 0 {
            return Err(field_error("audit.points", "must be at least 1"));
        }
        verify::validate_suites(&self.checks).map_err(|e| field_error("checks", e))?;
        self.geometry().map(|_| ())
    }

    /// Build the evaluation geometry; errors name the offending field.
    pub fn geometry(&self) -> Result<ScenarioGeometry, CliError> {
        let n = self.dimension;
        let mut rows = Vec::with_capacity(n);
        for (i, row) in self.metric.iter().enumerate() {
            let mut parsed = Vec::with_capacity(n);
            for (j, s) in row.iter().enumerate() {
                let e = parse(s, n).map_err(|e| field_error(format!("metric[{i}][{j}]"), e))?;
                if !e.is_base_only() {
                    return Err(field_error(
                        format!("metric[{i}][{j}]"),
                        "metric components may depend on x only",
                    ));
                }
                parsed.push(e);
            }
            rows.push(parsed);
        }
        for i in 0..n {
            for j in 0..i {
                if rows[i][j] != rows[j][i] && self.metric[i][j].trim() != self.metric[j][i].trim() {
                    check_symmetric_by_value(&rows[i][j], &rows[j][i], &self.domain)
                        .map_err(|m| field_error(format!("metric[{i}][{j}]"), m))?;
                }
            }
        }
        let domain = self.domain.iter().map(|d| (d[0], d[1])).collect();
        let metric = ChartMetric::new(rows, domain).map_err(|e| field_error("domain", e))?;
        let alpha = parse(&self.alpha, n).map_err(|e| field_error("alpha", e))?;
        let sigma = parse(&self.sigma, n).map_err(|e| field_error("sigma", e))?;
        let mut sg =
            ScenarioGeometry::new(metric, IsotropicParams::new(alpha, sigma)).map_err(|e| field_error("alpha", e))?;
        sg.tolerance = self.tolerance;
        Ok(sg)
    }
}

/// Metric entries must agree across the diagonal; structurally different
/// expressions are compared at the box center.
fn check_symmetric_by_value(a: &Expr, b: &Expr, domain: &[[f64; 2]]) -> Result<(), String> {
    let n = domain.len();
    let mut coords: Vec<f64> = domain.iter().map(|d| 0.5 * (d[0] + d[1])).collect();
    coords.extend(std::iter::repeat_n(0.0, n));
    match (a.eval(&coords), b.eval(&coords)) {
        (Ok(x), Ok(y)) if (x - y).abs() <= 1e-12 * x.abs().max(y.abs()).max(1.0) => Ok(()),
        (Ok(x), Ok(y)) => Err(format!("metric is not symmetric: {x} vs {y} at the domain center")),
        (Err(e), _) | (_, Err(e)) => Err(e.to_string()),
    }
}

/// Reject points where the metric is not usable before any check runs.
fn preflight(sg: &ScenarioGeometry, points: &[TangentPoint]) -> Result<(), CliError> {
    for pt in points {
        let g = sg
            .metric
            .values(&pt.x)
            .map_err(|e| field_error("metric", format!("{e} at x = {:?}", pt.x)))?;
        linalg::spd_inverse(&g).map_err(|e| field_error("metric", format!("{e} at x = {:?}", pt.x)))?;
        let s = sg
            .params
            .sigma()
            .eval(&pt.coords())
            .map_err(|e| field_error("sigma", format!("{e} at {pt:?}")))?;
        if !s.is_finite() {
            return Err(field_error("sigma", format!("not finite at {pt:?}")));
        }
    }
    Ok(())
}

fn sample(sg: &ScenarioGeometry, spec: &SampleSpec) -> Result<Vec<TangentPoint>, CliError> {
    let points = sample_points(sg, spec).map_err(|e| match e {
        VerifyError::NonPositiveAlpha { .. } => field_error("alpha", e),
        VerifyError::InvalidBox(_) | VerifyError::EmptyRegion { .. } => field_error("sample", e),
        other => CliError::Verify(other),
    })?;
    preflight(sg, &points)?;
    Ok(points)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditSection {
    pub summary: AuditSummary,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub records: Vec<AuditRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub elapsed_ms: f64,
    pub threads: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Verify,
    Audit,
}

/// Machine-readable result of `verify` or `audit`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Report {
    pub schema_version: u32,
    pub tool_version: String,
    pub command: Command,
    pub scenario: String,
    pub scenario_digest: String,
    pub seed: u64,
    pub tolerance: Tolerance,
    pub point_count: usize,
    pub status: Status,
    pub summaries: Vec<CheckSummary>,
    pub checks: Vec<CheckResult>,
    pub audits: Vec<AuditSection>,
    /// Wall-clock data; excluded from determinism comparisons.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing: Option<Timing>,
}

impl Report {
    fn new(command: Command, sc: &Scenario, digest: String, seed: u64, point_count: usize) -> Report {
        Report {
            schema_version: REPORT_SCHEMA_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command,
            scenario: sc.name.clone(),
            scenario_digest: digest,
            seed,
            tolerance: sc.tolerance,
            point_count,
            status: Status::Pass,
            summaries: Vec::new(),
            checks: Vec::new(),
            audits: Vec::new(),
            timing: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Report, CliError> {
        let doc = Path::new("<report>");
        let raw: serde_json::Value = serde_json::from_str(text).map_err(|source| CliError::Json {
            path: doc.to_path_buf(),
            source,
        })?;
        let found = raw.get("schema_version").and_then(|v| v.as_u64()).unwrap_or(0);
        if found != REPORT_SCHEMA_VERSION as u64 {
            return Err(CliError::SchemaVersion {
                what: "report",
                found,
                expected: REPORT_SCHEMA_VERSION,
            });
        }
        serde_json::from_value(raw).map_err(|source| CliError::Json {
            path: doc.to_path_buf(),
            source,
        })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn exit_code(&self) -> i32 {
        if self.status == Status::Fail {
            EXIT_CHECK_FAILED
        } else {
            EXIT_OK
        }
    }

    /// One row per check and point, or per audit record for audit reports.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let pt = |p: &TangentPoint| (join(&p.x), join(&p.u));
        match self.command {
            Command::Verify => {
                w.write_record(["check_id", "suite", "point_index", "x", "u", "max_abs", "max_rel", "status"])
                    .expect("in-memory write");
                for c in &self.checks {
                    let (x, u) = pt(&c.point);
                    w.write_record([
                        c.check_id.clone(),
                        c.suite.clone(),
                        c.point_index.to_string(),
                        x,
                        u,
                        num(c.max_abs),
                        num(c.max_rel),
                        status_str(c.status).to_string(),
                    ])
                    .expect("in-memory write");
                }
            }
            Command::Audit => {
                w.write_record([
                    "equation",
                    "point_index",
                    "x",
                    "u",
                    "arguments",
                    "residual_abs",
                    "residual_rel",
                    "agrees",
                ])
                .expect("in-memory write");
                for r in self.audits.iter().flat_map(|a| &a.records) {
                    let (x, u) = pt(&r.point);
                    let args: Vec<String> = r.arguments.iter().map(|a| join(a)).collect();
                    w.write_record([
                        r.equation.clone(),
                        r.point_index.to_string(),
                        x,
                        u,
                        args.join("|"),
                        num(r.residual_abs),
                        num(r.residual_rel),
                        r.agrees.to_string(),
                    ])
                    .expect("in-memory write");
                }
            }
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
    }
}

fn join(v: &[f64]) -> String {
    v.iter().map(|c| num(*c)).collect::<Vec<_>>().join(";")
}

fn num(v: f64) -> String {
    if v.is_finite() {
        serde_json::to_string(&v).expect("finite f64 serializes")
    } else {
        String::new()
    }
}

fn status_str(s: Status) -> &'static str {
    match s {
        Status::Pass => "pass",
        Status::Fail => "fail",
        Status::Audit => "audit",
        Status::Skip => "skip",
    }
}

fn overall(summaries: &[CheckSummary]) -> Status {
    if summaries.iter().any(|s| s.status == Status::Fail) {
        Status::Fail
    } else if summaries.iter().any(|s| s.status == Status::Audit) {
        Status::Audit
    } else {
        Status::Pass
    }
}

fn thread_count() -> usize {
    verify::with_pool(rayon::current_num_threads)
}

/// Run the scenario's check suites and the audit summaries of the flagged
/// equations.
pub fn verify_scenario(sc: &Scenario, digest: String, seed: Option<u64>) -> Result<Report, CliError> {
    let start = Instant::now();
    let sg = sc.geometry()?;
    let spec = SampleSpec {
        seed: seed.unwrap_or(sc.sample.seed),
        ..sc.sample.clone()
    };
    let points = sample(&sg, &spec)?;
    let checks = run_checks(&sg, &points, &sc.checks, spec.seed)?;
    let summaries = summarize(&checks);
    let mut report = Report::new(Command::Verify, sc, digest, spec.seed, points.len());
    report.status = overall(&summaries);
    report.summaries = summaries;
    report.checks = checks;
    let audit_points = &points[..sc.audit.points.min(points.len())];
    for eq in FLAGGED {
        match audit_equation(&sg, audit_points, eq) {
            Ok((_, summary)) => report.audits.push(AuditSection {
                summary,
                records: Vec::new(),
            }),
            Err(VerifyError::Geom(crate::error::GeomError::SigmaNonzero)) => {}
            Err(e) => return Err(e.into()),
        }
    }
    report.timing = Some(Timing {
        elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
        threads: thread_count(),
    });
    Ok(report)
}

/// Term-by-term audit of one equation on the first `audit.points` samples.
pub fn audit_scenario(sc: &Scenario, digest: String, equation: &str) -> Result<Report, CliError> {
    if !EQUATIONS.contains(&equation) {
        return Err(VerifyError::UnknownEquation(equation.to_string()).into());
    }
    let start = Instant::now();
    let sg = sc.geometry()?;
    let spec = SampleSpec {
        count: sc.audit.points,
        ..sc.sample.clone()
    };
    let points = sample(&sg, &spec)?;
    let (records, summary) = audit_equation(&sg, &points, equation).map_err(|e| match e {
        VerifyError::Geom(g) => field_error("sigma", g),
        other => other.into(),
    })?;
    let mut report = Report::new(Command::Audit, sc, digest, spec.seed, points.len());
    report.status = if summary.literal_agrees == summary.records {
        Status::Pass
    } else {
        Status::Audit
    };
    report.audits.push(AuditSection { summary, records });
    report.timing = Some(Timing {
        elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
        threads: thread_count(),
    });
    Ok(report)
}

/// Write `contents` to `path` via a temporary file in the same directory.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    let err = |source| CliError::Write {
        path: path.to_path_buf(),
        source,
    };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(err)?;
    // temp files are created 0600; keep the target's mode or use 0644
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        let mode = std::fs::metadata(path).map(|m| m.permissions().mode()).unwrap_or(0o644);
        tmp.as_file()
            .set_permissions(std::fs::Permissions::from_mode(mode))
            .map_err(err)?;
    }
    tmp.write_all(contents).map_err(err)?;
    tmp.as_file().sync_all().map_err(err)?;
    tmp.persist(path).map_err(|e| err(e.error))?;
    Ok(())
}

#[derive(Debug, Parser)]
#[command(name = "tmcurv", version, about = "Check curvature formulas of isotropic tangent-bundle metrics against a coordinate oracle")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Cmd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Run every selected check suite on the scenario's sample points.
    Verify {
        #[arg(long)]
        scenario: PathBuf,
        /// Overrides the scenario's sample seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Report destination; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-term breakdown of one equation against the oracle.
    Audit {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        equation: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-emit a saved report as pretty JSON or CSV.
    Report {
        path: PathBuf,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn emit(out: Option<&Path>, contents: &str) -> Result<(), CliError> {
    match out {
        Some(p) => write_atomic(p, contents.as_bytes()),
        None => {
            let mut stdout = std::io::stdout().lock();
            match stdout.write_all(contents.as_bytes()).and_then(|_| stdout.flush()) {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(CliError::Write {
                    path: PathBuf::from("<stdout>"),
                    source: e,
                }),
                _ => Ok(()),
            }
        }
    }
}

/// Human-readable digest of a report for the diagnostic stream.
pub fn render_summary(report: &Report) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{} `{}` seed {} on {} points: {}",
        match report.command {
            Command::Verify => "verify",
            Command::Audit => "audit",
        },
        report.scenario,
        report.seed,
        report.point_count,
        status_str(report.status)
    );
    for c in &report.summaries {
        let _ = writeln!(
            s,
            "  {:<40} {:<5} max_abs {:>10.3e} max_rel {:>10.3e} ({} pass, {} fail, {} audit, {} skip)",
            c.check_id,
            status_str(c.status),
            c.max_abs,
            c.max_rel,
            c.passed,
            c.failed,
            c.audited,
            c.skipped
        );
    }
    for a in &report.audits {
        let _ = writeln!(s, "  audit {:<10} {}", a.summary.equation, a.summary.verdict);
    }
    s
}

fn run_command(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Cmd::Verify { scenario, seed, out } => {
            let (sc, digest) = Scenario::load(&scenario)?;
            let report = verify_scenario(&sc, digest, seed)?;
            emit(out.as_deref(), &report.to_json())?;
            eprint!("{}", render_summary(&report));
            Ok(report.exit_code())
        }
        Cmd::Audit {
            scenario,
            equation,
            out,
        } => {
            let (sc, digest) = Scenario::load(&scenario)?;
            let report = audit_scenario(&sc, digest, &equation)?;
            emit(out.as_deref(), &report.to_json())?;
            eprint!("{}", render_summary(&report));
            Ok(EXIT_OK)
        }
        Cmd::Report { path, format, out } => {
            let text = std::fs::read_to_string(&path).map_err(|source| CliError::Read {
                path: path.clone(),
                source,
            })?;
            let report = Report::from_json(&text).map_err(|e| match e {
                CliError::Json { source, .. } => CliError::Json { path, source },
                other => other,
            })?;
            let rendered = match format {
                Format::Json => report.to_json(),
                Format::Csv => report.to_csv(),
            };
            emit(out.as_deref(), &rendered)?;
            Ok(EXIT_OK)
        }
    }
}

/// Parse `args`, run the command and return the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run_command(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
    }
}
