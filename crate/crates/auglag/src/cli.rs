//! Drivers behind the command-line front end: run one benchmark, sweep
//! discretization levels, and the penalty-rate diagnostic.
//!
//! Configuration is a flat override namespace (`alm.tau`, `ssn.tol`,
//! `problem.alpha`, ...) usable both from JSON config files and from
//! command-line flags; the effective configuration is echoed into
//! `report.json` so every run documents its own provenance.

use crate::alm::{
    outer_loop, solve_subproblem, AlConfig, AlReport, InnerFailPolicy, Iterate, PairingMode,
};
use crate::error::{invalid, Error, Result};
use crate::fem::Field;
use crate::io::write_vtk;
use crate::pde::{Problem, ProblemData};
use crate::problems::{error_report, Benchmark, ErrorReport};
use serde::Serialize;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

/// Which artifact formats a run writes.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Emit {
    pub csv: bool,
    pub json: bool,
    pub vtk: bool,
}

impl Default for Emit {
    fn default() -> Self {
        Self {
            csv: true,
            json: true,
            vtk: true,
        }
    }
}

impl Emit {
    /// Parse a comma-separated subset of `csv,json,vtk`.
    pub fn parse(list: &str) -> Result<Self> {
        let mut emit = Self {
            csv: false,
            json: false,
            vtk: false,
        };
        for item in list.split(',').filter(|s| !s.is_empty()) {
            match item.trim() {
                "csv" => emit.csv = true,
                "json" => emit.json = true,
                "vtk" => emit.vtk = true,
                other => return Err(invalid(format!("unknown emit format '{other}'"))),
            }
        }
        Ok(emit)
    }
}

const SUPPORTED_KEYS: &[&str] = &[
    "alm.rho0",
    "alm.tau",
    "alm.theta",
    "alm.eps_outer",
    "alm.r0_plus",
    "alm.max_outer",
    "alm.pairing",
    "alm.on_inner_fail",
    "ssn.tol",
    "ssn.max_iter",
    "problem.alpha",
    "problem.psi",
    "problem.u_lower",
    "problem.u_upper",
];

/// Flat override namespace; later insertions win.
#[derive(Clone, Debug, Default, Serialize)]
#[serde(transparent)]
pub struct Overrides {
    map: BTreeMap<String, serde_json::Value>,
}

impl Overrides {
    pub fn set(&mut self, key: &str, value: serde_json::Value) -> Result<()> {
        if !SUPPORTED_KEYS.contains(&key) {
            return Err(invalid(format!(
                "unsupported override key '{key}'; supported: {}",
                SUPPORTED_KEYS.join(", ")
            )));
        }
        self.map.insert(key.to_string(), value);
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Whether any `problem.*` key is present (these invalidate manufactured
    /// exact solutions).
    pub fn touches_problem(&self) -> bool {
        self.map.keys().any(|k| k.starts_with("problem."))
    }

    /// Merge `other` on top of `self`.
    pub fn merge_over(&mut self, other: &Overrides) {
        for (k, v) in &other.map {
            self.map.insert(k.clone(), v.clone());
        }
    }

    fn f64(&self, key: &str) -> Result<Option<f64>> {
        match self.map.get(key) {
            None => Ok(None),
            Some(v) => v
                .as_f64()
                .map(Some)
                .ok_or_else(|| invalid(format!("override '{key}' must be a number"))),
        }
    }

    fn usize(&self, key: &str) -> Result<Option<usize>> {
        match self.map.get(key) {
            None => Ok(None),
            Some(v) => v
                .as_u64()
                .map(|x| Some(x as usize))
                .ok_or_else(|| invalid(format!("override '{key}' must be a nonnegative integer"))),
        }
    }

    fn str(&self, key: &str) -> Result<Option<&str>> {
        match self.map.get(key) {
            None => Ok(None),
            Some(v) => v
                .as_str()
                .map(Some)
                .ok_or_else(|| invalid(format!("override '{key}' must be a string"))),
        }
    }

    /// Apply `alm.*` and `ssn.*` keys.
    pub fn apply_alm(&self, cfg: &mut AlConfig) -> Result<()> {
        if let Some(v) = self.f64("alm.rho0")? {
            cfg.rho0 = v;
        }
        if let Some(v) = self.f64("alm.tau")? {
            cfg.tau = v;
        }
        if let Some(v) = self.f64("alm.theta")? {
            cfg.theta = v;
        }
        if let Some(v) = self.f64("alm.eps_outer")? {
            cfg.eps_outer = v;
        }
        if let Some(v) = self.f64("alm.r0_plus")? {
            cfg.r0_plus = v;
        }
        if let Some(v) = self.usize("alm.max_outer")? {
            cfg.max_outer = v;
        }
        if let Some(v) = self.str("alm.pairing")? {
            cfg.pairing = match v {
                "scalar" => PairingMode::Scalar,
                "pointwise" => PairingMode::Pointwise,
                other => return Err(invalid(format!("alm.pairing must be scalar or pointwise, got '{other}'"))),
            };
        }
        if let Some(v) = self.str("alm.on_inner_fail")? {
            cfg.on_inner_fail = match v {
                "abort" => InnerFailPolicy::Abort,
                "increase-rho" => InnerFailPolicy::IncreaseRho,
                other => {
                    return Err(invalid(format!(
                        "alm.on_inner_fail must be abort or increase-rho, got '{other}'"
                    )))
                }
            };
        }
        if let Some(v) = self.f64("ssn.tol")? {
            cfg.inner.tol = v;
        }
        if let Some(v) = self.usize("ssn.max_iter")? {
            cfg.inner.max_iter = v;
        }
        Ok(())
    }

    /// Apply `problem.*` keys. Returns true if anything changed (callers
    /// drop manufactured exact solutions in that case).
    pub fn apply_problem(&self, data: &mut ProblemData) -> Result<bool> {
        let n = data.mesh.n_dof();
        let mut changed = false;
        if let Some(v) = self.f64("problem.alpha")? {
            data.alpha = v;
            changed = true;
        }
        if let Some(v) = self.f64("problem.psi")? {
            data.psi = Field::constant(n, v)?;
            changed = true;
        }
        if let Some(v) = self.f64("problem.u_lower")? {
            data.u_lower = vec![v; n];
            changed = true;
        }
        if let Some(v) = self.f64("problem.u_upper")? {
            data.u_upper = vec![v; n];
            changed = true;
        }
        Ok(changed)
    }
}

/// Contents of a JSON config file: the flat override namespace plus the
/// reserved keys `problem` and `dof`.
#[derive(Clone, Debug, Default)]
pub struct FileConfig {
    pub problem: Option<String>,
    pub dof: Option<usize>,
    pub overrides: Overrides,
}

pub fn load_config_file(path: &Path) -> Result<FileConfig> {
    let text = std::fs::read_to_string(path)?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    let obj = value
        .as_object()
        .ok_or_else(|| invalid("config file must hold a JSON object"))?;
    let mut cfg = FileConfig::default();
    for (k, v) in obj {
        match k.as_str() {
            "problem" => {
                cfg.problem = Some(
                    v.as_str()
                        .ok_or_else(|| invalid("config key 'problem' must be a string"))?
                        .to_string(),
                )
            }
            "dof" => {
                cfg.dof = Some(
                    v.as_u64()
                        .ok_or_else(|| invalid("config key 'dof' must be an integer"))?
                        as usize,
                )
            }
            key => cfg.overrides.set(key, v.clone())?,
        }
    }
    Ok(cfg)
}

/// Everything one `run` invocation needs.
#[derive(Clone, Debug, Default)]
pub struct RunConfig {
    /// Benchmark name, or a path to a JSON config file naming one.
    pub problem: String,
    pub dof_target: Option<usize>,
    /// Extra config file merged below the explicit overrides.
    pub config_file: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub emit: Option<Emit>,
    pub overrides: Overrides,
}

const DEFAULT_DOF: usize = 1000;

fn unknown_problem(name: &str) -> Error {
    invalid(format!(
        "unknown problem '{name}'; valid names: {} (or a path to a JSON config file)",
        Benchmark::all().map(|b| b.name()).join(", ")
    ))
}

struct Resolved {
    benchmark: Benchmark,
    dof: usize,
    overrides: Overrides,
}

fn resolve(
    problem: &str,
    dof_target: Option<usize>,
    config_file: Option<&Path>,
    cli: &Overrides,
) -> Result<Resolved> {
    let mut overrides = Overrides::default();
    let mut file_dof = None;
    let from_file = |path: &Path, overrides: &mut Overrides| -> Result<(Option<String>, Option<usize>)> {
        let cfg = load_config_file(path)?;
        overrides.merge_over(&cfg.overrides);
        Ok((cfg.problem, cfg.dof))
    };
    // An explicitly named benchmark wins; otherwise the problem argument may
    // be a config file that names one.
    let benchmark_name = if Benchmark::from_name(problem).is_some() {
        problem.to_string()
    } else if Path::new(problem).is_file() {
        let (p, d) = from_file(Path::new(problem), &mut overrides)?;
        file_dof = d;
        p.ok_or_else(|| invalid(format!("config file '{problem}' does not name a problem")))?
    } else {
        return Err(unknown_problem(problem));
    };
    if let Some(path) = config_file {
        let (_, d) = from_file(path, &mut overrides)?;
        if file_dof.is_none() {
            file_dof = d;
        }
    }
    overrides.merge_over(cli);
    let benchmark =
        Benchmark::from_name(&benchmark_name).ok_or_else(|| unknown_problem(&benchmark_name))?;
    Ok(Resolved {
        benchmark,
        dof: dof_target.or(file_dof).unwrap_or(DEFAULT_DOF),
        overrides,
    })
}

#[derive(Clone, Debug, Serialize)]
struct ErrorsJson {
    err_y: f64,
    err_u: f64,
    err_p: f64,
    p_excluded_node: Option<usize>,
}

impl From<&ErrorReport> for ErrorsJson {
    fn from(e: &ErrorReport) -> Self {
        Self {
            err_y: e.err_y,
            err_u: e.err_u,
            err_p: e.err_p,
            p_excluded_node: e.p_excluded_node,
        }
    }
}

#[derive(Serialize)]
struct ReportJson<'a> {
    problem: &'a str,
    dof_target: usize,
    n_dof: usize,
    overrides: &'a Overrides,
    alm: &'a AlConfig,
    termination: &'a crate::alm::Termination,
    summary: &'a crate::alm::RunSummary,
    errors: Option<ErrorsJson>,
    exact_solution_note: Option<&'a str>,
    records: &'a [crate::alm::AlRecord],
}

/// Result of one run, with the artifacts it wrote.
#[derive(Debug)]
pub struct RunOutcome {
    pub benchmark: Benchmark,
    pub n_dof: usize,
    pub report: AlReport,
    pub errors: Option<ErrorReport>,
    pub written: Vec<PathBuf>,
}

impl RunOutcome {
    pub fn converged(&self) -> bool {
        self.report.converged()
    }
}

/// Run one benchmark: outer loop, then report.csv, report.json and
/// solution.vtk under the output directory.
pub fn run(config: &RunConfig) -> Result<RunOutcome> {
    let resolved = resolve(
        &config.problem,
        config.dof_target,
        config.config_file.as_deref(),
        &config.overrides,
    )?;
    let benchmark = resolved.benchmark;
    let mesh = Arc::new(benchmark.mesh_for_dof(resolved.dof)?);
    let (mut data, mut exact) = benchmark.build(mesh.clone())?;
    let mut exact_note = None;
    if resolved.overrides.apply_problem(&mut data)? && exact.is_some() {
        exact = None;
        exact_note = Some("exact solution dropped: problem.* overrides change the manufactured data");
    }
    let problem = Problem::new(data)?;
    let mut alm_cfg = benchmark.alm_defaults();
    resolved.overrides.apply_alm(&mut alm_cfg)?;
    let report = outer_loop(&problem, &alm_cfg)?;
    let errors = match &exact {
        Some(e) => Some(error_report(
            &report.final_iterate.y,
            &report.final_iterate.u,
            &report.final_iterate.p,
            e,
            problem.space(),
        )?),
        None => None,
    };
    let emit = config.emit.unwrap_or_default();
    std::fs::create_dir_all(&config.output_dir)?;
    let mut written = Vec::new();
    if emit.csv {
        let path = config.output_dir.join("report.csv");
        std::fs::write(&path, report.to_csv())?;
        written.push(path);
    }
    if emit.json {
        let path = config.output_dir.join("report.json");
        let json = ReportJson {
            problem: benchmark.name(),
            dof_target: resolved.dof,
            n_dof: mesh.n_dof(),
            overrides: &resolved.overrides,
            alm: &alm_cfg,
            termination: &report.termination,
            summary: &report.summary,
            errors: errors.as_ref().map(ErrorsJson::from),
            exact_solution_note: exact_note,
            records: &report.records,
        };
        std::fs::write(&path, serde_json::to_string_pretty(&json)?)?;
        written.push(path);
    }
    if emit.vtk {
        let path = config.output_dir.join("solution.vtk");
        write_vtk(
            &path,
            &mesh,
            benchmark.name(),
            &[
                ("y", &report.final_iterate.y),
                ("u", &report.final_iterate.u),
                ("p", &report.final_iterate.p),
                ("mu", &report.final_mu),
            ],
        )?;
        written.push(path);
    }
    Ok(RunOutcome {
        benchmark,
        n_dof: mesh.n_dof(),
        report,
        errors,
        written,
    })
}

/// Least-squares slope of ln(y) against ln(x).
fn log_log_slope(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|&(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let cov: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let var: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    (var > 0.0).then(|| cov / var)
}

/// One row of a convergence study.
#[derive(Clone, Debug, Serialize)]
pub struct StudyRow {
    pub dof: usize,
    pub it_outer: Option<usize>,
    pub it_inner: Option<usize>,
    pub rho_max: Option<f64>,
    pub mu_l1: Option<f64>,
    pub err_y: Option<f64>,
    pub err_u: Option<f64>,
    pub err_p: Option<f64>,
    pub failure: Option<String>,
}

#[derive(Debug)]
pub struct StudyOutcome {
    pub rows: Vec<StudyRow>,
    pub slope_err_u: Option<f64>,
    pub has_errors: bool,
    pub written: Vec<PathBuf>,
}

#[derive(Clone, Debug, Default)]
pub struct StudyConfig {
    pub problem: String,
    pub dof_list: Vec<usize>,
    pub config_file: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub overrides: Overrides,
}

fn opt(v: &Option<impl std::fmt::Display>) -> String {
    v.as_ref().map(|x| x.to_string()).unwrap_or_default()
}

/// Run the benchmark across discretization levels; writes study.csv and
/// study.json. Rows that fail keep their failure message and the study
/// continues.
pub fn convergence_study(config: &StudyConfig) -> Result<StudyOutcome> {
    if config.dof_list.is_empty() {
        return Err(invalid("dof list must not be empty"));
    }
    let resolved = resolve(
        &config.problem,
        None,
        config.config_file.as_deref(),
        &config.overrides,
    )?;
    let benchmark = resolved.benchmark;
    // problem.* overrides invalidate the manufactured data.
    let has_errors = benchmark != Benchmark::Example1 && !resolved.overrides.touches_problem();
    let mut rows = Vec::new();
    for &dof in &config.dof_list {
        let row = match study_row(benchmark, dof, &resolved.overrides) {
            Ok(row) => row,
            Err(e) => StudyRow {
                dof,
                it_outer: None,
                it_inner: None,
                rho_max: None,
                mu_l1: None,
                err_y: None,
                err_u: None,
                err_p: None,
                failure: Some(e.to_string()),
            },
        };
        rows.push(row);
    }
    let err_points: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|r| r.err_u.map(|e| (r.dof as f64, e)))
        .collect();
    let slope_err_u = log_log_slope(&err_points);
    std::fs::create_dir_all(&config.output_dir)?;
    let mut written = Vec::new();
    let csv_path = config.output_dir.join("study.csv");
    let mut csv = String::new();
    if has_errors {
        csv.push_str("dof,it_outer,it_inner,rho_max,mu_l1,err_y,err_u,err_p,slope_err_u\n");
        for row in &rows {
            let slope = if row.err_u.is_some() { slope_err_u } else { None };
            csv.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                row.dof,
                opt(&row.it_outer),
                opt(&row.it_inner),
                opt(&row.rho_max),
                opt(&row.mu_l1),
                opt(&row.err_y),
                opt(&row.err_u),
                opt(&row.err_p),
                opt(&slope),
            ));
        }
    } else {
        csv.push_str("dof,it_outer,it_inner,rho_max,mu_l1\n");
        for row in &rows {
            csv.push_str(&format!(
                "{},{},{},{},{}\n",
                row.dof,
                opt(&row.it_outer),
                opt(&row.it_inner),
                opt(&row.rho_max),
                opt(&row.mu_l1),
            ));
        }
    }
    std::fs::write(&csv_path, csv)?;
    written.push(csv_path);
    let json_path = config.output_dir.join("study.json");
    #[derive(Serialize)]
    struct StudyJson<'a> {
        problem: &'a str,
        overrides: &'a Overrides,
        slope_err_u: Option<f64>,
        rows: &'a [StudyRow],
    }
    std::fs::write(
        &json_path,
        serde_json::to_string_pretty(&StudyJson {
            problem: benchmark.name(),
            overrides: &resolved.overrides,
            slope_err_u,
            rows: &rows,
        })?,
    )?;
    written.push(json_path);
    Ok(StudyOutcome {
        rows,
        slope_err_u,
        has_errors,
        written,
    })
}

fn study_row(benchmark: Benchmark, dof: usize, overrides: &Overrides) -> Result<StudyRow> {
    let mesh = Arc::new(benchmark.mesh_for_dof(dof)?);
    let (mut data, mut exact) = benchmark.build(mesh.clone())?;
    if overrides.apply_problem(&mut data)? {
        exact = None;
    }
    let problem = Problem::new(data)?;
    let mut alm_cfg = benchmark.alm_defaults();
    overrides.apply_alm(&mut alm_cfg)?;
    let report = outer_loop(&problem, &alm_cfg)?;
    if !report.converged() {
        return Err(Error::Unsupported(format!(
            "run did not converge: {:?}",
            report.termination
        )));
    }
    let errors = match &exact {
        Some(e) => Some(error_report(
            &report.final_iterate.y,
            &report.final_iterate.u,
            &report.final_iterate.p,
            e,
            problem.space(),
        )?),
        None => None,
    };
    Ok(StudyRow {
        dof: mesh.n_dof(),
        it_outer: Some(report.summary.outer_iters),
        it_inner: Some(report.summary.inner_iters_total),
        rho_max: Some(report.summary.rho_max),
        mu_l1: Some(report.summary.mu_l1),
        err_y: errors.as_ref().map(|e| e.err_y),
        err_u: errors.as_ref().map(|e| e.err_u),
        err_p: errors.as_ref().map(|e| e.err_p),
        failure: None,
    })
}

#[derive(Clone, Debug, Default)]
pub struct RateConfig {
    pub problem: String,
    pub rho_list: Vec<f64>,
    pub dof: usize,
    pub config_file: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub overrides: Overrides,
}

#[derive(Clone, Debug, Serialize)]
pub struct RateRow {
    pub rho: f64,
    pub err_u: f64,
}

#[derive(Debug)]
pub struct RateOutcome {
    pub rows: Vec<RateRow>,
    pub slope: Option<f64>,
    pub note: String,
    pub written: Vec<PathBuf>,
}

/// Sweep the penalty parameter at fixed mu = 0 and report the control error
/// after one sub-problem solve per rho. The fitted slope is informational,
/// for comparison against the theoretical decay exponent 1/8 in 2D.
pub fn rate_diagnostic(config: &RateConfig) -> Result<RateOutcome> {
    if config.rho_list.is_empty() {
        return Err(invalid("rho list must not be empty"));
    }
    if config.rho_list.iter().any(|&r| !(r > 0.0)) {
        return Err(invalid("all rho values must be positive"));
    }
    let resolved = resolve(
        &config.problem,
        Some(config.dof),
        config.config_file.as_deref(),
        &config.overrides,
    )?;
    let benchmark = resolved.benchmark;
    let mesh = Arc::new(benchmark.mesh_for_dof(resolved.dof)?);
    let (mut data, mut exact) = benchmark.build(mesh.clone())?;
    if resolved.overrides.apply_problem(&mut data)? {
        exact = None;
    }
    let Some(exact) = exact else {
        return Err(Error::Unsupported(format!(
            "rate diagnostic needs an exact solution; '{}' has none",
            benchmark.name()
        )));
    };
    let problem = Problem::new(data)?;
    let mut alm_cfg = benchmark.alm_defaults();
    resolved.overrides.apply_alm(&mut alm_cfg)?;
    let mu = Field::zeros(problem.n_dof());
    let mut iterate = Iterate::zeros(problem.n_dof());
    let mut rows = Vec::new();
    for &rho in &config.rho_list {
        let sub = solve_subproblem(&problem, &mu, rho, &iterate, &alm_cfg.inner)?;
        iterate = sub.iterate.clone();
        let errors = error_report(
            &sub.iterate.y,
            &sub.iterate.u,
            &sub.iterate.p,
            &exact,
            problem.space(),
        )?;
        rows.push(RateRow {
            rho,
            err_u: errors.err_u,
        });
    }
    let slope = log_log_slope(
        &rows
            .iter()
            .map(|r| (r.rho, r.err_u))
            .collect::<Vec<(f64, f64)>>(),
    );
    let note = match slope {
        Some(s) if (0.05..=0.5).contains(&s.abs()) => format!(
            "slope {s:.4}: magnitude within [0.05, 0.5], consistent with the rate exponent 1/8"
        ),
        Some(s) => format!("slope {s:.4}: outside the informational band [0.05, 0.5] for exponent 1/8"),
        None => "single rho value; no slope fitted".to_string(),
    };
    std::fs::create_dir_all(&config.output_dir)?;
    let mut written = Vec::new();
    let csv_path = config.output_dir.join("diag.csv");
    let mut csv = String::from("rho,err_u,slope\n");
    for row in &rows {
        csv.push_str(&format!("{},{},{}\n", row.rho, row.err_u, opt(&slope)));
    }
    std::fs::write(&csv_path, csv)?;
    written.push(csv_path);
    let json_path = config.output_dir.join("diag.json");
    #[derive(Serialize)]
    struct RateJson<'a> {
        problem: &'a str,
        dof: usize,
        slope: Option<f64>,
        note: &'a str,
        rows: &'a [RateRow],
    }
    std::fs::write(
        &json_path,
        serde_json::to_string_pretty(&RateJson {
            problem: benchmark.name(),
            dof: mesh.n_dof(),
            slope,
            note: &note,
            rows: &rows,
        })?,
    )?;
    written.push(json_path);
    Ok(RateOutcome {
        rows,
        slope,
        note,
        written,
    })
}
