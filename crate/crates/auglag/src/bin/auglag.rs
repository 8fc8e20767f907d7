//! Thin command-line front end over the `auglag` library.
//!
//! Subcommands:
//!   run    solve one benchmark and write report.csv / report.json / solution.vtk
//!   study  sweep discretization levels and write study.csv / study.json
//!   rate   sweep the penalty parameter at fixed mu = 0 and write diag.csv
//!
//! Exit codes: 0 converged/ok, 2 finished without convergence, 1 error.

use auglag::cli::{
    convergence_study, rate_diagnostic, run, Emit, Overrides, RateConfig, RunConfig, StudyConfig,
};
use std::path::PathBuf;
use std::process::ExitCode;

const USAGE: &str = "\
auglag - augmented Lagrange solver for state-constrained semilinear optimal control

USAGE:
    auglag run   --problem NAME [--dof N] [--out DIR] [--emit csv,json,vtk]
                 [--config FILE] [--rho0 X] [--tau X] [--theta X]
                 [--on-inner-fail abort|increase-rho] [--set KEY=VALUE]...
    auglag study --problem NAME --dofs N1,N2,... [--out DIR] [--config FILE] [flags]
    auglag rate  --problem NAME --rhos R1,R2,... [--dof N] [--out DIR] [--config FILE] [flags]

PROBLEMS:
    example1 | example2 | example3, or a path to a JSON config file with a
    flat override namespace ({\"problem\": \"example1\", \"alm.tau\": 0.2, ...}).

OVERRIDE KEYS (also usable via --set):
    alm.rho0 alm.tau alm.theta alm.eps_outer alm.r0_plus alm.max_outer
    alm.pairing alm.on_inner_fail ssn.tol ssn.max_iter
    problem.alpha problem.psi problem.u_lower problem.u_upper
";

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    match dispatch(&args) {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

struct Parsed {
    problem: Option<String>,
    dof: Option<usize>,
    dofs: Vec<usize>,
    rhos: Vec<f64>,
    out: PathBuf,
    emit: Option<Emit>,
    config: Option<PathBuf>,
    overrides: Overrides,
}

fn parse_flags(args: &[String]) -> Result<Parsed, String> {
    let mut parsed = Parsed {
        problem: None,
        dof: None,
        dofs: Vec::new(),
        rhos: Vec::new(),
        out: PathBuf::from("out"),
        emit: None,
        config: None,
        overrides: Overrides::default(),
    };
    let mut it = args.iter();
    let next_value = |flag: &str, it: &mut std::slice::Iter<String>| -> Result<String, String> {
        it.next()
            .cloned()
            .ok_or_else(|| format!("flag {flag} needs a value"))
    };
    while let Some(arg) = it.next() {
        match arg.as_str() {
            "--problem" => parsed.problem = Some(next_value(arg, &mut it)?),
            "--dof" => {
                let v = next_value(arg, &mut it)?;
                parsed.dof = Some(parse_count(&v)?);
            }
            "--dofs" => {
                let v = next_value(arg, &mut it)?;
                parsed.dofs = v
                    .split(',')
                    .filter(|s| !s.is_empty())
                    .map(parse_count)
                    .collect::<Result<_, _>>()?;
            }
            "--rhos" => {
                let v = next_value(arg, &mut it)?;
                parsed.rhos = v
                    .split(',')
                    .filter(|s| !s.is_empty())
                    .map(|s| s.parse::<f64>().map_err(|e| format!("bad rho '{s}': {e}")))
                    .collect::<Result<_, _>>()?;
            }
            "--out" => parsed.out = PathBuf::from(next_value(arg, &mut it)?),
            "--emit" => {
                let v = next_value(arg, &mut it)?;
                parsed.emit = Some(Emit::parse(&v).map_err(|e| e.to_string())?);
            }
            "--config" => parsed.config = Some(PathBuf::from(next_value(arg, &mut it)?)),
            "--rho0" | "--tau" | "--theta" => {
                let key = format!("alm.{}", &arg[2..]);
                let v = next_value(arg, &mut it)?;
                let num: f64 = v.parse().map_err(|e| format!("bad value for {arg}: {e}"))?;
                parsed
                    .overrides
                    .set(&key, serde_json::json!(num))
                    .map_err(|e| e.to_string())?;
            }
            "--on-inner-fail" => {
                let v = next_value(arg, &mut it)?;
                parsed
                    .overrides
                    .set("alm.on_inner_fail", serde_json::json!(v))
                    .map_err(|e| e.to_string())?;
            }
            "--set" => {
                let v = next_value(arg, &mut it)?;
                let (key, value) = v
                    .split_once('=')
                    .ok_or_else(|| format!("--set expects KEY=VALUE, got '{v}'"))?;
                let json =
                    serde_json::from_str(value).unwrap_or_else(|_| serde_json::json!(value));
                parsed.overrides.set(key, json).map_err(|e| e.to_string())?;
            }
            "-h" | "--help" => {
                print!("{USAGE}");
                std::process::exit(0);
            }
            other => return Err(format!("unknown flag '{other}'; see --help")),
        }
    }
    Ok(parsed)
}

fn parse_count(s: &str) -> Result<usize, String> {
    // Accept scientific notation like 1e4 for DOF targets.
    if let Ok(n) = s.parse::<usize>() {
        return Ok(n);
    }
    match s.parse::<f64>() {
        Ok(x) if x >= 1.0 && x.fract() == 0.0 && x <= 1e12 => Ok(x as usize),
        _ => Err(format!("bad count '{s}'")),
    }
}

fn dispatch(args: &[String]) -> Result<ExitCode, String> {
    let Some(command) = args.first() else {
        print!("{USAGE}");
        return Ok(ExitCode::from(1));
    };
    match command.as_str() {
        "run" => {
            let p = parse_flags(&args[1..])?;
            let problem = p.problem.ok_or("run needs --problem")?;
            let outcome = run(&RunConfig {
                problem,
                dof_target: p.dof,
                config_file: p.config,
                output_dir: p.out,
                emit: p.emit,
                overrides: p.overrides,
            })
            .map_err(|e| e.to_string())?;
            let s = &outcome.report.summary;
            println!(
                "{}: n_dof={} outer={} inner={} rho_max={:.3e} mu_l1={:.6} max_violation={:.3e} converged={}",
                outcome.benchmark.name(),
                outcome.n_dof,
                s.outer_iters,
                s.inner_iters_total,
                s.rho_max,
                s.mu_l1,
                s.max_violation,
                outcome.converged()
            );
            if let Some(e) = &outcome.errors {
                println!(
                    "errors: err_y={:.6e} err_u={:.6e} err_p={:.6e}",
                    e.err_y, e.err_u, e.err_p
                );
            }
            for path in &outcome.written {
                println!("wrote {}", path.display());
            }
            Ok(if outcome.converged() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            })
        }
        "study" => {
            let p = parse_flags(&args[1..])?;
            let problem = p.problem.ok_or("study needs --problem")?;
            if p.dofs.is_empty() {
                return Err("study needs --dofs N1,N2,...".into());
            }
            let outcome = convergence_study(&StudyConfig {
                problem,
                dof_list: p.dofs,
                config_file: p.config,
                output_dir: p.out,
                overrides: p.overrides,
            })
            .map_err(|e| e.to_string())?;
            for row in &outcome.rows {
                match &row.failure {
                    Some(msg) => println!("dof={}: failed: {msg}", row.dof),
                    None => println!(
                        "dof={} outer={} inner={} rho_max={:.3e} mu_l1={:.6}{}",
                        row.dof,
                        row.it_outer.unwrap_or(0),
                        row.it_inner.unwrap_or(0),
                        row.rho_max.unwrap_or(f64::NAN),
                        row.mu_l1.unwrap_or(f64::NAN),
                        match (row.err_y, row.err_u) {
                            (Some(ey), Some(eu)) => format!(" err_y={ey:.3e} err_u={eu:.3e}"),
                            _ => String::new(),
                        }
                    ),
                }
            }
            if let Some(slope) = outcome.slope_err_u {
                println!("fitted slope of err_u vs dof: {slope:.4}");
            }
            for path in &outcome.written {
                println!("wrote {}", path.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        "rate" => {
            let p = parse_flags(&args[1..])?;
            let problem = p.problem.ok_or("rate needs --problem")?;
            if p.rhos.is_empty() {
                return Err("rate needs --rhos R1,R2,...".into());
            }
            let outcome = rate_diagnostic(&RateConfig {
                problem,
                rho_list: p.rhos,
                dof: p.dof.unwrap_or(1000),
                config_file: p.config,
                output_dir: p.out,
                overrides: p.overrides,
            })
            .map_err(|e| e.to_string())?;
            for row in &outcome.rows {
                println!("rho={:.3e} err_u={:.6e}", row.rho, row.err_u);
            }
            println!("{}", outcome.note);
            for path in &outcome.written {
                println!("wrote {}", path.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        "-h" | "--help" => {
            print!("{USAGE}");
            Ok(ExitCode::SUCCESS)
        }
        other => Err(format!("unknown command '{other}'; see --help")),
    }
}
