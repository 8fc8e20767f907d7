//! Acceptance suite: every release criterion runs at its stated tolerance
//! and prints one pass/fail line (custom harness, so the lines appear in
//! every `cargo test` run). Heavy benchmark runs are shared between
//! criteria through a cache.
//!
//!     cargo test --test acceptance

use auglag::alm::{outer_loop, solve_subproblem, AlReport, Iterate, SsnConfig};
use auglag::cli::{run, RunConfig};
use auglag::fem::{assemble_stiffness, interpolate, Field, FemSpace};
use auglag::linalg::{dense_solve, solve, SolveConfig};
use auglag::mesh::generate_rect_mesh;
use auglag::pde::{
    al_cost, al_cost_and_gradient, al_reduced_gradient, solve_state, NewtonConfig, Nonlinearity,
    Problem, ProblemData,
};
use auglag::problems::{error_report, Benchmark, ErrorReport};
use auglag::rng::SplitMix64;
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;
use std::time::{Duration, Instant};

type Criterion = Result<String, String>;

struct CachedRun {
    report: AlReport,
    errors: Option<ErrorReport>,
    elapsed: Duration,
    n_dof: usize,
}

#[derive(Default)]
struct Cache {
    runs: BTreeMap<(String, usize), CachedRun>,
}

impl Cache {
    fn run(&mut self, bench: Benchmark, dof: usize) -> Result<&CachedRun, String> {
        let key = (bench.name().to_string(), dof);
        if !self.runs.contains_key(&key) {
            let started = Instant::now();
            let mesh = Arc::new(bench.mesh_for_dof(dof).map_err(|e| e.to_string())?);
            let n_dof = mesh.n_dof();
            let (data, exact) = bench.build(mesh).map_err(|e| e.to_string())?;
            let problem = Problem::new(data).map_err(|e| e.to_string())?;
            let report =
                outer_loop(&problem, &bench.alm_defaults()).map_err(|e| e.to_string())?;
            let errors = match &exact {
                Some(e) => Some(
                    error_report(
                        &report.final_iterate.y,
                        &report.final_iterate.u,
                        &report.final_iterate.p,
                        e,
                        problem.space(),
                    )
                    .map_err(|e| e.to_string())?,
                ),
                None => None,
            };
            self.runs.insert(
                key.clone(),
                CachedRun {
                    report,
                    errors,
                    elapsed: started.elapsed(),
                    n_dof,
                },
            );
        }
        Ok(&self.runs[&key])
    }
}

fn l2_distance(space: &FemSpace, a: &[f64], b: &[f64]) -> f64 {
    let diff = Field::new(a.iter().zip(b).map(|(x, y)| x - y).collect()).unwrap();
    space.norm_l2(&diff)
}

/// Criterion 1: second-order L2 convergence of the linear Neumann solve
/// with a manufactured smooth solution; slope >= 1.9 across nx in {8..64}.
fn criterion_mms() -> Criterion {
    let started = Instant::now();
    let exact = |x: f64, y: f64| (PI * x).cos() * (PI * y).cos();
    let mut points = Vec::new();
    for nx in [8usize, 16, 32, 64] {
        let mesh = Arc::new(
            generate_rect_mesh(0.0, 1.0, 0.0, 1.0, nx, nx).map_err(|e| e.to_string())?,
        );
        let space = FemSpace::new(mesh.clone());
        let a0 = Field::constant(mesh.n_dof(), 1.0).unwrap();
        let k = assemble_stiffness(&mesh, &a0).map_err(|e| e.to_string())?;
        let g = space
            .interpolate(|x, y| (2.0 * PI * PI + 1.0) * exact(x, y))
            .unwrap();
        let rhs = space.mass().matvec(g.values()).unwrap();
        let sol = solve(&k, &rhs, &SolveConfig::default()).map_err(|e| e.to_string())?;
        let err = l2_distance(&space, &sol.x, space.interpolate(exact).unwrap().values());
        points.push(((1.0 / nx as f64).ln(), err.ln()));
    }
    // Least-squares slope of ln(err) against ln(h).
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let slope = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
        / points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum::<f64>();
    let elapsed = started.elapsed();
    if slope < 1.9 {
        return Err(format!("L2 slope {slope:.3} < 1.9"));
    }
    if elapsed > Duration::from_secs(10) {
        return Err(format!("runtime {elapsed:.1?} exceeds 10 s"));
    }
    Ok(format!("L2 slope {slope:.3} over nx in 8..64, {elapsed:.1?}"))
}

/// Criterion 2: constant-solution oracle for the exponential nonlinearity.
fn criterion_state_oracle() -> Criterion {
    let started = Instant::now();
    // Independent oracle: bisection on t + exp(t) = 0.
    let root = {
        let (mut lo, mut hi) = (-1.0, 0.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid + f64::exp(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    };
    if (root + 0.567_143_290_4).abs() > 1e-9 {
        return Err(format!("bisection oracle sanity failed: {root}"));
    }
    let mesh = Arc::new(generate_rect_mesh(0.0, 1.0, 0.0, 1.0, 16, 16).unwrap());
    let n = mesh.n_dof();
    let (u_lower, u_upper) = ProblemData::unbounded_controls(n);
    let problem = Problem::new(ProblemData {
        a0: Field::constant(n, 1.0).unwrap(),
        nonlinearity: Nonlinearity::exp(),
        y_d: Field::zeros(n),
        f: Field::zeros(n),
        psi: Field::constant(n, 1.0).unwrap(),
        u_lower,
        u_upper,
        alpha: 1.0,
        mesh,
    })
    .unwrap();
    let state = solve_state(&problem, &Field::zeros(n), None, &NewtonConfig::default())
        .map_err(|e| e.to_string())?;
    let worst = state
        .y
        .values()
        .iter()
        .map(|v| (v - root).abs())
        .fold(0.0_f64, f64::max);
    let elapsed = started.elapsed();
    if worst > 1e-8 {
        return Err(format!("max deviation {worst:.3e} > 1e-8"));
    }
    if elapsed > Duration::from_secs(1) {
        return Err(format!("runtime {elapsed:.1?} exceeds 1 s"));
    }
    Ok(format!(
        "constant state within {worst:.2e} of {root:.10}, {elapsed:.1?}"
    ))
}

/// Criterion 3: adjoint gradient versus central differences on a 100-DOF
/// instance of the first benchmark, 10 random directions.
fn criterion_gradient() -> Criterion {
    let started = Instant::now();
    let bench = Benchmark::Example1;
    let mesh = Arc::new(bench.mesh_for_dof(100).unwrap());
    let (data, _) = bench.build(mesh).unwrap();
    let problem = Problem::new(data).unwrap();
    let n = problem.n_dof();
    let cfg = NewtonConfig::default();
    let mut rng = SplitMix64::new(2024);
    let u = Field::new((0..n).map(|_| 0.1 * rng.uniform(-1.0, 1.0)).collect()).unwrap();
    let mu = Field::constant(n, 0.3).unwrap();
    let rho = 1.0;
    // Kink-free check: the penalty argument must keep a margin at all nodes.
    let y = solve_state(&problem, &u, None, &cfg).map_err(|e| e.to_string())?.y;
    let margin = (0..n)
        .map(|i| (mu.values()[i] + rho * (y.values()[i] - problem.data().psi.values()[i])).abs())
        .fold(f64::INFINITY, f64::min);
    if margin < 1e-2 {
        return Err(format!("instance sits on a kink (margin {margin:.2e})"));
    }
    let g = al_reduced_gradient(&problem, &u, &mu, rho, &cfg).map_err(|e| e.to_string())?;
    let eps = 1e-4;
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let h = Field::new((0..n).map(|_| rng.uniform(-1.0, 1.0)).collect()).unwrap();
        let shifted = |s: f64| {
            Field::new(
                u.values()
                    .iter()
                    .zip(h.values())
                    .map(|(a, b)| a + s * b)
                    .collect::<Vec<f64>>(),
            )
            .unwrap()
        };
        let plus = al_cost(&problem, &shifted(eps), &mu, rho, &cfg).map_err(|e| e.to_string())?;
        let minus =
            al_cost(&problem, &shifted(-eps), &mu, rho, &cfg).map_err(|e| e.to_string())?;
        let fd = (plus - minus) / (2.0 * eps);
        let gh = problem.space().inner_l2(&g, &h);
        worst = worst.max((fd - gh).abs() / (1.0 + gh.abs()));
    }
    let elapsed = started.elapsed();
    if worst > 1e-5 {
        return Err(format!("relative gradient error {worst:.3e} > 1e-5"));
    }
    if elapsed > Duration::from_secs(30) {
        return Err(format!("runtime {elapsed:.1?} exceeds 30 s"));
    }
    Ok(format!(
        "10 directions, worst relative error {worst:.2e} (margin {margin:.2}), {elapsed:.1?}"
    ))
}

/// Example-1 family data on the unit square; alpha and control bounds are
/// parameters so the projected-gradient oracle stays well conditioned.
fn family_instance(nx: usize, nonlinearity: Nonlinearity, alpha: f64, bounds: (f64, f64), psi: f64) -> Problem {
    let mesh = Arc::new(generate_rect_mesh(0.0, 1.0, 0.0, 1.0, nx, nx).unwrap());
    let n = mesh.n_dof();
    let y_d = interpolate(
        |x, y| 8.0 * (PI * x).sin() * (PI * y).sin() - 4.0,
        &mesh,
    )
    .unwrap();
    Problem::new(ProblemData {
        a0: Field::constant(n, 1.0).unwrap(),
        nonlinearity,
        y_d,
        f: Field::zeros(n),
        psi: Field::constant(n, psi).unwrap(),
        u_lower: vec![bounds.0; n],
        u_upper: vec![bounds.1; n],
        alpha,
        mesh,
    })
    .unwrap()
}

/// Projected gradient descent with Barzilai-Borwein steps and nonmonotone
/// backtracking; the independent oracle for the sub-problem solves.
fn projected_gradient(problem: &Problem, mu: &Field, rho: f64, tol: f64, max_iter: usize) -> Field {
    let n = problem.n_dof();
    let cfg = NewtonConfig::default();
    let mut u = Field::zeros(n);
    let (mut cost, mut grad, state) =
        al_cost_and_gradient(problem, &u, mu, rho, &cfg, None).unwrap();
    let mut warm = state.y;
    let mut step = 1.0;
    let mut prev: Option<(Field, Field)> = None;
    let mut recent = std::collections::VecDeque::from([cost]);
    for _ in 0..max_iter {
        if let Some((u_old, g_old)) = &prev {
            let (mut sy, mut ss) = (0.0, 0.0);
            for i in 0..n {
                let s = u.values()[i] - u_old.values()[i];
                let dg = grad.values()[i] - g_old.values()[i];
                sy += s * dg;
                ss += s * s;
            }
            if sy > 1e-300 {
                step = (ss / sy).clamp(1e-8, 1e8);
            }
        }
        let reference = recent.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut t = step;
        let mut accepted = None;
        for _ in 0..60 {
            let cand = Field::new(problem.project_control(
                &(0..n)
                    .map(|i| u.values()[i] - t * grad.values()[i])
                    .collect::<Vec<f64>>(),
            ))
            .unwrap();
            let decrease: f64 = (0..n)
                .map(|i| grad.values()[i] * (cand.values()[i] - u.values()[i]))
                .sum();
            match al_cost_and_gradient(problem, &cand, mu, rho, &cfg, Some(&warm)) {
                Ok((c, g, s)) if c <= reference + 1e-4 * decrease => {
                    accepted = Some((cand, c, g, s.y));
                    break;
                }
                _ => t *= 0.5,
            }
        }
        let Some((cand, c, g, y)) = accepted else { break };
        let moved: f64 = (0..n)
            .map(|i| (cand.values()[i] - u.values()[i]).powi(2))
            .sum::<f64>()
            .sqrt();
        prev = Some((u, grad));
        u = cand;
        cost = c;
        grad = g;
        warm = y;
        recent.push_back(cost);
        if recent.len() > 10 {
            recent.pop_front();
        }
        let proj = problem.project_control(
            &(0..n)
                .map(|i| u.values()[i] - grad.values()[i])
                .collect::<Vec<f64>>(),
        );
        let res: f64 = (0..n)
            .map(|i| (u.values()[i] - proj[i]).powi(2))
            .sum::<f64>()
            .sqrt();
        if res <= tol && moved <= tol {
            break;
        }
    }
    u
}

/// Criterion 4: sub-problem oracle equivalence on a ~50-DOF mesh.
fn criterion_subproblem_oracles() -> Criterion {
    // (a) Semismooth Newton versus projected gradient. The family instance
    // keeps alpha at 1e-2: a first-order oracle cannot certify 1e-6
    // distances at the benchmark's 1e-5 (reduced-Hessian conditioning),
    // while the Newton path is identical code for every alpha.
    let problem = family_instance(6, Nonlinearity::exp(), 1e-2, (-3.0, 3.0), 1.0);
    let n = problem.n_dof();
    let mu = Field::constant(n, 0.1).unwrap();
    let rho = 4.0;
    let ssn = solve_subproblem(
        &problem,
        &mu,
        rho,
        &Iterate::zeros(n),
        &SsnConfig {
            tol: 1e-10,
            max_iter: 100,
        },
    )
    .map_err(|e| e.to_string())?;
    let pg = projected_gradient(&problem, &mu, rho, 1e-11, 50_000);
    let dist = l2_distance(problem.space(), ssn.iterate.u.values(), pg.values());
    if dist > 1e-6 {
        return Err(format!("SSN vs projected gradient distance {dist:.3e} > 1e-6"));
    }
    // Controls must actually touch the box for the test to mean anything.
    let active = ssn
        .iterate
        .u
        .values()
        .iter()
        .filter(|&&v| (v - 3.0).abs() < 1e-9 || (v + 3.0).abs() < 1e-9)
        .count();
    if active == 0 {
        return Err("control bounds never active; instance too weak".into());
    }

    // (b) Linear case (d = 0): with the active sets frozen at the solution
    // the KKT system is linear; a dense LU solve of G z = -F(0) is exact.
    let linear = family_instance(6, Nonlinearity::zero(), 1e-3, (-50.0, 50.0), 0.2);
    let nl = linear.n_dof();
    let mu0 = Field::constant(nl, 0.05).unwrap();
    let rho_l = 10.0;
    let sub = solve_subproblem(
        &linear,
        &mu0,
        rho_l,
        &Iterate::zeros(nl),
        &SsnConfig {
            tol: 1e-12,
            max_iter: 100,
        },
    )
    .map_err(|e| e.to_string())?;
    let sets = auglag::alm::compute_active_sets(
        &sub.iterate.y,
        &sub.iterate.p,
        &mu0,
        rho_l,
        &linear,
    );
    // Dense assembly of the 3n x 3n block system from the model operators.
    let m = 3 * nl;
    let kd = linear
        .linearized_operator(&Field::zeros(nl))
        .unwrap()
        .to_dense();
    let md = linear.space().mass().to_dense();
    let lumped = linear.space().lumped();
    let alpha = linear.alpha();
    let mut g = vec![0.0; m * m];
    let mut rhs = vec![0.0; m];
    let data = linear.data();
    for i in 0..nl {
        for j in 0..nl {
            g[i * m + j] = kd[i * nl + j];
            g[i * m + nl + j] = -md[i * nl + j];
            let mut w = -md[i * nl + j];
            if i == j && sets.penalty[i] {
                w -= rho_l * lumped[i];
            }
            g[(nl + i) * m + j] = w;
            g[(nl + i) * m + 2 * nl + j] = kd[i * nl + j];
            g[(2 * nl + i) * m + nl + j] = md[i * nl + j];
            let pi_j = if sets.lower[j] || sets.upper[j] { 0.0 } else { 1.0 };
            g[(2 * nl + i) * m + 2 * nl + j] = md[i * nl + j] * pi_j / alpha;
        }
        // F(0) with the frozen sets: F1 = 0 (f = 0, d = 0), F2 and F3 below.
        let mut f2 = 0.0;
        for j in 0..nl {
            f2 += md[i * nl + j] * data.y_d.values()[j];
        }
        if sets.penalty[i] {
            f2 -= lumped[i] * (mu0.values()[i] - rho_l * data.psi.values()[i]);
        }
        rhs[nl + i] = -f2;
        let mut f3 = 0.0;
        for j in 0..nl {
            let bound = if sets.lower[j] {
                data.u_lower[j]
            } else if sets.upper[j] {
                data.u_upper[j]
            } else {
                0.0
            };
            f3 += md[i * nl + j] * (-bound);
        }
        rhs[2 * nl + i] = -f3;
    }
    let z = dense_solve(&g, &rhs, m).map_err(|e| e.to_string())?;
    let d_y = l2_distance(linear.space(), sub.iterate.y.values(), &z[0..nl]);
    let d_u = l2_distance(linear.space(), sub.iterate.u.values(), &z[nl..2 * nl]);
    let d_p = l2_distance(linear.space(), sub.iterate.p.values(), &z[2 * nl..3 * nl]);
    let linear_dist = d_y.max(d_u).max(d_p);
    // Stability: the dense solution reproduces the frozen active sets.
    let sets_after = auglag::alm::compute_active_sets(
        &Field::new(z[0..nl].to_vec()).unwrap(),
        &Field::new(z[2 * nl..3 * nl].to_vec()).unwrap(),
        &mu0,
        rho_l,
        &linear,
    );
    if sets_after != sets {
        return Err("active sets not stable at the linear solution".into());
    }
    if linear_dist > 1e-8 {
        return Err(format!("linear dense-KKT distance {linear_dist:.3e} > 1e-8"));
    }
    Ok(format!(
        "SSN vs PG distance {dist:.2e} ({active} active bound nodes); dense linear KKT distance {linear_dist:.2e}"
    ))
}

/// Criterion 5: the update-rule contract on all three benchmarks at 1e3 DOF.
fn criterion_contract(cache: &mut Cache) -> Criterion {
    let mut details = Vec::new();
    for bench in Benchmark::all() {
        let run = cache.run(bench, 1000)?;
        if !run.report.converged() {
            return Err(format!("{} did not converge: {:?}", bench.name(), run.report.termination));
        }
        run.report
            .check_update_contract(&bench.alm_defaults())
            .map_err(|e| format!("{}: {e}", bench.name()))?;
        if let Some(i) = run
            .report
            .final_mu
            .values()
            .iter()
            .position(|&v| v < 0.0)
        {
            return Err(format!("{}: final multiplier negative at node {i}", bench.name()));
        }
        details.push(format!(
            "{}: {} steps, {} successful",
            bench.name(),
            run.report.records.len(),
            run.report.summary.successful_steps
        ));
    }
    Ok(details.join("; "))
}

/// Criterion 6: final KKT quality at 1e3 DOF for all three benchmarks.
fn criterion_kkt_quality(cache: &mut Cache) -> Criterion {
    let mut details = Vec::new();
    for bench in Benchmark::all() {
        let run = cache.run(bench, 1000)?;
        let s = &run.report.summary;
        if s.max_violation > 1e-6 {
            return Err(format!("{}: max violation {:.3e} > 1e-6", bench.name(), s.max_violation));
        }
        if s.complementarity > 1e-6 {
            return Err(format!(
                "{}: complementarity {:.3e} > 1e-6",
                bench.name(),
                s.complementarity
            ));
        }
        // Projection identity of the final control against its adjoint.
        let mesh = Arc::new(bench.mesh_for_dof(1000).map_err(|e| e.to_string())?);
        let (data, _) = bench.build(mesh).map_err(|e| e.to_string())?;
        let problem = Problem::new(data).map_err(|e| e.to_string())?;
        let it = &run.report.final_iterate;
        let candidate: Vec<f64> = it
            .p
            .values()
            .iter()
            .map(|&p| -p / problem.alpha())
            .collect();
        let projected = problem.project_control(&candidate);
        let residual = it
            .u
            .values()
            .iter()
            .zip(&projected)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0_f64, f64::max);
        if residual > 1e-6 {
            return Err(format!(
                "{}: projection identity residual {residual:.3e} > 1e-6",
                bench.name()
            ));
        }
        if run.elapsed > Duration::from_secs(120) {
            return Err(format!("{}: runtime {:?} exceeds 2 min", bench.name(), run.elapsed));
        }
        details.push(format!(
            "{}: viol {:.1e}, compl {:.1e}, proj {:.1e}",
            bench.name(),
            s.max_violation,
            s.complementarity,
            residual
        ));
    }
    Ok(details.join("; "))
}

/// Criterion 7: iteration-history bands at 1e4 DOF.
fn criterion_table_bands(cache: &mut Cache) -> Criterion {
    let bands: [(Benchmark, (usize, usize), (f64, f64)); 3] = [
        (Benchmark::Example1, (8, 20), (0.28, 0.48)),
        (Benchmark::Example2, (10, 22), (0.30, 0.60)),
        (Benchmark::Example3, (9, 20), (0.83, 1.13)),
    ];
    let mut details = Vec::new();
    let mut total = Duration::ZERO;
    for (bench, outer_band, mu_band) in bands {
        let run = cache.run(bench, 10_000)?;
        total += run.elapsed;
        if !run.report.converged() {
            return Err(format!("{}: did not converge", bench.name()));
        }
        let outer = run.report.summary.outer_iters;
        let mu = run.report.summary.mu_l1;
        if outer < outer_band.0 || outer > outer_band.1 {
            return Err(format!(
                "{}: outer iterations {outer} outside [{}, {}]",
                bench.name(),
                outer_band.0,
                outer_band.1
            ));
        }
        if mu < mu_band.0 || mu > mu_band.1 {
            return Err(format!(
                "{}: |mu|_L1 {mu:.4} outside [{}, {}]",
                bench.name(),
                mu_band.0,
                mu_band.1
            ));
        }
        if bench == Benchmark::Example1 {
            let inner = run.report.summary.inner_iters_total;
            if !(20..=80).contains(&inner) {
                return Err(format!("example1: accumulated inner iterations {inner} outside [20, 80]"));
            }
            let rho = run.report.summary.rho_final;
            if !(5e3..=5e9).contains(&rho) {
                return Err(format!("example1: final rho {rho:.1e} outside [5e3, 5e9]"));
            }
        }
        details.push(format!(
            "{} ({} dof): outer {outer} in [{},{}], |mu|_L1 {mu:.3} in [{},{}] ({}s)",
            bench.name(),
            run.n_dof,
            outer_band.0,
            outer_band.1,
            mu_band.0,
            mu_band.1,
            run.elapsed.as_secs()
        ));
    }
    if total > Duration::from_secs(900) {
        return Err(format!("total runtime {total:?} exceeds 15 min"));
    }
    Ok(details.join("; "))
}

/// Criterion 8: error decay across DOF in {1e2, 1e3, 1e4}.
fn criterion_error_decay(cache: &mut Cache) -> Criterion {
    let errs = |cache: &mut Cache, bench: Benchmark| -> Result<Vec<ErrorReport>, String> {
        [100usize, 1000, 10_000]
            .iter()
            .map(|&dof| {
                cache.run(bench, dof)?.errors.as_ref().copied().ok_or_else(|| {
                    format!("{} at {dof}: no error report", bench.name())
                })
            })
            .collect()
    };
    let ex2 = errs(cache, Benchmark::Example2)?;
    for w in ex2.windows(2) {
        if !(w[1].err_u < w[0].err_u && w[1].err_y < w[0].err_y) {
            return Err(format!(
                "example2 errors not strictly decreasing: err_u {:?}, err_y {:?}",
                ex2.iter().map(|e| e.err_u).collect::<Vec<_>>(),
                ex2.iter().map(|e| e.err_y).collect::<Vec<_>>()
            ));
        }
    }
    let reduction = ex2[0].err_u / ex2[2].err_u;
    if reduction < 3.0 {
        return Err(format!("example2 err_u total reduction {reduction:.2} < 3"));
    }
    let step_ratio = ex2[1].err_u / ex2[2].err_u;
    if step_ratio < 2.0 {
        return Err(format!(
            "example2 err_u ratio between 1e3 and 1e4 DOF {step_ratio:.2} < 2"
        ));
    }
    let ex3 = errs(cache, Benchmark::Example3)?;
    for w in ex3.windows(2) {
        if !(w[1].err_y < w[0].err_y) {
            return Err(format!(
                "example3 err_y not strictly decreasing: {:?}",
                ex3.iter().map(|e| e.err_y).collect::<Vec<_>>()
            ));
        }
    }
    Ok(format!(
        "example2 err_u {:.2e} -> {:.2e} -> {:.2e} (reduction {reduction:.0}x), example3 err_y {:.2e} -> {:.2e} -> {:.2e}",
        ex2[0].err_u, ex2[1].err_u, ex2[2].err_u, ex3[0].err_y, ex3[1].err_y, ex3[2].err_y
    ))
}

/// Criterion 9: multiplier L1 norms stay bounded under refinement while the
/// penalty parameter keeps growing.
fn criterion_l1_boundedness(cache: &mut Cache) -> Criterion {
    let mut details = Vec::new();
    for bench in Benchmark::all() {
        let max_mu = |report: &AlReport| {
            report
                .records
                .iter()
                .map(|r| r.mu_l1)
                .fold(0.0_f64, f64::max)
        };
        let (mu_coarse, rho_coarse) = {
            let run = cache.run(bench, 1000)?;
            (max_mu(&run.report), run.report.summary.rho_max)
        };
        let (mu_fine, rho_fine) = {
            let run = cache.run(bench, 10_000)?;
            (max_mu(&run.report), run.report.summary.rho_max)
        };
        let mu_ratio = mu_fine / mu_coarse;
        let rho_ratio = rho_fine / rho_coarse;
        if !(mu_ratio < 3.0) {
            return Err(format!(
                "{}: max_k |mu_k|_L1 grew by {mu_ratio:.2} >= 3 under refinement",
                bench.name()
            ));
        }
        if !(rho_ratio >= 10.0) {
            return Err(format!(
                "{}: rho_max grew only {rho_ratio:.2}x (<10x): {rho_coarse:.1e} -> {rho_fine:.1e}",
                bench.name()
            ));
        }
        details.push(format!(
            "{}: mu x{mu_ratio:.2}, rho x{rho_ratio:.0}",
            bench.name()
        ));
    }
    Ok(details.join("; "))
}

/// Criterion 10: two identical runs produce byte-identical report.csv.
fn criterion_determinism() -> Criterion {
    let base = std::env::temp_dir().join("auglag-acceptance-determinism");
    let mut outputs = Vec::new();
    for tag in ["a", "b"] {
        let dir = base.join(tag);
        let _ = std::fs::remove_dir_all(&dir);
        let outcome = run(&RunConfig {
            problem: "example1".into(),
            dof_target: Some(100),
            output_dir: dir.clone(),
            ..RunConfig::default()
        })
        .map_err(|e| e.to_string())?;
        if !outcome.converged() {
            return Err("determinism run did not converge".into());
        }
        outputs.push(std::fs::read(dir.join("report.csv")).map_err(|e| e.to_string())?);
    }
    if outputs[0] != outputs[1] {
        return Err("report.csv differs between identical runs".into());
    }
    Ok(format!("byte-identical report.csv ({} bytes)", outputs[0].len()))
}

fn main() {
    let started = Instant::now();
    let mut cache = Cache::default();
    let criteria: Vec<(u32, &str, Criterion)> = vec![
        (1, "MMS convergence order", criterion_mms()),
        (2, "state-solver oracle", criterion_state_oracle()),
        (3, "gradient check", criterion_gradient()),
        (4, "sub-problem oracle equivalence", criterion_subproblem_oracles()),
        (5, "update-rule contract", criterion_contract(&mut cache)),
        (6, "final KKT quality", criterion_kkt_quality(&mut cache)),
        (7, "iteration-history bands at 1e4 DOF", criterion_table_bands(&mut cache)),
        (8, "error decay under refinement", criterion_error_decay(&mut cache)),
        (9, "L1 boundedness vs penalty growth", criterion_l1_boundedness(&mut cache)),
        (10, "determinism", criterion_determinism()),
    ];
    let mut failures = 0;
    for (id, name, outcome) in &criteria {
        match outcome {
            Ok(details) => println!("criterion {id:2} ({name}): PASS - {details}"),
            Err(details) => {
                println!("criterion {id:2} ({name}): FAIL - {details}");
                failures += 1;
            }
        }
    }
    println!(
        "acceptance: {} of {} criteria passed in {:.1?}",
        criteria.len() - failures,
        criteria.len(),
        started.elapsed()
    );
    if failures > 0 {
        std::process::exit(1);
    }
}
