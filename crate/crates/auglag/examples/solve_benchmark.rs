//! Full augmented Lagrange outer loop on each built-in benchmark at a
//! moderate discretization, printing the iteration history.
//!
//!     cargo run --example solve_benchmark

use auglag::alm::outer_loop;
use auglag::pde::Problem;
use auglag::problems::{error_report, Benchmark};
use std::sync::Arc;

fn main() -> auglag::Result<()> {
    for bench in Benchmark::all() {
        let mesh = Arc::new(bench.mesh_for_dof(1000)?);
        let (data, exact) = bench.build(mesh)?;
        let problem = Problem::new(data)?;
        let report = outer_loop(&problem, &bench.alm_defaults())?;
        println!("=== {} at {} nodes ===", bench.name(), problem.n_dof());
        println!(
            "{:>3} {:>3} {:>8} {:>12} {:>5} {:>6} {:>9}",
            "k", "n", "rho", "R_k", "succ", "inner", "mu_l1"
        );
        for r in &report.records {
            println!(
                "{:>3} {:>3} {:>8.1e} {:>12.4e} {:>5} {:>6} {:>9.4}",
                r.k, r.n, r.rho, r.r_k, r.successful, r.inner_iters, r.mu_l1
            );
        }
        let s = &report.summary;
        println!(
            "converged={} outer={} inner total={} rho_max={:.1e} |mu|_L1={:.4}",
            s.converged, s.outer_iters, s.inner_iters_total, s.rho_max, s.mu_l1
        );
        if let Some(exact) = &exact {
            let e = error_report(
                &report.final_iterate.y,
                &report.final_iterate.u,
                &report.final_iterate.p,
                exact,
                problem.space(),
            )?;
            println!(
                "errors vs exact solution: y {:.3e}, u {:.3e}, p {:.3e}",
                e.err_y, e.err_u, e.err_p
            );
        }
        println!();
    }
    Ok(())
}
