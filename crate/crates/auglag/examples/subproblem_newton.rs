//! Solve one augmented Lagrange sub-problem by the semismooth Newton method
//! and print the three stopping residuals and active-set sizes per step.
//!
//!     cargo run --example subproblem_newton

use auglag::alm::{compute_active_sets, solve_subproblem, Iterate, SsnConfig};
use auglag::fem::Field;
use auglag::pde::Problem;
use auglag::problems::Benchmark;
use std::sync::Arc;

fn main() -> auglag::Result<()> {
    let bench = Benchmark::Example1;
    let mesh = Arc::new(bench.mesh_for_dof(1000)?);
    let (data, _) = bench.build(mesh)?;
    let problem = Problem::new(data)?;
    let n = problem.n_dof();

    let mu = Field::zeros(n);
    let rho = 0.5;
    let sub = solve_subproblem(
        &problem,
        &mu,
        rho,
        &Iterate::zeros(n),
        &SsnConfig::default(),
    )?;
    println!("sub-problem solved in {} Newton steps", sub.inner_iters);
    println!("{:>5} {:>12} {:>12} {:>12}", "step", "r1", "r2", "r3");
    for (k, r) in sub.residuals.iter().enumerate() {
        println!("{:>5} {:>12.3e} {:>12.3e} {:>12.3e}", k + 1, r[0], r[1], r[2]);
    }
    let sets = compute_active_sets(&sub.iterate.y, &sub.iterate.p, &mu, rho, &problem);
    println!(
        "active sets at the solution: lower {}, upper {}, penalty {} of {n} nodes",
        sets.lower_count(),
        sets.upper_count(),
        sets.penalty_count()
    );
    Ok(())
}
