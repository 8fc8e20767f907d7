//! Newton solve of the semilinear state equation -Laplace y + y + exp(y) = u.
//! With u = 0 the solution is the constant root of t + exp(t) = 0, so the
//! solver output can be checked against scalar bisection.
//!
//!     cargo run --example state_solver

use auglag::fem::Field;
use auglag::mesh::generate_rect_mesh;
use auglag::pde::{solve_state, NewtonConfig, Nonlinearity, Problem, ProblemData};
use std::sync::Arc;

fn main() -> auglag::Result<()> {
    let mesh = Arc::new(generate_rect_mesh(0.0, 1.0, 0.0, 1.0, 32, 32)?);
    let n = mesh.n_dof();
    let (u_lower, u_upper) = ProblemData::unbounded_controls(n);
    let problem = Problem::new(ProblemData {
        a0: Field::constant(n, 1.0)?,
        nonlinearity: Nonlinearity::exp(),
        y_d: Field::zeros(n),
        f: Field::zeros(n),
        psi: Field::constant(n, 1.0)?,
        u_lower,
        u_upper,
        alpha: 1.0,
        mesh,
    })?;

    let state = solve_state(&problem, &Field::zeros(n), None, &NewtonConfig::default())?;
    println!("Newton residual history:");
    for (k, r) in state.residuals.iter().enumerate() {
        println!("  iter {k}: {r:.3e}");
    }

    // Scalar bisection oracle for t + exp(t) = 0.
    let (mut lo, mut hi) = (-1.0, 0.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid + f64::exp(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let root = 0.5 * (lo + hi);
    let worst = state
        .y
        .values()
        .iter()
        .map(|v| (v - root).abs())
        .fold(0.0_f64, f64::max);
    println!("bisection root: {root:.12}");
    println!("max nodal deviation from the constant solution: {worst:.3e}");
    Ok(())
}
