//! Manufactured-solution convergence order of the P1 discretization for the
//! linear Neumann problem -Laplace y + y = g on the unit square.
//!
//!     cargo run --example mms_convergence

use auglag::fem::{assemble_stiffness, Field, FemSpace};
use auglag::linalg::{solve, SolveConfig};
use auglag::mesh::generate_rect_mesh;
use std::f64::consts::PI;
use std::sync::Arc;

fn main() -> auglag::Result<()> {
    let exact = |x: f64, y: f64| (PI * x).cos() * (PI * y).cos();
    let source = move |x: f64, y: f64| (2.0 * PI * PI + 1.0) * exact(x, y);
    let mut previous: Option<f64> = None;
    println!("{:>5} {:>12} {:>8}", "nx", "l2 error", "rate");
    for nx in [8usize, 16, 32, 64] {
        let mesh = Arc::new(generate_rect_mesh(0.0, 1.0, 0.0, 1.0, nx, nx)?);
        let space = FemSpace::new(mesh.clone());
        let a0 = Field::constant(mesh.n_dof(), 1.0)?;
        let k = assemble_stiffness(&mesh, &a0)?;
        let rhs = space.mass().matvec(space.interpolate(source)?.values())?;
        let y = solve(&k, &rhs, &SolveConfig::default())?.x;
        let exact_field = space.interpolate(exact)?;
        let diff = Field::new(
            y.iter()
                .zip(exact_field.values())
                .map(|(a, b)| a - b)
                .collect(),
        )?;
        let err = space.norm_l2(&diff);
        match previous {
            Some(prev) => println!("{nx:>5} {err:>12.4e} {:>8.3}", (prev / err).log2()),
            None => println!("{nx:>5} {err:>12.4e} {:>8}", "-"),
        }
        previous = Some(err);
    }
    println!("second-order convergence: the rate column approaches 2");
    Ok(())
}
