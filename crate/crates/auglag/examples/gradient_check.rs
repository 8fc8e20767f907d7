//! Adjoint-based reduced gradient of the augmented cost versus central
//! finite differences, on the first benchmark's data.
//!
//!     cargo run --example gradient_check

use auglag::fem::Field;
use auglag::pde::{al_cost, al_reduced_gradient, NewtonConfig, Problem};
use auglag::problems::Benchmark;
use auglag::rng::SplitMix64;
use std::sync::Arc;

fn main() -> auglag::Result<()> {
    let bench = Benchmark::Example1;
    let mesh = Arc::new(bench.mesh_for_dof(100)?);
    let (data, _) = bench.build(mesh)?;
    let problem = Problem::new(data)?;
    let n = problem.n_dof();
    let cfg = NewtonConfig::default();

    let mut rng = SplitMix64::new(7);
    let u = Field::new((0..n).map(|_| 0.1 * rng.uniform(-1.0, 1.0)).collect())?;
    let mu = Field::constant(n, 0.3)?;
    let rho = 1.0;
    let g = al_reduced_gradient(&problem, &u, &mu, rho, &cfg)?;

    let eps = 1e-4;
    println!("{:>10} {:>14} {:>14} {:>10}", "direction", "fd", "adjoint", "rel err");
    for trial in 0..5 {
        let h = Field::new((0..n).map(|_| rng.uniform(-1.0, 1.0)).collect())?;
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
        let fd = (al_cost(&problem, &shifted(eps), &mu, rho, &cfg)?
            - al_cost(&problem, &shifted(-eps), &mu, rho, &cfg)?)
            / (2.0 * eps);
        let gh = problem.space().inner_l2(&g, &h);
        let rel = (fd - gh).abs() / (1.0 + gh.abs());
        println!("{trial:>10} {fd:>14.8e} {gh:>14.8e} {rel:>10.2e}");
    }
    Ok(())
}
