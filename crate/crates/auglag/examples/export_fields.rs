//! Solve the quintic benchmark coarsely and export the optimal state,
//! control, adjoint and multiplier as VTK point data and per-field CSV.
//!
//!     cargo run --example export_fields

use auglag::alm::outer_loop;
use auglag::io::{write_field_csv, write_vtk};
use auglag::pde::Problem;
use auglag::problems::Benchmark;
use std::sync::Arc;

fn main() -> auglag::Result<()> {
    let bench = Benchmark::Example3;
    let mesh = Arc::new(bench.mesh_for_dof(400)?);
    let (data, _) = bench.build(mesh.clone())?;
    let problem = Problem::new(data)?;
    let report = outer_loop(&problem, &bench.alm_defaults())?;
    println!(
        "{}: converged={} outer={} |mu|_L1={:.4}",
        bench.name(),
        report.converged(),
        report.summary.outer_iters,
        report.summary.mu_l1
    );

    let out = std::path::Path::new("out/fields-example3");
    std::fs::create_dir_all(out)?;
    write_vtk(
        out.join("solution.vtk"),
        &mesh,
        bench.name(),
        &[
            ("y", &report.final_iterate.y),
            ("u", &report.final_iterate.u),
            ("p", &report.final_iterate.p),
            ("mu", &report.final_mu),
        ],
    )?;
    for (name, field) in [
        ("y", &report.final_iterate.y),
        ("u", &report.final_iterate.u),
        ("p", &report.final_iterate.p),
        ("mu", &report.final_mu),
    ] {
        write_field_csv(out.join(format!("{name}.csv")), &mesh, field)?;
    }
    println!("wrote VTK and CSV fields under {}", out.display());
    Ok(())
}
