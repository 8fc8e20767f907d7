//! Error-versus-refinement study for the disk benchmark; writes study.csv
//! and study.json under out/.
//!
//!     cargo run --example convergence_study

use auglag::cli::{convergence_study, StudyConfig};

fn main() -> auglag::Result<()> {
    let outcome = convergence_study(&StudyConfig {
        problem: "example2".into(),
        dof_list: vec![100, 400, 1000],
        output_dir: "out/study-example2".into(),
        ..StudyConfig::default()
    })?;
    println!(
        "{:>6} {:>6} {:>6} {:>9} {:>8} {:>11} {:>11}",
        "dof", "outer", "inner", "rho_max", "mu_l1", "err_y", "err_u"
    );
    for row in &outcome.rows {
        println!(
            "{:>6} {:>6} {:>6} {:>9.1e} {:>8.4} {:>11.3e} {:>11.3e}",
            row.dof,
            row.it_outer.unwrap_or(0),
            row.it_inner.unwrap_or(0),
            row.rho_max.unwrap_or(f64::NAN),
            row.mu_l1.unwrap_or(f64::NAN),
            row.err_y.unwrap_or(f64::NAN),
            row.err_u.unwrap_or(f64::NAN),
        );
    }
    if let Some(slope) = outcome.slope_err_u {
        println!("fitted log-log slope of err_u vs dof: {slope:.3}");
    }
    for path in &outcome.written {
        println!("wrote {}", path.display());
    }
    Ok(())
}
