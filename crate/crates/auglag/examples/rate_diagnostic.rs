//! Penalty-rate diagnostic: control error after one sub-problem solve per
//! penalty value, with the multiplier held at zero. The fitted slope is an
//! empirical counterpart of the theoretical decay exponent 1/8 in 2D.
//!
//!     cargo run --example rate_diagnostic

use auglag::cli::{rate_diagnostic, RateConfig};

fn main() -> auglag::Result<()> {
    // Moderate penalties: past ~1e2 the discretization error floor of this
    // mesh hides the rho dependence and the fitted slope flattens out.
    let outcome = rate_diagnostic(&RateConfig {
        problem: "example2".into(),
        rho_list: vec![0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 64.0, 256.0],
        dof: 1000,
        output_dir: "out/rate-example2".into(),
        ..RateConfig::default()
    })?;
    println!("{:>10} {:>12}", "rho", "err_u");
    for row in &outcome.rows {
        println!("{:>10.1e} {:>12.4e}", row.rho, row.err_u);
    }
    println!("{}", outcome.note);
    for path in &outcome.written {
        println!("wrote {}", path.display());
    }
    Ok(())
}
