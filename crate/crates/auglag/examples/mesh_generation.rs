//! Generate the two mesh families, verify their basic quality, and write
//! one of them in the plain-text mesh format and as a VTK file.
//!
//!     cargo run --example mesh_generation

use auglag::io::{write_mesh_text, write_vtk};
use auglag::mesh::{generate_disk_mesh, generate_rect_mesh, Mesh};
use std::f64::consts::PI;

fn stats(label: &str, mesh: &Mesh) {
    println!(
        "{label}: {} nodes, {} triangles, {} boundary nodes, area {:.6}",
        mesh.n_dof(),
        mesh.triangles().len(),
        mesh.boundary_nodes().len(),
        mesh.total_area()
    );
}

fn main() -> auglag::Result<()> {
    let square = generate_rect_mesh(0.0, 1.0, 0.0, 1.0, 16, 16)?;
    stats("unit square 16x16", &square);

    for rings in [4usize, 8, 16, 32] {
        let disk = generate_disk_mesh(2.0, rings)?;
        let deficit = (4.0 * PI - disk.total_area()) / (4.0 * PI);
        println!(
            "disk with {rings:2} rings: {:5} nodes, relative area deficit {:.3e} (expected ~{:.3e})",
            disk.n_dof(),
            deficit,
            PI * PI / (54.0 * (rings * rings) as f64),
        );
    }

    let disk = generate_disk_mesh(2.0, 8)?;
    let out = std::path::Path::new("out");
    std::fs::create_dir_all(out)?;
    write_mesh_text(out.join("disk.txt"), &disk)?;
    write_vtk(out.join("disk.vtk"), &disk, "disk", &[])?;
    // Round-trip through the text format; boundary tags are recomputed.
    let reloaded = Mesh::from_text(&std::fs::read_to_string(out.join("disk.txt"))?)?;
    assert_eq!(reloaded.boundary_nodes(), disk.boundary_nodes());
    println!("wrote out/disk.txt and out/disk.vtk; text round-trip ok");
    Ok(())
}
