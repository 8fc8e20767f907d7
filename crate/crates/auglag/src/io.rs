//! Field export: legacy ASCII VTK unstructured grids and per-node CSV.

use crate::error::{invalid, Result};
use crate::fem::Field;
use crate::mesh::Mesh;
use std::fmt::Write as _;
use std::path::Path;

/// Render a mesh with named nodal scalar fields as a legacy ASCII VTK
/// UNSTRUCTURED_GRID with POINT_DATA scalars.
pub fn vtk_string(mesh: &Mesh, title: &str, fields: &[(&str, &Field)]) -> Result<String> {
    for (name, f) in fields {
        if f.len() != mesh.n_dof() {
            return Err(invalid(format!("field {name} length does not match mesh")));
        }
        if name.contains(char::is_whitespace) {
            return Err(invalid(format!("field name '{name}' contains whitespace")));
        }
    }
    let mut out = String::new();
    writeln!(out, "# vtk DataFile Version 3.0").unwrap();
    writeln!(out, "{title}").unwrap();
    writeln!(out, "ASCII").unwrap();
    writeln!(out, "DATASET UNSTRUCTURED_GRID").unwrap();
    writeln!(out, "POINTS {} double", mesh.n_dof()).unwrap();
    for p in mesh.nodes() {
        writeln!(out, "{} {} 0", p[0], p[1]).unwrap();
    }
    let m = mesh.triangles().len();
    writeln!(out, "CELLS {} {}", m, 4 * m).unwrap();
    for t in mesh.triangles() {
        writeln!(out, "3 {} {} {}", t[0], t[1], t[2]).unwrap();
    }
    writeln!(out, "CELL_TYPES {m}").unwrap();
    for _ in 0..m {
        writeln!(out, "5").unwrap();
    }
    if !fields.is_empty() {
        writeln!(out, "POINT_DATA {}", mesh.n_dof()).unwrap();
        for (name, f) in fields {
            writeln!(out, "SCALARS {name} double 1").unwrap();
            writeln!(out, "LOOKUP_TABLE default").unwrap();
            for v in f.values() {
                writeln!(out, "{v}").unwrap();
            }
        }
    }
    Ok(out)
}

pub fn write_vtk(
    path: impl AsRef<Path>,
    mesh: &Mesh,
    title: &str,
    fields: &[(&str, &Field)],
) -> Result<()> {
    std::fs::write(path, vtk_string(mesh, title, fields)?)?;
    Ok(())
}

/// CSV with columns node_index, x, y, value.
pub fn field_csv_string(mesh: &Mesh, field: &Field) -> Result<String> {
    if field.len() != mesh.n_dof() {
        return Err(invalid("field length does not match mesh"));
    }
    let mut out = String::from("node_index,x,y,value\n");
    for (i, p) in mesh.nodes().iter().enumerate() {
        writeln!(out, "{},{},{},{}", i, p[0], p[1], field.values()[i]).unwrap();
    }
    Ok(out)
}

pub fn write_field_csv(path: impl AsRef<Path>, mesh: &Mesh, field: &Field) -> Result<()> {
    std::fs::write(path, field_csv_string(mesh, field)?)?;
    Ok(())
}

/// Write the plain-text mesh format.
pub fn write_mesh_text(path: impl AsRef<Path>, mesh: &Mesh) -> Result<()> {
    std::fs::write(path, mesh.to_text())?;
    Ok(())
}

/// Read the plain-text mesh format; boundary nodes are recomputed.
pub fn read_mesh_text(path: impl AsRef<Path>) -> Result<Mesh> {
    let text = std::fs::read_to_string(path)?;
    Mesh::from_text(&text)
}
