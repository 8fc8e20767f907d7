//! Conforming triangle meshes for the rectangle and disk domains.
//!
//! All boundary conditions in this crate are natural (zero conormal flux), so
//! meshes only tag boundary nodes; no rows of any assembled operator are ever
//! constrained. Node and triangle numbering is deterministic, which makes
//! assembled matrices and solver output byte-for-byte reproducible.

use crate::error::{invalid, Result};
use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;

/// Immutable conforming triangle mesh.
///
/// Invariants established at construction:
/// - every triangle has strictly positive signed area (counterclockwise),
/// - every edge is shared by at most two triangles,
/// - `boundary_nodes` is exactly the endpoint set of single-triangle edges.
#[derive(Clone, Debug)]
pub struct Mesh {
    nodes: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    boundary_nodes: BTreeSet<usize>,
}

impl Mesh {
    /// Validate connectivity and compute boundary tagging.
    pub fn new(nodes: Vec<[f64; 2]>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        let n = nodes.len();
        for (t, tri) in triangles.iter().enumerate() {
            for &v in tri {
                if v >= n {
                    return Err(invalid(format!("triangle {t} references node {v} >= {n}")));
                }
            }
            let area = signed_area(&nodes, tri);
            if !(area > 0.0) {
                return Err(invalid(format!(
                    "triangle {t} has non-positive signed area {area:.3e}"
                )));
            }
        }
        let incidence = edge_incidence(&triangles);
        for (&(a, b), &count) in &incidence {
            if count > 2 {
                return Err(invalid(format!("edge ({a}, {b}) shared by {count} > 2 triangles")));
            }
        }
        let boundary_nodes = boundary_from_incidence(&incidence);
        Ok(Self {
            nodes,
            triangles,
            boundary_nodes,
        })
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary_nodes(&self) -> &BTreeSet<usize> {
        &self.boundary_nodes
    }

    /// Node count of the P1 discretization.
    pub fn n_dof(&self) -> usize {
        self.nodes.len()
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        signed_area(&self.nodes, &self.triangles[t])
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.triangle_area(t)).sum()
    }

    /// Node-to-node adjacency (undirected, no self loops), sorted per node.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![BTreeSet::new(); self.nodes.len()];
        for tri in &self.triangles {
            for i in 0..3 {
                for j in 0..3 {
                    if i != j {
                        adj[tri[i]].insert(tri[j]);
                    }
                }
            }
        }
        adj.into_iter().map(|s| s.into_iter().collect()).collect()
    }

    /// Serialize to the plain-text mesh format:
    /// line 1 `N`, then N lines `x y`; then `M`, then M lines `i j k`.
    pub fn to_text(&self) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        writeln!(out, "{}", self.nodes.len()).unwrap();
        for p in &self.nodes {
            writeln!(out, "{:.17e} {:.17e}", p[0], p[1]).unwrap();
        }
        writeln!(out, "{}", self.triangles.len()).unwrap();
        for t in &self.triangles {
            writeln!(out, "{} {} {}", t[0], t[1], t[2]).unwrap();
        }
        out
    }

    /// Parse the plain-text mesh format. Boundary nodes are recomputed,
    /// never read from the file.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut tokens = text.split_whitespace();
        let mut next = |what: &str| {
            tokens
                .next()
                .ok_or_else(|| invalid(format!("mesh text ended while reading {what}")))
        };
        let n: usize = next("node count")?
            .parse()
            .map_err(|e| invalid(format!("bad node count: {e}")))?;
        let mut nodes = Vec::with_capacity(n);
        for i in 0..n {
            let x: f64 = next("node x")?
                .parse()
                .map_err(|e| invalid(format!("bad x for node {i}: {e}")))?;
            let y: f64 = next("node y")?
                .parse()
                .map_err(|e| invalid(format!("bad y for node {i}: {e}")))?;
            nodes.push([x, y]);
        }
        let m: usize = next("triangle count")?
            .parse()
            .map_err(|e| invalid(format!("bad triangle count: {e}")))?;
        let mut triangles = Vec::with_capacity(m);
        for t in 0..m {
            let mut tri = [0usize; 3];
            for v in &mut tri {
                *v = next("triangle index")?
                    .parse()
                    .map_err(|e| invalid(format!("bad index in triangle {t}: {e}")))?;
            }
            triangles.push(tri);
        }
        Mesh::new(nodes, triangles)
    }
}

fn signed_area(nodes: &[[f64; 2]], tri: &[usize; 3]) -> f64 {
    let [a, b, c] = [nodes[tri[0]], nodes[tri[1]], nodes[tri[2]]];
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

fn edge_incidence(triangles: &[[usize; 3]]) -> BTreeMap<(usize, usize), usize> {
    let mut incidence = BTreeMap::new();
    for tri in triangles {
        for e in 0..3 {
            let (a, b) = (tri[e], tri[(e + 1) % 3]);
            let key = (a.min(b), a.max(b));
            *incidence.entry(key).or_insert(0usize) += 1;
        }
    }
    incidence
}

fn boundary_from_incidence(incidence: &BTreeMap<(usize, usize), usize>) -> BTreeSet<usize> {
    let mut boundary = BTreeSet::new();
    for (&(a, b), &count) in incidence {
        if count == 1 {
            boundary.insert(a);
            boundary.insert(b);
        }
    }
    boundary
}

/// Recompute the boundary node set from scratch: exactly the endpoints of
/// edges incident to a single triangle.
pub fn boundary_nodes(mesh: &Mesh) -> BTreeSet<usize> {
    boundary_from_incidence(&edge_incidence(mesh.triangles()))
}

/// Structured triangulation of `[x_min, x_max] x [y_min, y_max]` with
/// `nx` by `ny` cells, each split along the same diagonal.
pub fn generate_rect_mesh(
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
    nx: usize,
    ny: usize,
) -> Result<Mesh> {
    if nx == 0 || ny == 0 {
        return Err(invalid("subdivision counts must be at least 1"));
    }
    if !(x_max > x_min) || !(y_max > y_min) {
        return Err(invalid("rectangle extents must be positive"));
    }
    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        let y = y_min + (y_max - y_min) * j as f64 / ny as f64;
        for i in 0..=nx {
            let x = x_min + (x_max - x_min) * i as f64 / nx as f64;
            nodes.push([x, y]);
        }
    }
    let at = |i: usize, j: usize| j * (nx + 1) + i;
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (v00, v10) = (at(i, j), at(i + 1, j));
            let (v01, v11) = (at(i, j + 1), at(i + 1, j + 1));
            triangles.push([v00, v10, v11]);
            triangles.push([v00, v11, v01]);
        }
    }
    Mesh::new(nodes, triangles)
}

/// Concentric-ring triangulation of the disk of given radius centered at the
/// origin: a center fan plus ring strips, with 6i nodes on ring i so triangle
/// quality stays bounded under refinement.
pub fn generate_disk_mesh(radius: f64, n_rings: usize) -> Result<Mesh> {
    if !(radius > 0.0) {
        return Err(invalid("disk radius must be positive"));
    }
    if n_rings == 0 {
        return Err(invalid("n_rings must be at least 1"));
    }
    let ring_len = |i: usize| 6 * i;
    let ring_start = |i: usize| 1 + 3 * i * (i - 1);
    let mut nodes = vec![[0.0, 0.0]];
    for i in 1..=n_rings {
        let r = radius * i as f64 / n_rings as f64;
        for k in 0..ring_len(i) {
            let theta = 2.0 * PI * k as f64 / ring_len(i) as f64;
            nodes.push([r * theta.cos(), r * theta.sin()]);
        }
    }
    let mut triangles = Vec::with_capacity(6 * n_rings * n_rings);
    // Center fan.
    for k in 0..6 {
        triangles.push([0, ring_start(1) + k, ring_start(1) + (k + 1) % 6]);
    }
    // Strips: zip ring i (m nodes) against ring i+1 (m' nodes) by angle.
    for i in 1..n_rings {
        let (m_in, m_out) = (ring_len(i), ring_len(i + 1));
        let (s_in, s_out) = (ring_start(i), ring_start(i + 1));
        let angle_in = |a: usize| a as f64 / m_in as f64;
        let angle_out = |b: usize| b as f64 / m_out as f64;
        let (mut a, mut b) = (0usize, 0usize);
        while a < m_in || b < m_out {
            let advance_outer = if b == m_out {
                false
            } else if a == m_in {
                true
            } else {
                angle_out(b + 1) <= angle_in(a + 1)
            };
            if advance_outer {
                triangles.push([s_in + a % m_in, s_out + b, s_out + (b + 1) % m_out]);
                b += 1;
            } else {
                triangles.push([s_in + a, s_out + b % m_out, s_in + (a + 1) % m_in]);
                a += 1;
            }
        }
    }
    Mesh::new(nodes, triangles)
}

/// Cell count per side so a structured rectangle mesh lands near `target_dof`
/// nodes.
pub fn rect_divisions_for_dof(target_dof: usize) -> usize {
    ((target_dof as f64).sqrt().round() as usize).saturating_sub(1).max(1)
}

/// Ring count so a disk mesh (1 + 3R(R+1) nodes) lands near `target_dof`.
pub fn disk_rings_for_dof(target_dof: usize) -> usize {
    let r = (-3.0 + (12.0 * target_dof as f64 - 3.0).sqrt()) / 6.0;
    (r.round() as usize).max(1)
}
