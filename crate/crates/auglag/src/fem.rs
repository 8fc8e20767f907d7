//! P1 finite-element assembly and discrete norms on triangle meshes.
//!
//! Quadrature choices: the mass matrix is exact, the `a0` reaction term uses
//! the 3-point edge-midpoint rule, and every nonlinear or penalty term in the
//! rest of the crate uses lumped-mass (nodal) quadrature. Nodal quadrature
//! keeps the discrete active sets exactly nodal and makes the multiplier
//! update exact at nodes; a consistent-mass treatment would smear the max()
//! kink across elements.

use crate::error::{invalid, Result};
use crate::linalg::SparseMatrix;
use crate::mesh::Mesh;
use std::sync::Arc;

/// Nodal coefficient vector of a P1 function. All entries are finite;
/// box bounds with infinite entries live in `pde::ProblemData`, not here.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    values: Vec<f64>,
}

impl Field {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(invalid(format!("non-finite field value at node {i}")));
        }
        Ok(Self { values })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            values: vec![0.0; n],
        }
    }

    pub fn constant(n: usize, c: f64) -> Result<Self> {
        Self::new(vec![c; n])
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Nodal max(0, f_i).
    pub fn positive_part(&self) -> Field {
        Field {
            values: self.values.iter().map(|&v| v.max(0.0)).collect(),
        }
    }

    /// Nodal max |f_i|; the discrete C(closure of Omega) norm, since P1
    /// functions attain their extrema at nodes.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, &v| m.max(v.abs()))
    }
}

/// Nodal interpolation of a pointwise function.
pub fn interpolate(func: impl Fn(f64, f64) -> f64, mesh: &Mesh) -> Result<Field> {
    let mut values = Vec::with_capacity(mesh.n_dof());
    for (i, p) in mesh.nodes().iter().enumerate() {
        let v = func(p[0], p[1]);
        if !v.is_finite() {
            return Err(invalid(format!(
                "interpolated value at node {i} = ({}, {}) is not finite",
                p[0], p[1]
            )));
        }
        values.push(v);
    }
    Ok(Field { values })
}

/// Area and barycentric gradients of one triangle. The third gradient is
/// formed as the exact negation of the other two so constants are in the
/// kernel of the assembled Laplacian down to roundoff per element.
fn element_geometry(mesh: &Mesh, tri: &[usize; 3]) -> (f64, [[f64; 2]; 3]) {
    let [p0, p1, p2] = [
        mesh.nodes()[tri[0]],
        mesh.nodes()[tri[1]],
        mesh.nodes()[tri[2]],
    ];
    let two_a = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
    let g1 = [(p0[1] - p2[1]) / two_a, (p2[0] - p0[0]) / two_a];
    let g2 = [(p1[1] - p0[1]) / two_a, (p0[0] - p1[0]) / two_a];
    let g0 = [-(g1[0] + g2[0]), -(g1[1] + g2[1])];
    (0.5 * two_a, [g0, g1, g2])
}

/// Consistent P1 mass matrix: M_ij = integral of phi_i phi_j.
pub fn assemble_mass(mesh: &Mesh) -> SparseMatrix {
    let mut triplets = Vec::with_capacity(9 * mesh.triangles().len());
    for tri in mesh.triangles() {
        let (area, _) = element_geometry(mesh, tri);
        for i in 0..3 {
            for j in 0..3 {
                let w = if i == j { 2.0 } else { 1.0 };
                triplets.push((tri[i], tri[j], area / 12.0 * w));
            }
        }
    }
    SparseMatrix::from_triplets(&triplets, mesh.n_dof(), mesh.n_dof())
        .expect("mesh indices validated at construction")
}

/// Lumped mass: row sums of the consistent mass matrix, so that
/// M * ones == D holds componentwise and bitwise.
pub fn assemble_lumped_mass(mesh: &Mesh) -> Vec<f64> {
    let mass = assemble_mass(mesh);
    (0..mass.n_rows())
        .map(|r| {
            let (_, vals) = mass.row(r);
            vals.iter().sum()
        })
        .collect()
}

/// Stiffness K_ij = integral of grad phi_i . grad phi_j + a0 phi_i phi_j,
/// with `a0` interpolated P1 and integrated by the edge-midpoint rule.
pub fn assemble_stiffness(mesh: &Mesh, a0: &Field) -> Result<SparseMatrix> {
    if a0.len() != mesh.n_dof() {
        return Err(invalid("a0 length does not match mesh"));
    }
    if let Some(i) = a0.values().iter().position(|&v| v < 0.0) {
        return Err(invalid(format!(
            "a0 must be nonnegative; node {i} has a0 = {}",
            a0.values()[i]
        )));
    }
    let a0v = a0.values();
    let mut triplets = Vec::with_capacity(9 * mesh.triangles().len());
    for tri in mesh.triangles() {
        let (area, grads) = element_geometry(mesh, tri);
        // Edge-midpoint quadrature: point k is the midpoint of the edge
        // opposite vertex k; phi_i there is 1/2 for i != k, 0 for i == k.
        let a0_mid = [
            0.5 * (a0v[tri[1]] + a0v[tri[2]]),
            0.5 * (a0v[tri[2]] + a0v[tri[0]]),
            0.5 * (a0v[tri[0]] + a0v[tri[1]]),
        ];
        for i in 0..3 {
            for j in 0..3 {
                let lap = area * (grads[i][0] * grads[j][0] + grads[i][1] * grads[j][1]);
                let mut react = 0.0;
                for k in 0..3 {
                    if k != i && k != j {
                        react += a0_mid[k] * 0.25;
                    }
                }
                triplets.push((tri[i], tri[j], lap + area / 3.0 * react));
            }
        }
    }
    SparseMatrix::from_triplets(&triplets, mesh.n_dof(), mesh.n_dof())
}

/// A mesh with its assembled mass operators; carries the discrete norms.
#[derive(Clone, Debug)]
pub struct FemSpace {
    mesh: Arc<Mesh>,
    mass: SparseMatrix,
    lumped: Vec<f64>,
}

impl FemSpace {
    pub fn new(mesh: Arc<Mesh>) -> Self {
        let mass = assemble_mass(&mesh);
        let lumped = assemble_lumped_mass(&mesh);
        Self { mesh, mass, lumped }
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn n_dof(&self) -> usize {
        self.mesh.n_dof()
    }

    pub fn mass(&self) -> &SparseMatrix {
        &self.mass
    }

    pub fn lumped(&self) -> &[f64] {
        &self.lumped
    }

    pub fn domain_area(&self) -> f64 {
        self.lumped.iter().sum()
    }

    pub fn interpolate(&self, func: impl Fn(f64, f64) -> f64) -> Result<Field> {
        interpolate(func, &self.mesh)
    }

    fn check(&self, f: &Field) {
        assert_eq!(
            f.len(),
            self.n_dof(),
            "field length {} does not match mesh with {} nodes",
            f.len(),
            self.n_dof()
        );
    }

    /// Consistent L2 inner product f^T M g.
    pub fn inner_l2(&self, f: &Field, g: &Field) -> f64 {
        self.check(f);
        self.check(g);
        let mg = self.mass.matvec(g.values()).expect("length checked");
        f.values().iter().zip(&mg).map(|(a, b)| a * b).sum()
    }

    /// Lumped inner product sum_i D_i f_i g_i.
    pub fn inner_lumped(&self, f: &Field, g: &Field) -> f64 {
        self.check(f);
        self.check(g);
        self.lumped
            .iter()
            .zip(f.values())
            .zip(g.values())
            .map(|((d, a), b)| d * a * b)
            .sum()
    }

    /// sqrt(f^T M f).
    pub fn norm_l2(&self, f: &Field) -> f64 {
        self.inner_l2(f, f).max(0.0).sqrt()
    }

    /// Lumped L1 norm: sum_i D_i |f_i|.
    pub fn norm_l1(&self, f: &Field) -> f64 {
        self.check(f);
        self.lumped
            .iter()
            .zip(f.values())
            .map(|(d, v)| d * v.abs())
            .sum()
    }

    /// Nodal max norm.
    pub fn norm_cbar(&self, f: &Field) -> f64 {
        self.check(f);
        f.max_abs()
    }

    /// Lumped L2 norm of a raw nodal vector: sqrt(sum_i D_i v_i^2).
    pub fn norm_lumped_l2(&self, v: &[f64]) -> f64 {
        assert_eq!(v.len(), self.n_dof());
        self.lumped
            .iter()
            .zip(v)
            .map(|(d, x)| d * x * x)
            .sum::<f64>()
            .sqrt()
    }
}
