//! Augmented Lagrange solver for semilinear elliptic optimal control problems
//! with pointwise state and control constraints.
//!
//! The library discretizes
//!
//! ```text
//!   min  1/2 ||y - y_d||^2 + alpha/2 ||u||^2
//!   s.t. -Laplace(y) + a0*y + d(y) = u + f   in Omega,   dy/dn = 0 on the boundary,
//!        y <= psi,    u_a <= u <= u_b,
//! ```
//!
//! with P1 finite elements on triangle meshes and solves it by an augmented
//! Lagrange outer loop whose sub-problems (control-constrained only) are
//! handled by a semismooth Newton method on the coupled KKT system.
//!
//! Module map:
//! - [`mesh`]: structured rectangle and disk triangulations, plain-text mesh I/O
//! - [`linalg`]: CSR matrices, CG/BiCGStab, dense and banded LU
//! - [`fem`]: P1 assembly, nodal interpolation, discrete norms
//! - [`pde`]: state/linearized/adjoint solves and the reduced AL cost/gradient
//! - [`alm`]: active sets, semismooth Newton inner solver, outer AL loop
//! - [`problems`]: the three built-in benchmark problems
//! - [`io`]: VTK / CSV field export
//! - [`cli`]: run, convergence-study and rate-diagnostic drivers
//!
//! See the crate examples for runnable entry points into each capability.

pub mod alm;
pub mod cli;
mod error;
pub mod fem;
pub mod io;
pub mod linalg;
pub mod mesh;
pub mod pde;
pub mod problems;
pub mod rng;

pub use error::{Error, Result};
