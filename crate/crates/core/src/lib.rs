//! Weak Galerkin finite elements for the 2D convection-diffusion Dirichlet
//! problem `-div(A grad u) + b . grad u + c u = f`, `u = g` on the boundary.
//!
//! Interior unknowns are piecewise `P_k`, edge unknowns are single-valued
//! `P_{k+1}` traces, and derivatives are replaced by the discrete weak
//! gradient in `[P_{k+1}]^2`. The convection term is split into symmetric
//! halves so the bilinear form stays coercive.

pub mod assembly;
pub mod error;
pub mod error_analysis;
pub mod harness;
pub mod mesh;
pub mod poly_quad;
pub mod problems;
pub mod properties;
pub mod sparse_solver;
pub mod weak_gradient;
pub mod weak_space;

pub use error::{Error, Result};
pub use mesh::{Edge, Element, Mesh, Rect, Vertex};
