//! Polynomial bases on triangles and edges, quadrature rules, and local L2
//! projections.

pub mod basis;
pub mod projection;
pub mod quadrature;

pub use basis::{dim_p, EdgeBasis, TriBasis};
pub use projection::{
    l2_project_edge, l2_project_tri, l2_project_tri_in, projection_degree, quad_degree, OVER_INTEGRATION,
};
pub use quadrature::{edge_points, edge_quadrature, element_points, tri_quadrature, PhysPoint, QuadRule};
