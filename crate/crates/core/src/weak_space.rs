//! Degrees of freedom of the weak finite element space.
//!
//! A weak function carries a `P_k` polynomial on every element interior and a
//! `P_{k+1}` polynomial on every edge. Edge coefficients are stored once per
//! global edge, so traces seen from the two neighbours of an interior edge
//! coincide by construction. Global numbering puts all interior blocks first
//! (element-major), followed by the edge blocks (edge-major).

use std::fmt::Write as _;
use std::sync::Arc;

use nalgebra::Point2;

use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::poly_quad::{dim_p, l2_project_edge, l2_project_tri, EdgeBasis, TriBasis};

pub const SUPPORTED_DEGREES: [usize; 3] = [0, 1, 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DofCount {
    pub interior: usize,
    pub edge: usize,
    /// Edge DOFs on the domain boundary, fixed by the Dirichlet data.
    pub constrained_boundary: usize,
    pub unknowns: usize,
}

#[derive(Debug, Clone)]
pub struct WeakSpace {
    mesh: Arc<Mesh>,
    k: usize,
    interior_dim: usize,
    trace_dim: usize,
    /// Global DOF -> unknown index, `None` for boundary-edge DOFs.
    unknown_of: Vec<Option<usize>>,
    /// Unknown index -> global DOF.
    free: Vec<usize>,
}

impl WeakSpace {
    pub fn new(mesh: Arc<Mesh>, k: usize) -> Result<Self> {
        if !SUPPORTED_DEGREES.contains(&k) {
            return Err(Error::UnsupportedDegree(k));
        }
        let interior_dim = dim_p(k);
        let trace_dim = k + 2;
        let n_int = mesh.num_elements() * interior_dim;
        let total = n_int + mesh.num_edges() * trace_dim;
        let mut unknown_of = vec![None; total];
        let mut free = Vec::with_capacity(total);
        for (dof, slot) in unknown_of.iter_mut().enumerate() {
            let constrained = dof >= n_int && mesh.edges[(dof - n_int) / trace_dim].is_boundary;
            if !constrained {
                *slot = Some(free.len());
                free.push(dof);
            }
        }
        Ok(WeakSpace {
            mesh,
            k,
            interior_dim,
            trace_dim,
            unknown_of,
            free,
        })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn mesh_arc(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    /// Interior polynomial degree.
    pub fn k(&self) -> usize {
        self.k
    }

    /// Degree of edge traces and of the weak gradient.
    pub fn r(&self) -> usize {
        self.k + 1
    }

    pub fn interior_dim(&self) -> usize {
        self.interior_dim
    }

    pub fn trace_dim(&self) -> usize {
        self.trace_dim
    }

    /// Number of coefficients of a weak function restricted to one element.
    pub fn local_dim(&self) -> usize {
        self.interior_dim + 3 * self.trace_dim
    }

    pub fn total_dofs(&self) -> usize {
        self.unknown_of.len()
    }

    pub fn num_unknowns(&self) -> usize {
        self.free.len()
    }

    pub fn interior_offset(&self, element: usize) -> usize {
        element * self.interior_dim
    }

    pub fn edge_offset(&self, edge: usize) -> usize {
        self.mesh.num_elements() * self.interior_dim + edge * self.trace_dim
    }

    pub fn unknown_index(&self, dof: usize) -> Option<usize> {
        self.unknown_of[dof]
    }

    pub fn free_dofs(&self) -> &[usize] {
        &self.free
    }

    pub fn dof_count(&self) -> DofCount {
        let interior = self.mesh.num_elements() * self.interior_dim;
        let edge = self.mesh.num_edges() * self.trace_dim;
        let constrained_boundary = self.mesh.boundary_edges().count() * self.trace_dim;
        DofCount {
            interior,
            edge,
            constrained_boundary,
            unknowns: interior + edge - constrained_boundary,
        }
    }

    /// Global DOFs of `element`: interior block, then the three edge blocks in
    /// local edge order.
    pub fn local_dofs(&self, element: usize) -> Vec<usize> {
        let mut dofs = Vec::with_capacity(self.local_dim());
        let start = self.interior_offset(element);
        dofs.extend(start..start + self.interior_dim);
        for &edge in &self.mesh.elements[element].edges {
            let start = self.edge_offset(edge);
            dofs.extend(start..start + self.trace_dim);
        }
        dofs
    }

    pub fn interior_basis(&self, element: usize) -> TriBasis {
        TriBasis::for_element(&self.mesh, element, self.k)
    }

    pub fn trace_basis(&self) -> EdgeBasis {
        EdgeBasis::new(self.trace_dim - 1)
    }

    /// The interpolant `Q_h u`: elementwise L2 projection onto `P_k` and
    /// edgewise L2 projection onto `P_{k+1}`.
    pub fn interpolate(&self, u: impl Fn(&Point2<f64>) -> f64) -> Result<WeakFunction<'_>> {
        let mut coeffs = vec![0.0; self.total_dofs()];
        for el in 0..self.mesh.num_elements() {
            let c = l2_project_tri(&u, &self.mesh, el, self.k)?;
            let start = self.interior_offset(el);
            coeffs[start..start + self.interior_dim].copy_from_slice(&c);
        }
        for edge in 0..self.mesh.num_edges() {
            let c = l2_project_edge(&u, &self.mesh, edge, self.k + 1)?;
            let start = self.edge_offset(edge);
            coeffs[start..start + self.trace_dim].copy_from_slice(&c);
        }
        Ok(WeakFunction { space: self, coeffs })
    }

    /// Dirichlet data `g_h = Q_h^b g` on every boundary edge.
    pub fn project_boundary(&self, g: impl Fn(&Point2<f64>) -> f64) -> Result<DirichletData> {
        let mut blocks = Vec::new();
        for edge in self.mesh.boundary_edges() {
            blocks.push((edge.id, l2_project_edge(&g, &self.mesh, edge.id, self.k + 1)?));
        }
        Ok(DirichletData { blocks })
    }
}

/// Trace coefficients of the boundary data, one block per boundary edge in
/// ascending edge order.
#[derive(Debug, Clone, PartialEq)]
pub struct DirichletData {
    pub blocks: Vec<(usize, Vec<f64>)>,
}

impl DirichletData {
    pub fn zero(space: &WeakSpace) -> Self {
        DirichletData {
            blocks: space
                .mesh()
                .boundary_edges()
                .map(|e| (e.id, vec![0.0; space.trace_dim()]))
                .collect(),
        }
    }

    /// Writes the boundary blocks into a full coefficient vector.
    pub fn write_into(&self, space: &WeakSpace, coeffs: &mut [f64]) {
        for (edge, block) in &self.blocks {
            let start = space.edge_offset(*edge);
            coeffs[start..start + block.len()].copy_from_slice(block);
        }
    }
}

/// A weak function: coefficients for every DOF of its space.
#[derive(Debug, Clone)]
pub struct WeakFunction<'s> {
    space: &'s WeakSpace,
    coeffs: Vec<f64>,
}

impl<'s> WeakFunction<'s> {
    pub fn zeros(space: &'s WeakSpace) -> Self {
        WeakFunction {
            space,
            coeffs: vec![0.0; space.total_dofs()],
        }
    }

    pub fn from_coeffs(space: &'s WeakSpace, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != space.total_dofs() {
            return Err(Error::DimensionMismatch {
                expected: space.total_dofs(),
                actual: coeffs.len(),
            });
        }
        Ok(WeakFunction { space, coeffs })
    }

    /// Rebuilds a full weak function from values of the unknowns plus the
    /// boundary data.
    pub fn from_unknowns(space: &'s WeakSpace, unknowns: &[f64], dirichlet: &DirichletData) -> Result<Self> {
        if unknowns.len() != space.num_unknowns() {
            return Err(Error::DimensionMismatch {
                expected: space.num_unknowns(),
                actual: unknowns.len(),
            });
        }
        let mut coeffs = vec![0.0; space.total_dofs()];
        for (&dof, &value) in space.free_dofs().iter().zip(unknowns) {
            coeffs[dof] = value;
        }
        dirichlet.write_into(space, &mut coeffs);
        Ok(WeakFunction { space, coeffs })
    }

    pub fn space(&self) -> &'s WeakSpace {
        self.space
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    /// Values of the unknown (non-boundary) DOFs.
    pub fn unknowns(&self) -> Vec<f64> {
        self.space.free_dofs().iter().map(|&d| self.coeffs[d]).collect()
    }

    pub fn interior(&self, element: usize) -> &[f64] {
        let start = self.space.interior_offset(element);
        &self.coeffs[start..start + self.space.interior_dim()]
    }

    pub fn trace(&self, edge: usize) -> &[f64] {
        let start = self.space.edge_offset(edge);
        &self.coeffs[start..start + self.space.trace_dim()]
    }

    /// Coefficients restricted to `element`, ordered as
    /// [`WeakSpace::local_dofs`].
    pub fn local(&self, element: usize) -> Vec<f64> {
        self.space.local_dofs(element).iter().map(|&d| self.coeffs[d]).collect()
    }

    pub fn eval_interior(&self, element: usize, p: &Point2<f64>) -> f64 {
        self.space.interior_basis(element).combine(self.interior(element), p)
    }

    /// Trace value at parameter `t` of `edge`.
    pub fn eval_trace(&self, edge: usize, t: f64) -> f64 {
        self.space.trace_basis().combine(self.trace(edge), t)
    }

    /// `alpha * self + beta * other`.
    pub fn lin_comb(&self, alpha: f64, other: &WeakFunction<'_>, beta: f64) -> WeakFunction<'s> {
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| alpha * a + beta * b)
            .collect();
        WeakFunction {
            space: self.space,
            coeffs,
        }
    }

    /// CSV dump with one row per interior block and one per edge block:
    /// `kind,id,c0,c1,...`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("kind,id,coefficients\n");
        let row = |out: &mut String, kind: &str, id: usize, c: &[f64]| {
            let _ = write!(out, "{kind},{id}");
            for v in c {
                let _ = write!(out, ",{v:.17e}");
            }
            out.push('\n');
        };
        for el in 0..self.space.mesh().num_elements() {
            row(&mut out, "element", el, self.interior(el));
        }
        for edge in 0..self.space.mesh().num_edges() {
            row(&mut out, "edge", edge, self.trace(edge));
        }
        out
    }
}
