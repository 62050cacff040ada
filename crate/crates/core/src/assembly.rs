//! Global system for the weak Galerkin scheme
//!
//! ```text
//! a_h(u, v) = (A grad_w u, grad_w v)_h + 1/2 (b . grad_w u, v0)_h
//!           - 1/2 (u0, b . grad_w v)_h + (c_b u0, v0)_h = (f, v0)
//! ```
//!
//! with `c_b = c - div(b) / 2`. Boundary-edge DOFs are eliminated using the
//! projected Dirichlet data.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Matrix2, Point2, Vector2};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::poly_quad::{element_points, quad_degree, tri_quadrature};
use crate::sparse_solver::{self, SolveReport, SparseMatrix};
use crate::weak_gradient::{WeakGradient, WeakGradientOperator};
use crate::weak_space::{DirichletData, WeakFunction, WeakSpace};

pub type ScalarField = Arc<dyn Fn(&Point2<f64>) -> f64 + Send + Sync>;
pub type VectorField = Arc<dyn Fn(&Point2<f64>) -> Vector2<f64> + Send + Sync>;
pub type MatrixField = Arc<dyn Fn(&Point2<f64>) -> Matrix2<f64> + Send + Sync>;

/// Tolerance on `c - div(b) / 2 >= 0`.
pub const REACTION_TOL: f64 = 1e-12;

/// Coefficients and data of `-div(A grad u) + b . grad u + c u = f`, `u = g`.
#[derive(Clone)]
pub struct CoefficientSet {
    pub diffusion: MatrixField,
    pub convection: VectorField,
    /// `div b`, supplied in closed form.
    pub div_convection: ScalarField,
    pub reaction: ScalarField,
    pub source: ScalarField,
    pub boundary: ScalarField,
    /// Ellipticity constant: `xi^T A xi >= a0 |xi|^2`.
    pub a0: f64,
}

impl std::fmt::Debug for CoefficientSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CoefficientSet").field("a0", &self.a0).finish_non_exhaustive()
    }
}

impl CoefficientSet {
    /// `A = I`, `b = 0`, `c = 0`, `f = 0`, `g = 0`.
    pub fn laplace() -> Self {
        CoefficientSet {
            diffusion: Arc::new(|_| Matrix2::identity()),
            convection: Arc::new(|_| Vector2::zeros()),
            div_convection: Arc::new(|_| 0.0),
            reaction: Arc::new(|_| 0.0),
            source: Arc::new(|_| 0.0),
            boundary: Arc::new(|_| 0.0),
            a0: 1.0,
        }
    }

    /// Effective reaction `c - div(b) / 2`.
    pub fn c_b(&self, p: &Point2<f64>) -> f64 {
        (self.reaction)(p) - 0.5 * (self.div_convection)(p)
    }

    /// Checks ellipticity of `A` and `c_b >= 0` at every quadrature point.
    pub fn check(&self, space: &WeakSpace) -> Result<()> {
        if !(self.a0 > 0.0) {
            return Err(Error::Coefficient {
                x: f64::NAN,
                y: f64::NAN,
                reason: format!("ellipticity constant a0 = {} must be positive", self.a0),
            });
        }
        let rule = tri_quadrature(quad_degree(space.k()))?;
        let mesh = space.mesh();
        for el in 0..mesh.num_elements() {
            for q in element_points(mesh, el, &rule) {
                let a = (self.diffusion)(&q.x);
                let sym = 0.5 * (a + a.transpose());
                let lambda = sym.symmetric_eigenvalues().min();
                if lambda < self.a0 * (1.0 - 1e-12) {
                    return Err(Error::Coefficient {
                        x: q.x.x,
                        y: q.x.y,
                        reason: format!("smallest eigenvalue of A is {lambda:e} < a0 = {}", self.a0),
                    });
                }
                let cb = self.c_b(&q.x);
                if cb < -REACTION_TOL {
                    return Err(Error::Coefficient {
                        x: q.x.x,
                        y: q.x.y,
                        reason: format!("c - div(b)/2 = {cb:e} is negative"),
                    });
                }
            }
        }
        Ok(())
    }
}

/// Sparse system over the unknown (non-boundary) DOFs.
#[derive(Debug, Clone)]
pub struct DiscreteSystem {
    pub matrix: SparseMatrix,
    /// Load vector with the boundary contribution already subtracted.
    pub rhs: Vec<f64>,
    /// Unknown index -> global DOF.
    pub free_dofs: Vec<usize>,
}

impl DiscreteSystem {
    pub fn dim(&self) -> usize {
        self.rhs.len()
    }

    /// `v^T M v` for a vector over the unknowns.
    pub fn quadratic_form(&self, v: &[f64]) -> Result<f64> {
        if v.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: v.len(),
            });
        }
        Ok(self.matrix.mul_vec(v).iter().zip(v).map(|(a, b)| a * b).sum())
    }

    pub fn solve(&self, tol: f64, max_iter: usize) -> Result<(Vec<f64>, SolveReport)> {
        sparse_solver::solve(&self.matrix, &self.rhs, tol, max_iter)
    }
}

/// Local stiffness matrix (rows: test DOFs, columns: trial DOFs) and load
/// vector of one element, integrated with a rule of degree `quad`.
pub fn element_system(
    space: &WeakSpace,
    op: &WeakGradientOperator,
    coeffs: &CoefficientSet,
    quad: usize,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let rule = tri_quadrature(quad)?;
    let element = op.element;
    let n = op.local_dim();
    let nk = space.interior_dim();
    let interior = space.interior_basis(element);
    let mut chi = vec![0.0; nk];
    let mut k = DMatrix::zeros(n, n);
    let mut f = DVector::zeros(n);
    for q in element_points(space.mesh(), element, &rule) {
        let grads = op.basis_gradients_at(&q.x);
        interior.eval_into(&q.x, &mut chi);
        let a = (coeffs.diffusion)(&q.x);
        let b = (coeffs.convection)(&q.x);
        let cb = coeffs.c_b(&q.x);
        let fq = (coeffs.source)(&q.x);
        let flux = a * &grads;
        let b_dot = b.transpose() * &grads;
        let w = q.weight;
        for i in 0..n {
            let gi = grads.column(i);
            let pi = if i < nk { chi[i] } else { 0.0 };
            for j in 0..n {
                let pj = if j < nk { chi[j] } else { 0.0 };
                let mut val = flux.column(j).dot(&gi);
                val += 0.5 * (b_dot[j] * pi - pj * b_dot[i]);
                val += cb * pi * pj;
                k[(i, j)] += w * val;
            }
            f[i] += w * fq * pi;
        }
    }
    Ok((k, f))
}

/// Assembles the global system. Element blocks are computed in parallel and
/// scattered serially in ascending element order, so the result does not
/// depend on the thread count.
pub fn assemble(
    space: &WeakSpace,
    grads: &WeakGradient,
    coeffs: &CoefficientSet,
    dirichlet: &DirichletData,
) -> Result<DiscreteSystem> {
    coeffs.check(space)?;
    let mesh = space.mesh();
    let quad = quad_degree(space.k());
    let blocks = (0..mesh.num_elements())
        .into_par_iter()
        .map(|el| element_system(space, grads.op(el), coeffs, quad))
        .collect::<Result<Vec<_>>>()?;

    let mut fixed = vec![0.0; space.total_dofs()];
    dirichlet.write_into(space, &mut fixed);

    let n = space.num_unknowns();
    let mut rhs = vec![0.0; n];
    let mut triplets = Vec::with_capacity(blocks.len() * space.local_dim() * space.local_dim());
    for (el, (k, f)) in blocks.iter().enumerate() {
        let dofs = space.local_dofs(el);
        for (i, &gi) in dofs.iter().enumerate() {
            let Some(ui) = space.unknown_index(gi) else { continue };
            rhs[ui] += f[i];
            for (j, &gj) in dofs.iter().enumerate() {
                match space.unknown_index(gj) {
                    Some(uj) => triplets.push((ui, uj, k[(i, j)])),
                    None => rhs[ui] -= k[(i, j)] * fixed[gj],
                }
            }
        }
    }
    Ok(DiscreteSystem {
        matrix: SparseMatrix::from_triplets(n, n, &triplets),
        rhs,
        free_dofs: space.free_dofs().to_vec(),
    })
}

/// Assembles, solves and returns the discrete solution with its report.
pub fn solve_problem<'s>(
    space: &'s WeakSpace,
    grads: &WeakGradient,
    coeffs: &CoefficientSet,
    tol: f64,
    max_iter: usize,
) -> Result<(WeakFunction<'s>, SolveReport)> {
    let dirichlet = space.project_boundary(|p| (coeffs.boundary)(p))?;
    let system = assemble(space, grads, coeffs, &dirichlet)?;
    let (x, report) = system.solve(tol, max_iter)?;
    Ok((WeakFunction::from_unknowns(space, &x, &dirichlet)?, report))
}
