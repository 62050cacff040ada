//! Discrete weak gradient in `[P_{k+1}(K)]^2`.
//!
//! For a weak function `v = {v0, vb}` on `K` the weak gradient `G` solves
//!
//! ```text
//! (G, q)_K = -(v0, div q)_K + <vb, q . n>_{dK}    for all q in [P_{k+1}(K)]^2
//! ```
//!
//! which in coefficients reads `M V = A V0 + sum_e B_e V_e`. The vector basis
//! is `(phi_i, 0)` for `i < N_r` followed by `(0, phi_i)`, with `phi_i` the
//! element's scaled monomials of degree `r = k + 1`.

use nalgebra::{DMatrix, DVector, Point2, Vector2};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::poly_quad::{edge_points, edge_quadrature, element_points, tri_quadrature, TriBasis};
use crate::weak_space::{WeakFunction, WeakSpace};

/// Relative singular-value threshold used for numerical rank.
pub const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct WeakGradientOperator {
    pub element: usize,
    /// Scalar basis of `P_r(K)` underlying the vector basis.
    pub basis: TriBasis,
    pub mass: DMatrix<f64>,
    pub interior_coupling: DMatrix<f64>,
    /// Per local edge, with the element's outward normal folded in.
    pub trace_coupling: [DMatrix<f64>; 3],
    /// `M^{-1} [A | B_0 | B_1 | B_2]`: maps local weak-function coefficients
    /// to gradient coefficients.
    pub local: DMatrix<f64>,
}

impl WeakGradientOperator {
    pub fn build(space: &WeakSpace, element: usize) -> Result<Self> {
        let diameter = space.mesh().elements[element].diameter;
        Self::build_with_scale(space, element, diameter)
    }

    /// Builds the operator with the gradient basis scaled by `scale` instead
    /// of the element diameter.
    pub fn build_with_scale(space: &WeakSpace, element: usize, scale: f64) -> Result<Self> {
        let mesh = space.mesh();
        let el = &mesh.elements[element];
        let r = space.r();
        let basis = TriBasis::new(r, el.centroid, scale);
        let interior = space.interior_basis(element);
        let trace = space.trace_basis();
        let nr = basis.dim();
        let nk = interior.dim();
        let ne = trace.dim();
        let nv = 2 * nr;

        let mut phi = vec![0.0; nr];
        let mut dphi = vec![Vector2::zeros(); nr];
        let mut chi = vec![0.0; nk];
        let mut psi = vec![0.0; ne];

        let mut mass = DMatrix::zeros(nv, nv);
        let mut interior_coupling = DMatrix::zeros(nv, nk);
        let rule = tri_quadrature(2 * r)?;
        for q in element_points(mesh, element, &rule) {
            basis.eval_into(&q.x, &mut phi);
            basis.grad_into(&q.x, &mut dphi);
            interior.eval_into(&q.x, &mut chi);
            for i in 0..nr {
                for j in 0..nr {
                    let m = q.weight * phi[i] * phi[j];
                    mass[(i, j)] += m;
                    mass[(nr + i, nr + j)] += m;
                }
                for j in 0..nk {
                    interior_coupling[(i, j)] -= q.weight * chi[j] * dphi[i].x;
                    interior_coupling[(nr + i, j)] -= q.weight * chi[j] * dphi[i].y;
                }
            }
        }

        let edge_rule = edge_quadrature(2 * r)?;
        let trace_coupling: [DMatrix<f64>; 3] = std::array::from_fn(|local| {
            let edge = el.edges[local];
            let n = mesh.outward_normal(element, local);
            let mut b = DMatrix::zeros(nv, ne);
            for q in edge_points(mesh, edge, &edge_rule) {
                basis.eval_into(&q.x, &mut phi);
                trace.eval_into(q.t, &mut psi);
                for i in 0..nr {
                    for j in 0..ne {
                        let w = q.weight * psi[j] * phi[i];
                        b[(i, j)] += w * n.x;
                        b[(nr + i, j)] += w * n.y;
                    }
                }
            }
            b
        });

        let chol = mass.clone().cholesky().ok_or(Error::DegenerateElement { element })?;
        let mut rhs = DMatrix::zeros(nv, nk + 3 * ne);
        rhs.view_mut((0, 0), (nv, nk)).copy_from(&interior_coupling);
        for (l, b) in trace_coupling.iter().enumerate() {
            rhs.view_mut((0, nk + l * ne), (nv, ne)).copy_from(b);
        }
        let local = chol.solve(&rhs);

        Ok(WeakGradientOperator {
            element,
            basis,
            mass,
            interior_coupling,
            trace_coupling,
            local,
        })
    }

    pub fn grad_dim(&self) -> usize {
        self.local.nrows()
    }

    pub fn local_dim(&self) -> usize {
        self.local.ncols()
    }

    /// Gradient coefficients for local weak-function coefficients ordered as
    /// [`WeakSpace::local_dofs`].
    pub fn apply(&self, local: &[f64]) -> Result<Vec<f64>> {
        if local.len() != self.local_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.local_dim(),
                actual: local.len(),
            });
        }
        let v = DVector::from_column_slice(local);
        Ok((&self.local * v).as_slice().to_vec())
    }

    /// Evaluates a gradient given by its coefficients at `p`.
    pub fn eval(&self, coeffs: &[f64], p: &Point2<f64>) -> Vector2<f64> {
        let nr = self.basis.dim();
        Vector2::new(
            self.basis.combine(&coeffs[..nr], p),
            self.basis.combine(&coeffs[nr..], p),
        )
    }

    /// Values at `p` of the weak gradients of the local basis functions:
    /// column `j` is the gradient of the `j`-th local DOF.
    pub fn basis_gradients_at(&self, p: &Point2<f64>) -> nalgebra::Matrix2xX<f64> {
        let nr = self.basis.dim();
        let phi = self.basis.eval(p);
        let mut out = nalgebra::Matrix2xX::zeros(self.local_dim());
        for j in 0..self.local_dim() {
            let mut g = Vector2::zeros();
            for i in 0..nr {
                g.x += phi[i] * self.local[(i, j)];
                g.y += phi[i] * self.local[(nr + i, j)];
            }
            out.set_column(j, &g);
        }
        out
    }

    /// Whether the weak gradient of `local` vanishes to within `tol`
    /// (in the mass-matrix norm, relative to the input size).
    pub fn kernel_check(&self, local: &[f64], tol: f64) -> Result<bool> {
        let g = DVector::from_vec(self.apply(local)?);
        let energy = (g.transpose() * &self.mass * &g)[(0, 0)].max(0.0).sqrt();
        let area = self.mass[(0, 0)];
        let scale = local.iter().fold(0.0f64, |m, v| m.max(v.abs())) * area.sqrt() / self.basis.scale;
        Ok(energy <= tol * scale.max(f64::MIN_POSITIVE))
    }

    /// Residual of the defining relation for every vector basis function,
    /// evaluated directly by quadrature with geometric outward normals
    /// (recomputed from the vertex coordinates, not taken from the mesh).
    /// Largest relative residual over the basis of `[P_r(K)]^2`.
    pub fn defining_residual(&self, space: &WeakSpace, v: &WeakFunction<'_>) -> f64 {
        let op = self;
        let mesh = space.mesh();
        let el = op.element;
        let g = op.apply(&v.local(el)).expect("weak function and operator share a space");
        let rule = tri_quadrature(2 * space.r() + 2).expect("supported degree");
        let edge_rule = edge_quadrature(2 * space.r() + 2).expect("supported degree");
        let pts = mesh.element_points(el);
        let nr = op.basis.dim();
        let mut worst = 0.0f64;
        for i in 0..2 * nr {
            let comp = i / nr;
            let idx = i % nr;
            let q_at = |p: &Point2<f64>| {
                let val = op.basis.eval(p)[idx];
                if comp == 0 { Vector2::new(val, 0.0) } else { Vector2::new(0.0, val) }
            };
            let div_at = |p: &Point2<f64>| op.basis.grad(p)[idx][comp];
            let mut lhs = 0.0;
            let mut vol = 0.0;
            let mut scale = 0.0;
            for q in element_points(mesh, el, &rule) {
                let a = op.eval(&g, &q.x).dot(&q_at(&q.x));
                let b = v.eval_interior(el, &q.x) * div_at(&q.x);
                lhs += q.weight * a;
                vol += q.weight * b;
                scale += q.weight * (a.abs() + b.abs());
            }
            let mut bnd = 0.0;
            for local in 0..3 {
                let a = pts[local];
                let b = pts[(local + 1) % 3];
                let t = b - a;
                let n = Vector2::new(t.y, -t.x) / t.norm();
                let edge = mesh.elements[el].edges[local];
                for q in edge_points(mesh, edge, &edge_rule) {
                    let term = v.eval_trace(edge, q.t) * q_at(&q.x).dot(&n);
                    bnd += q.weight * term;
                    scale += q.weight * term.abs();
                }
            }
            worst = worst.max((lhs + vol - bnd).abs() / scale.max(1e-300));
        }
        worst
    }

    /// Numerical rank of `M^{-1} [A | B]`.
    pub fn numerical_rank(&self) -> usize {
        let sv = self.local.clone().singular_values();
        let max = sv.max();
        sv.iter().filter(|&&s| s > RANK_TOLERANCE * max).count()
    }
}

/// Weak-gradient operators for every element of a space.
#[derive(Debug, Clone)]
pub struct WeakGradient {
    pub ops: Vec<WeakGradientOperator>,
}

impl WeakGradient {
    pub fn build(space: &WeakSpace) -> Result<Self> {
        let ops = (0..space.mesh().num_elements())
            .into_par_iter()
            .map(|el| WeakGradientOperator::build(space, el))
            .collect::<Result<Vec<_>>>()?;
        Ok(WeakGradient { ops })
    }

    pub fn op(&self, element: usize) -> &WeakGradientOperator {
        &self.ops[element]
    }

    /// Gradient coefficients of `v` on `element`.
    pub fn apply(&self, v: &WeakFunction<'_>, element: usize) -> Vec<f64> {
        self.ops[element]
            .apply(&v.local(element))
            .expect("weak function and operators share a space")
    }

    /// `||grad_w v||_h`, integrated with `rule_degree`.
    pub fn norm(&self, v: &WeakFunction<'_>, rule_degree: usize) -> Result<f64> {
        let rule = tri_quadrature(rule_degree)?;
        let mesh = v.space().mesh();
        let mut total = 0.0;
        for (el, op) in self.ops.iter().enumerate() {
            let g = self.apply(v, el);
            for q in element_points(mesh, el, &rule) {
                total += q.weight * op.eval(&g, &q.x).norm_squared();
            }
        }
        Ok(total.sqrt())
    }
}
