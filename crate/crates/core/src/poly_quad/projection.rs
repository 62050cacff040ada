use nalgebra::{DMatrix, DVector, Point2};

use super::basis::{EdgeBasis, TriBasis};
use super::quadrature::{edge_points, edge_quadrature, element_points, tri_quadrature, MAX_DEGREE};
use crate::error::{Error, Result};
use crate::mesh::Mesh;

/// Quadrature margin added on top of what a polynomial integrand of degree
/// `2 (l + 1)` would need; absorbs non-polynomial coefficients and data.
pub const OVER_INTEGRATION: usize = 4;

/// Quadrature degree used for integrals involving `P_l` functions and smooth
/// non-polynomial data.
pub fn quad_degree(l: usize) -> usize {
    (2 * (l + 1) + OVER_INTEGRATION).min(MAX_DEGREE)
}

/// Quadrature degree for projecting smooth data onto `P_l`. Projections are
/// cheap and run once per level, so they integrate more accurately than the
/// variational forms.
pub fn projection_degree(l: usize) -> usize {
    (2 * (l + 1) + 2 * OVER_INTEGRATION).min(MAX_DEGREE)
}

/// Coefficients of the local L2 projection of `f` onto `P_l(K)` in the
/// element's scaled monomial basis.
pub fn l2_project_tri(
    f: impl Fn(&Point2<f64>) -> f64,
    mesh: &Mesh,
    element: usize,
    degree: usize,
) -> Result<Vec<f64>> {
    let basis = TriBasis::for_element(mesh, element, degree);
    l2_project_tri_in(f, mesh, element, &basis, projection_degree(degree))
}

/// Same as [`l2_project_tri`] with an explicit basis and quadrature degree.
pub fn l2_project_tri_in(
    f: impl Fn(&Point2<f64>) -> f64,
    mesh: &Mesh,
    element: usize,
    basis: &TriBasis,
    quad: usize,
) -> Result<Vec<f64>> {
    let rule = tri_quadrature(quad)?;
    let n = basis.dim();
    let mut gram = DMatrix::zeros(n, n);
    let mut rhs = DVector::zeros(n);
    let mut phi = vec![0.0; n];
    for q in element_points(mesh, element, &rule) {
        basis.eval_into(&q.x, &mut phi);
        let fq = f(&q.x);
        for i in 0..n {
            rhs[i] += q.weight * fq * phi[i];
            for j in 0..n {
                gram[(i, j)] += q.weight * phi[i] * phi[j];
            }
        }
    }
    let chol = gram.cholesky().ok_or(Error::DegenerateElement { element })?;
    Ok(chol.solve(&rhs).as_slice().to_vec())
}

/// Coefficients of the L2 projection of `g` onto `P_l(e)` in the shifted
/// Legendre basis of the edge parameter.
pub fn l2_project_edge(
    g: impl Fn(&Point2<f64>) -> f64,
    mesh: &Mesh,
    edge: usize,
    degree: usize,
) -> Result<Vec<f64>> {
    let basis = EdgeBasis::new(degree);
    let rule = edge_quadrature(projection_degree(degree))?;
    let n = basis.dim();
    let mut gram = DMatrix::zeros(n, n);
    let mut rhs = DVector::zeros(n);
    let mut psi = vec![0.0; n];
    for q in edge_points(mesh, edge, &rule) {
        basis.eval_into(q.t, &mut psi);
        let gq = g(&q.x);
        for i in 0..n {
            rhs[i] += q.weight * gq * psi[i];
            for j in 0..n {
                gram[(i, j)] += q.weight * psi[i] * psi[j];
            }
        }
    }
    let chol = gram.cholesky().ok_or(Error::DegenerateEdge { edge })?;
    Ok(chol.solve(&rhs).as_slice().to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Rect;
    use crate::poly_quad::quadrature::gauss_legendre;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn mesh(n: usize) -> Mesh {
        Mesh::build_structured(n, Rect::UNIT_SQUARE).unwrap()
    }

    fn sin_sin(p: &Point2<f64>) -> f64 {
        (PI * p.x).sin() * (PI * p.y).sin()
    }

    fn l2_error_on(
        f: impl Fn(&Point2<f64>) -> f64,
        m: &Mesh,
        el: usize,
        basis: &TriBasis,
        coeffs: &[f64],
    ) -> f64 {
        let rule = tri_quadrature(18).unwrap();
        element_points(m, el, &rule)
            .iter()
            .map(|q| q.weight * (f(&q.x) - basis.combine(coeffs, &q.x)).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    #[test]
    fn constant_is_reproduced() {
        let m = mesh(3);
        for l in 0..=3 {
            let basis = TriBasis::for_element(&m, 4, l);
            let c = l2_project_tri(|_| 5.0, &m, 4, l).unwrap();
            for p in m.element_points(4) {
                assert!((basis.combine(&c, &p) - 5.0).abs() < 1e-12);
            }
            if l <= 1 {
                assert!((c[0] - 5.0).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn polynomials_are_reproduced() {
        let m = mesh(2);
        for l in 0..=3usize {
            let f = |p: &Point2<f64>| {
                let mut v = 1.5;
                if l >= 1 {
                    v += 2.0 * p.x - p.y;
                }
                if l >= 2 {
                    v += 0.7 * p.x * p.y - 3.0 * p.y * p.y;
                }
                if l >= 3 {
                    v += p.x.powi(3) - 0.2 * p.x * p.y * p.y;
                }
                v
            };
            for el in 0..m.num_elements() {
                let basis = TriBasis::for_element(&m, el, l);
                let c = l2_project_tri(f, &m, el, l).unwrap();
                assert!(l2_error_on(f, &m, el, &basis, &c) < 1e-12, "l = {l}");
            }
        }
    }

    #[test]
    fn residual_is_orthogonal() {
        let m = mesh(4);
        for l in 0..=2 {
            let basis = TriBasis::for_element(&m, 7, l);
            let c = l2_project_tri(sin_sin, &m, 7, l).unwrap();
            let rule = tri_quadrature(projection_degree(l)).unwrap();
            let pts = element_points(&m, 7, &rule);
            for i in 0..basis.dim() {
                let mut inner = 0.0;
                let mut scale = 0.0;
                for q in &pts {
                    let phi = basis.eval(&q.x)[i];
                    inner += q.weight * (sin_sin(&q.x) - basis.combine(&c, &q.x)) * phi;
                    scale += q.weight * (sin_sin(&q.x) * phi).abs();
                }
                assert!(inner.abs() <= 1e-10 * scale.max(1e-300));
            }
        }
    }

    #[test]
    fn p0_projection_is_the_mean() {
        let m = mesh(4);
        let oracle = tri_quadrature(20).unwrap();
        for el in [0, 9, 31] {
            let c = l2_project_tri(sin_sin, &m, el, 0).unwrap();
            let pts = element_points(&m, el, &oracle);
            let mean = pts.iter().map(|q| q.weight * sin_sin(&q.x)).sum::<f64>() / m.elements[el].area;
            assert!((c[0] - mean).abs() < 1e-10, "{}", c[0] - mean);
        }
    }

    #[test]
    fn edge_projection() {
        let m = mesh(4);
        for e in 0..m.num_edges() {
            assert!(l2_project_edge(|_| 0.0, &m, e, 2).unwrap().iter().all(|&c| c == 0.0));
        }
        // Linear data along an edge.
        let f = |p: &Point2<f64>| 3.0 * p.x - 2.0 * p.y + 0.5;
        let e = 17;
        let c = l2_project_edge(f, &m, e, 1).unwrap();
        let [a, b] = m.edge_points(e);
        for t in [0.0, 0.3, 1.0] {
            let x = a + (b - a) * t;
            assert!((EdgeBasis::new(1).combine(&c, t) - f(&x)).abs() < 1e-12);
        }
    }

    #[test]
    fn edge_projection_matches_gauss20_oracle() {
        let m = mesh(4);
        let g = |p: &Point2<f64>| (PI * p.x).sin();
        let (nodes, weights) = gauss_legendre(20);
        let basis = EdgeBasis::new(1);
        for edge in m.boundary_edges().filter(|e| {
            let [a, b] = m.edge_points(e.id);
            a.y == 0.0 && b.y == 0.0
        }) {
            let [a, b] = m.edge_points(edge.id);
            let mut gram = DMatrix::<f64>::zeros(2, 2);
            let mut rhs = DVector::<f64>::zeros(2);
            for (t, w) in nodes.iter().zip(&weights) {
                let psi = basis.eval(*t);
                let x = a + (b - a) * *t;
                for i in 0..2 {
                    rhs[i] += w * edge.length * g(&x) * psi[i];
                    for j in 0..2 {
                        gram[(i, j)] += w * edge.length * psi[i] * psi[j];
                    }
                }
            }
            let want = gram.lu().solve(&rhs).unwrap();
            let got = l2_project_edge(g, &m, edge.id, 1).unwrap();
            for i in 0..2 {
                assert!((got[i] - want[i]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn projection_is_idempotent() {
        let m = mesh(3);
        for l in 0..=2 {
            let basis = TriBasis::for_element(&m, 5, l);
            let once = l2_project_tri(sin_sin, &m, 5, l).unwrap();
            let twice = l2_project_tri(|p| basis.combine(&once, p), &m, 5, l).unwrap();
            for (a, b) in once.iter().zip(&twice) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn best_approximation() {
        let m = mesh(2);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let f = |p: &Point2<f64>| (3.0 * p.x).exp() * (2.0 * p.y).cos();
        for l in 0..=2 {
            let basis = TriBasis::for_element(&m, 3, l);
            let best = l2_project_tri(f, &m, 3, l).unwrap();
            let e_best = l2_error_on(f, &m, 3, &basis, &best);
            for _ in 0..100 {
                let q: Vec<f64> = best.iter().map(|c| c + rng.gen_range(-0.5..0.5)).collect();
                assert!(e_best <= l2_error_on(f, &m, 3, &basis, &q));
            }
        }
    }

    #[test]
    fn approximation_order() {
        for l in 0..=2usize {
            let mut errs = Vec::new();
            let mut m = mesh(2);
            for _ in 0..4 {
                let mut total = 0.0;
                for el in 0..m.num_elements() {
                    let basis = TriBasis::for_element(&m, el, l);
                    let c = l2_project_tri(sin_sin, &m, el, l).unwrap();
                    total += l2_error_on(sin_sin, &m, el, &basis, &c).powi(2);
                }
                errs.push(total.sqrt());
                m = m.refine_uniform().unwrap();
            }
            let rate = (errs[2] / errs[3]).log2();
            assert!((rate - (l + 1) as f64).abs() <= 0.15, "l = {l}, rate = {rate}");
        }
    }
}
