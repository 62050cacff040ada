//! End-to-end behaviour through the public API: mesh, space, operators,
//! assembly, solve, error norms.

use std::sync::Arc;

use nalgebra::{Point2, Vector2};
use proptest::prelude::*;
use wgfem::assembly::{assemble, solve_problem, CoefficientSet};
use wgfem::error_analysis::{error_h1w, error_l2, error_linf, error_superclose, Sampling};
use wgfem::harness::{run_convergence, RunConfig};
use wgfem::sparse_solver::solve_dense;
use wgfem::weak_gradient::WeakGradient;
use wgfem::weak_space::WeakSpace;
use wgfem::{Mesh, Rect};

fn space_on(domain: Rect, n: usize, k: usize) -> WeakSpace {
    WeakSpace::new(Arc::new(Mesh::build_structured(n, domain).unwrap()), k).unwrap()
}

fn linear_problem(a: f64, b: f64, c: f64) -> CoefficientSet {
    CoefficientSet {
        boundary: Arc::new(move |p| a + b * p.x + c * p.y),
        ..CoefficientSet::laplace()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Linear solutions of the Laplace problem are reproduced on arbitrary
    /// rectangles: exactly for k >= 1, and up to the `P_0` interior
    /// projection for k = 0.
    #[test]
    fn linear_solutions_are_exact(
        a in -2.0f64..2.0, b in -2.0f64..2.0, c in -2.0f64..2.0,
        x0 in -1.0f64..1.0, y0 in -1.0f64..1.0, w in 0.5f64..3.0, hgt in 0.5f64..3.0,
        n in 1usize..5, k in 0usize..3,
    ) {
        let domain = Rect::new(x0, x0 + w, y0, y0 + hgt).unwrap();
        let s = space_on(domain, n, k);
        let grads = WeakGradient::build(&s).unwrap();
        let (uh, _) = solve_problem(&s, &grads, &linear_problem(a, b, c), 1e-12, 5000).unwrap();
        let u = |p: &Point2<f64>| a + b * p.x + c * p.y;
        let scale = 1.0 + a.abs() + b.abs() + c.abs();
        prop_assert!(error_h1w(|_| Vector2::new(b, c), &uh, &grads).unwrap() <= 1e-9 * scale);
        if k >= 1 {
            prop_assert!(error_linf(u, &uh, Sampling::Quadrature).unwrap() <= 1e-9 * scale);
        }
        prop_assert!(error_superclose(u, &uh).unwrap() <= 1e-9 * scale);
    }

    /// Refinement preserves area and validity, and quadruples elements.
    #[test]
    fn refinement_preserves_geometry(
        x0 in -1.0f64..1.0, w in 0.1f64..4.0, hgt in 0.1f64..4.0, n in 1usize..6,
    ) {
        let domain = Rect::new(x0, x0 + w, 0.0, hgt).unwrap();
        let coarse = Mesh::build_structured(n, domain).unwrap();
        let fine = coarse.refine_uniform().unwrap();
        prop_assert!(fine.validate().is_ok());
        prop_assert_eq!(fine.num_elements(), 4 * coarse.num_elements());
        let area: f64 = fine.elements.iter().map(|e| e.area).sum();
        prop_assert!((area - domain.area()).abs() <= 1e-12 * domain.area());
        prop_assert!((fine.h - 0.5 * coarse.h).abs() <= 1e-12 * coarse.h);
    }

    /// The weak gradient is linear in the weak function.
    #[test]
    fn weak_gradient_is_linear(alpha in -3.0f64..3.0, beta in -3.0f64..3.0, k in 0usize..3) {
        let s = space_on(Rect::UNIT_SQUARE, 3, k);
        let grads = WeakGradient::build(&s).unwrap();
        let u = s.interpolate(|p| (2.0 * p.x).sin() + p.y * p.y).unwrap();
        let v = s.interpolate(|p| (p.x - p.y).exp()).unwrap();
        let w = u.lin_comb(alpha, &v, beta);
        for el in 0..s.mesh().num_elements() {
            let (gu, gv, gw) = (grads.apply(&u, el), grads.apply(&v, el), grads.apply(&w, el));
            for i in 0..gw.len() {
                prop_assert!((gw[i] - alpha * gu[i] - beta * gv[i]).abs() <= 1e-10);
            }
        }
    }
}

#[test]
fn iterative_and_dense_solutions_agree_with_convection() {
    let s = space_on(Rect::UNIT_SQUARE, 6, 1);
    let grads = WeakGradient::build(&s).unwrap();
    let problem = wgfem::problems::table1();
    let g = s.project_boundary(|p| (problem.coeffs.boundary)(p)).unwrap();
    let system = assemble(&s, &grads, &problem.coeffs, &g).unwrap();
    let (x, report) = system.solve(1e-12, 10_000).unwrap();
    let (xd, _) = solve_dense(&system.matrix, &system.rhs).unwrap();
    let diff = x.iter().zip(&xd).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    assert!(diff < 1e-9, "{diff}");
    assert!(report.relative_residual <= 1e-12);
}

#[test]
fn higher_degree_converges_faster() {
    let run = |k| {
        let config = RunConfig {
            problem: "table2".into(),
            k,
            levels: 3,
            ..RunConfig::default()
        };
        run_convergence(&config).unwrap()
    };
    let (r0, r1) = (run(0), run(1));
    // Optimal order is k + 1 in the discrete H1 norm; with b = 0 the scheme
    // superconverges by one order.
    assert!(r1.rates[1].h1w.unwrap() > 2.7, "{:?}", r1.rates);
    assert!(r1.records[2].err_h1w < r0.records[2].err_h1w);
    // Superclose order k + 2.
    assert!(r1.rates[1].superclose.unwrap() > 2.7);
}

#[test]
fn quadrature_sampling_gives_first_order_for_p0() {
    let config = RunConfig {
        problem: "table2".into(),
        levels: 3,
        sampling: Sampling::Quadrature,
        ..RunConfig::default()
    };
    let report = run_convergence(&config).unwrap();
    let r = report.rates[1];
    assert!((r.l2.unwrap() - 1.0).abs() < 0.1);
    assert!((r.linf.unwrap() - 1.0).abs() < 0.15);
}

#[test]
fn nonzero_dirichlet_data_with_convection() {
    // u = exp(x) y with b = (1, 2), c = 1: f = -lap u + b . grad u + u.
    let u = |p: &Point2<f64>| p.x.exp() * p.y;
    let coeffs = CoefficientSet {
        convection: Arc::new(|_| Vector2::new(1.0, 2.0)),
        reaction: Arc::new(|_| 1.0),
        source: Arc::new(move |p| -p.x.exp() * p.y + (p.x.exp() * p.y + 2.0 * p.x.exp()) + p.x.exp() * p.y),
        boundary: Arc::new(u),
        ..CoefficientSet::laplace()
    };
    let mut errors = Vec::new();
    for n in [4, 8, 16] {
        let s = space_on(Rect::UNIT_SQUARE, n, 1);
        let grads = WeakGradient::build(&s).unwrap();
        let (uh, _) = solve_problem(&s, &grads, &coeffs, 1e-12, 10_000).unwrap();
        errors.push(error_l2(u, &uh, Sampling::Quadrature).unwrap());
    }
    let rate = (errors[1] / errors[2]).log2();
    assert!(rate > 1.8, "{errors:?}");
}
