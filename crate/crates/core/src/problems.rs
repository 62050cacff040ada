//! Built-in manufactured problems.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{Matrix2, Point2, Vector2};

use crate::assembly::{CoefficientSet, ScalarField, VectorField};
use crate::mesh::Rect;

/// Exact solution and its gradient, both in closed form.
#[derive(Clone)]
pub struct ExactSolution {
    pub u: ScalarField,
    pub grad: VectorField,
}

#[derive(Clone)]
pub struct ProblemSpec {
    pub name: &'static str,
    pub description: &'static str,
    pub coeffs: CoefficientSet,
    pub exact: Option<ExactSolution>,
    pub domain: Rect,
}

impl std::fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("name", &self.name)
            .field("domain", &self.domain)
            .finish_non_exhaustive()
    }
}

fn sin_sin(p: &Point2<f64>) -> f64 {
    (PI * p.x).sin() * (PI * p.y).sin()
}

fn sin_sin_grad(p: &Point2<f64>) -> Vector2<f64> {
    Vector2::new(
        PI * (PI * p.x).cos() * (PI * p.y).sin(),
        PI * (PI * p.x).sin() * (PI * p.y).cos(),
    )
}

/// `-div((1 + xy) grad u)` for `u = sin(pi x) sin(pi y)`.
fn variable_diffusion_term(p: &Point2<f64>) -> f64 {
    let g = sin_sin_grad(p);
    2.0 * PI * PI * (1.0 + p.x * p.y) * sin_sin(p) - (p.y * g.x + p.x * g.y)
}

fn sin_sin_exact() -> ExactSolution {
    ExactSolution {
        u: Arc::new(sin_sin),
        grad: Arc::new(sin_sin_grad),
    }
}

/// `A = (1 + xy) I`, `b = (1, 2)`, `c = sin(xy)`, `u = sin(pi x) sin(pi y)`.
pub fn table1() -> ProblemSpec {
    ProblemSpec {
        name: "table1",
        description: "A=(1+xy)I, b=(1,2), c=sin(xy), u=sin(pi x)sin(pi y) on the unit square",
        coeffs: CoefficientSet {
            diffusion: Arc::new(|p| Matrix2::identity() * (1.0 + p.x * p.y)),
            convection: Arc::new(|_| Vector2::new(1.0, 2.0)),
            div_convection: Arc::new(|_| 0.0),
            reaction: Arc::new(|p| (p.x * p.y).sin()),
            source: Arc::new(|p| {
                let g = sin_sin_grad(p);
                variable_diffusion_term(p) + (g.x + 2.0 * g.y) + (p.x * p.y).sin() * sin_sin(p)
            }),
            boundary: Arc::new(|_| 0.0),
            a0: 1.0,
        },
        exact: Some(sin_sin_exact()),
        domain: Rect::UNIT_SQUARE,
    }
}

/// Same as [`table1`] with `b = 0` and `c = 0`.
pub fn table2() -> ProblemSpec {
    ProblemSpec {
        name: "table2",
        description: "A=(1+xy)I, b=0, c=0, u=sin(pi x)sin(pi y) on the unit square",
        coeffs: CoefficientSet {
            diffusion: Arc::new(|p| Matrix2::identity() * (1.0 + p.x * p.y)),
            source: Arc::new(variable_diffusion_term),
            ..CoefficientSet::laplace()
        },
        exact: Some(sin_sin_exact()),
        domain: Rect::UNIT_SQUARE,
    }
}

/// Laplace problem with the linear solution `u = x + 2y - 3`.
pub fn poly_exact() -> ProblemSpec {
    let u = |p: &Point2<f64>| p.x + 2.0 * p.y - 3.0;
    ProblemSpec {
        name: "poly-exact",
        description: "A=I, b=0, c=0, u=x+2y-3 (reproduced exactly)",
        coeffs: CoefficientSet {
            boundary: Arc::new(u),
            ..CoefficientSet::laplace()
        },
        exact: Some(ExactSolution {
            u: Arc::new(u),
            grad: Arc::new(|_| Vector2::new(1.0, 2.0)),
        }),
        domain: Rect::UNIT_SQUARE,
    }
}

pub fn builtin_problems() -> Vec<ProblemSpec> {
    vec![table1(), table2(), poly_exact()]
}

pub fn find_problem(name: &str) -> Option<ProblemSpec> {
    builtin_problems().into_iter().find(|p| p.name == name)
}

impl ProblemSpec {
    /// Residual of the strong equation at `p`, relative to the size of its
    /// terms (or absolute when they are all below one), with derivatives of
    /// the exact solution and of the flux taken by fourth-order central
    /// differences. `None` when no exact solution is known.
    pub fn pde_residual(&self, p: &Point2<f64>) -> Option<f64> {
        let exact = self.exact.as_ref()?;
        let c = &self.coeffs;
        let h = 1e-3;
        let (ex, ey) = (Vector2::new(1.0, 0.0), Vector2::new(0.0, 1.0));
        let u = |q: &Point2<f64>| (exact.u)(q);
        let fd_grad = |q: &Point2<f64>| Vector2::new(d4_at(&u, q, ex, h), d4_at(&u, q, ey, h));
        let flux_x = |q: &Point2<f64>| ((c.diffusion)(q) * fd_grad(q)).x;
        let flux_y = |q: &Point2<f64>| ((c.diffusion)(q) * fd_grad(q)).y;
        let grad = fd_grad(p);
        let div_flux = d4_at(&flux_x, p, ex, h) + d4_at(&flux_y, p, ey, h);
        let convection = (c.convection)(p).dot(&grad);
        let reaction = (c.reaction)(p) * u(p);
        let f = (c.source)(p);
        let scale = div_flux.abs() + convection.abs() + reaction.abs() + f.abs();
        let residual = -div_flux + convection + reaction - f;
        Some(residual.abs() / scale.max(1.0))
    }

    /// Largest difference between the closed-form gradient and a finite
    /// difference of `u` at `p`, relative to the gradient size.
    pub fn gradient_mismatch(&self, p: &Point2<f64>) -> Option<f64> {
        let exact = self.exact.as_ref()?;
        let u = |q: &Point2<f64>| (exact.u)(q);
        let h = 1e-3;
        let fd = Vector2::new(
            d4_at(&u, p, Vector2::new(1.0, 0.0), h),
            d4_at(&u, p, Vector2::new(0.0, 1.0), h),
        );
        let g = (exact.grad)(p);
        Some((fd - g).norm() / g.norm().max(1.0))
    }
}

fn d4_at(f: &dyn Fn(&Point2<f64>) -> f64, p: &Point2<f64>, dir: Vector2<f64>, h: f64) -> f64 {
    let at = |s: f64| f(&(p + dir * s));
    (-at(2.0 * h) + 8.0 * at(h) - 8.0 * at(-h) + at(-2.0 * h)) / (12.0 * h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sources_are_consistent() {
        let mut rng = ChaCha8Rng::seed_from_u64(50);
        for prob in builtin_problems() {
            let p = Point2::new(0.3, 0.7);
            assert!(prob.pde_residual(&p).unwrap() <= 1e-8, "{}", prob.name);
            for _ in 0..50 {
                let p = Point2::new(rng.gen_range(0.05..0.95), rng.gen_range(0.05..0.95));
                assert!(prob.pde_residual(&p).unwrap() <= 1e-8, "{} at {p}", prob.name);
                assert!(prob.gradient_mismatch(&p).unwrap() <= 1e-8, "{}", prob.name);
            }
        }
    }

    #[test]
    fn inconsistent_source_is_detected() {
        let mut prob = table1();
        prob.coeffs.source = Arc::new(|p| 1.01 * variable_diffusion_term(p));
        assert!(prob.pde_residual(&Point2::new(0.3, 0.7)).unwrap() > 1e-4);
    }

    #[test]
    fn table2_has_no_reaction() {
        let prob = table2();
        for p in [Point2::new(0.1, 0.2), Point2::new(0.9, 0.5)] {
            assert_eq!((prob.coeffs.div_convection)(&p), 0.0);
            assert_eq!(prob.coeffs.c_b(&p), 0.0);
            assert_eq!((prob.coeffs.convection)(&p), Vector2::zeros());
        }
    }

    #[test]
    fn poly_exact_has_zero_source() {
        let prob = poly_exact();
        assert_eq!((prob.coeffs.source)(&Point2::new(0.4, 0.1)), 0.0);
        assert_eq!((prob.coeffs.boundary)(&Point2::new(1.0, 1.0)), 0.0);
    }

    #[test]
    fn boundary_data_matches_exact_solution() {
        for prob in [table1(), table2()] {
            let u = &prob.exact.as_ref().unwrap().u;
            for t in [0.0, 0.25, 0.6, 1.0] {
                for p in [Point2::new(t, 0.0), Point2::new(0.0, t), Point2::new(1.0, t), Point2::new(t, 1.0)] {
                    assert!(u(&p).abs() < 1e-15);
                }
            }
        }
        assert!(find_problem("table1").is_some());
        assert!(find_problem("nope").is_none());
    }
}
