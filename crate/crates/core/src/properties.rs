//! Seeded battery of invariant checks across all modules.
//!
//! Each property draws its random inputs from its own stream derived from the
//! seed, so results do not depend on which other properties run. The
//! measurement helpers are public so that tests can pin their own tolerances.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::Arc;

use nalgebra::{Point2, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::assembly::{assemble, CoefficientSet};
use crate::error::Result;
use crate::error_analysis::{interior_l2_distance, interior_l2_distance_gram};
use crate::mesh::{Mesh, Rect};
use crate::poly_quad::{l2_project_tri, tri_quadrature, TriBasis};
use crate::problems::{builtin_problems, table1};
use crate::sparse_solver::{relative_residual, solve, solve_dense, DEFAULT_TOL};
use crate::weak_gradient::{WeakGradient, WeakGradientOperator};
use crate::weak_space::{DirichletData, WeakFunction, WeakSpace};

#[derive(Debug, Clone, PartialEq)]
pub struct PropertyOutcome {
    pub module: &'static str,
    pub id: &'static str,
    pub passed: bool,
    /// Measured quantity, or the failing input.
    pub witness: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropertySummary {
    pub seed: u64,
    pub outcomes: Vec<PropertyOutcome>,
}

impl PropertySummary {
    pub fn all_passed(&self) -> bool {
        self.outcomes.iter().all(|o| o.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &PropertyOutcome> {
        self.outcomes.iter().filter(|o| !o.passed)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for o in &self.outcomes {
            let status = if o.passed { "PASS" } else { "FAIL" };
            let _ = writeln!(out, "{status} {:<14} {:<28} {}", o.module, o.id, o.witness);
        }
        let failed = self.failures().count();
        let _ = writeln!(
            out,
            "seed {}: {} passed, {} failed",
            self.seed,
            self.outcomes.len() - failed,
            failed
        );
        out
    }
}

type Check = fn(&mut ChaCha8Rng) -> Result<(bool, String)>;

const CHECKS: &[(&str, &str, Check)] = &[
    ("mesh", "topology", check_mesh_topology),
    ("poly_quad", "monomial-exactness", check_monomial_exactness),
    ("poly_quad", "projection-idempotent", check_projection_idempotent),
    ("weak_space", "interpolation-linear", check_interpolation_linear),
    ("weak_gradient", "defining-relation", check_defining_relation),
    ("weak_gradient", "polynomial-exactness", check_polynomial_exactness),
    ("weak_gradient", "kernel-rank", check_kernel_rank),
    ("weak_gradient", "mutation-detected", check_mutation_detected),
    ("assembly", "coercivity", check_coercivity),
    ("assembly", "skew-symmetry", check_skew),
    ("assembly", "discrete-embedding", check_embedding),
    ("sparse_solver", "dense-agreement", check_solver),
    ("error_analysis", "gram-agreement", check_gram),
    ("problems", "source-consistency", check_sources),
];

/// Runs every property with inputs derived from `seed`.
pub fn run_properties(seed: u64) -> PropertySummary {
    let outcomes = CHECKS
        .iter()
        .enumerate()
        .map(|(i, &(module, id, check))| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (0x9e37_79b9_7f4a_7c15u64.wrapping_mul(i as u64 + 1)));
            let (passed, witness) = match check(&mut rng) {
                Ok(r) => r,
                Err(e) => (false, format!("error: {e}")),
            };
            PropertyOutcome {
                module,
                id,
                passed,
                witness,
            }
        })
        .collect();
    PropertySummary { seed, outcomes }
}

fn unit_space(n: usize, k: usize) -> Result<WeakSpace> {
    WeakSpace::new(Arc::new(Mesh::build_structured(n, Rect::UNIT_SQUARE)?), k)
}

/// Weak function with i.i.d. uniform coefficients in `[-1, 1]`.
pub fn random_weak_function<'s>(space: &'s WeakSpace, rng: &mut ChaCha8Rng) -> WeakFunction<'s> {
    let coeffs = (0..space.total_dofs()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    WeakFunction::from_coeffs(space, coeffs).expect("length matches the space")
}

/// Random element of `S_h^0` (zero boundary traces).
pub fn random_s0<'s>(space: &'s WeakSpace, rng: &mut ChaCha8Rng) -> WeakFunction<'s> {
    let x: Vec<f64> = (0..space.num_unknowns()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    WeakFunction::from_unknowns(space, &x, &DirichletData::zero(space)).expect("length matches the space")
}

/// `Q_h` of a random combination of the modes `sin(i pi x) sin(j pi y)`,
/// `1 <= i, j <= 3`, with amplitudes damped like `(i^2 + j^2)^-2` so the
/// samples stay close to the extremal (lowest) mode. Lies in `S_h^0`.
pub fn smooth_s0<'s>(space: &'s WeakSpace, rng: &mut ChaCha8Rng) -> Result<WeakFunction<'s>> {
    let amp: Vec<f64> = (0..9)
        .map(|m| {
            let (i, j) = ((m / 3 + 1) as f64, (m % 3 + 1) as f64);
            rng.gen_range(-1.0..1.0) / (i * i + j * j).powi(2)
        })
        .collect();
    space.interpolate(move |p| {
        let mut s = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                s += amp[3 * i + j] * ((i + 1) as f64 * PI * p.x).sin() * ((j + 1) as f64 * PI * p.y).sin();
            }
        }
        s
    })
}

/// Largest defining-relation residual over all elements for `samples`
/// random weak functions.
pub fn max_defining_residual(space: &WeakSpace, samples: usize, rng: &mut ChaCha8Rng) -> Result<f64> {
    let grads = WeakGradient::build(space)?;
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let v = random_weak_function(space, rng);
        for op in &grads.ops {
            worst = worst.max(op.defining_residual(space, &v));
        }
    }
    Ok(worst)
}

/// Largest relative error `|grad_w Q_h u - grad u|` at quadrature points over
/// all monomials `u` of total degree at most `k + 2`.
pub fn max_monomial_gradient_error(space: &WeakSpace) -> Result<f64> {
    let mesh = space.mesh();
    let grads = WeakGradient::build(space)?;
    let rule = tri_quadrature(2 * space.r())?;
    let mut worst = 0.0f64;
    for deg in 0..=space.k() + 2 {
        for a in 0..=deg {
            let b = (deg - a) as i32;
            let a = a as i32;
            let u = move |p: &Point2<f64>| p.x.powi(a) * p.y.powi(b);
            let du = move |p: &Point2<f64>| {
                let dx = if a > 0 { a as f64 * p.x.powi(a - 1) * p.y.powi(b) } else { 0.0 };
                let dy = if b > 0 { b as f64 * p.x.powi(a) * p.y.powi(b - 1) } else { 0.0 };
                Vector2::new(dx, dy)
            };
            let v = space.interpolate(u)?;
            for el in 0..mesh.num_elements() {
                let op = grads.op(el);
                let g = grads.apply(&v, el);
                for q in crate::poly_quad::element_points(mesh, el, &rule) {
                    let err = (op.eval(&g, &q.x) - du(&q.x)).norm();
                    worst = worst.max(err / du(&q.x).norm().max(1.0));
                }
            }
        }
    }
    Ok(worst)
}

/// `(expected rank, min rank, max rank, largest |grad_w 1|)` over the
/// elements of `space`, with `expected = local_dim - 1`.
pub fn kernel_summary(space: &WeakSpace) -> Result<(usize, usize, usize, f64)> {
    let grads = WeakGradient::build(space)?;
    let expected = space.local_dim() - 1;
    let ranks: Vec<usize> = grads.ops.iter().map(|op| op.numerical_rank()).collect();
    let one = space.interpolate(|_| 1.0)?;
    let mut worst = 0.0f64;
    for el in 0..space.mesh().num_elements() {
        let g = grads.apply(&one, el);
        for p in space.mesh().element_points(el) {
            worst = worst.max(grads.op(el).eval(&g, &p).norm());
        }
    }
    let min = *ranks.iter().min().unwrap_or(&0);
    let max = *ranks.iter().max().unwrap_or(&0);
    Ok((expected, min, max, worst))
}

/// For `samples` random `v` in `S_h^0`: the smallest value of
/// `v^T M v - a0 ||grad_w v||^2`, and the largest relative deviation
/// `|v^T M v - ||grad_w v||^2| / ||grad_w v||^2` (meaningful when `A = I` and
/// `c_b = 0`).
pub fn form_margins(
    space: &WeakSpace,
    coeffs: &CoefficientSet,
    samples: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(f64, f64)> {
    let grads = WeakGradient::build(space)?;
    let system = assemble(space, &grads, coeffs, &DirichletData::zero(space))?;
    let mut min_margin = f64::INFINITY;
    let mut max_rel = 0.0f64;
    for _ in 0..samples {
        let v = random_s0(space, rng);
        let form = system.quadratic_form(&v.unknowns())?;
        let g2 = grads.norm(&v, 2 * space.r())?.powi(2);
        min_margin = min_margin.min(form - coeffs.a0 * g2);
        max_rel = max_rel.max((form - g2).abs() / g2);
    }
    Ok((min_margin, max_rel))
}

/// `max ||v0|| / ||grad_w v||_h` over `samples` functions in `S_h^0`, half
/// random and half smooth.
pub fn max_embedding_ratio(space: &WeakSpace, samples: usize, rng: &mut ChaCha8Rng) -> Result<f64> {
    let grads = WeakGradient::build(space)?;
    let zero = WeakFunction::zeros(space);
    let mut worst = 0.0f64;
    for i in 0..samples {
        let v = if i % 2 == 0 {
            random_s0(space, rng)
        } else {
            smooth_s0(space, rng)?
        };
        let v0 = interior_l2_distance(&v, &zero)?;
        let g = grads.norm(&v, 2 * space.r())?;
        if g > 0.0 {
            worst = worst.max(v0 / g);
        }
    }
    Ok(worst)
}

/// Iterative versus dense solution of the table1 system on an `n x n` mesh:
/// `(max |x_iter - x_dense|, reported residual, recomputed residual,
/// iteration estimate)`.
pub fn solver_agreement(n: usize, k: usize) -> Result<(f64, f64, f64, f64)> {
    let space = unit_space(n, k)?;
    let grads = WeakGradient::build(&space)?;
    let problem = table1();
    let g = space.project_boundary(|p| (problem.coeffs.boundary)(p))?;
    let system = assemble(&space, &grads, &problem.coeffs, &g)?;
    let (x, report) = solve(&system.matrix, &system.rhs, DEFAULT_TOL, 10_000)?;
    let (xd, _) = solve_dense(&system.matrix, &system.rhs)?;
    let diff = x.iter().zip(&xd).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    let recomputed = relative_residual(&system.matrix, &x, &system.rhs);
    Ok((diff, report.relative_residual, recomputed, report.estimated_residual))
}

fn check_mesh_topology(_rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    for n in [1, 2, 3, 5, 8] {
        let coarse = Mesh::build_structured(n, Rect::UNIT_SQUARE)?;
        for mesh in [coarse.refine_uniform()?, coarse] {
            let euler = mesh.num_vertices() as i64 - mesh.num_edges() as i64 + mesh.num_elements() as i64;
            let area: f64 = mesh.elements.iter().map(|e| e.area).sum();
            if let Err(msg) = mesh.validate() {
                return Ok((false, format!("n={n}: {msg}")));
            }
            if euler != 1 || (area - 1.0).abs() > 1e-13 {
                return Ok((false, format!("n={n}: euler {euler}, area {area}")));
            }
        }
    }
    Ok((true, "n in {1,2,3,5,8} and refinements valid".into()))
}

fn check_monomial_exactness(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let mesh = Mesh::build_structured(2, Rect::UNIT_SQUARE)?;
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let deg = rng.gen_range(0..=20usize);
        let a = rng.gen_range(0..=deg);
        let b = deg - a;
        let rule = tri_quadrature(deg)?;
        let mut total = 0.0;
        for el in 0..mesh.num_elements() {
            for q in crate::poly_quad::element_points(&mesh, el, &rule) {
                total += q.weight * q.x.x.powi(a as i32) * q.x.y.powi(b as i32);
            }
        }
        let exact = 1.0 / ((a + 1) * (b + 1)) as f64;
        worst = worst.max((total - exact).abs() / exact);
    }
    Ok((worst <= 1e-12, format!("max relative error {worst:.2e}")))
}

fn check_projection_idempotent(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let mesh = Mesh::build_structured(3, Rect::UNIT_SQUARE)?;
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let el = rng.gen_range(0..mesh.num_elements());
        let degree = rng.gen_range(0..=2usize);
        let basis = TriBasis::for_element(&mesh, el, degree);
        let c: Vec<f64> = (0..basis.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let once = l2_project_tri(|p| basis.combine(&c, p), &mesh, el, degree)?;
        let twice = l2_project_tri(|p| basis.combine(&once, p), &mesh, el, degree)?;
        for (a, b) in c.iter().zip(&twice) {
            worst = worst.max((a - b).abs());
        }
    }
    Ok((worst <= 1e-12, format!("max coefficient change {worst:.2e}")))
}

fn check_interpolation_linear(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let space = unit_space(3, 1)?;
    let (alpha, beta): (f64, f64) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
    let (s, t): (f64, f64) = (rng.gen_range(0.5..3.0), rng.gen_range(0.5..3.0));
    let u = move |p: &Point2<f64>| (s * p.x).sin() * p.y;
    let w = move |p: &Point2<f64>| (t * p.x * p.y).exp();
    let combined = space.interpolate(|p| alpha * u(p) + beta * w(p))?;
    let separate = space.interpolate(u)?.lin_comb(alpha, &space.interpolate(w)?, beta);
    let worst = combined
        .coeffs()
        .iter()
        .zip(separate.coeffs())
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    Ok((worst <= 1e-11, format!("max coefficient difference {worst:.2e}")))
}

fn check_defining_relation(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    for k in [0, 1] {
        for n in [1, 4, 8] {
            worst = worst.max(max_defining_residual(&unit_space(n, k)?, 5, rng)?);
        }
    }
    Ok((worst <= 1e-11, format!("max relative residual {worst:.2e}")))
}

fn check_polynomial_exactness(_rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    for k in [0, 1] {
        worst = worst.max(max_monomial_gradient_error(&unit_space(4, k)?)?);
    }
    Ok((worst <= 1e-11, format!("max gradient error {worst:.2e}")))
}

fn check_kernel_rank(_rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let mut witness = String::new();
    let mut ok = true;
    for k in [0, 1] {
        let (expected, min, max, constant) = kernel_summary(&unit_space(4, k)?)?;
        ok &= min == expected && max == expected && constant <= 1e-12;
        let _ = write!(witness, "k={k}: rank {min}..{max} (expect {expected}), |grad 1| {constant:.1e}; ");
    }
    Ok((ok, witness.trim_end_matches("; ").to_string()))
}

fn check_mutation_detected(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let mut mesh = Mesh::build_structured(4, Rect::UNIT_SQUARE)?;
    let element = rng.gen_range(0..mesh.num_elements());
    let local = rng.gen_range(0..3);
    mesh.corrupt_edge_sign(element, local);
    let space = WeakSpace::new(Arc::new(mesh), 0)?;
    let op = WeakGradientOperator::build(&space, element)?;
    let v = space.interpolate(|p| p.x * p.x + 2.0 * p.y + 1.0)?;
    let residual = op.defining_residual(&space, &v);
    Ok((
        residual > 1e-3,
        format!("flipped normal of element {element} edge {local}: residual {residual:.2e}"),
    ))
}

fn check_coercivity(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let coeffs = table1().coeffs;
    let mut worst = f64::INFINITY;
    for n in [4, 8] {
        let (margin, _) = form_margins(&unit_space(n, 0)?, &coeffs, 20, rng)?;
        worst = worst.min(margin);
    }
    Ok((worst >= -1e-10, format!("min of a_h(v,v) - a0 |v|^2 = {worst:.3e}")))
}

fn check_skew(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let coeffs = CoefficientSet {
        convection: Arc::new(|_| Vector2::new(1.0, 2.0)),
        ..CoefficientSet::laplace()
    };
    let mut worst = 0.0f64;
    for k in [0, 1] {
        let (_, rel) = form_margins(&unit_space(4, k)?, &coeffs, 20, rng)?;
        worst = worst.max(rel);
    }
    Ok((worst <= 1e-10, format!("max relative deviation {worst:.2e}")))
}

fn check_embedding(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let mut ratios = Vec::new();
    for n in [4, 8, 16] {
        ratios.push(max_embedding_ratio(&unit_space(n, 0)?, 20, rng)?);
    }
    let growth = ratios.windows(2).map(|w| w[1] / w[0] - 1.0).fold(f64::NEG_INFINITY, f64::max);
    Ok((
        growth < 0.1,
        format!("max ratios {:.4} {:.4} {:.4}, growth {growth:+.3}", ratios[0], ratios[1], ratios[2]),
    ))
}

fn check_solver(_rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let (diff, reported, recomputed, estimate) = solver_agreement(4, 0)?;
    let honest = recomputed <= 10.0 * estimate.max(reported) && estimate <= 10.0 * recomputed.max(f64::MIN_POSITIVE);
    Ok((
        diff <= 1e-8 && honest && reported == recomputed,
        format!("|x - x_dense| {diff:.2e}, residual {recomputed:.2e}, estimate {estimate:.2e}"),
    ))
}

fn check_gram(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    for k in [0, 1, 2] {
        let space = unit_space(3, k)?;
        let a = random_weak_function(&space, rng);
        let b = random_weak_function(&space, rng);
        let d1 = interior_l2_distance(&a, &b)?;
        let d2 = interior_l2_distance_gram(&a, &b)?;
        worst = worst.max((d1 - d2).abs() / d1.max(1e-300));
    }
    Ok((worst <= 1e-10, format!("max relative difference {worst:.2e}")))
}

fn check_sources(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    for problem in builtin_problems() {
        for _ in 0..50 {
            let p = Point2::new(rng.gen_range(0.02..0.98), rng.gen_range(0.02..0.98));
            if let Some(r) = problem.pde_residual(&p) {
                worst = worst.max(r);
            }
        }
    }
    Ok((worst <= 1e-8, format!("max relative PDE residual {worst:.2e}")))
}
