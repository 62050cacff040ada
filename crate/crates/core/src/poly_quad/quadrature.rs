use nalgebra::Point2;

use crate::error::{Error, Result};
use crate::mesh::Mesh;

pub const MAX_DEGREE: usize = 20;

/// A quadrature rule on the reference triangle `{(0,0), (1,0), (0,1)}` or on
/// the unit interval `[0, 1]`.
///
/// Triangle points are stored as reference coordinates `(xi, eta)`; the
/// barycentric coordinates are `(1 - xi - eta, xi, eta)`. Interval rules keep
/// the parameter in `xi` and set `eta = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadRule {
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

impl QuadRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn barycentric(&self, i: usize) -> [f64; 3] {
        let [xi, eta] = self.points[i];
        [1.0 - xi - eta, xi, eta]
    }

    pub fn integrate_ref(&self, f: impl Fn(f64, f64) -> f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| w * f(p[0], p[1]))
            .sum()
    }
}

/// Gauss-Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(m > 0, "Gauss rule needs at least one point");
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    for i in 0..m.div_ceil(2) {
        // Chebyshev-like initial guess on [-1, 1], refined by Newton.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(m, x);
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(m, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // Map [-1, 1] -> [0, 1].
        nodes[i] = 0.5 * (1.0 - x);
        nodes[m - 1 - i] = 0.5 * (1.0 + x);
        weights[i] = 0.5 * w;
        weights[m - 1 - i] = 0.5 * w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(m: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for j in 2..=m {
        let jf = j as f64;
        let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    let (p, pm1) = if m == 0 { (1.0, 0.0) } else { (p1, p0) };
    let d = m as f64 * (x * p - pm1) / (x * x - 1.0);
    (p, d)
}

/// Gauss-Legendre rule on `[0, 1]` exact for polynomials of degree `degree`.
pub fn edge_quadrature(degree: usize) -> Result<QuadRule> {
    if degree > MAX_DEGREE {
        return Err(Error::UnsupportedQuadrature(degree));
    }
    let m = degree / 2 + 1;
    let (nodes, weights) = gauss_legendre(m);
    Ok(QuadRule {
        points: nodes.into_iter().map(|t| [t, 0.0]).collect(),
        weights,
        degree,
    })
}

/// Collapsed (Duffy) tensor Gauss rule on the reference triangle, exact for
/// bivariate polynomials of total degree `degree`. All points are interior and
/// all weights positive.
pub fn tri_quadrature(degree: usize) -> Result<QuadRule> {
    if degree > MAX_DEGREE {
        return Err(Error::UnsupportedQuadrature(degree));
    }
    // The Jacobian (1 - u) raises the degree in u by one.
    let m = (degree + 2).div_ceil(2);
    let (nodes, weights) = gauss_legendre(m);
    let mut points = Vec::with_capacity(m * m);
    let mut w = Vec::with_capacity(m * m);
    for (u, wu) in nodes.iter().zip(&weights) {
        for (v, wv) in nodes.iter().zip(&weights) {
            points.push([*u, v * (1.0 - u)]);
            w.push(wu * wv * (1.0 - u));
        }
    }
    Ok(QuadRule {
        points,
        weights: w,
        degree,
    })
}

/// A quadrature point mapped onto a physical element or edge.
#[derive(Debug, Clone, Copy)]
pub struct PhysPoint {
    pub x: Point2<f64>,
    /// Physical weight (reference weight times Jacobian).
    pub weight: f64,
    /// Edge parameter in `[0, 1]`; zero for element points.
    pub t: f64,
}

/// Maps `rule` onto element `element` of `mesh`.
pub fn element_points(mesh: &Mesh, element: usize, rule: &QuadRule) -> Vec<PhysPoint> {
    let [a, b, c] = mesh.element_points(element);
    let jac = 2.0 * mesh.elements[element].area;
    rule.points
        .iter()
        .zip(&rule.weights)
        .map(|(p, w)| PhysPoint {
            x: a + (b - a) * p[0] + (c - a) * p[1],
            weight: w * jac,
            t: 0.0,
        })
        .collect()
}

/// Maps an interval rule onto edge `edge`, parameterized from its first to
/// its second vertex.
pub fn edge_points(mesh: &Mesh, edge: usize, rule: &QuadRule) -> Vec<PhysPoint> {
    let [a, b] = mesh.edge_points(edge);
    let len = mesh.edges[edge].length;
    rule.points
        .iter()
        .zip(&rule.weights)
        .map(|(p, w)| PhysPoint {
            x: a + (b - a) * p[0],
            weight: w * len,
            t: p[0],
        })
        .collect()
}
