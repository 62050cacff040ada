use nalgebra::{Point2, Vector2};

use crate::mesh::Mesh;

/// Dimension of `P_l` in two variables.
pub const fn dim_p(l: usize) -> usize {
    (l + 1) * (l + 2) / 2
}

/// Scaled monomials `((x - x_c) / s)^i ((y - y_c) / s)^j`, `i + j <= degree`,
/// ordered by total degree and then by increasing power of `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct TriBasis {
    pub degree: usize,
    pub center: Point2<f64>,
    pub scale: f64,
    exponents: Vec<(i32, i32)>,
}

impl TriBasis {
    pub fn new(degree: usize, center: Point2<f64>, scale: f64) -> Self {
        let mut exponents = Vec::with_capacity(dim_p(degree));
        for d in 0..=degree as i32 {
            for j in 0..=d {
                exponents.push((d - j, j));
            }
        }
        TriBasis {
            degree,
            center,
            scale,
            exponents,
        }
    }

    /// Basis centered at the element centroid and scaled by its diameter.
    pub fn for_element(mesh: &Mesh, element: usize, degree: usize) -> Self {
        let el = &mesh.elements[element];
        Self::new(degree, el.centroid, el.diameter)
    }

    pub fn dim(&self) -> usize {
        self.exponents.len()
    }

    pub fn exponents(&self) -> &[(i32, i32)] {
        &self.exponents
    }

    pub fn eval_into(&self, p: &Point2<f64>, out: &mut [f64]) {
        let s = (p.x - self.center.x) / self.scale;
        let t = (p.y - self.center.y) / self.scale;
        for (o, &(i, j)) in out.iter_mut().zip(&self.exponents) {
            *o = s.powi(i) * t.powi(j);
        }
    }

    pub fn eval(&self, p: &Point2<f64>) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.eval_into(p, &mut out);
        out
    }

    pub fn grad_into(&self, p: &Point2<f64>, out: &mut [Vector2<f64>]) {
        let s = (p.x - self.center.x) / self.scale;
        let t = (p.y - self.center.y) / self.scale;
        let inv = 1.0 / self.scale;
        for (o, &(i, j)) in out.iter_mut().zip(&self.exponents) {
            let dx = if i > 0 { i as f64 * s.powi(i - 1) * t.powi(j) } else { 0.0 };
            let dy = if j > 0 { j as f64 * s.powi(i) * t.powi(j - 1) } else { 0.0 };
            *o = Vector2::new(dx * inv, dy * inv);
        }
    }

    pub fn grad(&self, p: &Point2<f64>) -> Vec<Vector2<f64>> {
        let mut out = vec![Vector2::zeros(); self.dim()];
        self.grad_into(p, &mut out);
        out
    }

    /// Evaluates `sum_i coeffs[i] * phi_i(p)`.
    pub fn combine(&self, coeffs: &[f64], p: &Point2<f64>) -> f64 {
        let s = (p.x - self.center.x) / self.scale;
        let t = (p.y - self.center.y) / self.scale;
        coeffs
            .iter()
            .zip(&self.exponents)
            .map(|(c, &(i, j))| c * s.powi(i) * t.powi(j))
            .sum()
    }
}

/// Shifted Legendre polynomials `L_j(2t - 1)`, `j <= degree`, in the edge
/// parameter `t in [0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EdgeBasis {
    pub degree: usize,
}

impl EdgeBasis {
    pub fn new(degree: usize) -> Self {
        EdgeBasis { degree }
    }

    pub fn dim(&self) -> usize {
        self.degree + 1
    }

    pub fn eval_into(&self, t: f64, out: &mut [f64]) {
        let x = 2.0 * t - 1.0;
        out[0] = 1.0;
        if self.degree >= 1 {
            out[1] = x;
        }
        for j in 2..=self.degree {
            let jf = j as f64;
            out[j] = ((2.0 * jf - 1.0) * x * out[j - 1] - (jf - 1.0) * out[j - 2]) / jf;
        }
    }

    pub fn eval(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.eval_into(t, &mut out);
        out
    }

    pub fn combine(&self, coeffs: &[f64], t: f64) -> f64 {
        self.eval(t).iter().zip(coeffs).map(|(a, b)| a * b).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn dimensions() {
        assert_eq!([dim_p(0), dim_p(1), dim_p(2), dim_p(3)], [1, 3, 6, 10]);
        assert_eq!(TriBasis::new(3, Point2::origin(), 1.0).dim(), 10);
        assert_eq!(EdgeBasis::new(2).dim(), 3);
    }

    #[test]
    fn vandermonde_nonsingular() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for l in 0..=3 {
            let b = TriBasis::new(l, Point2::new(0.3, 0.2), 0.7);
            let n = b.dim();
            let mut v = DMatrix::zeros(n, n);
            for r in 0..n {
                let p = Point2::new(rng.gen::<f64>(), rng.gen::<f64>());
                for (c, val) in b.eval(&p).into_iter().enumerate() {
                    v[(r, c)] = val;
                }
            }
            let sv = v.singular_values();
            assert!(sv.min() > 1e-8 * sv.max(), "degree {l}");

            let e = EdgeBasis::new(l);
            let mut v = DMatrix::zeros(l + 1, l + 1);
            for r in 0..=l {
                let t = (r as f64 + 0.5) / (l + 1) as f64;
                for (c, val) in e.eval(t).into_iter().enumerate() {
                    v[(r, c)] = val;
                }
            }
            assert!(v.determinant().abs() > 1e-10);
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let b = TriBasis::new(3, Point2::new(0.4, 0.6), 0.25);
        let h = 1e-6;
        for _ in 0..20 {
            let p = Point2::new(rng.gen::<f64>(), rng.gen::<f64>());
            let g = b.grad(&p);
            let xp = b.eval(&Point2::new(p.x + h, p.y));
            let xm = b.eval(&Point2::new(p.x - h, p.y));
            let yp = b.eval(&Point2::new(p.x, p.y + h));
            let ym = b.eval(&Point2::new(p.x, p.y - h));
            for i in 0..b.dim() {
                let fd = Vector2::new((xp[i] - xm[i]) / (2.0 * h), (yp[i] - ym[i]) / (2.0 * h));
                assert!((fd - g[i]).norm() <= 1e-6 * (1.0 + g[i].norm()));
            }
        }
    }

    #[test]
    fn legendre_values() {
        let e = EdgeBasis::new(3);
        assert_eq!(e.eval(1.0), vec![1.0, 1.0, 1.0, 1.0]);
        assert_eq!(e.eval(0.0), vec![1.0, -1.0, 1.0, -1.0]);
        let mid = e.eval(0.5);
        assert!((mid[2] + 0.5).abs() < 1e-15);
    }
}
