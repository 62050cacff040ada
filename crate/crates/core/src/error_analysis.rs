//! Error norms of a discrete solution against a known exact solution, and
//! observed convergence rates.
//!
//! `u - u_h^0` can be measured in two ways, selected by [`Sampling`]:
//! full elementwise quadrature (the broken L2 norm), or one-point evaluation
//! at element centroids. The latter is a discrete norm in which the `k = 0`
//! solution converges at second order (centroids are superconvergence points
//! of the `P_0` part); over full quadrature it is only first order.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector, Point2, Vector2};

use crate::error::Result;
use crate::poly_quad::{element_points, quad_degree, tri_quadrature};
use crate::weak_gradient::WeakGradient;
use crate::weak_space::WeakFunction;

/// Where `u - u_h^0` is sampled for the L2 and L-infinity errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Sampling {
    /// L2 by elementwise quadrature; L-infinity over quadrature points and
    /// element vertices.
    Quadrature,
    /// L2 as `sqrt(sum_K |K| e(x_K)^2)`; L-infinity as `max_K |e(x_K)|`,
    /// with `x_K` the centroid.
    #[default]
    Centroid,
}

impl Sampling {
    pub fn name(&self) -> &'static str {
        match self {
            Sampling::Quadrature => "quadrature",
            Sampling::Centroid => "centroid",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "quadrature" => Some(Sampling::Quadrature),
            "centroid" => Some(Sampling::Centroid),
            _ => None,
        }
    }
}

/// `||grad_w u_h - grad u||_h`.
pub fn error_h1w(
    grad_exact: impl Fn(&Point2<f64>) -> Vector2<f64>,
    uh: &WeakFunction<'_>,
    grads: &WeakGradient,
) -> Result<f64> {
    let space = uh.space();
    let rule = tri_quadrature(quad_degree(space.k()))?;
    let mut total = 0.0;
    for el in 0..space.mesh().num_elements() {
        let op = grads.op(el);
        let g = grads.apply(uh, el);
        for q in element_points(space.mesh(), el, &rule) {
            total += q.weight * (op.eval(&g, &q.x) - grad_exact(&q.x)).norm_squared();
        }
    }
    Ok(total.sqrt())
}

/// `||u - u_h^0||` under the given sampling.
pub fn error_l2(u: impl Fn(&Point2<f64>) -> f64, uh: &WeakFunction<'_>, sampling: Sampling) -> Result<f64> {
    let space = uh.space();
    let mesh = space.mesh();
    let mut total = 0.0;
    match sampling {
        Sampling::Quadrature => {
            let rule = tri_quadrature(quad_degree(space.k()))?;
            for el in 0..mesh.num_elements() {
                let basis = space.interior_basis(el);
                let c = uh.interior(el);
                for q in element_points(mesh, el, &rule) {
                    total += q.weight * (u(&q.x) - basis.combine(c, &q.x)).powi(2);
                }
            }
        }
        Sampling::Centroid => {
            for el in &mesh.elements {
                let e = u(&el.centroid) - uh.eval_interior(el.id, &el.centroid);
                total += el.area * e * e;
            }
        }
    }
    Ok(total.sqrt())
}

/// `max |u - u_h^0|` over the sample points of `sampling`.
pub fn error_linf(u: impl Fn(&Point2<f64>) -> f64, uh: &WeakFunction<'_>, sampling: Sampling) -> Result<f64> {
    let space = uh.space();
    let mesh = space.mesh();
    let mut worst = 0.0f64;
    match sampling {
        Sampling::Quadrature => {
            let rule = tri_quadrature(quad_degree(space.k()))?;
            for el in 0..mesh.num_elements() {
                let basis = space.interior_basis(el);
                let c = uh.interior(el);
                let pts = element_points(mesh, el, &rule).into_iter().map(|q| q.x);
                for p in pts.chain(mesh.element_points(el)) {
                    worst = worst.max((u(&p) - basis.combine(c, &p)).abs());
                }
            }
        }
        Sampling::Centroid => {
            for el in &mesh.elements {
                worst = worst.max((u(&el.centroid) - uh.eval_interior(el.id, &el.centroid)).abs());
            }
        }
    }
    Ok(worst)
}

/// `||Q_h^0 u - u_h^0||`, integrated exactly (both are piecewise `P_k`).
pub fn error_superclose(u: impl Fn(&Point2<f64>) -> f64, uh: &WeakFunction<'_>) -> Result<f64> {
    let space = uh.space();
    let qh = space.interpolate(&u)?;
    interior_l2_distance(&qh, uh)
}

/// Broken L2 distance between the interior parts of two weak functions by
/// quadrature.
pub fn interior_l2_distance(a: &WeakFunction<'_>, b: &WeakFunction<'_>) -> Result<f64> {
    let space = a.space();
    let rule = tri_quadrature(2 * space.k())?;
    let mut total = 0.0;
    for el in 0..space.mesh().num_elements() {
        let basis = space.interior_basis(el);
        let diff: Vec<f64> = a.interior(el).iter().zip(b.interior(el)).map(|(x, y)| x - y).collect();
        for q in element_points(space.mesh(), el, &rule) {
            total += q.weight * basis.combine(&diff, &q.x).powi(2);
        }
    }
    Ok(total.sqrt())
}

/// Same distance as [`interior_l2_distance`], computed in coefficient space as
/// `sqrt(sum_K d_K^T G_K d_K)` with the local Gram matrices `G_K`.
pub fn interior_l2_distance_gram(a: &WeakFunction<'_>, b: &WeakFunction<'_>) -> Result<f64> {
    let space = a.space();
    let n = space.interior_dim();
    let rule = tri_quadrature(2 * space.k())?;
    let mut total = 0.0;
    for el in 0..space.mesh().num_elements() {
        let basis = space.interior_basis(el);
        let mut gram = DMatrix::zeros(n, n);
        for q in element_points(space.mesh(), el, &rule) {
            let phi = DVector::from_vec(basis.eval(&q.x));
            gram += q.weight * &phi * phi.transpose();
        }
        let d = DVector::from_iterator(n, a.interior(el).iter().zip(b.interior(el)).map(|(x, y)| x - y));
        total += (d.transpose() * gram * &d)[(0, 0)];
    }
    Ok(total.max(0.0).sqrt())
}

/// `ln(e_h / e_{h/2}) / ln 2`; `None` unless both errors are positive and finite.
pub fn rate(coarse: f64, fine: f64) -> Option<f64> {
    (coarse > 0.0 && fine > 0.0 && coarse.is_finite() && fine.is_finite()).then(|| (coarse / fine).ln() / 2f64.ln())
}

/// Pairwise rates of a sequence of errors on successively halved meshes.
pub fn rates(errors: &[f64]) -> Vec<Option<f64>> {
    errors.windows(2).map(|w| rate(w[0], w[1])).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorRecord {
    pub level: usize,
    /// Grid cells per side of the structured mesh.
    pub n: usize,
    /// Grid spacing `1/n` of the structured mesh (the largest element
    /// diameter is `sqrt(2) h`).
    pub h: f64,
    pub err_h1w: f64,
    pub err_l2: f64,
    pub err_linf: f64,
    pub err_superclose: f64,
}

impl ErrorRecord {
    pub fn errors(&self) -> [f64; 4] {
        [self.err_h1w, self.err_l2, self.err_linf, self.err_superclose]
    }

    pub fn is_valid(&self) -> bool {
        self.errors().iter().all(|e| e.is_finite() && *e >= 0.0)
    }
}

/// Rates between a record and the previous (coarser) level.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RateRecord {
    pub h1w: Option<f64>,
    pub l2: Option<f64>,
    pub linf: Option<f64>,
    pub superclose: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub problem: String,
    pub k: usize,
    pub sampling: Sampling,
    pub records: Vec<ErrorRecord>,
    /// `rates[i]` compares `records[i]` with `records[i + 1]`.
    pub rates: Vec<RateRecord>,
}

impl ConvergenceReport {
    pub fn new(problem: &str, k: usize, sampling: Sampling, records: Vec<ErrorRecord>) -> Self {
        let rates = records
            .windows(2)
            .map(|w| {
                // Rates are only defined between levels whose h halves.
                let halved = ((w[0].h / w[1].h) - 2.0).abs() < 1e-9;
                let r = |a: f64, b: f64| if halved { rate(a, b) } else { None };
                RateRecord {
                    h1w: r(w[0].err_h1w, w[1].err_h1w),
                    l2: r(w[0].err_l2, w[1].err_l2),
                    linf: r(w[0].err_linf, w[1].err_linf),
                    superclose: r(w[0].err_superclose, w[1].err_superclose),
                }
            })
            .collect();
        ConvergenceReport {
            problem: problem.to_string(),
            k,
            sampling,
            records,
            rates,
        }
    }

    /// Rates arriving at record `i` (none for the first level).
    pub fn rates_into(&self, i: usize) -> RateRecord {
        if i == 0 {
            RateRecord::default()
        } else {
            self.rates[i - 1]
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "level,h,err_h1w,rate_h1w,err_l2,rate_l2,err_linf,rate_linf,err_superclose,rate_superclose\n",
        );
        let cell = |r: Option<f64>| r.map_or(String::new(), |v| format!("{v:.4}"));
        for (i, rec) in self.records.iter().enumerate() {
            let r = self.rates_into(i);
            let _ = writeln!(
                out,
                "{},{:.6e},{:.3e},{},{:.3e},{},{:.3e},{},{:.3e},{}",
                rec.level,
                rec.h,
                rec.err_h1w,
                cell(r.h1w),
                rec.err_l2,
                cell(r.l2),
                rec.err_linf,
                cell(r.linf),
                rec.err_superclose,
                cell(r.superclose)
            );
        }
        out
    }

    /// Aligned text table, one row per level, labelled by the grid spacing
    /// `1/n`.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "problem {}  k = {}  ({} sampling for L2/Linf)",
            self.problem,
            self.k,
            self.sampling.name()
        );
        let _ = writeln!(
            out,
            "{:>7} {:>10} {:>11} {:>8} {:>11} {:>8} {:>11} {:>8} {:>11} {:>8}",
            "mesh", "h", "H1w err", "rate", "L2 err", "rate", "Linf err", "rate", "supercl.", "rate"
        );
        let cell = |r: Option<f64>| r.map_or("-".to_string(), |v| format!("{v:.4}"));
        for (i, rec) in self.records.iter().enumerate() {
            let r = self.rates_into(i);
            let _ = writeln!(
                out,
                "{:>7} {:>10.4e} {:>11.3e} {:>8} {:>11.3e} {:>8} {:>11.3e} {:>8} {:>11.3e} {:>8}",
                format!("1/{}", rec.n),
                rec.h,
                rec.err_h1w,
                cell(r.h1w),
                rec.err_l2,
                cell(r.l2),
                rec.err_linf,
                cell(r.linf),
                rec.err_superclose,
                cell(r.superclose)
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{Mesh, Rect};
    use crate::weak_space::WeakSpace;
    use std::sync::Arc;

    fn space(n: usize, k: usize) -> WeakSpace {
        WeakSpace::new(Arc::new(Mesh::build_structured(n, Rect::UNIT_SQUARE).unwrap()), k).unwrap()
    }

    #[test]
    fn rate_formula() {
        assert!((rate(0.1, 0.025).unwrap() - 2.0).abs() < 1e-15);
        assert!((rate(0.9329, 0.4660).unwrap() - 1.0013).abs() < 2e-4);
        assert!((rate(3.129e-2, 8.538e-3).unwrap() - 1.8735).abs() < 5e-4);
        assert_eq!(rate(0.0, 1.0), None);
        assert_eq!(rate(1.0, -1.0), None);
        assert_eq!(rates(&[0.4, 0.2, 0.1]), vec![Some(1.0), Some(1.0)]);
    }

    #[test]
    fn interpolant_of_linear_has_zero_gradient_error() {
        let s = space(4, 0);
        let wg = WeakGradient::build(&s).unwrap();
        let v = s.interpolate(|p| p.x + 2.0 * p.y).unwrap();
        assert!(error_h1w(|_| Vector2::new(1.0, 2.0), &v, &wg).unwrap() < 1e-12);
    }

    #[test]
    fn reproduced_polynomials_have_zero_error() {
        let s = space(3, 1);
        let u = |p: &Point2<f64>| 0.5 - p.x + 3.0 * p.y;
        let v = s.interpolate(u).unwrap();
        for sampling in [Sampling::Quadrature, Sampling::Centroid] {
            assert!(error_l2(u, &v, sampling).unwrap() < 1e-11);
            assert!(error_linf(u, &v, sampling).unwrap() < 1e-11);
        }
        assert!(error_superclose(u, &v).unwrap() < 1e-12);

        let s0 = space(3, 0);
        let one = s0.interpolate(|_| 1.0).unwrap();
        assert!(error_linf(|_| 1.0, &one, Sampling::Quadrature).unwrap() < 1e-12);
    }

    #[test]
    fn gram_and_quadrature_distances_agree() {
        for k in 0..=2 {
            let s = space(4, k);
            let a = s.interpolate(|p| (3.0 * p.x).sin() * p.y).unwrap();
            let b = s.interpolate(|p| (p.x * p.y).exp()).unwrap();
            let d1 = interior_l2_distance(&a, &b).unwrap();
            let d2 = interior_l2_distance_gram(&a, &b).unwrap();
            assert!((d1 - d2).abs() <= 1e-10 * d1, "{d1} {d2}");
        }
    }

    #[test]
    fn centroid_and_quadrature_differ_for_p0() {
        let s = space(8, 0);
        let u = |p: &Point2<f64>| (std::f64::consts::PI * p.x).sin();
        let v = s.interpolate(u).unwrap();
        let full = error_l2(u, &v, Sampling::Quadrature).unwrap();
        let centroid = error_l2(u, &v, Sampling::Centroid).unwrap();
        assert!(centroid < 0.2 * full);
    }

    #[test]
    fn report_formats() {
        let rec = |level: usize, n: usize, e: f64| ErrorRecord {
            level,
            n,
            h: 1.0 / n as f64,
            err_h1w: e,
            err_l2: e * e,
            err_linf: e,
            err_superclose: e * e,
        };
        let report = ConvergenceReport::new("demo", 0, Sampling::Centroid, vec![rec(0, 4, 0.2), rec(1, 8, 0.1)]);
        assert!((report.rates[0].l2.unwrap() - 2.0).abs() < 1e-12);
        let csv = report.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(
            lines[0],
            "level,h,err_h1w,rate_h1w,err_l2,rate_l2,err_linf,rate_linf,err_superclose,rate_superclose"
        );
        assert_eq!(lines[1].split(',').nth(3), Some(""));
        assert_eq!(lines[2].split(',').nth(3), Some("1.0000"));
        assert_eq!(lines[1].split(',').count(), 10);
        let table = report.to_table();
        assert!(table.contains("1/8"));

        let skipped = ConvergenceReport::new("demo", 0, Sampling::Centroid, vec![rec(0, 4, 0.2), rec(1, 16, 0.1)]);
        assert_eq!(skipped.rates[0].h1w, None);
    }
}
