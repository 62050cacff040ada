//! Conforming triangulations of axis-aligned rectangles.
//!
//! Structured meshes split each cell of an `n x n` grid along the diagonal
//! running from its lower-left to its upper-right corner. Uniform refinement
//! connects edge midpoints, so refining `build_structured(n)` yields the same
//! triangles as `build_structured(2n)` up to renumbering.
//!
//! Every edge stores a single unit normal. For interior edges it points out of
//! the adjacent element with the lower id, for boundary edges it points out of
//! the domain. Elements record a sign per local edge so that
//! `sign * edge.normal` is the element's outward normal.

use std::fmt::Write as _;

use nalgebra::{Point2, Vector2};

use crate::error::{Error, Result};

/// Axis-aligned rectangle `[x_min, x_max] x [y_min, y_max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Rect {
    pub const UNIT_SQUARE: Rect = Rect {
        x_min: 0.0,
        x_max: 1.0,
        y_min: 0.0,
        y_max: 1.0,
    };

    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Result<Self> {
        let ok = [x_min, x_max, y_min, y_max].iter().all(|v| v.is_finite())
            && x_max > x_min
            && y_max > y_min;
        if !ok {
            return Err(Error::InvalidMesh(format!(
                "degenerate rectangle [{x_min}, {x_max}] x [{y_min}, {y_max}]"
            )));
        }
        Ok(Rect {
            x_min,
            x_max,
            y_min,
            y_max,
        })
    }

    pub fn area(&self) -> f64 {
        (self.x_max - self.x_min) * (self.y_max - self.y_min)
    }

    pub fn contains(&self, p: &Point2<f64>) -> bool {
        p.x >= self.x_min && p.x <= self.x_max && p.y >= self.y_min && p.y <= self.y_max
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vertex {
    pub id: usize,
    pub x: Point2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub id: usize,
    /// Endpoints, lower vertex id first. The edge parameter runs from
    /// `vertices[0]` to `vertices[1]`.
    pub vertices: [usize; 2],
    /// Adjacent elements in ascending order; `elements[1]` is `None` on the boundary.
    pub elements: [Option<usize>; 2],
    pub unit_normal: Vector2<f64>,
    pub is_boundary: bool,
    pub length: f64,
}

impl Edge {
    pub fn adjacent(&self) -> impl Iterator<Item = usize> + '_ {
        self.elements.iter().flatten().copied()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Element {
    pub id: usize,
    /// Counterclockwise vertex ids.
    pub vertices: [usize; 3],
    /// Local edge `i` joins `vertices[i]` and `vertices[(i + 1) % 3]`.
    pub edges: [usize; 3],
    /// `+1.0` if the stored edge normal points out of this element.
    pub edge_signs: [f64; 3],
    pub area: f64,
    pub diameter: f64,
    pub centroid: Point2<f64>,
}

#[derive(Debug, Clone)]
pub struct Mesh {
    pub vertices: Vec<Vertex>,
    pub edges: Vec<Edge>,
    pub elements: Vec<Element>,
    /// Maximum element diameter.
    pub h: f64,
    pub level: usize,
    pub domain: Rect,
}

impl Mesh {
    /// Triangulates `domain` with an `n x n` grid of cells, each split along
    /// its lower-left to upper-right diagonal.
    pub fn build_structured(n: usize, domain: Rect) -> Result<Mesh> {
        if n == 0 {
            return Err(Error::InvalidMesh("n must be at least 1".into()));
        }
        let domain = Rect::new(domain.x_min, domain.x_max, domain.y_min, domain.y_max)?;
        let dx = (domain.x_max - domain.x_min) / n as f64;
        let dy = (domain.y_max - domain.y_min) / n as f64;

        let mut points = Vec::with_capacity((n + 1) * (n + 1));
        for j in 0..=n {
            for i in 0..=n {
                // Pin the far sides to the exact bounds.
                let x = if i == n { domain.x_max } else { domain.x_min + i as f64 * dx };
                let y = if j == n { domain.y_max } else { domain.y_min + j as f64 * dy };
                points.push(Point2::new(x, y));
            }
        }

        let vid = |i: usize, j: usize| j * (n + 1) + i;
        let mut triangles = Vec::with_capacity(2 * n * n);
        for j in 0..n {
            for i in 0..n {
                let (v00, v10) = (vid(i, j), vid(i + 1, j));
                let (v01, v11) = (vid(i, j + 1), vid(i + 1, j + 1));
                triangles.push([v00, v10, v11]);
                triangles.push([v00, v11, v01]);
            }
        }
        Self::from_triangles(points, triangles, domain, 0)
    }

    /// Splits every triangle into four by joining its edge midpoints.
    pub fn refine_uniform(&self) -> Result<Mesh> {
        let nv = self.vertices.len();
        let mut points: Vec<Point2<f64>> = self.vertices.iter().map(|v| v.x).collect();
        for edge in &self.edges {
            let a = points[edge.vertices[0]];
            let b = points[edge.vertices[1]];
            points.push(Point2::new(0.5 * (a.x + b.x), 0.5 * (a.y + b.y)));
        }
        let mut triangles = Vec::with_capacity(4 * self.elements.len());
        for el in &self.elements {
            let [v0, v1, v2] = el.vertices;
            let m01 = nv + el.edges[0];
            let m12 = nv + el.edges[1];
            let m20 = nv + el.edges[2];
            triangles.push([v0, m01, m20]);
            triangles.push([m01, v1, m12]);
            triangles.push([m20, m12, v2]);
            triangles.push([m01, m12, m20]);
        }
        Self::from_triangles(points, triangles, self.domain, self.level + 1)
    }

    /// Builds edge topology, normals and element geometry from raw triangles.
    pub fn from_triangles(
        points: Vec<Point2<f64>>,
        triangles: Vec<[usize; 3]>,
        domain: Rect,
        level: usize,
    ) -> Result<Mesh> {
        let vertices: Vec<Vertex> = points
            .into_iter()
            .enumerate()
            .map(|(id, x)| Vertex { id, x })
            .collect();

        let mut elements = Vec::with_capacity(triangles.len());
        for (id, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= vertices.len()) {
                return Err(Error::InvalidMesh(format!("element {id} references a missing vertex")));
            }
            let [a, b, c] = tri.map(|v| vertices[v].x);
            let signed = 0.5 * ((b - a).perp(&(c - a)));
            if !(signed > 0.0) {
                return Err(Error::InvalidMesh(format!(
                    "element {id} is degenerate or clockwise (signed area {signed:e})"
                )));
            }
            let diameter = (b - a).norm().max((c - b).norm()).max((a - c).norm());
            let centroid = Point2::from((a.coords + b.coords + c.coords) / 3.0);
            elements.push(Element {
                id,
                vertices: *tri,
                edges: [usize::MAX; 3],
                edge_signs: [0.0; 3],
                area: signed,
                diameter,
                centroid,
            });
        }

        // (lo, hi, element, local edge), sorted so that shared edges are adjacent.
        let mut sides: Vec<(usize, usize, usize, usize)> = Vec::with_capacity(3 * elements.len());
        for el in &elements {
            for local in 0..3 {
                let p = el.vertices[local];
                let q = el.vertices[(local + 1) % 3];
                sides.push((p.min(q), p.max(q), el.id, local));
            }
        }
        sides.sort_unstable();

        let mut edges: Vec<Edge> = Vec::new();
        let mut i = 0;
        while i < sides.len() {
            let (lo, hi, first, first_local) = sides[i];
            let mut j = i + 1;
            while j < sides.len() && sides[j].0 == lo && sides[j].1 == hi {
                j += 1;
            }
            let id = edges.len();
            let second = match j - i {
                1 => None,
                2 => Some((sides[i + 1].2, sides[i + 1].3)),
                m => {
                    return Err(Error::InvalidMesh(format!(
                        "edge ({lo}, {hi}) is shared by {m} elements"
                    )))
                }
            };

            let a = vertices[lo].x;
            let b = vertices[hi].x;
            let t = b - a;
            let length = t.norm();
            let mut normal = Vector2::new(t.y, -t.x) / length;
            // Orient the normal out of the lower-id element, which lies to the
            // left of its own counterclockwise traversal of this edge.
            let owner = &elements[first];
            if (owner.centroid - a).dot(&normal) > 0.0 {
                normal = -normal;
            }
            elements[first].edges[first_local] = id;
            elements[first].edge_signs[first_local] = 1.0;
            if let Some((el, local)) = second {
                elements[el].edges[local] = id;
                elements[el].edge_signs[local] = -1.0;
            }
            edges.push(Edge {
                id,
                vertices: [lo, hi],
                elements: [Some(first), second.map(|s| s.0)],
                unit_normal: normal,
                is_boundary: second.is_none(),
                length,
            });
            i = j;
        }

        let h = elements.iter().map(|e| e.diameter).fold(0.0, f64::max);
        Ok(Mesh {
            vertices,
            edges,
            elements,
            h,
            level,
            domain,
        })
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn boundary_edges(&self) -> impl Iterator<Item = &Edge> {
        self.edges.iter().filter(|e| e.is_boundary)
    }

    pub fn element_points(&self, element: usize) -> [Point2<f64>; 3] {
        self.elements[element].vertices.map(|v| self.vertices[v].x)
    }

    pub fn edge_points(&self, edge: usize) -> [Point2<f64>; 2] {
        self.edges[edge].vertices.map(|v| self.vertices[v].x)
    }

    /// Outward unit normal of local edge `local` of `element`.
    pub fn outward_normal(&self, element: usize, local: usize) -> Vector2<f64> {
        let el = &self.elements[element];
        self.edges[el.edges[local]].unit_normal * el.edge_signs[local]
    }

    /// Flips the orientation sign of one element side, breaking the mesh
    /// invariants. Only meant for mutation tests of downstream checks.
    #[doc(hidden)]
    pub fn corrupt_edge_sign(&mut self, element: usize, local: usize) {
        self.elements[element].edge_signs[local] *= -1.0;
    }

    /// Checks every topological and geometric invariant, returning a
    /// description of the first violation.
    pub fn validate(&self) -> std::result::Result<(), String> {
        let v = self.vertices.len() as i64;
        let e = self.edges.len() as i64;
        let f = self.elements.len() as i64;
        if v - e + f != 1 {
            return Err(format!("Euler relation violated: V - E + F = {}", v - e + f));
        }
        let slack = 1e-12 * (self.domain.x_max - self.domain.x_min).abs().max(1.0);
        for vert in &self.vertices {
            let p = vert.x;
            if p.x < self.domain.x_min - slack
                || p.x > self.domain.x_max + slack
                || p.y < self.domain.y_min - slack
                || p.y > self.domain.y_max + slack
            {
                return Err(format!("vertex {} lies outside the domain", vert.id));
            }
        }
        let mut seen = vec![0usize; self.edges.len()];
        for el in &self.elements {
            if !(el.area > 0.0) {
                return Err(format!("element {} has non-positive area", el.id));
            }
            for local in 0..3 {
                let edge = &self.edges[el.edges[local]];
                seen[edge.id] += 1;
                if !edge.adjacent().any(|a| a == el.id) {
                    return Err(format!("edge {} does not list element {}", edge.id, el.id));
                }
                let n = self.outward_normal(el.id, local);
                let a = self.vertices[edge.vertices[0]].x;
                if (el.centroid - a).dot(&n) >= 0.0 {
                    return Err(format!(
                        "element {} local edge {local}: signed normal is not outward",
                        el.id
                    ));
                }
            }
        }
        for edge in &self.edges {
            let count = edge.adjacent().count();
            if count != seen[edge.id] {
                return Err(format!("edge {} adjacency mismatch", edge.id));
            }
            if edge.is_boundary != (count == 1) || count == 0 {
                return Err(format!("edge {} has inconsistent boundary flag", edge.id));
            }
            if (edge.unit_normal.norm() - 1.0).abs() > 1e-14 {
                return Err(format!("edge {} normal is not unit length", edge.id));
            }
            if let [Some(a), Some(b)] = edge.elements {
                let sa = self.sign_of(a, edge.id);
                let sb = self.sign_of(b, edge.id);
                if sa * sb != -1.0 {
                    return Err(format!("edge {}: adjacent signs are not opposite", edge.id));
                }
            }
        }
        Ok(())
    }

    fn sign_of(&self, element: usize, edge: usize) -> f64 {
        let el = &self.elements[element];
        (0..3)
            .find(|&l| el.edges[l] == edge)
            .map(|l| el.edge_signs[l])
            .unwrap_or(0.0)
    }

    /// Smallest interior angle over all elements, in radians.
    pub fn min_angle(&self) -> f64 {
        let mut min = f64::INFINITY;
        for el in &self.elements {
            let p = self.element_points(el.id);
            for i in 0..3 {
                let u = p[(i + 1) % 3] - p[i];
                let w = p[(i + 2) % 3] - p[i];
                let cos = u.dot(&w) / (u.norm() * w.norm());
                min = min.min(cos.clamp(-1.0, 1.0).acos());
            }
        }
        min
    }

    /// Plain-text dump with one record per line, for debugging.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# level {} h {:.17e}", self.level, self.h);
        let _ = writeln!(out, "vertices {}", self.vertices.len());
        for v in &self.vertices {
            let _ = writeln!(out, "{} {:.17e} {:.17e}", v.id, v.x.x, v.x.y);
        }
        let _ = writeln!(out, "edges {}", self.edges.len());
        for e in &self.edges {
            let right = e.elements[1].map_or("-".to_string(), |v| v.to_string());
            let _ = writeln!(
                out,
                "{} {} {} {} {} {:.17e} {:.17e} {}",
                e.id,
                e.vertices[0],
                e.vertices[1],
                e.elements[0].unwrap_or(usize::MAX),
                right,
                e.unit_normal.x,
                e.unit_normal.y,
                u8::from(e.is_boundary)
            );
        }
        let _ = writeln!(out, "elements {}", self.elements.len());
        for el in &self.elements {
            let _ = writeln!(
                out,
                "{} {} {} {} {} {} {} {:+} {:+} {:+}",
                el.id,
                el.vertices[0],
                el.vertices[1],
                el.vertices[2],
                el.edges[0],
                el.edges[1],
                el.edges[2],
                el.edge_signs[0],
                el.edge_signs[1],
                el.edge_signs[2]
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(n: usize) -> Mesh {
        Mesh::build_structured(n, Rect::UNIT_SQUARE).unwrap()
    }

    #[test]
    fn structured_counts() {
        let m = unit(4);
        assert_eq!(m.num_elements(), 32);
        assert_eq!(m.num_vertices(), 25);
        assert_eq!(m.num_edges(), 56);
        assert_eq!(m.boundary_edges().count(), 16);

        let m = unit(1);
        assert_eq!((m.num_elements(), m.num_vertices(), m.num_edges()), (2, 4, 5));
        assert_eq!(m.boundary_edges().count(), 4);

        let m = unit(8);
        assert_eq!(m.num_edges(), 81 + 128 - 1);
        assert_eq!(81 - 208 + 128, 1);
        m.validate().unwrap();
    }

    #[test]
    fn structured_h_is_diagonal() {
        for n in [1, 3, 4, 8] {
            let m = unit(n);
            assert!((m.h - 2f64.sqrt() / n as f64).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            Mesh::build_structured(0, Rect::UNIT_SQUARE),
            Err(Error::InvalidMesh(_))
        ));
        let flat = Rect {
            x_min: 0.0,
            x_max: 1.0,
            y_min: 2.0,
            y_max: 2.0,
        };
        assert!(Mesh::build_structured(3, flat).is_err());
        assert!(Rect::new(1.0, 0.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn refinement_halves_h() {
        let m = unit(1);
        let r = m.refine_uniform().unwrap();
        assert_eq!(r.num_elements(), 8);
        assert_eq!(r.h, m.h / 2.0);
        assert_eq!(r.level, 1);
        let rr = r.refine_uniform().unwrap();
        assert!((rr.h - m.h / 4.0).abs() < 1e-14);
        rr.validate().unwrap();
    }

    #[test]
    fn refined_mesh_matches_structured_rebuild() {
        let mut refined: Vec<f64> = unit(4)
            .refine_uniform()
            .unwrap()
            .elements
            .iter()
            .map(|e| e.area)
            .collect();
        let mut built: Vec<f64> = unit(8).elements.iter().map(|e| e.area).collect();
        refined.sort_by(f64::total_cmp);
        built.sort_by(f64::total_cmp);
        assert_eq!(refined.len(), built.len());
        for (a, b) in refined.iter().zip(&built) {
            assert!((a - b).abs() < 1e-15);
        }

        // Same vertex set too.
        let key = |m: &Mesh| {
            let mut v: Vec<(i64, i64)> = m
                .vertices
                .iter()
                .map(|v| ((v.x.x * 1e9).round() as i64, (v.x.y * 1e9).round() as i64))
                .collect();
            v.sort_unstable();
            v
        };
        assert_eq!(key(&unit(4).refine_uniform().unwrap()), key(&unit(8)));
    }

    #[test]
    fn lengths_scale_exactly() {
        let m = unit(4);
        let r = m.refine_uniform().unwrap();
        let mut a: Vec<f64> = m.edges.iter().map(|e| e.length / 2.0).collect();
        let mut b: Vec<f64> = r.edges.iter().map(|e| e.length).collect();
        a.sort_by(f64::total_cmp);
        a.dedup();
        b.sort_by(f64::total_cmp);
        b.dedup();
        assert_eq!(a, b);
    }

    #[test]
    fn areas_sum_to_domain_on_rectangles() {
        let dom = Rect::new(-1.0, 2.5, 0.25, 1.0).unwrap();
        let mut m = Mesh::build_structured(3, dom).unwrap();
        for _ in 0..3 {
            let total: f64 = m.elements.iter().map(|e| e.area).sum();
            assert!((total - dom.area()).abs() <= 1e-12 * dom.area());
            m.validate().unwrap();
            m = m.refine_uniform().unwrap();
        }
    }

    #[test]
    fn min_angle_is_preserved() {
        let m = unit(2);
        let a0 = m.min_angle();
        assert!((a0 - std::f64::consts::FRAC_PI_4).abs() < 1e-12);
        let r = m.refine_uniform().unwrap().refine_uniform().unwrap();
        assert!((r.min_angle() - a0).abs() < 1e-12);
    }

    #[test]
    fn corrupted_sign_fails_validation() {
        let mut m = unit(2);
        m.corrupt_edge_sign(3, 1);
        assert!(m.validate().is_err());
    }

    #[test]
    fn dump_has_all_sections() {
        let m = unit(1);
        let text = m.dump();
        assert!(text.contains("vertices 4"));
        assert!(text.contains("edges 5"));
        assert!(text.contains("elements 2"));
        assert_eq!(text.lines().count(), 1 + 1 + 4 + 1 + 5 + 1 + 2);
    }
}
