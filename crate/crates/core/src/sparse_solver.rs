//! Compressed-row sparse matrices and Jacobi-preconditioned Krylov solvers.
//!
//! [`solve`] picks conjugate gradients for symmetric matrices and BiCGStab
//! otherwise. Small systems fall back to a dense LU solve when the iteration
//! fails; the same dense path is exposed as [`solve_dense`] for use as an
//! oracle.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Largest dimension for which the dense fallback is attempted.
pub const DENSE_LIMIT: usize = 2000;

/// Default relative residual tolerance.
pub const DEFAULT_TOL: f64 = 1e-10;

/// Relative asymmetry below which a matrix is treated as symmetric.
pub const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub row_offsets: Vec<usize>,
    pub col_indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds a CSR matrix from triplets; duplicates are summed in the order
    /// they appear, so the result is deterministic for a given input order.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut counts = vec![0usize; nrows + 1];
        for &(r, c, _) in triplets {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) out of bounds");
            counts[r + 1] += 1;
        }
        for i in 0..nrows {
            counts[i + 1] += counts[i];
        }
        // Bucket by row, preserving input order within each row.
        let mut next = counts.clone();
        let mut bucket = vec![(0usize, 0.0f64); triplets.len()];
        for &(r, c, v) in triplets {
            bucket[next[r]] = (c, v);
            next[r] += 1;
        }

        let mut row_offsets = Vec::with_capacity(nrows + 1);
        let mut col_indices = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        row_offsets.push(0);
        for r in 0..nrows {
            let row = &mut bucket[counts[r]..counts[r + 1]];
            // Stable sort keeps duplicate contributions in insertion order.
            row.sort_by_key(|&(c, _)| c);
            let mut i = 0;
            while i < row.len() {
                let c = row[i].0;
                let mut sum = 0.0;
                while i < row.len() && row[i].0 == c {
                    sum += row[i].1;
                    i += 1;
                }
                col_indices.push(c);
                values.push(sum);
            }
            row_offsets.push(col_indices.len());
        }
        SparseMatrix {
            nrows,
            ncols,
            row_offsets,
            col_indices,
            values,
        }
    }

    pub fn identity(n: usize) -> Self {
        SparseMatrix {
            nrows: n,
            ncols: n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_offsets[r]..self.row_offsets[r + 1];
        self.col_indices[range.clone()].iter().copied().zip(self.values[range].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let range = self.row_offsets[r]..self.row_offsets[r + 1];
        match self.col_indices[range.clone()].binary_search(&c) {
            Ok(i) => self.values[range.start + i],
            Err(_) => 0.0,
        }
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        for (r, yr) in y.iter_mut().enumerate().take(self.nrows) {
            let mut acc = 0.0;
            for i in self.row_offsets[r]..self.row_offsets[r + 1] {
                acc += self.values[i] * x[self.col_indices[i]];
            }
            *yr = acc;
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    pub fn transpose(&self) -> SparseMatrix {
        let mut triplets = Vec::with_capacity(self.nnz());
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                triplets.push((c, r, v));
            }
        }
        SparseMatrix::from_triplets(self.ncols, self.nrows, &triplets)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// `||A^T - A||_F / ||A||_F`.
    pub fn asymmetry(&self) -> f64 {
        let norm = self.frobenius_norm();
        if norm == 0.0 {
            return 0.0;
        }
        let mut diff = 0.0;
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                let d = v - self.get(c, r);
                diff += d * d;
            }
        }
        diff.sqrt() / norm
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nrows, self.ncols);
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                m[(r, c)] = v;
            }
        }
        m
    }

    /// Coordinate text format: a `rows cols nnz` header, then one
    /// `row col value` line per stored entry (0-based).
    pub fn to_coo_text(&self) -> String {
        use std::fmt::Write as _;
        let mut out = format!("{} {} {}\n", self.nrows, self.ncols, self.nnz());
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                let _ = writeln!(out, "{r} {c} {v:.17e}");
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    ConjugateGradient,
    BiCgStab,
    DenseLu,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::ConjugateGradient => "CG",
            Method::BiCgStab => "BiCGStab",
            Method::DenseLu => "dense LU",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub method: Method,
    /// Zero for the direct solver.
    pub iterations: usize,
    /// True residual `||b - A x|| / ||b||`, recomputed after the solve.
    pub relative_residual: f64,
    /// Residual estimate tracked by the iteration.
    pub estimated_residual: f64,
    pub seconds: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn relative_residual(a: &SparseMatrix, x: &[f64], b: &[f64]) -> f64 {
    let ax = a.mul_vec(x);
    let r: f64 = ax.iter().zip(b).map(|(p, q)| (q - p) * (q - p)).sum::<f64>().sqrt();
    let nb = norm(b);
    if nb == 0.0 {
        r
    } else {
        r / nb
    }
}

fn check_square(a: &SparseMatrix, b: &[f64]) -> Result<()> {
    if a.nrows != a.ncols {
        return Err(Error::DimensionMismatch {
            expected: a.nrows,
            actual: a.ncols,
        });
    }
    if b.len() != a.nrows {
        return Err(Error::DimensionMismatch {
            expected: a.nrows,
            actual: b.len(),
        });
    }
    Ok(())
}

fn jacobi(a: &SparseMatrix) -> Vec<f64> {
    a.diagonal()
        .into_iter()
        .map(|d| if d != 0.0 { 1.0 / d } else { 1.0 })
        .collect()
}

/// Jacobi-preconditioned conjugate gradients, starting from `x`.
/// Returns `(iterations, estimated relative residual)`.
pub fn conjugate_gradient(
    a: &SparseMatrix,
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
) -> Result<(usize, f64)> {
    check_square(a, b)?;
    let n = b.len();
    let nb = norm(b);
    if nb == 0.0 {
        x.fill(0.0);
        return Ok((0, 0.0));
    }
    let dinv = jacobi(a);
    let mut r: Vec<f64> = a.mul_vec(x).iter().zip(b).map(|(ax, bi)| bi - ax).collect();
    let mut z: Vec<f64> = r.iter().zip(&dinv).map(|(ri, di)| ri * di).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut res = norm(&r) / nb;
    if res <= tol {
        return Ok((0, res));
    }
    for it in 1..=max_iter {
        a.mul_vec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 || !pap.is_finite() {
            return Err(Error::Breakdown {
                method: "CG",
                iteration: it,
            });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        res = norm(&r) / nb;
        if res <= tol {
            return Ok((it, res));
        }
        for i in 0..n {
            z[i] = r[i] * dinv[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::NotConverged {
        method: "CG",
        iterations: max_iter,
        residual: res,
    })
}

/// Right-preconditioned (Jacobi) BiCGStab, starting from `x`.
/// Returns `(iterations, estimated relative residual)`.
pub fn bicgstab(
    a: &SparseMatrix,
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
) -> Result<(usize, f64)> {
    check_square(a, b)?;
    let n = b.len();
    let nb = norm(b);
    if nb == 0.0 {
        x.fill(0.0);
        return Ok((0, 0.0));
    }
    let dinv = jacobi(a);
    let mut r: Vec<f64> = a.mul_vec(x).iter().zip(b).map(|(ax, bi)| bi - ax).collect();
    let r_hat = r.clone();
    let mut res = norm(&r) / nb;
    if res <= tol {
        return Ok((0, res));
    }
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut t = vec![0.0; n];
    for it in 1..=max_iter {
        let rho_new = dot(&r_hat, &r);
        if rho_new == 0.0 || !rho_new.is_finite() {
            return Err(Error::Breakdown {
                method: "BiCGStab",
                iteration: it,
            });
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
            y[i] = p[i] * dinv[i];
        }
        a.mul_vec_into(&y, &mut v);
        let rv = dot(&r_hat, &v);
        if rv == 0.0 || !rv.is_finite() {
            return Err(Error::Breakdown {
                method: "BiCGStab",
                iteration: it,
            });
        }
        alpha = rho / rv;
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        if norm(&s) / nb <= tol {
            for i in 0..n {
                x[i] += alpha * y[i];
            }
            return Ok((it, norm(&s) / nb));
        }
        for i in 0..n {
            z[i] = s[i] * dinv[i];
        }
        a.mul_vec_into(&z, &mut t);
        let tt = dot(&t, &t);
        if tt == 0.0 {
            return Err(Error::Breakdown {
                method: "BiCGStab",
                iteration: it,
            });
        }
        omega = dot(&t, &s) / tt;
        for i in 0..n {
            x[i] += alpha * y[i] + omega * z[i];
            r[i] = s[i] - omega * t[i];
        }
        res = norm(&r) / nb;
        if res <= tol {
            return Ok((it, res));
        }
        if omega == 0.0 {
            return Err(Error::Breakdown {
                method: "BiCGStab",
                iteration: it,
            });
        }
    }
    Err(Error::NotConverged {
        method: "BiCGStab",
        iterations: max_iter,
        residual: res,
    })
}

/// Dense LU solve; used as a fallback and as an oracle for the iterative paths.
pub fn solve_dense(a: &SparseMatrix, b: &[f64]) -> Result<(Vec<f64>, SolveReport)> {
    check_square(a, b)?;
    let start = Instant::now();
    let x = a
        .to_dense()
        .lu()
        .solve(&DVector::from_column_slice(b))
        .ok_or(Error::Singular)?;
    let x = x.as_slice().to_vec();
    let res = relative_residual(a, &x, b);
    Ok((
        x,
        SolveReport {
            method: Method::DenseLu,
            iterations: 0,
            relative_residual: res,
            estimated_residual: res,
            seconds: start.elapsed().as_secs_f64(),
        },
    ))
}

/// Solves `A x = b` to relative residual `tol`.
///
/// Symmetric matrices use CG, others BiCGStab; the iteration is restarted from
/// its current iterate if the recomputed residual misses `tol` while the
/// recursive estimate met it. Systems up to [`DENSE_LIMIT`] unknowns fall back
/// to dense LU when the iteration fails.
pub fn solve(a: &SparseMatrix, b: &[f64], tol: f64, max_iter: usize) -> Result<(Vec<f64>, SolveReport)> {
    check_square(a, b)?;
    if !(tol > 0.0) {
        return Err(Error::Config(format!("solver tolerance must be positive, got {tol}")));
    }
    let start = Instant::now();
    let method = if a.asymmetry() <= SYMMETRY_TOL {
        Method::ConjugateGradient
    } else {
        Method::BiCgStab
    };
    let mut x = vec![0.0; b.len()];
    let mut total = 0;
    let mut outcome = Ok(0.0);
    for _restart in 0..4 {
        let step = match method {
            Method::ConjugateGradient => conjugate_gradient(a, b, &mut x, tol, max_iter - total),
            _ => bicgstab(a, b, &mut x, tol, max_iter - total),
        };
        match step {
            Ok((iters, est)) => {
                total += iters;
                outcome = Ok(est);
                if relative_residual(a, &x, b) <= tol || total >= max_iter {
                    break;
                }
            }
            Err(e) => {
                outcome = Err(e);
                break;
            }
        }
    }
    let true_res = relative_residual(a, &x, b);
    match outcome {
        Ok(est) if true_res <= tol => Ok((
            x,
            SolveReport {
                method,
                iterations: total,
                relative_residual: true_res,
                estimated_residual: est,
                seconds: start.elapsed().as_secs_f64(),
            },
        )),
        failure => {
            if b.len() <= DENSE_LIMIT {
                let (x, mut report) = solve_dense(a, b)?;
                report.seconds = start.elapsed().as_secs_f64();
                return Ok((x, report));
            }
            Err(match failure {
                Err(e) => e,
                Ok(_) => Error::NotConverged {
                    method: method.name(),
                    iterations: total,
                    residual: true_res,
                },
            })
        }
    }
}
