//! Compressed sparse row matrices and a preconditioned conjugate gradient
//! solver for symmetric positive definite systems.

use crate::error::{Error, Result};

/// Square CSR matrix with sorted column indices per row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    /// Sums duplicate entries of a triplet list.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_unstable_by_key(|&(i, j, _)| (i, j));
        let mut row_ptr = vec![0; n + 1];
        let mut cols = Vec::with_capacity(triplets.len());
        let mut vals: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in triplets {
            if last == Some((i, j)) {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(j);
                vals.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self { n, row_ptr, cols, vals }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.row(i).find(|&(j, _)| j == i).map_or(0.0, |(_, v)| v))
            .collect()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row(i).map(|(j, v)| v * x[j]).sum();
        }
    }

    /// `x^T A y`.
    pub fn form(&self, x: &[f64], y: &[f64]) -> f64 {
        (0..self.n)
            .map(|i| x[i] * self.row(i).map(|(j, v)| v * y[j]).sum::<f64>())
            .sum()
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Preconditioner for [`pcg`].
#[derive(Debug, Clone)]
pub enum Preconditioner {
    Jacobi(Vec<f64>),
    /// Incomplete Cholesky factor `L` (lower triangle, diagonal last in each row).
    IncompleteCholesky(CsrMatrix),
}

impl Preconditioner {
    /// Incomplete Cholesky with zero fill-in, falling back to Jacobi if a
    /// pivot is not positive.
    pub fn for_matrix(a: &CsrMatrix) -> Self {
        match incomplete_cholesky(a) {
            Some(l) => Preconditioner::IncompleteCholesky(l),
            None => Preconditioner::Jacobi(a.diagonal().iter().map(|d| 1.0 / d).collect()),
        }
    }

    fn apply(&self, r: &[f64], z: &mut [f64]) {
        match self {
            Preconditioner::Jacobi(inv) => {
                for ((zi, ri), di) in z.iter_mut().zip(r).zip(inv) {
                    *zi = ri * di;
                }
            }
            Preconditioner::IncompleteCholesky(l) => {
                let n = l.dim();
                for i in 0..n {
                    let mut s = r[i];
                    let mut diag = 1.0;
                    for (j, v) in l.row(i) {
                        if j < i {
                            s -= v * z[j];
                        } else {
                            diag = v;
                        }
                    }
                    z[i] = s / diag;
                }
                for i in (0..n).rev() {
                    let mut diag = 1.0;
                    for (j, v) in l.row(i) {
                        if j == i {
                            diag = v;
                        }
                    }
                    z[i] /= diag;
                    let zi = z[i];
                    for (j, v) in l.row(i) {
                        if j < i {
                            z[j] -= v * zi;
                        }
                    }
                }
            }
        }
    }
}

fn incomplete_cholesky(a: &CsrMatrix) -> Option<CsrMatrix> {
    let n = a.dim();
    let mut row_ptr = vec![0; n + 1];
    let mut cols = Vec::new();
    let mut vals: Vec<f64> = Vec::new();
    for i in 0..n {
        for (j, v) in a.row(i) {
            if j <= i {
                cols.push(j);
                vals.push(v);
            }
        }
        row_ptr[i + 1] = cols.len();
    }
    for i in 0..n {
        let (start, end) = (row_ptr[i], row_ptr[i + 1]);
        if end == start || cols[end - 1] != i {
            return None;
        }
        for p in start..end {
            let k = cols[p];
            // Sparse dot of rows i and k over columns < k.
            let mut s = vals[p];
            let (mut a_idx, mut b_idx) = (start, row_ptr[k]);
            let b_end = row_ptr[k + 1];
            while a_idx < p && b_idx < b_end {
                let (ca, cb) = (cols[a_idx], cols[b_idx]);
                if cb >= k {
                    break;
                }
                match ca.cmp(&cb) {
                    std::cmp::Ordering::Less => a_idx += 1,
                    std::cmp::Ordering::Greater => b_idx += 1,
                    std::cmp::Ordering::Equal => {
                        s -= vals[a_idx] * vals[b_idx];
                        a_idx += 1;
                        b_idx += 1;
                    }
                }
            }
            if k == i {
                if !(s > 0.0) {
                    return None;
                }
                vals[p] = s.sqrt();
            } else {
                vals[p] = s / vals[row_ptr[k + 1] - 1];
            }
        }
    }
    Some(CsrMatrix { n, row_ptr, cols, vals })
}

/// Statistics of a converged CG solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Solves `A x = b` starting from the contents of `x`.
pub fn pcg(
    a: &CsrMatrix,
    b: &[f64],
    x: &mut [f64],
    pre: &Preconditioner,
    rel_tol: f64,
    max_iter: usize,
) -> Result<CgStats> {
    let n = a.dim();
    let b_norm = dot(b, b).sqrt();
    if b_norm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(CgStats { iterations: 0, relative_residual: 0.0 });
    }
    let mut r = a.mul_vec(x);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    let mut z = vec![0.0; n];
    pre.apply(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    for it in 0..=max_iter {
        let res = dot(&r, &r).sqrt() / b_norm;
        if res <= rel_tol {
            return Ok(CgStats { iterations: it, relative_residual: res });
        }
        if it == max_iter {
            break;
        }
        a.mul_vec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::LinearSolver(format!(
                "matrix is not positive definite (p^T A p = {pap:e})"
            )));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        pre.apply(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::LinearSolver(format!(
        "CG did not reach relative residual {rel_tol:e} in {max_iter} iterations"
    )))
}
