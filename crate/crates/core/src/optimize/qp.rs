//! Primal active-set solver for metric projections onto a polyhedron,
//! `min 1/2 (x - r)^T Q (x - r)` subject to `a_i . x >= b_i`.
//!
//! Every constraint row has at most three nonzeros and `Q` is circulant, so
//! the reduced matrix `A_W Q^{-1} A_W^T` is assembled entrywise from the first
//! row of `Q^{-1}` and factored incrementally as constraints join the working
//! set.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::optimize::cone::ConeConstraint;

/// Circulant symmetric positive definite metric `Q = a I + b (S + S^T)` with
/// `S` the cyclic shift.
#[derive(Debug, Clone, PartialEq)]
pub struct Metric {
    n: usize,
    diag: f64,
    off: f64,
    inv_row: Vec<f64>,
}

impl Metric {
    pub fn identity(n: usize) -> Self {
        let mut inv_row = vec![0.0; n];
        inv_row[0] = 1.0;
        Self { n, diag: 1.0, off: 0.0, inv_row }
    }

    /// `Q = I + beta L`, with `L v = -(v_{j-1} - 2 v_j + v_{j+1}) / dtheta^2`:
    /// the grid version of the inner product `int v w + beta v' w'`.
    pub fn h1(n: usize, beta: f64) -> Self {
        let dt = 2.0 * PI / n as f64;
        let diag = 1.0 + 2.0 * beta / (dt * dt);
        let off = -beta / (dt * dt);
        let eig: Vec<f64> = (0..n)
            .map(|k| diag + 2.0 * off * (k as f64 * dt).cos())
            .collect();
        let inv_row = (0..n)
            .map(|m| {
                (0..n)
                    .map(|k| ((k * m) % n) as f64 * dt)
                    .zip(&eig)
                    .map(|(phase, e)| phase.cos() / e)
                    .sum::<f64>()
                    / n as f64
            })
            .collect();
        Self { n, diag, off, inv_row }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    fn inv(&self, p: usize, q: usize) -> f64 {
        self.inv_row[(p + self.n - q) % self.n]
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n;
        (0..n)
            .map(|j| self.diag * x[j] + self.off * (x[(j + n - 1) % n] + x[(j + 1) % n]))
            .collect()
    }

    pub fn solve(&self, g: &[f64]) -> Vec<f64> {
        if self.off == 0.0 {
            return g.iter().map(|x| x / self.diag).collect();
        }
        let n = self.n;
        (0..n)
            .map(|i| (0..n).map(|k| self.inv(i, k) * g[k]).sum())
            .collect()
    }

    /// `x^T Q y`.
    pub fn inner(&self, x: &[f64], y: &[f64]) -> f64 {
        self.apply(x).iter().zip(y).map(|(a, b)| a * b).sum()
    }
}

/// Origin of a constraint row, with the grid node it refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    Cone(usize),
    Lower(usize),
    Upper(usize),
}

/// Constraints `a_i . x >= b_i` with sparse rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Polyhedron {
    pub rows: Vec<Vec<(usize, f64)>>,
    pub rhs: Vec<f64>,
    pub kinds: Vec<RowKind>,
}

impl Polyhedron {
    /// `Du >= 0`, `u >= lower`, `u <= upper`; infinite bounds are skipped.
    pub fn new(cone: &ConeConstraint, lower: &[f64], upper: &[f64]) -> Self {
        let mut p = Polyhedron { rows: Vec::new(), rhs: Vec::new(), kinds: Vec::new() };
        for j in 0..cone.n {
            p.rows.push(cone.row(j).to_vec());
            p.rhs.push(0.0);
            p.kinds.push(RowKind::Cone(j));
        }
        for (j, &l) in lower.iter().enumerate() {
            if l.is_finite() {
                p.rows.push(vec![(j, 1.0)]);
                p.rhs.push(l);
                p.kinds.push(RowKind::Lower(j));
            }
        }
        for (j, &h) in upper.iter().enumerate() {
            if h.is_finite() {
                p.rows.push(vec![(j, -1.0)]);
                p.rhs.push(-h);
                p.kinds.push(RowKind::Upper(j));
            }
        }
        p
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn row_dot(&self, i: usize, x: &[f64]) -> f64 {
        self.rows[i].iter().map(|&(k, v)| v * x[k]).sum()
    }

    /// `b_i - a_i . x` maximized over rows (positive means infeasible).
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        (0..self.len())
            .map(|i| self.rhs[i] - self.row_dot(i, x))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Lower-triangular Cholesky factor that grows one row at a time.
#[derive(Debug, Clone, Default)]
struct GrowingCholesky {
    rows: Vec<Vec<f64>>,
}

impl GrowingCholesky {
    /// Appends a row/column with off-diagonal entries `col` and diagonal
    /// `diag`; refuses (returns false) if it is numerically dependent.
    fn try_push(&mut self, col: &[f64], diag: f64) -> bool {
        let l = self.forward(col);
        let d = diag - l.iter().map(|x| x * x).sum::<f64>();
        if !(d > 1e-10 * diag.abs().max(f64::MIN_POSITIVE)) {
            return false;
        }
        let mut row = l;
        row.push(d.sqrt());
        self.rows.push(row);
        true
    }

    fn forward(&self, b: &[f64]) -> Vec<f64> {
        let mut y = Vec::with_capacity(b.len());
        for (i, row) in self.rows.iter().enumerate() {
            let s: f64 = row[..i].iter().zip(&y).map(|(a, c)| a * c).sum();
            y.push((b[i] - s) / row[i]);
        }
        y
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = self.forward(b);
        for i in (0..x.len()).rev() {
            x[i] /= self.rows[i][i];
            let xi = x[i];
            for (k, v) in self.rows[i][..i].iter().enumerate() {
                x[k] -= v * xi;
            }
        }
        x
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpResult {
    pub x: Vec<f64>,
    /// Constraint indices in the final working set.
    pub working_set: Vec<usize>,
    /// Multipliers of the working set, `Q (x - r) = A_W^T lambda`, `lambda >= 0`.
    pub multipliers: Vec<f64>,
    pub iterations: usize,
}

struct ActiveSet<'a> {
    poly: &'a Polyhedron,
    metric: &'a Metric,
    members: Vec<usize>,
    chol: GrowingCholesky,
}

impl<'a> ActiveSet<'a> {
    fn gram(&self, i: usize, k: usize) -> f64 {
        let mut s = 0.0;
        for &(p, a) in &self.poly.rows[i] {
            for &(q, c) in &self.poly.rows[k] {
                s += a * c * self.metric.inv(p, q);
            }
        }
        s
    }

    fn try_add(&mut self, i: usize) -> bool {
        let col: Vec<f64> = self.members.iter().map(|&k| self.gram(k, i)).collect();
        if self.chol.try_push(&col, self.gram(i, i)) {
            self.members.push(i);
            true
        } else {
            false
        }
    }

    fn remove(&mut self, pos: usize) {
        let old = std::mem::take(&mut self.members);
        self.chol = GrowingCholesky::default();
        for (k, i) in old.into_iter().enumerate() {
            if k != pos {
                let added = self.try_add(i);
                debug_assert!(added);
            }
        }
    }

    /// Minimizer over `{a_i . x = b_i, i in W}` and its multipliers.
    fn equality_solution(&self, r: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let rhs: Vec<f64> = self
            .members
            .iter()
            .map(|&i| self.poly.rhs[i] - self.poly.row_dot(i, r))
            .collect();
        let lambda = self.chol.solve(&rhs);
        let mut z = vec![0.0; r.len()];
        for (&i, &l) in self.members.iter().zip(&lambda) {
            for &(k, v) in &self.poly.rows[i] {
                z[k] += v * l;
            }
        }
        let dz = self.metric.solve(&z);
        (r.iter().zip(&dz).map(|(a, b)| a + b).collect(), lambda)
    }
}

/// Projects `r` onto the polyhedron in the `Q` metric, starting from a
/// feasible `x0`. Ties in both the blocking and the release choices go to
/// the smallest constraint index (Bland's rule).
pub fn project(poly: &Polyhedron, metric: &Metric, r: &[f64], x0: &[f64]) -> Result<QpResult> {
    let n = metric.dim();
    if r.len() != n || x0.len() != n {
        return Err(Error::QpFailure("dimension mismatch".into()));
    }
    let scale = 1.0 + x0.iter().chain(r).fold(0.0f64, |a, b| a.max(b.abs()));
    let tol_active = 1e-12 * scale;
    if poly.max_violation(x0) > 1e-9 * scale {
        return Err(Error::QpFailure("starting point is infeasible".into()));
    }
    let mut set = ActiveSet { poly, metric, members: Vec::new(), chol: GrowingCholesky::default() };
    for i in 0..poly.len() {
        if poly.row_dot(i, x0) - poly.rhs[i] <= tol_active {
            set.try_add(i);
        }
    }
    let mut x = x0.to_vec();
    let max_iter = 20 * (poly.len() + n) + 100;
    for it in 0..max_iter {
        let (xstar, lambda) = set.equality_solution(r);
        let p: Vec<f64> = xstar.iter().zip(&x).map(|(a, b)| a - b).collect();
        let p_norm = p.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        if p_norm <= 1e-13 * scale {
            let lam_scale = 1.0 + lambda.iter().fold(0.0f64, |a, b| a.max(b.abs()));
            let release = set
                .members
                .iter()
                .zip(&lambda)
                .enumerate()
                .filter(|(_, (_, &l))| l < -1e-11 * lam_scale)
                .min_by_key(|(_, (&i, _))| i)
                .map(|(pos, _)| pos);
            match release {
                Some(pos) => {
                    set.remove(pos);
                    continue;
                }
                None => {
                    return Ok(QpResult {
                        x: xstar,
                        working_set: set.members,
                        multipliers: lambda,
                        iterations: it,
                    })
                }
            }
        }
        // Ratio test over constraints outside the working set. A row that is
        // linearly dependent on the working set is constant along the working
        // set's affine hull, so it cannot block and is skipped.
        let mut dependent: Vec<usize> = Vec::new();
        let (alpha, blocking) = loop {
            let mut alpha = 1.0;
            let mut blocking = None;
            for i in 0..poly.len() {
                if set.members.contains(&i) || dependent.contains(&i) {
                    continue;
                }
                let ap = poly.row_dot(i, &p);
                if ap < -1e-14 * p_norm {
                    let slack = (poly.row_dot(i, &x) - poly.rhs[i]).max(0.0);
                    let a = slack / -ap;
                    if a < alpha {
                        alpha = a;
                        blocking = Some(i);
                    }
                }
            }
            match blocking {
                Some(i) if !set.try_add(i) => dependent.push(i),
                _ => break (alpha, blocking),
            }
        };
        if blocking.is_some() {
            for (xi, pi) in x.iter_mut().zip(&p) {
                *xi += alpha * pi;
            }
        } else {
            x = xstar;
        }
    }
    Err(Error::QpFailure(format!("no convergence in {max_iter} iterations")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimize::cone::cone_matrix;

    #[test]
    fn h1_metric_inverse() {
        let m = Metric::h1(32, 0.7);
        let x: Vec<f64> = (0..32).map(|i| (i as f64 * 0.37).sin() + 0.2).collect();
        let back = m.solve(&m.apply(&x));
        for (a, b) in x.iter().zip(&back) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn box_projection_is_clipping() {
        let n = 16;
        let cone = cone_matrix(n).unwrap();
        let poly = Polyhedron::new(&cone, &vec![0.5; n], &vec![2.0; n]);
        // A constant above the box projects onto the box.
        let r = vec![3.0; n];
        let res = project(&poly, &Metric::identity(n), &r, &vec![1.0; n]).unwrap();
        for x in res.x {
            assert!((x - 2.0).abs() < 1e-12);
        }
        assert!(res.multipliers.iter().all(|&l| l >= 0.0));
    }

    #[test]
    fn feasible_target_is_returned() {
        let n = 32;
        let cone = cone_matrix(n).unwrap();
        let poly = Polyhedron::new(&cone, &vec![0.1; n], &vec![10.0; n]);
        let r: Vec<f64> = (0..n)
            .map(|j| 1.0 + 0.05 * (2.0 * PI * j as f64 / n as f64 * 2.0).cos())
            .collect();
        let res = project(&poly, &Metric::h1(n, 1.0), &r, &vec![1.0; n]).unwrap();
        for (a, b) in res.x.iter().zip(&r) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
