use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::periodic::{check_grid_size, curvature_stencil, PeriodicField};

/// Discrete convexity operator `D` with `(Du)_j` the node mass of `u'' + u`
/// at `theta_j`; the cone is `{ Du >= 0 }`.
///
/// Rows are `kappa * [1, -2 cos(dtheta), 1]`, which annihilates grid samples
/// of `cos` and `sin` exactly and gives `D 1 = dtheta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConeConstraint {
    pub n: usize,
    pub kappa: f64,
    pub cos_dtheta: f64,
    pub tol_cone: f64,
}

/// Builds `D` for a grid of `n` nodes.
pub fn cone_matrix(n: usize) -> Result<ConeConstraint> {
    check_grid_size(n)?;
    let (kappa, cos_dtheta) = curvature_stencil(n);
    Ok(ConeConstraint {
        n,
        kappa,
        cos_dtheta,
        tol_cone: 1e-10,
    })
}

impl ConeConstraint {
    pub fn with_tol(mut self, tol_cone: f64) -> Self {
        self.tol_cone = tol_cone;
        self
    }

    /// Nonzeros `(column, value)` of row `j`.
    pub fn row(&self, j: usize) -> [(usize, f64); 3] {
        let n = self.n;
        [
            ((j + n - 1) % n, self.kappa),
            (j, -2.0 * self.kappa * self.cos_dtheta),
            ((j + 1) % n, self.kappa),
        ]
    }

    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|j| self.row(j).iter().map(|&(k, v)| v * u[k]).sum())
            .collect()
    }

    pub fn apply_field(&self, u: &PeriodicField) -> Vec<f64> {
        self.apply(u.samples())
    }

    /// Most negative entry of `Du`, as a nonnegative number.
    pub fn violation(&self, u: &[f64]) -> f64 {
        self.apply(u).into_iter().fold(0.0, |acc, x| acc.max(-x))
    }

    pub fn is_feasible(&self, u: &[f64]) -> bool {
        self.violation(u) <= self.tol_cone
    }

    /// Dense `n x n` matrix, row-major.
    pub fn dense(&self) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|j| {
                let mut r = vec![0.0; self.n];
                for (k, v) in self.row(j) {
                    r[k] += v;
                }
                r
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn kernel_and_constants() {
        let d = cone_matrix(64).unwrap();
        let cos = PeriodicField::from_fn(64, f64::cos).unwrap();
        let sin = PeriodicField::from_fn(64, f64::sin).unwrap();
        for x in d.apply_field(&cos).into_iter().chain(d.apply_field(&sin)) {
            assert!(x.abs() < 1e-12);
        }
        let dt = 2.0 * std::f64::consts::PI / 64.0;
        for x in d.apply(&[1.0; 64]) {
            assert_relative_eq!(x, dt, epsilon = 1e-13);
        }
    }

    #[test]
    fn symmetric() {
        let d = cone_matrix(16).unwrap().dense();
        for i in 0..16 {
            for j in 0..16 {
                assert_eq!(d[i][j], d[j][i]);
            }
        }
    }

    #[test]
    fn square_gauge_has_four_spikes() {
        let n = 256;
        let d = cone_matrix(n).unwrap();
        let sq = PeriodicField::from_fn(n, |t| t.cos().abs().max(t.sin().abs())).unwrap();
        let m = d.apply_field(&sq);
        assert!(m.iter().all(|&x| x >= -1e-12));
        let big = m.iter().filter(|&&x| x > 0.5).count();
        assert_eq!(big, 4);
    }
}
