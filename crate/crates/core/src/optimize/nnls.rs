use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct NnlsSolution {
    pub x: Vec<f64>,
    /// `||E x - b||_2`.
    pub residual_norm: f64,
    pub iterations: usize,
}

/// Lawson-Hanson active-set solution of `min ||E x - b||` subject to `x >= 0`.
///
/// `columns` are the columns of `E`, each of length `b.len()`. The
/// unconstrained subproblems on the passive set use an SVD, so dependent
/// columns are tolerated.
pub fn nnls(columns: &[Vec<f64>], b: &[f64]) -> Result<NnlsSolution> {
    let m = b.len();
    let k = columns.len();
    if columns.iter().any(|c| c.len() != m) {
        return Err(Error::NnlsFailure("column length differs from right-hand side".into()));
    }
    let e = DMatrix::from_fn(m, k, |i, j| columns[j][i]);
    let bv = DVector::from_column_slice(b);
    let scale = e.iter().fold(0.0f64, |a, x| a.max(x.abs())) * bv.norm().max(1.0);
    let tol = 1e-12 * scale.max(f64::MIN_POSITIVE) * (m.max(k) as f64);
    let mut x = DVector::zeros(k);
    let mut passive = vec![false; k];
    let max_iter = 3 * k + 30;
    let mut iterations = 0;
    loop {
        let w = e.transpose() * (&bv - &e * &x);
        let candidate = (0..k)
            .filter(|&j| !passive[j] && w[j] > tol)
            .max_by(|&a, &b| w[a].total_cmp(&w[b]));
        let Some(j) = candidate else { break };
        passive[j] = true;
        loop {
            iterations += 1;
            if iterations > max_iter {
                return Err(Error::NnlsFailure(format!("no convergence in {max_iter} iterations")));
            }
            let s = passive_least_squares(&e, &bv, &passive)?;
            if (0..k).filter(|&i| passive[i]).all(|i| s[i] > 0.0) {
                x = s;
                break;
            }
            let alpha = (0..k)
                .filter(|&i| passive[i] && s[i] <= 0.0)
                .map(|i| x[i] / (x[i] - s[i]))
                .fold(1.0, f64::min);
            x = &x + (&s - &x) * alpha;
            for i in 0..k {
                if passive[i] && x[i] <= tol {
                    passive[i] = false;
                    x[i] = 0.0;
                }
            }
        }
    }
    let residual_norm = (&e * &x - &bv).norm();
    Ok(NnlsSolution { x: x.iter().copied().collect(), residual_norm, iterations })
}

fn passive_least_squares(e: &DMatrix<f64>, b: &DVector<f64>, passive: &[bool]) -> Result<DVector<f64>> {
    let idx: Vec<usize> = (0..passive.len()).filter(|&i| passive[i]).collect();
    let sub = e.select_columns(&idx);
    let svd = sub.svd(true, true);
    let eps = 1e-12 * svd.singular_values.max();
    let sol = svd
        .solve(b, eps)
        .map_err(|msg| Error::NnlsFailure(msg.to_string()))?;
    let mut out = DVector::zeros(passive.len());
    for (p, &i) in idx.iter().enumerate() {
        out[i] = sol[p];
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unconstrained_solution_when_positive() {
        let cols = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]];
        let s = nnls(&cols, &[2.0, 3.0, 1.0]).unwrap();
        assert!((s.x[0] - 2.0).abs() < 1e-12 && (s.x[1] - 3.0).abs() < 1e-12);
        assert!((s.residual_norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn negative_direction_is_clamped() {
        let cols = vec![vec![1.0, 0.0], vec![1.0, 1.0]];
        // Unconstrained solution is (-1, 2); NNLS keeps only the second column.
        let s = nnls(&cols, &[1.0, 2.0]).unwrap();
        assert_eq!(s.x[0], 0.0);
        assert!((s.x[1] - 1.5).abs() < 1e-12);
    }

    #[test]
    fn dependent_columns() {
        let cols = vec![vec![1.0, 1.0], vec![2.0, 2.0], vec![-1.0, -1.0]];
        let s = nnls(&cols, &[3.0, 3.0]).unwrap();
        assert!(s.residual_norm < 1e-10);
        assert!(s.x.iter().all(|&v| v >= 0.0));
    }
}
