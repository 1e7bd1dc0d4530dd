//! Minimization over the discrete convexity cone `{Du >= 0}` intersected with
//! box bounds and an optional equality, and recovery of the KKT multipliers.

pub mod cone;
mod kkt;
mod minimize;
pub mod nnls;
pub mod qp;

pub use cone::{cone_matrix, ConeConstraint};
pub use kkt::{kkt_at, kkt_at_scaled, recover_multipliers, KKTReport, ACTIVE_TOL};
pub use minimize::{
    minimize, write_history_csv, HistoryRecord, OptimizationResult, OptimizerConfig, Status,
};

use crate::error::{Error, Result};
use crate::functional::ConstraintSpec;
use crate::periodic::PeriodicField;
use qp::{project, Metric, Polyhedron};

/// Lower bounds `max(k1, u_min)` so that every feasible gauge is positive.
pub(crate) fn effective_bounds(cons: &ConstraintSpec, n: usize, u_min: f64) -> (Vec<f64>, Vec<f64>) {
    let lower = (0..n).map(|j| cons.lower_at(j).max(u_min)).collect();
    let upper = (0..n).map(|j| cons.upper_at(j)).collect();
    (lower, upper)
}

/// A point of the feasible polyhedron: a constant inside the box if one
/// exists, otherwise `k1` or `k2` when they are themselves convex.
pub(crate) fn feasible_start(poly: &Polyhedron, lower: &[f64], upper: &[f64], hint: f64) -> Result<Vec<f64>> {
    let n = lower.len();
    let lo = lower.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let hi = upper.iter().copied().fold(f64::INFINITY, f64::min);
    let tol = 1e-12;
    let mut candidates = Vec::new();
    if lo <= hi {
        candidates.push(vec![hint.clamp(lo, hi); n]);
    }
    candidates.push(lower.to_vec());
    if upper.iter().all(|x| x.is_finite()) {
        candidates.push(upper.to_vec());
    }
    candidates
        .into_iter()
        .find(|c| poly.max_violation(c) <= tol)
        .ok_or_else(|| {
            Error::Infeasible("no constant, k1 or k2 satisfies the cone and box constraints".into())
        })
}

/// Euclidean projection of `u_raw` onto `{Du >= 0, max(k1, u_min) <= u <= k2}`.
pub fn project_feasible(
    u_raw: &PeriodicField,
    cone: &ConeConstraint,
    cons: &ConstraintSpec,
    u_min: f64,
) -> Result<PeriodicField> {
    let n = u_raw.len();
    cons.validate(n)?;
    if cone.n != n {
        return Err(Error::ResolutionMismatch { fine: cone.n, expected: n });
    }
    let (lower, upper) = effective_bounds(cons, n, u_min);
    let poly = Polyhedron::new(cone, &lower, &upper);
    if poly.max_violation(u_raw.samples()) <= cone.tol_cone {
        return Ok(u_raw.clone());
    }
    let mean = u_raw.samples().iter().sum::<f64>() / n as f64;
    let start = feasible_start(&poly, &lower, &upper, mean)?;
    let res = project(&poly, &Metric::identity(n), u_raw.samples(), &start)?;
    PeriodicField::new(res.x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::DEFAULT_U_MIN;

    fn dist(a: &PeriodicField, b: &PeriodicField) -> f64 {
        a.samples().iter().zip(b.samples()).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
    }

    #[test]
    fn feasible_input_unchanged() {
        let n = 64;
        let cone = cone_matrix(n).unwrap();
        let sq = PeriodicField::from_fn(n, |t| t.cos().abs().max(t.sin().abs())).unwrap();
        let out = project_feasible(&sq, &cone, &ConstraintSpec::default(), DEFAULT_U_MIN).unwrap();
        assert_eq!(out, sq);
    }

    #[test]
    fn nonconvex_input_is_projected_optimally() {
        let n = 64;
        let cone = cone_matrix(n).unwrap();
        let raw = PeriodicField::from_fn(n, |t| 1.0 + 0.3 * (4.0 * t).cos()).unwrap();
        let cons = ConstraintSpec::default();
        let out = project_feasible(&raw, &cone, &cons, DEFAULT_U_MIN).unwrap();
        assert!(cone.violation(out.samples()) <= 1e-10);
        let d = dist(&out, &raw);
        for f in [
            PeriodicField::constant(n, 1.0).unwrap(),
            PeriodicField::from_fn(n, |t| t.cos().abs().max(t.sin().abs())).unwrap(),
            PeriodicField::from_fn(n, |t| 1.0 + 0.05 * (4.0 * t).cos()).unwrap(),
            PeriodicField::from_fn(n, |t| 1.0 + 0.3 * t.cos()).unwrap(),
        ] {
            assert!(cone.violation(f.samples()) <= 1e-12);
            assert!(d <= dist(&f, &raw) + 1e-12);
        }
    }

    #[test]
    fn empty_box_is_infeasible() {
        let n = 16;
        let cone = cone_matrix(n).unwrap();
        let mut lower = vec![1.0; n];
        lower[0] = 3.0;
        let cons = ConstraintSpec {
            lower: Some(PeriodicField::new(lower).unwrap()),
            upper: Some(PeriodicField::constant(n, 1.2).unwrap()),
            equality: None,
        };
        let raw = PeriodicField::constant(n, 1.0).unwrap();
        assert!(project_feasible(&raw, &cone, &cons, DEFAULT_U_MIN).is_err());
    }
}
