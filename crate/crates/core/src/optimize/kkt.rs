use serde::{Deserialize, Serialize};

use crate::body::{area_gradient, perimeter_gradient, GaugeBody};
use crate::error::{Error, Result};
use crate::functional::{evaluate, ConstraintSpec, EqualityKind, FunctionalSpec};
use crate::optimize::cone::ConeConstraint;
use crate::optimize::nnls::nnls;
use crate::optimize::OptimizationResult;
use crate::periodic::PeriodicField;

/// A cone row or bound counts as active when its slack is below this.
pub const ACTIVE_TOL: f64 = 1e-8;

/// Multipliers of the first-order conditions
/// `j'(u) + mu m'(u) = D^T eta + box terms`, `eta >= 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KKTReport {
    /// Cone multiplier per node, zero on inactive rows; samples of `zeta_0`.
    pub eta: Vec<f64>,
    /// Equality multiplier; positive when the constraint pushes against the
    /// objective's descent direction `-m'`.
    pub mu_eq: f64,
    /// Net bound multiplier per node (lower minus upper), divided by `dtheta`.
    pub box_mult: Vec<f64>,
    pub stationarity_residual: f64,
    pub complementarity_residual: f64,
    /// Nodes strictly between the box bounds.
    pub inside_set: Vec<bool>,
    pub active_cone: Vec<bool>,
}

impl KKTReport {
    pub fn min_eta(&self) -> f64 {
        self.eta.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_eta(&self) -> f64 {
        self.eta.iter().copied().fold(0.0, f64::max)
    }
}

/// Recovers multipliers at the optimizer's final iterate.
pub fn recover_multipliers(
    result: &OptimizationResult,
    spec: &FunctionalSpec,
    cone: &ConeConstraint,
    cons: &ConstraintSpec,
) -> Result<KKTReport> {
    let spec = match &result.frozen_plan {
        Some(plan) => FunctionalSpec { plan: Some(*plan), ..spec.clone() },
        None => spec.clone(),
    };
    let eval = evaluate(&spec, &result.u_star)?;
    kkt_at_scaled(&result.u_star, &eval.gradient, eval.gradient_scale, cone, cons)
}

/// Nonnegative least squares for the multipliers of the constraints active
/// at `body`, given the objective gradient `g` (`dj[v] = dtheta sum g v`).
/// The stationarity residual is relative to `|g|`.
pub fn kkt_at(
    body: &GaugeBody,
    g: &PeriodicField,
    cone: &ConeConstraint,
    cons: &ConstraintSpec,
) -> Result<KKTReport> {
    kkt_at_scaled(body, g, 0.0, cone, cons)
}

/// Like [`kkt_at`], with the stationarity residual taken relative to
/// `max(|g|, g_scale)`. Pass the sum of the term gradient norms as `g_scale`
/// so that an objective whose terms cancel at the optimum is not measured
/// against its own near-zero gradient.
pub fn kkt_at_scaled(
    body: &GaugeBody,
    g: &PeriodicField,
    g_scale: f64,
    cone: &ConeConstraint,
    cons: &ConstraintSpec,
) -> Result<KKTReport> {
    let n = body.len();
    if g.len() != n || cone.n != n {
        return Err(Error::ResolutionMismatch { fine: g.len(), expected: n });
    }
    let dt = body.dtheta();
    let u = body.gauge().samples();
    let du = cone.apply(u);
    let b: Vec<f64> = g.samples().iter().map(|x| dt * x).collect();

    let active_cone: Vec<bool> = du.iter().map(|&x| x <= ACTIVE_TOL).collect();
    let at_lower: Vec<bool> = (0..n).map(|j| u[j] - cons.lower_at(j) <= ACTIVE_TOL).collect();
    let at_upper: Vec<bool> = (0..n).map(|j| cons.upper_at(j) - u[j] <= ACTIVE_TOL).collect();

    enum Col {
        Cone(usize),
        Lower(usize),
        Upper(usize),
        MuPlus,
        MuMinus,
    }
    let mut cols = Vec::new();
    let mut tags = Vec::new();
    for j in 0..n {
        if active_cone[j] {
            let mut c = vec![0.0; n];
            for (k, v) in cone.row(j) {
                c[k] += v;
            }
            cols.push(c);
            tags.push(Col::Cone(j));
        }
    }
    for j in 0..n {
        if at_lower[j] {
            let mut c = vec![0.0; n];
            c[j] = 1.0;
            cols.push(c);
            tags.push(Col::Lower(j));
        }
        if at_upper[j] {
            let mut c = vec![0.0; n];
            c[j] = -1.0;
            cols.push(c);
            tags.push(Col::Upper(j));
        }
    }
    if let Some(eq) = &cons.equality {
        let m = match eq.kind {
            EqualityKind::Area => area_gradient(body)?,
            EqualityKind::Perimeter => perimeter_gradient(body)?,
        };
        let c: Vec<f64> = m.samples().iter().map(|x| -dt * x).collect();
        cols.push(c.iter().map(|x| -x).collect());
        tags.push(Col::MuMinus);
        cols.push(c);
        tags.push(Col::MuPlus);
    }

    let sol = nnls(&cols, &b)?;
    let mut eta = vec![0.0; n];
    let mut box_mult = vec![0.0; n];
    let mut mu_eq = 0.0;
    for (tag, &x) in tags.iter().zip(&sol.x) {
        match *tag {
            Col::Cone(j) => eta[j] = x,
            Col::Lower(j) => box_mult[j] += x / dt,
            Col::Upper(j) => box_mult[j] -= x / dt,
            Col::MuPlus => mu_eq += x,
            Col::MuMinus => mu_eq -= x,
        }
    }
    let b_norm = b.iter().map(|x| x * x).sum::<f64>().sqrt().max(dt * g_scale);
    let stationarity_residual = if b_norm < 1e-12 {
        sol.residual_norm
    } else {
        sol.residual_norm / b_norm
    };
    let complementarity_residual = eta.iter().zip(&du).map(|(e, d)| e * d).sum::<f64>().abs();
    let inside_set = (0..n)
        .map(|j| cons.lower_at(j) + ACTIVE_TOL < u[j] && u[j] < cons.upper_at(j) - ACTIVE_TOL)
        .collect();
    Ok(KKTReport {
        eta,
        mu_eq,
        box_mult,
        stationarity_residual,
        complementarity_residual,
        inside_set,
        active_cone,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::body::{area_gradient, perimeter_gradient};
    use crate::optimize::cone::cone_matrix;

    #[test]
    fn isoperimetric_disk_multiplier() {
        // P'(u) + mu a'(u) = 0 at the unit disk: -1 + mu (-1) = 0, mu = -1.
        let n = 64;
        let disk = GaugeBody::disk(n, 1.0).unwrap();
        let g = perimeter_gradient(&disk).unwrap();
        let cons = ConstraintSpec::default().with_equality(EqualityKind::Area, std::f64::consts::PI);
        let r = kkt_at(&disk, &g, &cone_matrix(n).unwrap(), &cons).unwrap();
        assert!((r.mu_eq + 1.0).abs() < 1e-10, "mu {}", r.mu_eq);
        assert!(r.stationarity_residual < 1e-10);
        assert!(r.eta.iter().all(|&e| e == 0.0));
        assert!(r.inside_set.iter().all(|&b| b));
    }

    #[test]
    fn interior_critical_point() {
        let n = 32;
        let disk = GaugeBody::disk(n, 1.0).unwrap();
        let g = PeriodicField::constant(n, 0.0).unwrap();
        let r = kkt_at(&disk, &g, &cone_matrix(n).unwrap(), &ConstraintSpec::default()).unwrap();
        assert!(r.stationarity_residual < 1e-12);
        assert!(r.eta.iter().all(|&e| e.abs() < 1e-12));
    }

    #[test]
    fn outer_box_multiplier() {
        // -area pushes u down onto the lower bound 1/2: -a'(u) = 8 > 0.
        let n = 32;
        let body = GaugeBody::disk(n, 2.0).unwrap();
        let g = area_gradient(&body).unwrap().map(|x| -x).unwrap();
        let cons = ConstraintSpec::disks(n, None, Some(2.0)).unwrap();
        let r = kkt_at(&body, &g, &cone_matrix(n).unwrap(), &cons).unwrap();
        assert!(r.stationarity_residual < 1e-10);
        for &m in &r.box_mult {
            assert!((m - 8.0).abs() < 1e-9);
        }
        assert!(r.inside_set.iter().all(|&b| !b));
    }
}
