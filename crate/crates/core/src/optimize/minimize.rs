//! Projected gradient descent on the augmented Lagrangian
//! `j(u) + mu c(u) + rho/2 c(u)^2`, `c = m(u) - M0`, in the `H^1` metric.
//!
//! Each trial point is the metric projection of a gradient step onto the
//! polyhedron `{Du >= 0, max(k1, u_min) <= u <= k2}`, so every accepted
//! iterate is feasible for the cone and the box. Step lengths start from a
//! Barzilai-Borwein estimate and are backtracked until the Armijo condition
//! holds, so the merit decreases monotonically while `(mu, rho)` are fixed.

use std::cell::RefCell;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::cone::{cone_matrix, ConeConstraint};
use super::kkt::{kkt_at_scaled, KKTReport};
use super::qp::{project, Metric, Polyhedron};
use super::{effective_bounds, feasible_start};
use crate::body::{area_gradient, perimeter_gradient, GaugeBody};
use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::functional::{equality_value, evaluate_warm, ConstraintSpec, EqualityKind, FunctionalSpec};
use crate::pde::{choose_plan, MeshPlan, MeshResolution};
use crate::periodic::PeriodicField;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
pub struct OptimizerConfig {
    /// Total number of accepted steps over all outer iterations.
    pub max_iter: usize,
    /// Multiplier updates.
    pub max_outer: usize,
    /// Inner iterations per multiplier update.
    pub max_inner: usize,
    /// Weight of `int v'^2` in the descent metric.
    pub metric_beta: f64,
    pub step_init: f64,
    pub step_min: f64,
    pub step_max: f64,
    pub armijo: f64,
    pub rho_init: f64,
    pub rho_growth: f64,
    pub rho_max: f64,
    /// Unit-step projected gradient norm that ends an inner loop.
    pub inner_tol: f64,
    pub tolerances: Tolerances,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            max_iter: 3000,
            max_outer: 40,
            max_inner: 300,
            metric_beta: 1.0,
            step_init: 1.0,
            step_min: 1e-14,
            step_max: 1e6,
            armijo: 1e-4,
            rho_init: 10.0,
            rho_growth: 10.0,
            rho_max: 1e6,
            inner_tol: 1e-9,
            tolerances: Tolerances::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Converged,
    MaxIterations,
    LineSearchFailure,
}

/// One accepted step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistoryRecord {
    pub iter: usize,
    /// Index of the `(mu, rho)` pair in force; the merit is monotone within a phase.
    pub phase: usize,
    pub objective: f64,
    pub merit: f64,
    pub constraint_residual: f64,
    /// `||P(u - Q^{-1} grad) - u||_Q` before the step.
    pub projected_gradient: f64,
    pub step: f64,
    pub mu: f64,
    pub rho: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub u_star: GaugeBody,
    pub objective: f64,
    pub iterations: usize,
    pub status: Status,
    pub kkt: KKTReport,
    pub history: Vec<HistoryRecord>,
    pub equality_residual: f64,
    /// Mesh topology used for PDE terms throughout the run.
    pub frozen_plan: Option<MeshPlan>,
    pub message: String,
}

/// Relative merit change treated as evaluation noise by the line search.
const MERIT_NOISE: f64 = 1e-13;

impl OptimizationResult {
    /// Checks that the merit never increased within a phase.
    pub fn merit_is_monotone(&self) -> bool {
        self.history.windows(2).all(|w| {
            w[0].phase != w[1].phase || w[1].merit <= w[0].merit + 10.0 * MERIT_NOISE * w[0].merit.abs().max(1.0)
        })
    }
}

/// Objective and equality data at one iterate.
struct Point {
    u: Vec<f64>,
    body: GaugeBody,
    objective: f64,
    gradient: Vec<f64>,
    gradient_scale: f64,
    c: f64,
    dc: Vec<f64>,
}

struct Problem<'a> {
    spec: FunctionalSpec,
    warm: RefCell<Vec<f64>>,
    cons: &'a ConstraintSpec,
    u_min: f64,
}

impl Problem<'_> {
    fn point(&self, u: Vec<f64>) -> Result<Point> {
        let body = GaugeBody::star_shaped_with(PeriodicField::new(u.clone())?, self.u_min)?;
        let rep = evaluate_warm(&self.spec, &body, &mut self.warm.borrow_mut())?;
        let (c, dc) = match &self.cons.equality {
            Some(eq) => {
                let m = match eq.kind {
                    EqualityKind::Area => area_gradient(&body)?,
                    EqualityKind::Perimeter => perimeter_gradient(&body)?,
                };
                (equality_value(eq, &body), m.into_samples())
            }
            None => (0.0, vec![0.0; u.len()]),
        };
        Ok(Point {
            u,
            body,
            objective: rep.value,
            gradient: rep.gradient.into_samples(),
            gradient_scale: rep.gradient_scale,
            c,
            dc,
        })
    }
}

fn merit(p: &Point, mu: f64, rho: f64) -> f64 {
    p.objective + mu * p.c + 0.5 * rho * p.c * p.c
}

/// Gradient of the merit, scaled by `dtheta` so that it is the Euclidean
/// gradient with respect to the samples.
fn merit_gradient(p: &Point, mu: f64, rho: f64, dt: f64) -> Vec<f64> {
    let w = mu + rho * p.c;
    p.gradient.iter().zip(&p.dc).map(|(g, m)| dt * (g + w * m)).collect()
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimizes `spec` over the feasible set of `cons` starting from `u_init`
/// (projected first if necessary).
pub fn minimize(
    spec: &FunctionalSpec,
    cons: &ConstraintSpec,
    config: &OptimizerConfig,
    u_init: &PeriodicField,
) -> Result<OptimizationResult> {
    spec.validate()?;
    let n = u_init.len();
    cons.validate(n)?;
    let tols = config.tolerances;
    let cone: ConeConstraint = cone_matrix(n)?.with_tol(tols.tol_cone);
    let (lower, upper) = effective_bounds(cons, n, tols.u_min);
    let poly = Polyhedron::new(&cone, &lower, &upper);
    let metric = Metric::h1(n, config.metric_beta);
    let dt = u_init.dtheta();

    let start = if poly.max_violation(u_init.samples()) <= tols.tol_cone {
        u_init.samples().to_vec()
    } else {
        let mean = u_init.samples().iter().sum::<f64>() / n as f64;
        let feasible = feasible_start(&poly, &lower, &upper, mean)?;
        project(&poly, &Metric::identity(n), u_init.samples(), &feasible)?.x
    };
    let u0 = GaugeBody::star_shaped_with(PeriodicField::new(start.clone())?, tols.u_min)?;

    let mut frozen = spec.clone();
    if spec.has_pde_terms() && spec.plan.is_none() {
        frozen.plan = Some(choose_plan(&u0, MeshResolution::Target(spec.mesh_h))?);
    }
    let problem = Problem {
        spec: frozen.clone(),
        warm: RefCell::new(Vec::new()),
        cons,
        u_min: tols.u_min,
    };

    let mut current = problem.point(start)?;
    let mut rho = config.rho_init;
    // Least-squares multiplier estimate from j' + mu m' = 0.
    let mut mu = if cons.equality.is_some() {
        let mm = dot(&current.dc, &current.dc);
        if mm > 0.0 {
            -dot(&current.gradient, &current.dc) / mm
        } else {
            0.0
        }
    } else {
        0.0
    };

    let mut history = Vec::new();
    let mut total = 0;
    let mut step = config.step_init;
    let mut status = Status::MaxIterations;
    let mut message = String::new();
    let mut last_c = f64::INFINITY;
    let mut kkt = kkt_at_scaled(&current.body, &PeriodicField::new(current.gradient.clone())?, current.gradient_scale, &cone, cons)?;

    'outer: for phase in 0..config.max_outer {
        let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
        let mut line_search_failed = false;
        for _ in 0..config.max_inner {
            if total >= config.max_iter {
                break;
            }
            let grad = merit_gradient(&current, mu, rho, dt);
            let dir = metric.solve(&grad);
            let unit = project(&poly, &metric, &sub(&current.u, &dir), &current.u)?.x;
            let pg = metric.inner(&sub(&unit, &current.u), &sub(&unit, &current.u)).sqrt();
            let scale = 1.0 + metric.inner(&current.u, &current.u).sqrt();
            // While the equality is far from satisfied there is no point in
            // solving the subproblem accurately.
            let inner_tol = config.inner_tol.max(0.1 * current.c.abs());
            if pg <= inner_tol * scale {
                break;
            }
            if let Some((ds, dg)) = &prev {
                let sy = dot(ds, dg);
                if sy > 0.0 {
                    step = (metric.inner(ds, ds) / sy).clamp(config.step_min, config.step_max);
                } else {
                    step = (2.0 * step).min(config.step_max);
                }
            }
            let phi0 = merit(&current, mu, rho);
            // Merit values are only reproducible to a few ulps of the PDE
            // solves, so decreases below this are not distinguishable.
            let noise = MERIT_NOISE * phi0.abs().max(1.0);
            let accepted = loop {
                let trial_u = if step == 1.0 {
                    unit.clone()
                } else {
                    let target: Vec<f64> = current.u.iter().zip(&dir).map(|(u, d)| u - step * d).collect();
                    project(&poly, &metric, &target, &current.u)?.x
                };
                let s = sub(&trial_u, &current.u);
                let decrease = dot(&grad, &s);
                match problem.point(trial_u) {
                    Ok(trial) if merit(&trial, mu, rho) <= phi0 + config.armijo * decrease + noise => {
                        break Some(trial);
                    }
                    Ok(_) | Err(Error::Degenerate { .. }) | Err(Error::InvalidArgument(_)) => {}
                    Err(e) => return Err(e),
                }
                step *= 0.5;
                if step < config.step_min {
                    break None;
                }
            };
            let Some(next) = accepted else {
                line_search_failed = true;
                break;
            };
            let new_grad = merit_gradient(&next, mu, rho, dt);
            prev = Some((sub(&next.u, &current.u), sub(&new_grad, &grad)));
            total += 1;
            current = next;
            history.push(HistoryRecord {
                iter: total,
                phase,
                objective: current.objective,
                merit: merit(&current, mu, rho),
                constraint_residual: current.c,
                projected_gradient: pg,
                step,
                mu,
                rho,
            });
        }

        kkt = kkt_at_scaled(&current.body, &PeriodicField::new(current.gradient.clone())?, current.gradient_scale, &cone, cons)?;
        let c_ok = current.c.abs() <= tols.tol_eq;
        if c_ok
            && kkt.stationarity_residual <= tols.tol_kkt
            && kkt.complementarity_residual <= tols.tol_comp
            && kkt.min_eta() >= -tols.tol_cone
        {
            status = Status::Converged;
            message = format!("KKT certificate met after {total} steps");
            break 'outer;
        }
        if total >= config.max_iter {
            message = format!("reached max_iter = {}", config.max_iter);
            break;
        }
        if line_search_failed && c_ok {
            status = Status::LineSearchFailure;
            message = format!(
                "line search failed with stationarity residual {:.3e}",
                kkt.stationarity_residual
            );
            break;
        }
        if cons.equality.is_some() {
            mu += rho * current.c;
            if current.c.abs() > 0.25 * last_c {
                rho = (rho * config.rho_growth).min(config.rho_max);
            }
            last_c = current.c.abs();
        } else if !line_search_failed && phase > 2 {
            // Without an equality the merit never changes; further phases
            // only help by restarting the step-length history.
            message = format!(
                "stalled with stationarity residual {:.3e}",
                kkt.stationarity_residual
            );
        }
    }
    if message.is_empty() {
        message = format!("reached max_outer = {}", config.max_outer);
    }
    Ok(OptimizationResult {
        objective: current.objective,
        u_star: current.body,
        iterations: total,
        status,
        kkt,
        history,
        equality_residual: current.c,
        frozen_plan: frozen.plan,
        message,
    })
}

/// Writes the history as CSV with a header line.
pub fn write_history_csv(history: &[HistoryRecord], path: &Path) -> Result<()> {
    let mut out = String::from("iter,phase,objective,merit,constraint_residual,projected_gradient,step,mu,rho\n");
    for h in history {
        writeln!(
            out,
            "{},{},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
            h.iter, h.phase, h.objective, h.merit, h.constraint_residual, h.projected_gradient, h.step, h.mu, h.rho
        )
        .expect("string write");
    }
    std::fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functional::{Term, TermKind};
    use std::f64::consts::PI;

    #[test]
    fn minus_area_saturates_outer_box() {
        let n = 32;
        let spec = FunctionalSpec::new(vec![Term::new(TermKind::Area, -1.0)]);
        let cons = ConstraintSpec::disks(n, Some(0.5), Some(2.0)).unwrap();
        let u0 = PeriodicField::from_fn(n, |t| 1.0 + 0.1 * (2.0 * t).cos()).unwrap();
        let res = minimize(&spec, &cons, &OptimizerConfig::default(), &u0).unwrap();
        assert_eq!(res.status, Status::Converged, "{}", res.message);
        for &x in res.u_star.gauge().samples() {
            assert!((x - 0.5).abs() < 1e-10);
        }
        assert!(res.merit_is_monotone());
    }

    #[test]
    fn isoperimetric_converges_to_disk() {
        let n = 64;
        let spec = FunctionalSpec::new(vec![Term::new(TermKind::Perimeter, 1.0)]);
        let cons = ConstraintSpec::disks(n, Some(1.0 / 3.0), Some(3.0))
            .unwrap()
            .with_equality(EqualityKind::Area, PI);
        let u0 = PeriodicField::from_fn(n, |t| 1.0 + 0.2 * (3.0 * t).cos()).unwrap();
        let res = minimize(&spec, &cons, &OptimizerConfig::default(), &u0).unwrap();
        assert_eq!(res.status, Status::Converged, "{}", res.message);
        for &x in res.u_star.gauge().samples() {
            assert!((x - 1.0).abs() < 1e-3, "{x}");
        }
        assert!((res.kkt.mu_eq + 1.0).abs() < 1e-3);
        assert!(res.merit_is_monotone());
    }
}
