use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::body::GaugeBody;
use crate::error::{Error, Result};
use crate::functional::{evaluate, evaluate_value, second_form_report, FunctionalSpec};
use crate::pde::{GradientMode, MeshPlan};
use crate::periodic::PeriodicField;

/// Highest Fourier mode of the random test directions.
const BAND: usize = 6;

/// Errors at one discretization level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelCheck {
    pub grid_n: usize,
    pub plan: Option<MeshPlan>,
    /// Configured gradient against central differences.
    pub grad_error: f64,
    /// Hadamard boundary formula against central differences (PDE specs).
    pub hadamard_error: Option<f64>,
    /// Analytic against finite-difference second form for geometric terms;
    /// step-halving gap for PDE terms.
    pub hess_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivativeCheckReport {
    pub direction_count: usize,
    pub max_rel_error_grad: f64,
    pub max_rel_error_hess: f64,
    /// Per level: the Hadamard error for PDE specs, else the gradient error.
    pub refinement_trend: Vec<f64>,
    pub levels: Vec<LevelCheck>,
}

/// `dJ(u)[v] = dtheta sum g v`.
pub fn directional_derivative(spec: &FunctionalSpec, body: &GaugeBody, v: &PeriodicField) -> Result<f64> {
    Ok(evaluate(spec, body)?.gradient.dot(v))
}

/// Central second difference `(J(u + hv) - 2 J(u) + J(u - hv)) / h^2` with
/// the mesh topology fixed at `body`.
pub fn fd_second_form(spec: &FunctionalSpec, body: &GaugeBody, v: &PeriodicField, h: f64) -> Result<f64> {
    let spec = spec.frozen_for(body)?;
    let center = evaluate_value(&spec, body)?;
    let plus = evaluate_value(&spec, &perturbed(body, v, h)?)?;
    let minus = evaluate_value(&spec, &perturbed(body, v, -h)?)?;
    Ok((plus - 2.0 * center + minus) / (h * h))
}

fn perturbed(body: &GaugeBody, v: &PeriodicField, h: f64) -> Result<GaugeBody> {
    GaugeBody::star_shaped(body.gauge().axpy(h, v)?)
        .map_err(|e| Error::InfeasiblePerturbation(format!("u + ({h:e}) v: {e}")))
}

fn central_difference(spec: &FunctionalSpec, body: &GaugeBody, v: &PeriodicField, h: f64) -> Result<f64> {
    let plus = evaluate_value(spec, &perturbed(body, v, h)?)?;
    let minus = evaluate_value(spec, &perturbed(body, v, -h)?)?;
    Ok((plus - minus) / (2.0 * h))
}

fn rel_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-12)
}

/// Random trigonometric polynomial of degree `BAND` with `max |v| = 1`,
/// given by its coefficients so it can be sampled on any grid.
fn random_direction(rng: &mut ChaCha8Rng) -> Vec<(f64, f64)> {
    (0..=BAND)
        .map(|k| {
            let scale = 1.0 / (1.0 + k as f64);
            (scale * rng.gen_range(-1.0..1.0), scale * rng.gen_range(-1.0..1.0))
        })
        .collect()
}

fn sample_direction(coeffs: &[(f64, f64)], n: usize) -> Result<PeriodicField> {
    let v = PeriodicField::from_fn(n, |t| {
        coeffs
            .iter()
            .enumerate()
            .map(|(k, (a, b))| a * (k as f64 * t).cos() + b * (k as f64 * t).sin())
            .sum()
    })?;
    let m = v.max_abs();
    v.map(|x| x / m)
}

fn check_level(
    spec: &FunctionalSpec,
    body: &GaugeBody,
    directions: &[Vec<(f64, f64)>],
) -> Result<LevelCheck> {
    let n = body.len();
    let scale = body.gauge().max_abs();
    let report = evaluate(spec, body)?;
    let hadamard = if spec.has_pde_terms() {
        let had = FunctionalSpec { gradient_mode: GradientMode::Hadamard, ..spec.clone() };
        Some(evaluate(&had, body)?.gradient)
    } else {
        None
    };
    let rows: Vec<(f64, Option<f64>, f64)> = directions
        .par_iter()
        .map(|coeffs| -> Result<(f64, Option<f64>, f64)> {
            let v = sample_direction(coeffs, n)?;
            let fd = central_difference(spec, body, &v, 1e-5 * scale)?;
            let grad = rel_error(report.gradient.dot(&v), fd);
            let had = hadamard.as_ref().map(|g| rel_error(g.dot(&v), fd));
            let hess = if spec.has_pde_terms() {
                second_form_report(spec, body, &v, 1e-3 * scale)?.richardson_gap
            } else {
                let analytic = second_form_report(spec, body, &v, 1.0)?.value;
                rel_error(analytic, fd_second_form(spec, body, &v, 1e-4 * scale)?)
            };
            Ok((grad, had, hess))
        })
        .collect::<Result<_>>()?;
    let max = |it: &mut dyn Iterator<Item = f64>| it.fold(0.0, f64::max);
    Ok(LevelCheck {
        grid_n: n,
        plan: spec.plan,
        grad_error: max(&mut rows.iter().map(|r| r.0)),
        hadamard_error: hadamard.as_ref().map(|_| max(&mut rows.iter().filter_map(|r| r.1))),
        hess_error: max(&mut rows.iter().map(|r| r.2)),
    })
}

/// Compares analytic derivatives with finite differences along `directions`
/// random band-limited fields drawn from `seed`, at two discretization
/// levels: the mesh chosen for `body` and its refinement for PDE specs, the
/// grids `N` and `2N` otherwise.
pub fn check_gradient(
    spec: &FunctionalSpec,
    body: &GaugeBody,
    directions: usize,
    seed: u64,
) -> Result<DerivativeCheckReport> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dirs: Vec<Vec<(f64, f64)>> = (0..directions).map(|_| random_direction(&mut rng)).collect();
    let levels = if spec.has_pde_terms() {
        let coarse = spec.frozen_for(body)?;
        let plan = coarse.plan.expect("frozen PDE spec has a plan");
        let fine = FunctionalSpec { plan: Some(plan.refined()), ..spec.clone() };
        vec![check_level(&coarse, body, &dirs)?, check_level(&fine, body, &dirs)?]
    } else {
        let fine_body = body.resample(2 * body.len())?;
        vec![check_level(spec, body, &dirs)?, check_level(spec, &fine_body, &dirs)?]
    };
    Ok(DerivativeCheckReport {
        direction_count: directions,
        max_rel_error_grad: levels.iter().map(|l| l.grad_error).fold(0.0, f64::max),
        max_rel_error_hess: levels.iter().map(|l| l.hess_error).fold(0.0, f64::max),
        refinement_trend: levels.iter().map(|l| l.hadamard_error.unwrap_or(l.grad_error)).collect(),
        levels,
    })
}
