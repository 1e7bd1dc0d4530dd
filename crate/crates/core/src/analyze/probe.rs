use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::corners::{corner_gap_bound, poincare_constant, CornerGap};
use crate::body::GaugeBody;
use crate::error::{Error, Result};
use crate::functional::{default_fd_step, second_form, FunctionalSpec};
use crate::optimize::cone_matrix;
use crate::periodic::PeriodicField;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeConfig {
    /// Arc lengths of the bumps.
    pub eps_list: Vec<f64>,
    /// Candidate exponents `s` of the fitted model.
    pub s_grid: Vec<f64>,
    /// Finite-difference step for PDE terms; `None` uses `default_fd_step`.
    pub step: Option<f64>,
    pub tol_cone: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            eps_list: vec![0.8, 0.6, 0.4, 0.3, 0.2],
            s_grid: vec![0.0, 0.25, 0.5, 0.75],
            step: None,
            tol_cone: 1e-10,
        }
    }
}

/// Least-squares fit of `Q(eps) = -alpha + c1 eps^{1-s} + c2 eps^{2(1-s)}`
/// for one `s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelFit {
    pub s: f64,
    pub alpha: f64,
    pub c1: f64,
    pub c2: f64,
    /// Root-mean-square residual.
    pub residual: f64,
    pub condition: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoercivityFit {
    pub center: f64,
    pub epsilons: Vec<f64>,
    /// `j''(u)(v, v) / |v|_{H^1}^2` per bump.
    pub q_values: Vec<f64>,
    /// Whether `u + h v` and `u - h v` both satisfy the cone constraint.
    pub cone_feasible: Vec<bool>,
    /// Best fit over the `s` grid.
    pub best: ModelFit,
    pub all_fits: Vec<ModelFit>,
    /// `gamma = c1 / C`, `beta = c2 / C^2` with `C = pi^{s-1}`.
    pub gamma: f64,
    pub beta: f64,
    /// `Q(0) = -alpha < 0`.
    pub concave_limit: bool,
}

impl CoercivityFit {
    pub fn alpha(&self) -> f64 {
        self.best.alpha
    }

    /// Corner gap from the fitted constants, with negative `beta`, `gamma`
    /// clipped to zero. `None` when the limit is not concave.
    pub fn corner_gap(&self) -> Option<CornerGap> {
        if !self.concave_limit {
            return None;
        }
        corner_gap_bound(self.best.alpha, self.beta.max(0.0), self.gamma.max(0.0), self.best.s).ok()
    }

    /// Rows of the probe curve CSV: `eps,q,cone_feasible,q_fit`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("eps,q,cone_feasible,q_fit\n");
        for ((e, q), f) in self.epsilons.iter().zip(&self.q_values).zip(&self.cone_feasible) {
            let fit = model(&self.best, *e);
            out.push_str(&format!("{e},{q},{f},{fit}\n"));
        }
        out
    }
}

fn model(fit: &ModelFit, eps: f64) -> f64 {
    let p = 1.0 - fit.s;
    -fit.alpha + fit.c1 * eps.powf(p) + fit.c2 * eps.powf(2.0 * p)
}

/// The bump `cos^2(pi (theta - center) / eps)` on the arc of length `eps`
/// centred at `center`, zero elsewhere.
pub fn probe_direction(n: usize, center: f64, eps: f64) -> Result<PeriodicField> {
    if !(eps > 0.0 && eps < std::f64::consts::PI) {
        return Err(Error::InvalidArgument(format!("probe arc {eps} must lie in (0, pi)")));
    }
    PeriodicField::from_fn(n, |t| {
        let x = (t - center + std::f64::consts::PI).rem_euclid(std::f64::consts::TAU) - std::f64::consts::PI;
        if x.abs() < 0.5 * eps {
            (std::f64::consts::PI * x / eps).cos().powi(2)
        } else {
            0.0
        }
    })
}

/// `int v'^2` with forward differences, matching the discrete Hessian forms.
fn h1_seminorm_sq(v: &PeriodicField) -> f64 {
    let s = v.samples();
    let n = s.len();
    let dt = v.dtheta();
    (0..n).map(|j| ((s[(j + 1) % n] - s[j]) / dt).powi(2)).sum::<f64>() * dt
}

fn fit_model(eps: &[f64], q: &[f64], s: f64) -> Result<ModelFit> {
    let p = 1.0 - s;
    let a = DMatrix::from_fn(eps.len(), 3, |i, k| match k {
        0 => -1.0,
        1 => eps[i].powf(p),
        _ => eps[i].powf(2.0 * p),
    });
    let svd = a.clone().svd(true, true);
    let sv = &svd.singular_values;
    let condition = sv.max() / sv.min().max(f64::MIN_POSITIVE);
    if !condition.is_finite() || condition > 1e12 {
        return Err(Error::DegenerateFit(format!("design matrix condition number {condition:e} at s = {s}")));
    }
    let b = DVector::from_column_slice(q);
    let x = svd
        .solve(&b, 0.0)
        .map_err(|e| Error::DegenerateFit(e.to_string()))?;
    let r = &a * &x - b;
    Ok(ModelFit {
        s,
        alpha: x[0],
        c1: x[1],
        c2: x[2],
        residual: (r.norm_squared() / eps.len() as f64).sqrt(),
        condition,
    })
}

/// Second form of `spec` along shrinking bumps centred at `center`,
/// normalized by `|v|_{H^1}^2`, and the fit of its small-arc behaviour.
pub fn coercivity_probe(
    spec: &FunctionalSpec,
    body: &GaugeBody,
    center: f64,
    config: &ProbeConfig,
) -> Result<CoercivityFit> {
    if config.eps_list.len() < 3 {
        return Err(Error::DegenerateFit(format!(
            "need at least 3 arc lengths, got {}",
            config.eps_list.len()
        )));
    }
    if config.s_grid.is_empty() {
        return Err(Error::DegenerateFit("empty s grid".into()));
    }
    let n = body.len();
    let cone = cone_matrix(n)?;
    let spec = spec.frozen_for(body)?;
    let du = cone.apply(body.gauge().samples());
    let rows: Vec<(f64, bool)> = config
        .eps_list
        .par_iter()
        .map(|&eps| -> Result<(f64, bool)> {
            let v = probe_direction(n, center, eps)?;
            let norm = h1_seminorm_sq(&v);
            if norm == 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "probe of width {eps} contains no grid node"
                )));
            }
            let h = config.step.unwrap_or_else(|| default_fd_step(body, &v));
            let dv = cone.apply(v.samples());
            let feasible = du
                .iter()
                .zip(&dv)
                .all(|(a, b)| a - h * b.abs() >= -config.tol_cone);
            let q = second_form(&spec, body, &v, h)? / norm;
            Ok((q, feasible))
        })
        .collect::<Result<_>>()?;
    let q_values: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let cone_feasible = rows.iter().map(|r| r.1).collect();

    let all_fits: Vec<ModelFit> = config
        .s_grid
        .iter()
        .map(|&s| fit_model(&config.eps_list, &q_values, s))
        .collect::<Result<_>>()?;
    let best = *all_fits
        .iter()
        .min_by(|a, b| a.residual.total_cmp(&b.residual))
        .expect("s grid is not empty");
    let c = poincare_constant(best.s);
    Ok(CoercivityFit {
        center,
        epsilons: config.eps_list.clone(),
        q_values,
        cone_feasible,
        gamma: best.c1 / c,
        beta: best.c2 / (c * c),
        concave_limit: -best.alpha < 0.0,
        best,
        all_fits,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functional::{Term, TermKind};

    #[test]
    fn negative_perimeter_is_concave() {
        let disk = GaugeBody::disk(256, 1.0).unwrap();
        let spec = FunctionalSpec::new(vec![Term::new(TermKind::Perimeter, -1.0)]);
        let fit = coercivity_probe(&spec, &disk, 1.0, &ProbeConfig::default()).unwrap();
        assert!(fit.concave_limit);
        assert!((fit.alpha() - 1.0).abs() < 0.2, "{fit:?}");
        assert!(fit.q_values.iter().all(|&q| q < -1.0));
        assert!(fit.cone_feasible.iter().all(|&f| f));
    }

    #[test]
    fn positive_perimeter_is_convex() {
        let disk = GaugeBody::disk(256, 1.0).unwrap();
        let spec = FunctionalSpec::new(vec![Term::new(TermKind::Perimeter, 1.0)]);
        let fit = coercivity_probe(&spec, &disk, 0.0, &ProbeConfig::default()).unwrap();
        assert!(!fit.concave_limit);
        assert!(fit.corner_gap().is_none());
    }

    #[test]
    fn bump_shape() {
        let v = probe_direction(64, 0.0, 0.8).unwrap();
        assert_eq!(v.samples()[0], 1.0);
        assert_eq!(v.samples()[v.len() / 2], 0.0);
        assert!((v.samples()[1] - v.samples()[63]).abs() < 1e-14);
    }

    #[test]
    fn too_few_widths() {
        let disk = GaugeBody::disk(64, 1.0).unwrap();
        let spec = FunctionalSpec::new(vec![Term::new(TermKind::Perimeter, 1.0)]);
        let cfg = ProbeConfig { eps_list: vec![0.5, 0.3], ..Default::default() };
        assert!(matches!(
            coercivity_probe(&spec, &disk, 0.0, &cfg),
            Err(Error::DegenerateFit(_))
        ));
    }
}
