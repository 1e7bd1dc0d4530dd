//! Composite objectives `J = sum_i c_i X_i^{p_i}` over the area, the
//! Dirichlet energy, the first eigenvalue and the perimeter, together with
//! box and equality constraints on the gauge.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::body::{
    area, area_gradient, area_hessian_form, perimeter, perimeter_gradient, perimeter_hessian_form,
    GaugeBody,
};
use crate::error::{Error, Result};
use crate::pde::{
    choose_plan, dirichlet_energy_with, energy_discrete_gradient, energy_hadamard_gradient,
    lambda1_discrete_gradient, lambda1_hadamard_gradient, lambda1_with, GradientMode, MeshPlan,
    MeshResolution, PdeOptions, SourceField, TraceMethod,
};
use crate::periodic::PeriodicField;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
pub enum TermKind {
    Area,
    Energy,
    Lambda1,
    Perimeter,
}

impl TermKind {
    pub fn is_pde(self) -> bool {
        matches!(self, TermKind::Energy | TermKind::Lambda1)
    }
}

impl fmt::Display for TermKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TermKind::Area => "area",
            TermKind::Energy => "energy",
            TermKind::Lambda1 => "lambda1",
            TermKind::Perimeter => "perimeter",
        })
    }
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
pub struct Term {
    pub kind: TermKind,
    pub coefficient: f64,
    #[serde(default = "one")]
    pub exponent: f64,
}

impl Term {
    pub fn new(kind: TermKind, coefficient: f64) -> Self {
        Self { kind, coefficient, exponent: 1.0 }
    }

    pub fn pow(kind: TermKind, coefficient: f64, exponent: f64) -> Self {
        Self { kind, coefficient, exponent }
    }

    /// `(c X^p, c p X^{p-1}, c p (p-1) X^{p-2})`.
    fn derivatives(&self, x: f64) -> Result<(f64, f64, f64)> {
        let (c, p) = (self.coefficient, self.exponent);
        if p == 1.0 {
            return Ok((c * x, c, 0.0));
        }
        let integer = p.fract() == 0.0 && p.abs() < 64.0;
        if !integer && x <= 0.0 {
            return Err(Error::NonPositiveBase { base: x, exponent: p });
        }
        let pw = |e: f64| {
            if integer {
                x.powi(e as i32)
            } else {
                x.powf(e)
            }
        };
        Ok((c * pw(p), c * p * pw(p - 1.0), c * p * (p - 1.0) * pw(p - 2.0)))
    }
}

/// Objective `sum c_i X_i^{p_i}` and the discretization of its PDE terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionalSpec {
    pub terms: Vec<Term>,
    #[serde(default)]
    pub source: SourceField,
    /// Target mesh size for PDE terms.
    #[serde(default = "default_mesh_h")]
    pub mesh_h: f64,
    /// Fixed mesh topology; when absent it is chosen from `mesh_h` per body.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan: Option<MeshPlan>,
    #[serde(default)]
    pub trace: TraceMethod,
    #[serde(default)]
    pub gradient_mode: GradientMode,
}

fn default_mesh_h() -> f64 {
    0.05
}

impl FunctionalSpec {
    pub fn new(terms: Vec<Term>) -> Self {
        Self {
            terms,
            source: SourceField::default(),
            mesh_h: default_mesh_h(),
            plan: None,
            trace: TraceMethod::default(),
            gradient_mode: GradientMode::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.terms.is_empty() {
            return Err(Error::InvalidArgument("objective needs at least one term".into()));
        }
        if !(self.mesh_h > 0.0) {
            return Err(Error::InvalidArgument(format!("mesh_h must be positive, got {}", self.mesh_h)));
        }
        for t in &self.terms {
            if !t.coefficient.is_finite() || !t.exponent.is_finite() {
                return Err(Error::InvalidArgument(format!("non-finite term {t:?}")));
            }
        }
        Ok(())
    }

    pub fn has_pde_terms(&self) -> bool {
        self.terms.iter().any(|t| t.kind.is_pde())
    }

    /// Sum of the perimeter coefficients: positive penalizes the perimeter,
    /// negative rewards it.
    pub fn perimeter_sign(&self) -> f64 {
        let c: f64 = self
            .terms
            .iter()
            .filter(|t| t.kind == TermKind::Perimeter)
            .map(|t| t.coefficient)
            .sum();
        if c == 0.0 {
            0.0
        } else {
            c.signum()
        }
    }

    pub fn pde_options(&self) -> PdeOptions {
        PdeOptions {
            resolution: match self.plan {
                Some(plan) => MeshResolution::Plan(plan),
                None => MeshResolution::Target(self.mesh_h),
            },
            trace: self.trace,
            ..PdeOptions::default()
        }
    }

    /// Copy whose PDE terms use the mesh topology chosen for `body`.
    pub fn frozen_for(&self, body: &GaugeBody) -> Result<Self> {
        let mut out = self.clone();
        if out.plan.is_none() && self.has_pde_terms() {
            out.plan = Some(choose_plan(body, MeshResolution::Target(self.mesh_h))?);
        }
        Ok(out)
    }
}

/// Objective value, gradient and the contribution of every term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub value: f64,
    pub gradient: PeriodicField,
    /// Keyed `"<index>:<kind>"`.
    pub per_term_values: BTreeMap<String, f64>,
    /// Raw values of the functionals that appear, keyed by kind.
    pub bases: BTreeMap<TermKind, f64>,
    /// `sum_i |c_i p_i X_i^{p_i - 1} grad X_i|` (Euclidean norm of the
    /// samples): the size of the gradient before the terms cancel.
    pub gradient_scale: f64,
}

/// Base values and gradients of every functional used by `spec`.
struct Bases {
    values: BTreeMap<TermKind, f64>,
    gradients: BTreeMap<TermKind, PeriodicField>,
}

fn compute_bases(
    spec: &FunctionalSpec,
    body: &GaugeBody,
    with_gradient: bool,
    mut warm: Option<&mut Vec<f64>>,
) -> Result<Bases> {
    let mut values = BTreeMap::new();
    let mut gradients = BTreeMap::new();
    let opts = spec.pde_options();
    for kind in spec.terms.iter().map(|t| t.kind) {
        if values.contains_key(&kind) {
            continue;
        }
        let (v, g) = match kind {
            TermKind::Area => (area(body), with_gradient.then(|| area_gradient(body)).transpose()?),
            TermKind::Perimeter => (
                perimeter(body),
                with_gradient.then(|| perimeter_gradient(body)).transpose()?,
            ),
            TermKind::Energy => {
                let sol = dirichlet_energy_with(body, &spec.source, &opts)?;
                let g = if !with_gradient {
                    None
                } else {
                    Some(match spec.gradient_mode {
                        GradientMode::Discrete => energy_discrete_gradient(body, &spec.source, &sol)?,
                        GradientMode::Hadamard => energy_hadamard_gradient(body, &sol)?,
                    })
                };
                (sol.energy, g)
            }
            TermKind::Lambda1 => {
                let start = warm.as_deref().filter(|w| !w.is_empty()).map(Vec::as_slice);
                let pair = lambda1_with(body, &opts, start)?;
                if let Some(w) = warm.as_deref_mut() {
                    w.clone_from(&pair.eigenfunction.nodal_values);
                }
                let g = if !with_gradient {
                    None
                } else {
                    Some(match spec.gradient_mode {
                        GradientMode::Discrete => lambda1_discrete_gradient(body, &pair)?,
                        GradientMode::Hadamard => lambda1_hadamard_gradient(body, &pair)?,
                    })
                };
                (pair.lambda, g)
            }
        };
        values.insert(kind, v);
        if let Some(g) = g {
            gradients.insert(kind, g);
        }
    }
    Ok(Bases { values, gradients })
}

/// Value and chain-rule gradient `sum c p X^{p-1} dX`.
pub fn evaluate(spec: &FunctionalSpec, body: &GaugeBody) -> Result<EvalReport> {
    evaluate_impl(spec, body, None)
}

/// Like [`evaluate`], reusing the eigenvector stored in `warm` as the start of
/// the eigenvalue iteration and replacing it with the new one. Only useful
/// when `spec.plan` is fixed, so that successive meshes share a topology.
pub fn evaluate_warm(spec: &FunctionalSpec, body: &GaugeBody, warm: &mut Vec<f64>) -> Result<EvalReport> {
    if spec.plan.is_none() {
        return evaluate(spec, body);
    }
    evaluate_impl(spec, body, Some(warm))
}

fn evaluate_impl(spec: &FunctionalSpec, body: &GaugeBody, warm: Option<&mut Vec<f64>>) -> Result<EvalReport> {
    spec.validate()?;
    let bases = compute_bases(spec, body, true, warm)?;
    let mut gradient = vec![0.0; body.len()];
    let mut per_term_values = BTreeMap::new();
    let mut value = 0.0;
    let mut gradient_scale = 0.0;
    for (i, term) in spec.terms.iter().enumerate() {
        let x = bases.values[&term.kind];
        let (v, d1, _) = term.derivatives(x)?;
        value += v;
        per_term_values.insert(format!("{i}:{}", term.kind), v);
        let dx = bases.gradients[&term.kind].samples();
        gradient_scale += d1.abs() * dx.iter().map(|x| x * x).sum::<f64>().sqrt();
        for (g, dx) in gradient.iter_mut().zip(dx) {
            *g += d1 * dx;
        }
    }
    Ok(EvalReport {
        value,
        gradient: PeriodicField::new(gradient).map_err(|_| Error::NonFinite("objective gradient"))?,
        per_term_values,
        bases: bases.values,
        gradient_scale,
    })
}

/// Objective value only.
pub fn evaluate_value(spec: &FunctionalSpec, body: &GaugeBody) -> Result<f64> {
    let bases = compute_bases(spec, body, false, None)?;
    spec.terms.iter().try_fold(0.0, |acc, term| {
        Ok(acc + term.derivatives(bases.values[&term.kind])?.0)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
pub enum EqualityKind {
    Area,
    Perimeter,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
pub struct Equality {
    pub kind: EqualityKind,
    pub target: f64,
}

/// Box `k1 <= u <= k2` (either side optional) and an optional equality
/// `m(u) = M0`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ConstraintSpec {
    pub lower: Option<PeriodicField>,
    pub upper: Option<PeriodicField>,
    pub equality: Option<Equality>,
}

impl ConstraintSpec {
    /// Box `disk(inner) ⊂ Omega ⊂ disk(outer)`, i.e. `1/outer <= u <= 1/inner`.
    pub fn disks(n: usize, inner: Option<f64>, outer: Option<f64>) -> Result<Self> {
        let out = Self {
            lower: outer.map(|r| PeriodicField::constant(n, 1.0 / r)).transpose()?,
            upper: inner.map(|r| PeriodicField::constant(n, 1.0 / r)).transpose()?,
            equality: None,
        };
        out.validate(n)?;
        Ok(out)
    }

    pub fn with_equality(mut self, kind: EqualityKind, target: f64) -> Self {
        self.equality = Some(Equality { kind, target });
        self
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        for b in [&self.lower, &self.upper].into_iter().flatten() {
            if b.len() != n {
                return Err(Error::ResolutionMismatch { fine: b.len(), expected: n });
            }
        }
        if let (Some(k1), Some(k2)) = (&self.lower, &self.upper) {
            if let Some(j) = (0..n).find(|&j| k1.samples()[j] > k2.samples()[j]) {
                return Err(Error::Infeasible(format!("k1 > k2 at node {j}")));
            }
        }
        if let Some(eq) = &self.equality {
            if !(eq.target > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "equality target must be positive, got {}",
                    eq.target
                )));
            }
        }
        Ok(())
    }

    pub fn lower_at(&self, j: usize) -> f64 {
        self.lower.as_ref().map_or(f64::NEG_INFINITY, |k| k.samples()[j])
    }

    pub fn upper_at(&self, j: usize) -> f64 {
        self.upper.as_ref().map_or(f64::INFINITY, |k| k.samples()[j])
    }

    /// Same constraints on a grid of `n` nodes (box bounds resampled by
    /// linear interpolation of the constant-or-sampled bound).
    pub fn resampled(&self, n: usize) -> Result<Self> {
        let re = |f: &PeriodicField| -> Result<PeriodicField> {
            let m = f.len();
            PeriodicField::from_fn(n, |t| {
                let x = t / f.dtheta();
                let j = x.floor() as usize % m;
                let w = x - x.floor();
                (1.0 - w) * f.samples()[j] + w * f.samples()[(j + 1) % m]
            })
        };
        Ok(Self {
            lower: self.lower.as_ref().map(re).transpose()?,
            upper: self.upper.as_ref().map(re).transpose()?,
            equality: self.equality,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintEval {
    /// `m(u) - M0`, or zero without an equality.
    pub value: f64,
    pub gradient: PeriodicField,
    pub box_violation: f64,
}

pub fn equality_value(eq: &Equality, body: &GaugeBody) -> f64 {
    match eq.kind {
        EqualityKind::Area => area(body) - eq.target,
        EqualityKind::Perimeter => perimeter(body) - eq.target,
    }
}

pub fn constraint_eval(cons: &ConstraintSpec, body: &GaugeBody) -> Result<ConstraintEval> {
    cons.validate(body.len())?;
    let (value, gradient) = match &cons.equality {
        Some(eq) => (
            equality_value(eq, body),
            match eq.kind {
                EqualityKind::Area => area_gradient(body)?,
                EqualityKind::Perimeter => perimeter_gradient(body)?,
            },
        ),
        None => (0.0, PeriodicField::constant(body.len(), 0.0)?),
    };
    Ok(ConstraintEval {
        value,
        gradient,
        box_violation: box_violation(cons, body.gauge()),
    })
}

pub fn box_violation(cons: &ConstraintSpec, u: &PeriodicField) -> f64 {
    u.samples()
        .iter()
        .enumerate()
        .map(|(j, &x)| (cons.lower_at(j) - x).max(x - cons.upper_at(j)).max(0.0))
        .fold(0.0, f64::max)
}

/// Second-form estimate with its Richardson companion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecondForm {
    /// Analytic part plus the step-`h` finite difference of the PDE part.
    pub value: f64,
    /// Same with step `h/2`.
    pub half_step_value: f64,
    /// `|value - half_step_value| / max(|half_step_value|, tiny)`.
    pub richardson_gap: f64,
}

/// Default step `1e-3 ||u||_inf / ||v||_inf`.
pub fn default_fd_step(body: &GaugeBody, v: &PeriodicField) -> f64 {
    1e-3 * body.gauge().max_abs() / v.max_abs().max(f64::MIN_POSITIVE)
}

/// `j''(u)(v, v)`.
pub fn second_form(spec: &FunctionalSpec, body: &GaugeBody, v: &PeriodicField, step: f64) -> Result<f64> {
    Ok(second_form_report(spec, body, v, step)?.value)
}

/// Analytic Hessian forms for area and perimeter terms; central second
/// differences of the PDE terms at steps `h` and `h/2` with a fixed mesh
/// topology.
pub fn second_form_report(
    spec: &FunctionalSpec,
    body: &GaugeBody,
    v: &PeriodicField,
    step: f64,
) -> Result<SecondForm> {
    spec.validate()?;
    if !(step > 0.0) {
        return Err(Error::InvalidArgument(format!("step must be positive, got {step}")));
    }
    if v.len() != body.len() {
        return Err(Error::ResolutionMismatch { fine: v.len(), expected: body.len() });
    }
    let mut analytic = 0.0;
    for term in spec.terms.iter().filter(|t| !t.kind.is_pde()) {
        let (x, dx, ddx) = match term.kind {
            TermKind::Area => (area(body), area_gradient(body)?.dot(v), area_hessian_form(body, v)),
            _ => (
                perimeter(body),
                perimeter_gradient(body)?.dot(v),
                perimeter_hessian_form(body, v),
            ),
        };
        let (_, d1, d2) = term.derivatives(x)?;
        analytic += d1 * ddx + d2 * dx * dx;
    }
    let pde_terms: Vec<Term> = spec.terms.iter().copied().filter(|t| t.kind.is_pde()).collect();
    if pde_terms.is_empty() {
        return Ok(SecondForm { value: analytic, half_step_value: analytic, richardson_gap: 0.0 });
    }
    let pde_spec = FunctionalSpec { terms: pde_terms, ..spec.clone() }.frozen_for(body)?;
    let center = evaluate_value(&pde_spec, body)?;
    let fd = |h: f64| -> Result<f64> {
        let mut vals = [0.0; 2];
        for (k, sign) in [1.0, -1.0].into_iter().enumerate() {
            let u = body.gauge().axpy(sign * h, v)?;
            let shifted = GaugeBody::star_shaped(u).map_err(|e| {
                Error::InfeasiblePerturbation(format!("u {} {h:e} v: {e}", if sign > 0.0 { "+" } else { "-" }))
            })?;
            vals[k] = evaluate_value(&pde_spec, &shifted)?;
        }
        Ok((vals[0] - 2.0 * center + vals[1]) / (h * h))
    };
    let coarse = fd(step)?;
    let fine = fd(0.5 * step)?;
    Ok(SecondForm {
        value: analytic + coarse,
        half_step_value: analytic + fine,
        richardson_gap: (coarse - fine).abs() / (analytic + fine).abs().max(1e-300),
    })
}
