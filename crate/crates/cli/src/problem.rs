//! Problem files: a TOML document describing one optimization experiment.
//!
//! Parsing is strict. Unknown keys are rejected, every section except
//! `objective` has defaults, and the fully resolved document (defaults
//! filled in) is what gets embedded in run reports.

use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use shapeopt::analyze::{ClassifyConfig, ProbeConfig};
use shapeopt::body::{polygon_to_gauge, read_polygon_csv};
use shapeopt::functional::{ConstraintSpec, Equality, FunctionalSpec, Term};
use shapeopt::optimize::OptimizerConfig;
use shapeopt::pde::{GradientMode, SourceField, TraceMethod};
use shapeopt::PeriodicField;

use crate::error::{CliError, CliResult};
use crate::gauge_io::read_gauge_csv;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[derive(JsonSchema)]
pub struct ProblemDocument {
    pub name: String,
    #[serde(default)]
    pub description: String,
    /// Seed of the random directions used by the derivative checks.
    #[serde(default)]
    pub seed: u64,
    pub objective: ObjectiveSection,
    #[serde(default)]
    pub constraints: ConstraintSection,
    #[serde(default)]
    pub discretization: DiscretizationSection,
    #[serde(default)]
    pub initial: InitialShape,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub analysis: AnalysisSection,
    #[serde(default)]
    pub outputs: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[derive(JsonSchema)]
pub struct ObjectiveSection {
    pub terms: Vec<Term>,
    #[serde(default)]
    pub source: SourceField,
    #[serde(default)]
    pub trace: TraceMethod,
    #[serde(default)]
    pub gradient_mode: GradientMode,
}

/// `disk(inner_radius) ⊂ Omega ⊂ disk(outer_radius)` and an optional
/// area or perimeter equality.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
#[derive(JsonSchema)]
pub struct ConstraintSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inner_radius: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub outer_radius: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub equality: Option<Equality>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
#[derive(JsonSchema)]
pub struct DiscretizationSection {
    /// Number of angular grid nodes.
    pub n: usize,
    /// Target mesh size for PDE terms.
    pub mesh_h: f64,
    /// Number of mesh refinements compared by `verify`.
    pub refinement_levels: usize,
}

impl Default for DiscretizationSection {
    fn default() -> Self {
        Self { n: 128, mesh_h: 0.05, refinement_levels: 2 }
    }
}

/// Starting gauge. Paths are relative to the problem file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
#[derive(JsonSchema)]
pub enum InitialShape {
    Disk {
        radius: f64,
    },
    /// `u = mean + sum_k cos[k] cos(k theta) + sin[k] sin(k theta)`.
    Fourier {
        mean: f64,
        #[serde(default)]
        cos: Vec<f64>,
        #[serde(default)]
        sin: Vec<f64>,
    },
    /// Vertex list `x,y`, converted to its gauge.
    Polygon {
        path: PathBuf,
    },
    /// Samples `theta,u` on the problem's grid.
    Gauge {
        path: PathBuf,
    },
}

impl Default for InitialShape {
    fn default() -> Self {
        InitialShape::Disk { radius: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
#[derive(JsonSchema)]
pub struct DerivativeCheckSection {
    pub enabled: bool,
    pub directions: usize,
}

impl Default for DerivativeCheckSection {
    fn default() -> Self {
        Self { enabled: true, directions: 3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
#[derive(JsonSchema)]
pub struct ProbeSection {
    pub enabled: bool,
    /// Largest fit residual, relative to `max |Q|`, for which the corner-gap
    /// bound is compared with the observed atoms.
    pub max_relative_residual: f64,
    pub eps_list: Vec<f64>,
    pub s_grid: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
    pub tol_cone: f64,
}

impl Default for ProbeSection {
    fn default() -> Self {
        let c = ProbeConfig::default();
        Self {
            enabled: false,
            max_relative_residual: 0.05,
            eps_list: c.eps_list,
            s_grid: c.s_grid,
            step: c.step,
            tol_cone: c.tol_cone,
        }
    }
}

impl ProbeSection {
    pub fn config(&self) -> ProbeConfig {
        ProbeConfig {
            eps_list: self.eps_list.clone(),
            s_grid: self.s_grid.clone(),
            step: self.step,
            tol_cone: self.tol_cone,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
#[derive(JsonSchema)]
pub struct AnalysisSection {
    pub classify: ClassifyConfig,
    pub derivative_check: DerivativeCheckSection,
    /// Second-form probes between consecutive corners of the optimum.
    pub probe: ProbeSection,
    /// Report the sign of the equality multiplier.
    pub report_mu_sign: bool,
}

/// Output locations; `dir` is relative to the working directory, the file
/// names to `dir`. An empty file name disables that output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
#[derive(JsonSchema)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub report: String,
    pub history: String,
    pub plot: String,
    pub gauge: String,
    pub polygon: String,
    pub mesh: String,
    pub probe: String,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            report: "report.json".into(),
            history: "history.csv".into(),
            plot: "shape.svg".into(),
            gauge: "gauge.csv".into(),
            polygon: "polygon.csv".into(),
            mesh: "mesh.off".into(),
            probe: "probe.csv".into(),
        }
    }
}

impl OutputSection {
    pub fn path(&self, name: &str) -> Option<PathBuf> {
        (!name.is_empty()).then(|| self.dir.join(name))
    }
}

/// JSON schema of problem files (TOML documents with this structure).
pub fn problem_schema() -> String {
    let schema = schemars::schema_for!(ProblemDocument);
    serde_json::to_string_pretty(&schema).expect("schemas serialize") + "\n"
}

/// Parses and validates a problem document.
pub fn parse_problem(text: &str) -> CliResult<ProblemDocument> {
    let doc: ProblemDocument = toml::from_str(text).map_err(|e| CliError::Schema(format_toml_error(text, &e)))?;
    doc.validate()?;
    Ok(doc)
}

/// Reads a problem file; relative input paths inside it are resolved
/// against the file's directory.
pub fn load_problem(path: &Path) -> CliResult<ProblemDocument> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut doc = parse_problem(&text).map_err(|e| match e {
        CliError::Schema(m) => CliError::Schema(format!("{}: {m}", path.display())),
        other => other,
    })?;
    let base = path.parent().unwrap_or(Path::new(""));
    match &mut doc.initial {
        InitialShape::Polygon { path } | InitialShape::Gauge { path } if path.is_relative() => {
            *path = base.join(&*path);
        }
        _ => {}
    }
    Ok(doc)
}

fn format_toml_error(text: &str, err: &toml::de::Error) -> String {
    let msg = err.message().trim().to_string();
    match err.span() {
        Some(span) => {
            let before = &text[..span.start.min(text.len())];
            let line = before.matches('\n').count() + 1;
            let col = span.start - before.rfind('\n').map_or(0, |i| i + 1) + 1;
            format!("line {line}, column {col}: {msg}")
        }
        None => msg,
    }
}

fn schema(field: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Schema(format!("{field}: {msg}"))
}

fn positive(field: &str, x: f64) -> CliResult<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(schema(field, format!("must be a positive finite number, got {x}")))
    }
}

impl ProblemDocument {
    /// Checks value ranges that the type system does not capture.
    pub fn validate(&self) -> CliResult<()> {
        if self.name.trim().is_empty() {
            return Err(schema("name", "must not be empty"));
        }
        if self.objective.terms.is_empty() {
            return Err(schema("objective.terms", "needs at least one term"));
        }
        for (i, t) in self.objective.terms.iter().enumerate() {
            if !t.coefficient.is_finite() {
                return Err(schema(&format!("objective.terms[{i}].coefficient"), "must be finite"));
            }
            if !t.exponent.is_finite() {
                return Err(schema(&format!("objective.terms[{i}].exponent"), "must be finite"));
            }
        }
        match self.objective.source {
            SourceField::Gaussian { width, .. } => positive("objective.source.width", width)?,
            SourceField::Constant { value } if !value.is_finite() => {
                return Err(schema("objective.source.value", "must be finite"))
            }
            _ => {}
        }
        let c = &self.constraints;
        if let Some(r) = c.inner_radius {
            positive("constraints.inner_radius", r)?;
        }
        if let Some(r) = c.outer_radius {
            positive("constraints.outer_radius", r)?;
        }
        if let (Some(a), Some(b)) = (c.inner_radius, c.outer_radius) {
            if a > b {
                return Err(CliError::Infeasible(format!(
                    "constraints: inner_radius {a} exceeds outer_radius {b}"
                )));
            }
        }
        if let Some(eq) = &c.equality {
            positive("constraints.equality.target", eq.target)?;
        }
        let d = &self.discretization;
        if d.n < 8 || !d.n.is_multiple_of(4) {
            return Err(schema("discretization.n", format!("must be a multiple of 4 and at least 8, got {}", d.n)));
        }
        positive("discretization.mesh_h", d.mesh_h)?;
        if d.refinement_levels == 0 {
            return Err(schema("discretization.refinement_levels", "must be at least 1"));
        }
        match &self.initial {
            InitialShape::Disk { radius } => positive("initial.radius", *radius)?,
            InitialShape::Fourier { mean, cos, sin } => {
                positive("initial.mean", *mean)?;
                if cos.iter().chain(sin).any(|x| !x.is_finite()) {
                    return Err(schema("initial", "Fourier coefficients must be finite"));
                }
            }
            InitialShape::Polygon { path } | InitialShape::Gauge { path } => {
                if path.as_os_str().is_empty() {
                    return Err(schema("initial.path", "must not be empty"));
                }
            }
        }
        let o = &self.optimizer;
        for (field, x) in [
            ("optimizer.metric_beta", o.metric_beta),
            ("optimizer.step_init", o.step_init),
            ("optimizer.step_min", o.step_min),
            ("optimizer.step_max", o.step_max),
            ("optimizer.armijo", o.armijo),
            ("optimizer.rho_init", o.rho_init),
            ("optimizer.rho_growth", o.rho_growth),
            ("optimizer.rho_max", o.rho_max),
            ("optimizer.inner_tol", o.inner_tol),
            ("optimizer.tolerances.u_min", o.tolerances.u_min),
            ("optimizer.tolerances.tol_cone", o.tolerances.tol_cone),
            ("optimizer.tolerances.tol_eq", o.tolerances.tol_eq),
            ("optimizer.tolerances.tol_kkt", o.tolerances.tol_kkt),
            ("optimizer.tolerances.tol_comp", o.tolerances.tol_comp),
        ] {
            positive(field, x)?;
        }
        if o.armijo >= 1.0 {
            return Err(schema("optimizer.armijo", "must lie in (0, 1)"));
        }
        if o.max_iter == 0 || o.max_outer == 0 || o.max_inner == 0 {
            return Err(schema("optimizer", "iteration limits must be positive"));
        }
        let a = &self.analysis;
        positive("analysis.classify.tau_abs", a.classify.tau_abs)?;
        positive("analysis.classify.kappa", a.classify.kappa)?;
        if !(a.classify.frac_min > 0.0 && a.classify.frac_min <= 1.0) {
            return Err(schema("analysis.classify.frac_min", "must lie in (0, 1]"));
        }
        if a.derivative_check.enabled && a.derivative_check.directions == 0 {
            return Err(schema("analysis.derivative_check.directions", "must be positive when enabled"));
        }
        if a.probe.enabled {
            let p = &a.probe;
            if p.eps_list.len() < 3 {
                return Err(schema("analysis.probe.eps_list", "needs at least 3 arc lengths"));
            }
            if let Some(e) = p.eps_list.iter().find(|e| !(**e > 0.0 && **e < std::f64::consts::PI)) {
                return Err(schema("analysis.probe.eps_list", format!("arc length {e} outside (0, pi)")));
            }
            if p.s_grid.is_empty() || p.s_grid.iter().any(|s| !(0.0..1.0).contains(s)) {
                return Err(schema("analysis.probe.s_grid", "needs values in [0, 1)"));
            }
            positive("analysis.probe.max_relative_residual", a.probe.max_relative_residual)?;
        }
        if self.outputs.dir.as_os_str().is_empty() {
            return Err(schema("outputs.dir", "must not be empty"));
        }
        Ok(())
    }

    pub fn spec(&self) -> FunctionalSpec {
        FunctionalSpec {
            terms: self.objective.terms.clone(),
            source: self.objective.source,
            mesh_h: self.discretization.mesh_h,
            plan: None,
            trace: self.objective.trace,
            gradient_mode: self.objective.gradient_mode,
        }
    }

    pub fn constraints(&self) -> CliResult<ConstraintSpec> {
        let c = &self.constraints;
        let mut cons = ConstraintSpec::disks(self.discretization.n, c.inner_radius, c.outer_radius)?;
        cons.equality = c.equality;
        Ok(cons)
    }

    /// Samples of the starting gauge on the problem's grid.
    pub fn initial_gauge(&self) -> CliResult<PeriodicField> {
        let n = self.discretization.n;
        let field = match &self.initial {
            InitialShape::Disk { radius } => PeriodicField::constant(n, 1.0 / radius)?,
            InitialShape::Fourier { mean, cos, sin } => PeriodicField::from_fn(n, |t| {
                let c: f64 = cos.iter().enumerate().map(|(k, a)| a * (k as f64 * t).cos()).sum();
                let s: f64 = sin.iter().enumerate().map(|(k, b)| b * (k as f64 * t).sin()).sum();
                mean + c + s
            })?,
            InitialShape::Polygon { path } => {
                let poly = read_polygon_csv(path).map_err(|e| CliError::io(path, e))?;
                polygon_to_gauge(&poly, n)?.into_gauge()
            }
            InitialShape::Gauge { path } => {
                let g = read_gauge_csv(path)?;
                if g.len() != n {
                    return Err(schema(
                        "initial.path",
                        format!("gauge file has {} samples but discretization.n = {n}", g.len()),
                    ));
                }
                g
            }
        };
        if let Some(j) = field.samples().iter().position(|&x| !(x > 0.0)) {
            return Err(CliError::Infeasible(format!(
                "initial gauge is not positive at theta = {}",
                j as f64 * TAU / n as f64
            )));
        }
        Ok(field)
    }

    /// Serialized form with every default materialized.
    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("problem documents always serialize")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
name = "iso"
[objective]
terms = [{ kind = "perimeter", coefficient = 1.0 }]
"#;

    #[test]
    fn minimal_document_gets_defaults() {
        let doc = parse_problem(MINIMAL).unwrap();
        assert_eq!(doc.discretization.n, 128);
        assert_eq!(doc.initial, InitialShape::Disk { radius: 1.0 });
        assert!(doc.analysis.derivative_check.enabled);
        let again = parse_problem(&doc.to_toml()).unwrap();
        assert_eq!(again, doc);
    }

    #[test]
    fn unknown_key_reports_line() {
        let text = format!("{MINIMAL}\n[discretization]\nn = 64\nmesh = 0.1\n");
        let err = parse_problem(&text).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 8"), "{msg}");
        assert!(msg.contains("mesh"), "{msg}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn range_errors_name_the_field() {
        let text = format!("{MINIMAL}\n[discretization]\nn = 30\n");
        let msg = parse_problem(&text).unwrap_err().to_string();
        assert!(msg.contains("discretization.n"), "{msg}");

        let text = format!("{MINIMAL}\n[constraints]\ninner_radius = 2.0\nouter_radius = 1.0\n");
        assert_eq!(parse_problem(&text).unwrap_err().exit_code(), 4);
    }

    #[test]
    fn fourier_start() {
        let text = format!("{MINIMAL}\n[initial]\nkind = \"fourier\"\nmean = 1.0\ncos = [0.0, 0.0, 0.1]\n");
        let doc = parse_problem(&text).unwrap();
        let u = doc.initial_gauge().unwrap();
        assert!((u.samples()[0] - 1.1).abs() < 1e-15);
        assert!((u.samples()[32] - 0.9).abs() < 1e-12);
    }
}
