//! `run`: minimize, recover multipliers, classify, check derivatives and
//! write the report with its companion files.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::path::PathBuf;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use shapeopt::analyze::{
    check_gradient, classify_body, coercivity_probe, CoercivityFit, CornerGap, DerivativeCheckReport,
    RegularityVerdict, VerdictKind,
};
use shapeopt::body::{area, gauge_to_polygon, perimeter, write_polygon_csv, GaugeBody};
use shapeopt::functional::{evaluate, FunctionalSpec};
use shapeopt::optimize::{
    cone_matrix, minimize, recover_multipliers, write_history_csv, KKTReport, OptimizationResult, Status,
};
use shapeopt::pde::{mesh_with_plan, MeshPlan};
use shapeopt::periodic::curvature_measure;

use crate::error::{CliError, CliResult};
use crate::gauge_io::write_gauge_csv;
use crate::problem::ProblemDocument;
use crate::svg::ShapePlot;

/// Bumped whenever the report layout changes.
pub const REPORT_VERSION: u32 = 1;

/// A report section that was computed, deliberately skipped, or failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Section<T> {
    Done { value: T },
    Skipped { reason: String },
    Failed { error: String },
}

impl<T> Section<T> {
    pub fn value(&self) -> Option<&T> {
        match self {
            Section::Done { value } => Some(value),
            _ => None,
        }
    }

    fn skipped(reason: impl Into<String>) -> Self {
        Section::Skipped { reason: reason.into() }
    }

    fn from_result<E: std::fmt::Display>(r: Result<T, E>) -> Self {
        match r {
            Ok(value) => Section::Done { value },
            Err(e) => Section::Failed { error: e.to_string() },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultSummary {
    pub status: Status,
    pub message: String,
    pub iterations: usize,
    pub objective: f64,
    pub per_term_values: BTreeMap<String, f64>,
    pub equality_residual: f64,
    pub area: f64,
    pub perimeter: f64,
    pub u_min: f64,
    pub u_max: f64,
    /// Largest relative deviation of `u` from its mean.
    pub u_relative_spread: f64,
    pub merit_monotone: bool,
    pub frozen_plan: Option<MeshPlan>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KktSummary {
    pub min_eta: f64,
    pub max_eta: f64,
    /// `max eta` over the nodes of inside atoms divided by `max eta`;
    /// `None` without inside atoms or when `eta` vanishes.
    pub atom_eta_ratio: Option<f64>,
    pub multipliers: KKTReport,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MuSign {
    pub mu_eq: f64,
    /// `+1`, `-1` or `0`.
    pub sign: i8,
}

/// Comparison of a fitted corner-gap bound with the observed atoms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum GapCheck {
    /// The observed minimum gap respects the bound.
    Consistent { bound: f64, observed: f64 },
    /// The fit is unusable or contradicts the observed corners.
    FitFailure { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub fit: CoercivityFit,
    pub relative_residual: f64,
    pub corner_gap: Option<CornerGap>,
    pub gap_check: GapCheck,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Timings {
    pub optimize_s: f64,
    pub analysis_s: f64,
    pub derivative_check_s: f64,
    pub probe_s: f64,
    pub total_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub report_version: u32,
    pub problem: ProblemDocument,
    pub exit_code: i32,
    pub error: Option<String>,
    pub result: Section<ResultSummary>,
    pub kkt: Section<KktSummary>,
    pub classification: Section<RegularityVerdict>,
    pub mu_sign: Section<MuSign>,
    pub derivative_check: Section<DerivativeCheckReport>,
    pub probe: Section<Vec<ProbeResult>>,
    /// Files written, keyed by kind.
    pub outputs: BTreeMap<String, PathBuf>,
    pub timings: Timings,
}

impl RunReport {
    /// JSON without the timings, for reproducibility comparisons.
    pub fn deterministic_json(&self) -> String {
        let mut v = serde_json::to_value(self).expect("reports serialize");
        v.as_object_mut().expect("report is an object").remove("timings");
        serde_json::to_string_pretty(&v).expect("reports serialize")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }

    pub fn verdict(&self) -> Option<&RegularityVerdict> {
        self.classification.value()
    }
}

/// Everything a run produces in memory; files are written by [`write_outputs`].
pub struct RunOutcome {
    pub report: RunReport,
    pub optimization: Option<OptimizationResult>,
}

fn skipped_report(doc: &ProblemDocument, error: &CliError, timings: Timings) -> RunReport {
    let why = "optimization failed";
    RunReport {
        report_version: REPORT_VERSION,
        problem: doc.clone(),
        exit_code: error.exit_code(),
        error: Some(error.to_string()),
        result: Section::Failed { error: error.to_string() },
        kkt: Section::skipped(why),
        classification: Section::skipped(why),
        mu_sign: Section::skipped(why),
        derivative_check: Section::skipped(why),
        probe: Section::skipped(why),
        outputs: BTreeMap::new(),
        timings,
    }
}

/// Runs the whole pipeline. Errors in the document itself are returned as
/// `Err` before anything is computed; solver failures produce a report with
/// a nonzero exit code.
pub fn run_problem(doc: &ProblemDocument) -> CliResult<RunOutcome> {
    doc.validate()?;
    let spec = doc.spec();
    let cons = doc.constraints()?;
    let u0 = doc.initial_gauge()?;
    let t_start = Instant::now();
    let mut timings = Timings::default();

    let result = minimize(&spec, &cons, &doc.optimizer, &u0);
    timings.optimize_s = t_start.elapsed().as_secs_f64();
    let result = match result {
        Ok(r) => r,
        Err(e) => {
            let err = CliError::from(e);
            timings.total_s = t_start.elapsed().as_secs_f64();
            return Ok(RunOutcome { report: skipped_report(doc, &err, timings), optimization: None });
        }
    };
    let frozen = FunctionalSpec { plan: result.frozen_plan, ..spec.clone() };

    let t = Instant::now();
    let summary = summarize(&frozen, &result);
    let cone = cone_matrix(doc.discretization.n)?.with_tol(doc.optimizer.tolerances.tol_cone);
    let kkt = recover_multipliers(&result, &spec, &cone, &cons);
    let verdict = match &kkt {
        Ok(k) => Section::from_result(classify_body(&result.u_star, &k.inside_set, &doc.analysis.classify)),
        Err(e) => Section::Failed { error: format!("multipliers unavailable: {e}") },
    };
    let kkt = match kkt {
        Ok(k) => Section::Done { value: kkt_summary(k, verdict.value()) },
        Err(e) => Section::Failed { error: e.to_string() },
    };
    let mu_sign = match (&kkt, doc.analysis.report_mu_sign, &cons.equality) {
        (_, false, _) => Section::skipped("not requested"),
        (_, true, None) => Section::skipped("no equality constraint"),
        (Section::Done { value }, true, Some(_)) => {
            let mu = value.multipliers.mu_eq;
            let sign = if mu > 0.0 {
                1
            } else if mu < 0.0 {
                -1
            } else {
                0
            };
            Section::Done { value: MuSign { mu_eq: mu, sign } }
        }
        (_, true, Some(_)) => Section::skipped("multipliers unavailable"),
    };
    timings.analysis_s = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let check = &doc.analysis.derivative_check;
    let derivative_check = if check.enabled {
        Section::from_result(check_gradient(&frozen, &result.u_star, check.directions, doc.seed))
    } else {
        Section::skipped("disabled")
    };
    timings.derivative_check_s = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let probe = if !doc.analysis.probe.enabled {
        Section::skipped("disabled")
    } else {
        match verdict.value() {
            Some(v) if v.inside_atom_count() >= 2 => probe_between_atoms(doc, &frozen, &result.u_star, v),
            Some(_) => Section::skipped("fewer than two inside atoms"),
            None => Section::skipped("no classification"),
        }
    };
    timings.probe_s = t.elapsed().as_secs_f64();

    let (exit_code, error) = match result.status {
        Status::Converged => (0, None),
        _ => {
            let e = CliError::NonConvergence(result.message.clone());
            (e.exit_code(), Some(e.to_string()))
        }
    };
    timings.total_s = t_start.elapsed().as_secs_f64();
    let report = RunReport {
        report_version: REPORT_VERSION,
        problem: doc.clone(),
        exit_code,
        error,
        result: summary,
        kkt,
        classification: verdict,
        mu_sign,
        derivative_check,
        probe,
        outputs: BTreeMap::new(),
        timings,
    };
    Ok(RunOutcome { report, optimization: Some(result) })
}

fn summarize(spec: &FunctionalSpec, r: &OptimizationResult) -> Section<ResultSummary> {
    let eval = match evaluate(spec, &r.u_star) {
        Ok(e) => e,
        Err(e) => return Section::Failed { error: e.to_string() },
    };
    let u = r.u_star.gauge();
    let mean = u.samples().iter().sum::<f64>() / u.len() as f64;
    Section::Done {
        value: ResultSummary {
            status: r.status,
            message: r.message.clone(),
            iterations: r.iterations,
            objective: r.objective,
            per_term_values: eval.per_term_values,
            equality_residual: r.equality_residual,
            area: area(&r.u_star),
            perimeter: perimeter(&r.u_star),
            u_min: u.min(),
            u_max: u.max(),
            u_relative_spread: (u.max() - u.min()) / mean,
            merit_monotone: r.merit_is_monotone(),
            frozen_plan: r.frozen_plan,
        },
    }
}

fn kkt_summary(k: KKTReport, verdict: Option<&RegularityVerdict>) -> KktSummary {
    let n = k.eta.len();
    let max_eta = k.max_eta();
    let atom_eta_ratio = verdict.and_then(|v| {
        let on_atoms = v
            .inside_atoms()
            .flat_map(|a| a.nodes(n))
            .map(|j| k.eta[j])
            .fold(None, |acc: Option<f64>, x| Some(acc.map_or(x, |a| a.max(x))));
        match on_atoms {
            Some(m) if max_eta > 0.0 => Some(m / max_eta),
            _ => None,
        }
    });
    KktSummary { min_eta: k.min_eta(), max_eta, atom_eta_ratio, multipliers: k }
}

/// Probes centred halfway between consecutive inside atoms.
fn probe_between_atoms(
    doc: &ProblemDocument,
    spec: &FunctionalSpec,
    body: &GaugeBody,
    verdict: &RegularityVerdict,
) -> Section<Vec<ProbeResult>> {
    let mut th: Vec<f64> = verdict.inside_atoms().map(|a| a.theta).collect();
    th.sort_by(f64::total_cmp);
    let observed = verdict.min_atom_gap().expect("at least two atoms");
    let section = &doc.analysis.probe;
    let config = section.config();
    let centers: Vec<f64> = (0..th.len())
        .map(|i| {
            let next = if i + 1 < th.len() { th[i + 1] } else { th[0] + TAU };
            (0.5 * (th[i] + next)).rem_euclid(TAU)
        })
        .collect();
    let mut out = Vec::new();
    for c in centers {
        let fit = match coercivity_probe(spec, body, c, &config) {
            Ok(f) => f,
            Err(e) => return Section::Failed { error: format!("probe at theta = {c}: {e}") },
        };
        let qmax = fit.q_values.iter().fold(0.0f64, |a, q| a.max(q.abs())).max(f64::MIN_POSITIVE);
        let relative_residual = fit.best.residual / qmax;
        let corner_gap = fit.corner_gap();
        let gap_check = if relative_residual > section.max_relative_residual {
            GapCheck::FitFailure {
                reason: format!(
                    "relative residual {relative_residual:.3e} above {}",
                    section.max_relative_residual
                ),
            }
        } else {
            match corner_gap {
                None => GapCheck::FitFailure { reason: "fitted limit is not concave".into() },
                Some(CornerGap::AtMostTwo) if verdict.inside_atom_count() > 2 => GapCheck::FitFailure {
                    reason: format!("bound allows two corners, observed {}", verdict.inside_atom_count()),
                },
                Some(CornerGap::AtMostTwo) => GapCheck::Consistent { bound: 0.0, observed },
                Some(CornerGap::Gap { gap }) if gap <= observed => GapCheck::Consistent { bound: gap, observed },
                Some(CornerGap::Gap { gap }) => GapCheck::FitFailure {
                    reason: format!("bound {gap:.4} exceeds the observed minimum gap {observed:.4}"),
                },
            }
        };
        out.push(ProbeResult { fit, relative_residual, corner_gap, gap_check });
    }
    Section::Done { value: out }
}

/// Writes the report and its companion files into `doc.outputs.dir`,
/// recording the paths in the report.
pub fn write_outputs(outcome: &mut RunOutcome) -> CliResult<()> {
    let doc = outcome.report.problem.clone();
    let out = &doc.outputs;
    std::fs::create_dir_all(&out.dir).map_err(|e| CliError::io(&out.dir, e))?;
    let mut written = BTreeMap::new();

    if let Some(res) = &outcome.optimization {
        if let Some(path) = out.path(&out.history) {
            write_history_csv(&res.history, &path).map_err(|e| CliError::io(&path, e))?;
            written.insert("history".to_string(), path);
        }
        if let Some(path) = out.path(&out.gauge) {
            write_gauge_csv(res.u_star.gauge(), &path)?;
            written.insert("gauge".to_string(), path);
        }
        let verdict = outcome.report.verdict();
        if let Some(path) = out.path(&out.plot) {
            let atoms = verdict.map(|v| v.atoms.as_slice()).unwrap_or(&[]);
            let zeta = outcome.report.kkt.value().map(|k| k.multipliers.eta.as_slice());
            let svg = ShapePlot {
                title: &doc.name,
                body: &res.u_star,
                atoms,
                zeta,
                inner_radius: doc.constraints.inner_radius,
                outer_radius: doc.constraints.outer_radius,
            }
            .render();
            std::fs::write(&path, svg).map_err(|e| CliError::io(&path, e))?;
            written.insert("plot".to_string(), path);
        }
        if let (Some(path), Some(v)) = (out.path(&out.polygon), verdict) {
            if v.kind == VerdictKind::Polygonal {
                let measure = curvature_measure(res.u_star.gauge());
                if let Ok(poly) = gauge_to_polygon(&res.u_star, &measure) {
                    write_polygon_csv(&poly, &path).map_err(|e| CliError::io(&path, e))?;
                    written.insert("polygon".to_string(), path);
                }
            }
        }
        if let (Some(path), Some(plan)) = (out.path(&out.mesh), res.frozen_plan) {
            let mesh = mesh_with_plan(&res.u_star, plan)?;
            mesh.write_off(&path).map_err(|e| CliError::io(&path, e))?;
            written.insert("mesh".to_string(), path);
        }
        if let (Some(path), Some(probes)) = (out.path(&out.probe), outcome.report.probe.value()) {
            let mut csv = String::from("center,eps,q,cone_feasible,q_fit\n");
            for p in probes {
                for line in p.fit.to_csv().lines().skip(1) {
                    csv.push_str(&format!("{},{line}\n", p.fit.center));
                }
            }
            std::fs::write(&path, csv).map_err(|e| CliError::io(&path, e))?;
            written.insert("probe".to_string(), path);
        }
    }
    if let Some(path) = out.path(&out.report) {
        written.insert("report".to_string(), path.clone());
        outcome.report.outputs = written;
        std::fs::write(&path, outcome.report.to_json()).map_err(|e| CliError::io(&path, e))?;
    } else {
        outcome.report.outputs = written;
    }
    Ok(())
}
