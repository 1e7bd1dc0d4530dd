//! `verify`: derivative checks at the starting shape, without optimizing.

use serde::{Deserialize, Serialize};
use shapeopt::analyze::{check_gradient, DerivativeCheckReport};
use shapeopt::body::GaugeBody;
use shapeopt::functional::FunctionalSpec;

use crate::error::CliResult;
use crate::problem::ProblemDocument;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyLevel {
    pub mesh_h: f64,
    pub check: DerivativeCheckReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub problem: ProblemDocument,
    pub directions: usize,
    /// One entry per mesh size `mesh_h / 2^k`; a single entry for purely
    /// geometric objectives.
    pub levels: Vec<VerifyLevel>,
    pub max_rel_error_grad: f64,
    pub max_rel_error_hess: f64,
}

pub fn verify_problem(doc: &ProblemDocument) -> CliResult<VerifyReport> {
    doc.validate()?;
    let body = GaugeBody::star_shaped(doc.initial_gauge()?)?;
    let base = doc.spec();
    let directions = doc.analysis.derivative_check.directions.max(1);
    let count = if base.has_pde_terms() { doc.discretization.refinement_levels } else { 1 };
    let levels = (0..count)
        .map(|k| {
            let mesh_h = base.mesh_h / f64::powi(2.0, k as i32);
            let spec = FunctionalSpec { mesh_h, ..base.clone() };
            Ok(VerifyLevel { mesh_h, check: check_gradient(&spec, &body, directions, doc.seed)? })
        })
        .collect::<CliResult<Vec<_>>>()?;
    Ok(VerifyReport {
        problem: doc.clone(),
        directions,
        max_rel_error_grad: levels.iter().map(|l| l.check.max_rel_error_grad).fold(0.0, f64::max),
        max_rel_error_hess: levels.iter().map(|l| l.check.max_rel_error_hess).fold(0.0, f64::max),
        levels,
    })
}
