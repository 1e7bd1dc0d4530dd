//! `classify`: smooth/polygonal verdict for a gauge read from CSV.

use serde::{Deserialize, Serialize};
use shapeopt::analyze::{classify_body, ClassifyConfig, RegularityVerdict};
use shapeopt::body::GaugeBody;
use shapeopt::config::Tolerances;
use shapeopt::optimize::ACTIVE_TOL;
use shapeopt::periodic::curvature_measure;
use shapeopt::PeriodicField;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ClassifyOptions {
    /// Nodes with `u >= 1/inner_radius` (touching the inner disk) are excluded.
    pub inner_radius: Option<f64>,
    /// Nodes with `u <= 1/outer_radius` (touching the outer disk) are excluded.
    pub outer_radius: Option<f64>,
    pub config: ClassifyConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifyReport {
    pub grid_n: usize,
    /// Smallest node mass of `u'' + u`; negative beyond roundoff means the
    /// gauge is not convex.
    pub min_node_mass: f64,
    pub convex: bool,
    pub inside_count: usize,
    pub verdict: RegularityVerdict,
}

pub fn classify_gauge(u: PeriodicField, options: &ClassifyOptions) -> CliResult<ClassifyReport> {
    for (name, r) in [("inner radius", options.inner_radius), ("outer radius", options.outer_radius)] {
        if let Some(r) = r {
            if !(r > 0.0) {
                return Err(CliError::Schema(format!("{name} must be positive, got {r}")));
            }
        }
    }
    let n = u.len();
    let measure = curvature_measure(&u);
    let min_node_mass = measure.min_mass();
    let body = GaugeBody::star_shaped(u)?;
    let upper = options.inner_radius.map_or(f64::INFINITY, |r| 1.0 / r);
    let lower = options.outer_radius.map_or(f64::NEG_INFINITY, |r| 1.0 / r);
    let inside: Vec<bool> = body
        .gauge()
        .samples()
        .iter()
        .map(|&x| x > lower + ACTIVE_TOL && x < upper - ACTIVE_TOL)
        .collect();
    let verdict = classify_body(&body, &inside, &options.config)?;
    Ok(ClassifyReport {
        grid_n: n,
        min_node_mass,
        convex: min_node_mass >= -Tolerances::default().tol_cone,
        inside_count: inside.iter().filter(|&&b| b).count(),
        verdict,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use shapeopt::analyze::VerdictKind;

    #[test]
    fn square_and_disk() {
        let sq = GaugeBody::square(128, 1.0).unwrap().into_gauge();
        let r = classify_gauge(sq, &ClassifyOptions::default()).unwrap();
        assert_eq!(r.verdict.kind, VerdictKind::Polygonal);
        assert_eq!(r.verdict.inside_atom_count(), 4);
        assert!(r.convex);

        let disk = PeriodicField::constant(128, 1.0).unwrap();
        let r = classify_gauge(disk, &ClassifyOptions::default()).unwrap();
        assert_eq!(r.verdict.kind, VerdictKind::Smooth);
    }

    #[test]
    fn box_contact_is_excluded() {
        let disk = PeriodicField::constant(64, 2.0).unwrap();
        let opts = ClassifyOptions { inner_radius: Some(0.5), ..Default::default() };
        let r = classify_gauge(disk, &opts).unwrap();
        assert_eq!(r.inside_count, 0);
        assert_eq!(r.verdict.kind, VerdictKind::Inconclusive);
    }
}
