//! Gauge samples as CSV: a `theta,u` header and one row per grid node.

use std::f64::consts::TAU;
use std::path::Path;

use serde::{Deserialize, Serialize};
use shapeopt::PeriodicField;

use crate::error::{CliError, CliResult};

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    theta: f64,
    u: f64,
}

/// Largest accepted deviation of a `theta` column entry from `2 pi j / N`.
const THETA_TOL: f64 = 1e-6;

pub fn write_gauge_csv(u: &PeriodicField, path: &Path) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::io(path, e))?;
    for (theta, &u) in u.thetas().into_iter().zip(u.samples()) {
        w.serialize(Row { theta, u }).map_err(|e| CliError::io(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn parse_gauge_csv(text: &str) -> CliResult<PeriodicField> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let rows: Vec<Row> = rdr
        .deserialize()
        .enumerate()
        .map(|(i, r)| r.map_err(|e| CliError::Schema(format!("gauge csv row {}: {e}", i + 1))))
        .collect::<CliResult<_>>()?;
    let n = rows.len();
    if n < 8 {
        return Err(CliError::Schema(format!("gauge csv: need at least 8 rows, got {n}")));
    }
    for (j, r) in rows.iter().enumerate() {
        let expected = TAU * j as f64 / n as f64;
        if (r.theta - expected).abs() > THETA_TOL {
            return Err(CliError::Schema(format!(
                "gauge csv row {}: theta = {} but a uniform grid of {n} nodes needs {expected}",
                j + 1,
                r.theta
            )));
        }
        if !r.u.is_finite() {
            return Err(CliError::Schema(format!("gauge csv row {}: u is not finite", j + 1)));
        }
    }
    PeriodicField::new(rows.into_iter().map(|r| r.u).collect()).map_err(CliError::from)
}

pub fn read_gauge_csv(path: &Path) -> CliResult<PeriodicField> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_gauge_csv(&text).map_err(|e| match e {
        CliError::Schema(m) => CliError::Schema(format!("{}: {m}", path.display())),
        other => other,
    })
}
