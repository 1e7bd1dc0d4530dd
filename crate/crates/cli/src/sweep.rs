//! `sweep`: one problem file, one parameter, many values, run in parallel.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use shapeopt::analyze::VerdictKind;
use shapeopt::optimize::Status;

use crate::error::{CliError, CliResult};
use crate::problem::{load_problem, parse_problem, ProblemDocument};
use crate::run::{run_problem, write_outputs};

/// Parses a command-line value as a TOML literal, falling back to a string.
pub fn parse_value(text: &str) -> toml::Value {
    match toml::from_str::<toml::Table>(&format!("v = {text}")) {
        Ok(mut t) => t.remove("v").expect("key was just parsed"),
        Err(_) => toml::Value::String(text.to_string()),
    }
}

/// Sets `path` (dot-separated keys, numeric segments index arrays) in
/// `root`, creating missing tables along the way.
pub fn set_path(root: &mut toml::Table, path: &str, value: toml::Value) -> CliResult<()> {
    let segments: Vec<&str> = path.split('.').collect();
    if segments.iter().any(|s| s.is_empty()) {
        return Err(CliError::Schema(format!("invalid parameter path `{path}`")));
    }
    let mut wrapped = toml::Value::Table(std::mem::take(root));
    let result = set_in(&mut wrapped, &segments, value, path);
    if let toml::Value::Table(t) = wrapped {
        *root = t;
    }
    result
}

fn set_in(node: &mut toml::Value, segs: &[&str], value: toml::Value, path: &str) -> CliResult<()> {
    let Some((seg, rest)) = segs.split_first() else {
        *node = match (&*node, value) {
            (toml::Value::Float(_), toml::Value::Integer(i)) => toml::Value::Float(i as f64),
            (_, v) => v,
        };
        return Ok(());
    };
    let child = match node {
        toml::Value::Table(t) => t
            .entry(seg.to_string())
            .or_insert_with(|| toml::Value::Table(Default::default())),
        toml::Value::Array(items) => {
            let len = items.len();
            let i: usize = seg
                .parse()
                .map_err(|_| CliError::Schema(format!("`{path}`: `{seg}` is not an array index")))?;
            items
                .get_mut(i)
                .ok_or_else(|| CliError::Schema(format!("`{path}`: index {i} out of range ({len} items)")))?
        }
        _ => return Err(CliError::Schema(format!("`{path}`: `{seg}` has no table or array parent"))),
    };
    set_in(child, rest, value, path)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub value: String,
    pub output_dir: PathBuf,
    pub exit_code: i32,
    pub status: Option<Status>,
    pub objective: Option<f64>,
    pub verdict: Option<VerdictKind>,
    pub inside_atoms: Option<usize>,
    pub mu_eq: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub problem: String,
    pub param: String,
    pub entries: Vec<SweepEntry>,
}

impl SweepReport {
    /// First nonzero exit code in value order, or zero.
    pub fn exit_code(&self) -> i32 {
        self.entries.iter().map(|e| e.exit_code).find(|&c| c != 0).unwrap_or(0)
    }
}

fn slug(value: &str) -> String {
    value
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' { c } else { '_' })
        .collect()
}

/// Builds every variant first so a bad value fails before any run starts,
/// then runs them on `jobs` worker threads (all cores when `None`).
pub fn sweep(file: &Path, param: &str, values: &[String], jobs: Option<usize>) -> CliResult<SweepReport> {
    if values.is_empty() {
        return Err(CliError::Schema("sweep needs at least one value".into()));
    }
    let base = load_problem(file)?;
    let text = std::fs::read_to_string(file).map_err(|e| CliError::io(file, e))?;
    let table: toml::Table = toml::from_str(&text).map_err(|e| CliError::Schema(e.to_string()))?;
    let docs: Vec<ProblemDocument> = values
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let mut t = table.clone();
            set_path(&mut t, param, parse_value(v))?;
            let text = toml::to_string(&t).map_err(|e| CliError::Schema(e.to_string()))?;
            let mut doc = parse_problem(&text)
                .map_err(|e| CliError::Schema(format!("{param} = {v}: {e}")))?;
            doc.initial = variant_initial(&base, &doc);
            doc.outputs.dir = base.outputs.dir.join(format!("sweep-{i:02}-{}", slug(v)));
            Ok(doc)
        })
        .collect::<CliResult<_>>()?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Schema(format!("worker pool: {e}")))?;
    let entries: Vec<SweepEntry> = pool.install(|| {
        docs.par_iter().zip(values.par_iter()).map(|(doc, v)| run_entry(doc, v)).collect()
    });
    let report = SweepReport { problem: base.name.clone(), param: param.to_string(), entries };
    std::fs::create_dir_all(&base.outputs.dir).map_err(|e| CliError::io(&base.outputs.dir, e))?;
    let path = base.outputs.dir.join("sweep.json");
    std::fs::write(&path, serde_json::to_string_pretty(&report).expect("sweep reports serialize"))
        .map_err(|e| CliError::io(&path, e))?;
    Ok(report)
}

/// Input paths were resolved relative to the problem file when `base` was
/// loaded; keep that resolution unless the swept parameter changed them.
fn variant_initial(base: &ProblemDocument, doc: &ProblemDocument) -> crate::problem::InitialShape {
    use crate::problem::InitialShape::{Gauge, Polygon};
    match (&base.initial, &doc.initial) {
        (Polygon { path: a }, Polygon { path: b }) if a.ends_with(b) => base.initial.clone(),
        (Gauge { path: a }, Gauge { path: b }) if a.ends_with(b) => base.initial.clone(),
        _ => doc.initial.clone(),
    }
}

fn run_entry(doc: &ProblemDocument, value: &str) -> SweepEntry {
    let mut entry = SweepEntry {
        value: value.to_string(),
        output_dir: doc.outputs.dir.clone(),
        exit_code: 0,
        status: None,
        objective: None,
        verdict: None,
        inside_atoms: None,
        mu_eq: None,
        error: None,
    };
    let outcome = run_problem(doc).and_then(|mut o| write_outputs(&mut o).map(|_| o));
    match outcome {
        Ok(o) => {
            let r = &o.report;
            entry.exit_code = r.exit_code;
            entry.error = r.error.clone();
            if let Some(s) = r.result.value() {
                entry.status = Some(s.status);
                entry.objective = Some(s.objective);
            }
            if let Some(v) = r.verdict() {
                entry.verdict = Some(v.kind);
                entry.inside_atoms = Some(v.inside_atom_count());
            }
            entry.mu_eq = r.kkt.value().map(|k| k.multipliers.mu_eq);
        }
        Err(e) => {
            entry.exit_code = e.exit_code();
            entry.error = Some(e.to_string());
        }
    }
    entry
}
