use serde::{Deserialize, Serialize};

use crate::body::GaugeBody;
use crate::error::{Error, Result};
use crate::periodic::{curvature_measure, CurvatureMeasure};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
pub struct ClassifyConfig {
    /// Absolute atom threshold as a fraction of the total curvature mass.
    pub tau_abs: f64,
    /// Relative atom threshold as a multiple of the median node mass.
    pub kappa: f64,
    /// Minimum share of the inside mass carried by atoms for a polygon.
    pub frac_min: f64,
    pub min_atoms: usize,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        Self { tau_abs: 0.05, kappa: 10.0, frac_min: 0.7, min_atoms: 3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictKind {
    Smooth,
    Polygonal,
    Mixed,
    Inconclusive,
}

/// A merged cluster of atom nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub theta: f64,
    pub mass: f64,
    /// First grid node of the cluster.
    pub first_node: usize,
    /// Number of grid nodes merged into this atom.
    pub width: usize,
    pub inside: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularityVerdict {
    pub kind: VerdictKind,
    /// Atoms on the coarse grid, including those outside the inside set.
    pub atoms: Vec<Atom>,
    pub atoms_fine: Vec<Atom>,
    /// Largest non-atom node mass per unit angle on the inside set.
    pub max_density: f64,
    /// Share of the inside curvature mass carried by inside atoms.
    pub atom_fraction: f64,
    /// Inside atom count equal at both resolutions.
    pub stability: bool,
    /// `max(tau_abs * total, kappa * median)` on the coarse grid.
    pub threshold: f64,
    pub reason: String,
}

impl Atom {
    /// Grid nodes of the cluster on a grid of `n` nodes.
    pub fn nodes(&self, n: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.width).map(move |k| (self.first_node + k) % n)
    }
}

impl RegularityVerdict {
    pub fn inside_atoms(&self) -> impl Iterator<Item = &Atom> {
        self.atoms.iter().filter(|a| a.inside)
    }

    pub fn inside_atom_count(&self) -> usize {
        self.inside_atoms().count()
    }

    /// Smallest angular distance between consecutive inside atoms.
    pub fn min_atom_gap(&self) -> Option<f64> {
        let mut th: Vec<f64> = self.inside_atoms().map(|a| a.theta).collect();
        if th.len() < 2 {
            return None;
        }
        th.sort_by(f64::total_cmp);
        let tau = std::f64::consts::TAU;
        let wrap = th[0] + tau - th[th.len() - 1];
        Some(th.windows(2).map(|w| w[1] - w[0]).fold(wrap, f64::min))
    }
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// A node is an atom node when its mass clears both `kappa * median` and
/// `tau_abs * total`, or when it carries at least a hundredth of the latter and
/// together with its heavier neighbour clears it. The pair window catches
/// corners that fall between two grid angles and split their mass over both
/// nodes.
fn atom_flags(m: &CurvatureMeasure, config: &ClassifyConfig) -> (Vec<bool>, f64) {
    let n = m.grid_size();
    let x = &m.node_masses;
    let abs_thr = config.tau_abs * m.total_mass;
    let rel_thr = config.kappa * median(x);
    let flags = (0..n)
        .map(|j| {
            let pair = x[j] + x[(j + n - 1) % n].max(x[(j + 1) % n]);
            x[j] >= rel_thr && (x[j] >= abs_thr || (x[j] >= 0.01 * abs_thr && pair >= abs_thr))
        })
        .collect();
    (flags, abs_thr.max(rel_thr))
}

/// Node flags and merged atoms of `m` under `config`.
fn find_atoms(m: &CurvatureMeasure, inside: &[bool], config: &ClassifyConfig) -> (Vec<bool>, Vec<Atom>, f64) {
    let n = m.grid_size();
    let dt = m.dtheta();
    let (flag, thr) = atom_flags(m, config);
    let mut atoms = Vec::new();
    if flag.iter().all(|&f| f) {
        return (flag, atoms, thr);
    }
    // Start scanning just after a non-atom node so no cluster wraps around.
    let start = (0..n).find(|&j| !flag[j]).expect("some node is not an atom");
    let mut k = 1;
    while k <= n {
        let j = (start + k) % n;
        if !flag[j] {
            k += 1;
            continue;
        }
        let mut mass = 0.0;
        let mut moment = 0.0;
        let mut width = 0;
        let mut any_inside = false;
        let first_node = j;
        while k <= n && flag[(start + k) % n] {
            let idx = (start + k) % n;
            // Unwrapped angle keeps the centroid of a cluster across 0 correct.
            let theta = (start + k) as f64 * dt;
            mass += m.node_masses[idx];
            moment += m.node_masses[idx] * theta;
            width += 1;
            any_inside |= inside[idx];
            k += 1;
        }
        let theta = (moment / mass).rem_euclid(std::f64::consts::TAU);
        atoms.push(Atom { theta, mass, first_node, width, inside: any_inside });
    }
    atoms.sort_by(|a, b| a.theta.total_cmp(&b.theta));
    (flag, atoms, thr)
}

/// Expands an inside mask to a grid `factor` times finer; new nodes inherit
/// the mask only when both coarse neighbours are inside.
fn refine_mask(inside: &[bool], factor: usize) -> Vec<bool> {
    let n = inside.len();
    (0..n * factor)
        .map(|i| {
            let j = i / factor;
            if i % factor == 0 {
                inside[j]
            } else {
                inside[j] && inside[(j + 1) % n]
            }
        })
        .collect()
}

/// Fills `atoms` (`(theta, mass)`) and `density` of a measure.
pub fn detect_atoms(measure: &CurvatureMeasure, config: &ClassifyConfig) -> CurvatureMeasure {
    let inside = vec![true; measure.grid_size()];
    let (flag, atoms, _) = find_atoms(measure, &inside, config);
    let dt = measure.dtheta();
    CurvatureMeasure {
        atoms: atoms.iter().map(|a| (a.theta, a.mass)).collect(),
        density: measure
            .node_masses
            .iter()
            .zip(&flag)
            .map(|(&x, &f)| if f { 0.0 } else { x / dt })
            .collect(),
        ..measure.clone()
    }
}

/// Smooth/polygonal verdict from the curvature measure of one body at `N`
/// and `2N` nodes, restricted to the nodes where `inside` holds.
pub fn classify(
    measure: &CurvatureMeasure,
    measure_fine: &CurvatureMeasure,
    inside: &[bool],
    config: &ClassifyConfig,
) -> Result<RegularityVerdict> {
    let n = measure.grid_size();
    if measure_fine.grid_size() != 2 * n {
        return Err(Error::ResolutionMismatch { fine: measure_fine.grid_size(), expected: 2 * n });
    }
    if inside.len() != n {
        return Err(Error::ResolutionMismatch { fine: inside.len(), expected: n });
    }
    let inside_fine = refine_mask(inside, 2);
    let (flag, atoms, threshold) = find_atoms(measure, inside, config);
    let (_, atoms_fine, _) = find_atoms(measure_fine, &inside_fine, config);

    let dt = measure.dtheta();
    let inside_mass: f64 = (0..n).filter(|&j| inside[j]).map(|j| measure.node_masses[j].max(0.0)).sum();
    // Node-level sum, so atoms straddling the edge of the inside set only
    // contribute their inside nodes.
    let atom_mass = (0..n)
        .filter(|&j| inside[j] && flag[j])
        .fold(0.0, |acc, j| acc + measure.node_masses[j].max(0.0));
    let atom_fraction = if inside_mass > 0.0 { atom_mass / inside_mass } else { 0.0 };
    let max_density = (0..n)
        .filter(|&j| inside[j] && !flag[j])
        .map(|j| measure.node_masses[j] / dt)
        .fold(0.0, f64::max);
    let count = atoms.iter().filter(|a| a.inside).count();
    let count_fine = atoms_fine.iter().filter(|a| a.inside).count();
    let stability = count == count_fine;

    let (kind, reason) = if !inside.iter().any(|&b| b) {
        (VerdictKind::Inconclusive, "inside set is empty".to_string())
    } else if count == 0 && count_fine == 0 {
        (VerdictKind::Smooth, "no atoms on the inside set at either resolution".to_string())
    } else if (count == 0) != (count_fine == 0) {
        (
            VerdictKind::Inconclusive,
            format!("{count} atoms at N = {n} but {count_fine} at N = {}", 2 * n),
        )
    } else if count >= config.min_atoms && atom_fraction >= config.frac_min {
        (
            VerdictKind::Polygonal,
            format!("{count} atoms carry {:.1}% of the inside mass", 100.0 * atom_fraction),
        )
    } else {
        (
            VerdictKind::Mixed,
            format!("{count} atoms carry {:.1}% of the inside mass", 100.0 * atom_fraction),
        )
    };
    Ok(RegularityVerdict {
        kind,
        atoms,
        atoms_fine,
        max_density,
        atom_fraction,
        stability,
        threshold,
        reason,
    })
}

/// Classifies a body using its gauge at `N` and the polygonal resampling at
/// `2N`.
pub fn classify_body(body: &GaugeBody, inside: &[bool], config: &ClassifyConfig) -> Result<RegularityVerdict> {
    let fine = body.resample(2 * body.len())?;
    classify(
        &curvature_measure(body.gauge()),
        &curvature_measure(fine.gauge()),
        inside,
        config,
    )
}
