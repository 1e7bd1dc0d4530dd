use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use crate::body::{GaugeBody, PolygonBody};
use crate::error::{Error, Result};
use crate::periodic::{CurvatureMeasure, PeriodicField};

/// Gauge of a polygon, `u(theta) = max_i (n_i . e^{i theta}) / d_i` over the
/// edge lines `n_i . x = d_i`.
pub fn polygon_to_gauge(poly: &PolygonBody, n: usize) -> Result<GaugeBody> {
    let lines = edge_lines(poly.vertices());
    let u = PeriodicField::from_fn(n, |t| {
        let (c, s) = (t.cos(), t.sin());
        lines
            .iter()
            .map(|l| l[0] * c + l[1] * s)
            .fold(f64::NEG_INFINITY, f64::max)
    })?;
    GaugeBody::star_shaped(u)
}

/// Lines `a x + b y = 1` through each edge (origin is interior, so the
/// right-hand side can be normalized to one).
fn edge_lines(v: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let n = v.len();
    (0..n)
        .map(|i| {
            let a = v[i];
            let b = v[(i + 1) % n];
            let normal = [b[1] - a[1], a[0] - b[0]];
            let d = normal[0] * a[0] + normal[1] * a[1];
            [normal[0] / d, normal[1] / d]
        })
        .collect()
}

/// Builds the polygon whose vertices sit at the atoms of `measure`.
///
/// Each edge line is fitted to the grid nodes strictly between two
/// consecutive atoms (where `u = a cos + b sin`), and vertices are the
/// intersections of neighbouring lines. Edges with too few interior nodes
/// fall back to the interpolated boundary point at the atom angle.
pub fn gauge_to_polygon(body: &GaugeBody, measure: &CurvatureMeasure) -> Result<PolygonBody> {
    let atoms = &measure.atoms;
    if atoms.len() < 3 {
        return Err(Error::TooFewAtoms(atoms.len()));
    }
    let u = body.gauge();
    let n = u.len();
    let dt = u.dtheta();
    let k = atoms.len();
    let lines: Vec<Option<[f64; 2]>> = (0..k)
        .map(|i| {
            let start = atoms[i].0;
            let mut span = atoms[(i + 1) % k].0 - start;
            if span <= 0.0 {
                span += 2.0 * PI;
            }
            let nodes: Vec<usize> = (0..n)
                .filter(|&j| {
                    let rel = (j as f64 * dt - start).rem_euclid(2.0 * PI);
                    rel > 1.5 * dt && rel < span - 1.5 * dt
                })
                .collect();
            fit_line(u, &nodes)
        })
        .collect();
    let vertices: Vec<[f64; 2]> = (0..k)
        .map(|i| {
            let before = lines[(i + k - 1) % k];
            let after = lines[i];
            let fallback = || {
                let t = atoms[i].0;
                let r = 1.0 / body.interpolate(t);
                [r * t.cos(), r * t.sin()]
            };
            match (before, after) {
                (Some(l1), Some(l2)) => intersect(l1, l2).unwrap_or_else(fallback),
                _ => fallback(),
            }
        })
        .collect();
    PolygonBody::new(vertices)
}

fn fit_line(u: &PeriodicField, nodes: &[usize]) -> Option<[f64; 2]> {
    if nodes.len() < 2 {
        return None;
    }
    let (mut scc, mut scs, mut sss, mut scu, mut ssu) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &j in nodes {
        let t = u.theta(j);
        let (c, s) = (t.cos(), t.sin());
        let y = u.samples()[j];
        scc += c * c;
        scs += c * s;
        sss += s * s;
        scu += c * y;
        ssu += s * y;
    }
    let det = scc * sss - scs * scs;
    if det.abs() < 1e-14 * (scc * sss).max(1e-300) {
        return None;
    }
    Some([(scu * sss - ssu * scs) / det, (ssu * scc - scu * scs) / det])
}

fn intersect(l1: [f64; 2], l2: [f64; 2]) -> Option<[f64; 2]> {
    let det = l1[0] * l2[1] - l1[1] * l2[0];
    if det.abs() < 1e-12 {
        return None;
    }
    Some([(l2[1] - l1[1]) / det, (l1[0] - l2[0]) / det])
}

/// Writes `x,y` per line, counterclockwise.
pub fn write_polygon_csv(poly: &PolygonBody, path: &Path) -> Result<()> {
    let mut out = String::from("x,y\n");
    for v in poly.vertices() {
        writeln!(out, "{:.17e},{:.17e}", v[0], v[1]).expect("string write");
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Reads an `x,y` vertex list; a non-numeric first line is treated as a header.
pub fn read_polygon_csv(path: &Path) -> Result<PolygonBody> {
    let text = std::fs::read_to_string(path)?;
    let mut vertices = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 2 {
            return Err(Error::Parse(format!(
                "line {}: expected two comma-separated values",
                lineno + 1
            )));
        }
        match (fields[0].parse::<f64>(), fields[1].parse::<f64>()) {
            (Ok(x), Ok(y)) => vertices.push([x, y]),
            _ if vertices.is_empty() && lineno == 0 => continue,
            _ => {
                return Err(Error::Parse(format!(
                    "line {}: could not parse vertex coordinates",
                    lineno + 1
                )))
            }
        }
    }
    PolygonBody::new(vertices)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::body::area;
    use approx::assert_relative_eq;

    fn square() -> PolygonBody {
        PolygonBody::new(vec![[1.0, 1.0], [-1.0, 1.0], [-1.0, -1.0], [1.0, -1.0]]).unwrap()
    }

    #[test]
    fn square_gauge_values() {
        let g = polygon_to_gauge(&square(), 64).unwrap();
        assert_relative_eq!(g.gauge().samples()[0], 1.0, epsilon = 1e-14);
        assert_relative_eq!(g.gauge().samples()[8], 0.5f64.sqrt(), epsilon = 1e-14);
        let reference = GaugeBody::square(64, 1.0).unwrap();
        for (a, b) in g.gauge().samples().iter().zip(reference.gauge().samples()) {
            assert_relative_eq!(a, b, epsilon = 1e-14);
        }
    }

    #[test]
    fn polygon_gauge_area_matches_shoelace() {
        let poly = PolygonBody::new(vec![[1.2, -0.3], [0.9, 1.1], [-0.8, 0.7], [-1.0, -0.9]]).unwrap();
        let g = polygon_to_gauge(&poly, 512).unwrap();
        assert_relative_eq!(area(&g), poly.area(), max_relative = 1e-3);
    }

    #[test]
    fn polygon_roundtrip_through_atoms() {
        let poly = PolygonBody::regular(5, 1.0, 0.1).unwrap();
        let n = 256;
        let g = polygon_to_gauge(&poly, n).unwrap();
        let mut m = crate::periodic::curvature_measure(g.gauge());
        m.atoms = poly
            .vertices()
            .iter()
            .map(|v| (v[1].atan2(v[0]).rem_euclid(2.0 * PI), 1.0))
            .collect();
        m.atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let back = gauge_to_polygon(&g, &m).unwrap();
        let tol = 2.0 * g.dtheta() * poly.max_radius();
        let start = back
            .vertices()
            .iter()
            .position(|v| (v[0] - poly.vertices()[0][0]).hypot(v[1] - poly.vertices()[0][1]) < tol)
            .expect("first vertex recovered");
        for (i, v) in poly.vertices().iter().enumerate() {
            let w = back.vertices()[(start + i) % 5];
            assert!((v[0] - w[0]).hypot(v[1] - w[1]) <= tol);
        }
    }

    #[test]
    fn too_few_atoms() {
        let g = GaugeBody::disk(32, 1.0).unwrap();
        let m = crate::periodic::curvature_measure(g.gauge());
        assert_eq!(gauge_to_polygon(&g, &m), Err(Error::TooFewAtoms(0)));
    }

    #[test]
    fn csv_roundtrip() {
        let dir = std::env::temp_dir().join(format!("poly-csv-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("p.csv");
        let poly = PolygonBody::regular(7, 1.3, 0.2).unwrap();
        write_polygon_csv(&poly, &path).unwrap();
        let back = read_polygon_csv(&path).unwrap();
        assert_eq!(back, poly);
        std::fs::remove_dir_all(dir).ok();
    }
}
