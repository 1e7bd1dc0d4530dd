//! Structured triangulation of `Omega_u`.
//!
//! The body is fanned from the origin into `sectors` triangles whose outer
//! vertices sit at grid angles, and every fan triangle is refined uniformly
//! `level` times. Vertices live at polar parameters `(s, phi)`, mapped to
//! `s e^{i phi} / u_poly(phi)` where `u_poly` is the gauge of the polygon
//! through the sampled boundary points. Ring `i` (`0 <= i <= 2^level`) holds
//! `sectors * i` vertices; the outermost ring is the boundary.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::body::GaugeBody;
use crate::error::{Error, Result};

const MAX_LEVEL: u32 = 12;

/// Fan size and refinement depth of a mesh; fixing the plan fixes the
/// topology, so that meshes of nearby bodies differ only in coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeshPlan {
    pub sectors: usize,
    pub level: u32,
}

impl MeshPlan {
    pub fn rings(&self) -> usize {
        1 << self.level
    }

    pub fn boundary_vertices(&self) -> usize {
        self.sectors * self.rings()
    }

    pub fn num_vertices(&self) -> usize {
        let n = self.rings();
        1 + self.sectors * n * (n + 1) / 2
    }

    pub fn num_interior(&self) -> usize {
        let n = self.rings();
        1 + self.sectors * n * (n - 1) / 2
    }

    pub fn num_triangles(&self) -> usize {
        self.sectors * self.rings() * self.rings()
    }

    /// Coarsest admissible plan for a grid of `grid_n` nodes: sectors are
    /// `grid_n / 2^k` with the largest `k` keeping at least six sectors, and
    /// the level is `k` so that the boundary contains every grid angle.
    pub fn coarsest(grid_n: usize) -> Self {
        let mut sectors = grid_n;
        let mut level = 0;
        while sectors.is_multiple_of(2) && sectors / 2 >= 6 {
            sectors /= 2;
            level += 1;
        }
        Self { sectors, level }
    }

    pub fn compatible_with(&self, grid_n: usize) -> bool {
        self.boundary_vertices().is_multiple_of(grid_n) && self.level <= MAX_LEVEL
    }

    pub fn refined(&self) -> Self {
        Self {
            sectors: self.sectors,
            level: self.level + 1,
        }
    }
}

/// How the mesh for a body is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeshResolution {
    /// Refine until every edge is at most this long.
    Target(f64),
    /// Use exactly this topology.
    Plan(MeshPlan),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryEdge {
    pub a: usize,
    pub b: usize,
    /// Triangle adjacent to the edge.
    pub triangle: usize,
    /// Angular interval covered by the edge.
    pub theta_start: f64,
    pub theta_end: f64,
}

impl BoundaryEdge {
    pub fn theta_mid(&self) -> f64 {
        0.5 * (self.theta_start + self.theta_end)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mesh {
    pub vertices: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
    pub boundary_edges: Vec<BoundaryEdge>,
    /// Grid node `j` -> boundary vertex at angle `theta_j`.
    pub boundary_map: Vec<usize>,
    pub plan: MeshPlan,
    /// Polar parameters `(s, phi)` of every vertex.
    pub params: Vec<(f64, f64)>,
    /// Vertices `0..num_interior` are interior; the rest lie on the boundary.
    pub num_interior: usize,
}

fn ring_offset(sectors: usize, i: usize) -> usize {
    if i == 0 {
        0
    } else {
        1 + sectors * i * (i - 1) / 2
    }
}

fn global(sectors: usize, i: usize, q: usize) -> usize {
    if i == 0 {
        0
    } else {
        ring_offset(sectors, i) + q % (sectors * i)
    }
}

/// Builds the mesh for `body`, choosing the level from `resolution`.
pub fn mesh_convex(body: &GaugeBody, resolution: MeshResolution) -> Result<Mesh> {
    let plan = choose_plan(body, resolution)?;
    mesh_with_plan(body, plan)
}

pub fn choose_plan(body: &GaugeBody, resolution: MeshResolution) -> Result<MeshPlan> {
    match resolution {
        MeshResolution::Plan(plan) => {
            if !plan.compatible_with(body.len()) {
                return Err(Error::InvalidArgument(format!(
                    "mesh plan {plan:?} does not resolve a grid of {} nodes",
                    body.len()
                )));
            }
            Ok(plan)
        }
        MeshResolution::Target(h) => {
            if !(h > 0.0) {
                return Err(Error::InvalidArgument(format!("target_h must be positive, got {h}")));
            }
            let mut plan = MeshPlan::coarsest(body.len());
            let e0 = mesh_with_plan(body, plan)?.max_edge();
            if e0 > h {
                plan.level += (e0 / h).log2().ceil().max(0.0) as u32;
            }
            loop {
                if plan.level > MAX_LEVEL {
                    return Err(Error::InvalidArgument(format!(
                        "target_h = {h} needs more than {MAX_LEVEL} refinement levels"
                    )));
                }
                if mesh_with_plan(body, plan)?.max_edge() <= h {
                    return Ok(plan);
                }
                plan.level += 1;
            }
        }
    }
}

pub fn mesh_with_plan(body: &GaugeBody, plan: MeshPlan) -> Result<Mesh> {
    if !plan.compatible_with(body.len()) {
        return Err(Error::InvalidArgument(format!(
            "mesh plan {plan:?} does not resolve a grid of {} nodes",
            body.len()
        )));
    }
    let m = plan.sectors;
    let n = plan.rings();
    let mut params = Vec::with_capacity(plan.num_vertices());
    params.push((0.0, 0.0));
    for i in 1..=n {
        let count = m * i;
        for q in 0..count {
            params.push((i as f64 / n as f64, 2.0 * PI * q as f64 / count as f64));
        }
    }
    let vertices = params
        .iter()
        .map(|&(s, phi)| {
            let r = s / body.interpolate(phi);
            [r * phi.cos(), r * phi.sin()]
        })
        .collect();

    let mut triangles = Vec::with_capacity(plan.num_triangles());
    let mut boundary_edges = Vec::with_capacity(plan.boundary_vertices());
    for k in 0..m {
        for i in 1..=n {
            let outer = |mm: usize| global(m, i, k * i + mm);
            let inner = |mm: usize| global(m, i - 1, k * (i - 1) + mm);
            for mm in 0..i {
                if i == n {
                    let q = k * i + mm;
                    let total = m * n;
                    boundary_edges.push(BoundaryEdge {
                        a: outer(mm),
                        b: outer(mm + 1),
                        triangle: triangles.len(),
                        theta_start: 2.0 * PI * q as f64 / total as f64,
                        theta_end: 2.0 * PI * (q + 1) as f64 / total as f64,
                    });
                }
                triangles.push([outer(mm), outer(mm + 1), inner(mm)]);
            }
            for mm in 0..i - 1 {
                triangles.push([inner(mm), outer(mm + 1), inner(mm + 1)]);
            }
        }
    }
    let stride = plan.boundary_vertices() / body.len();
    let boundary_map = (0..body.len())
        .map(|j| global(m, n, j * stride))
        .collect();
    let mesh = Mesh {
        vertices,
        triangles,
        boundary_edges,
        boundary_map,
        plan,
        params,
        num_interior: plan.num_interior(),
    };
    if let Some(t) = mesh.triangles.iter().position(|t| mesh.signed_area(t) <= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "triangle {t} is inverted; the body is not star-shaped enough for this mesh"
        )));
    }
    Ok(mesh)
}

impl Mesh {
    pub fn signed_area(&self, t: &[usize; 3]) -> f64 {
        let [a, b, c] = t.map(|i| self.vertices[i]);
        0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
    }

    pub fn area(&self) -> f64 {
        self.triangles.iter().map(|t| self.signed_area(t)).sum()
    }

    pub fn max_edge(&self) -> f64 {
        self.triangles
            .iter()
            .flat_map(|t| {
                let p = t.map(|i| self.vertices[i]);
                [(p[0], p[1]), (p[1], p[2]), (p[2], p[0])]
            })
            .map(|(a, b)| (a[0] - b[0]).hypot(a[1] - b[1]))
            .fold(0.0, f64::max)
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_boundary(&self, v: usize) -> bool {
        v >= self.num_interior
    }

    /// Boundary vertices in counterclockwise order.
    pub fn boundary_vertices(&self) -> std::ops::Range<usize> {
        self.num_interior..self.vertices.len()
    }

    /// Writes the mesh in OFF format (`OFF`, counts, coordinates with z = 0,
    /// then `3 a b c` per triangle).
    pub fn to_off(&self) -> String {
        let mut out = String::new();
        writeln!(out, "OFF").unwrap();
        writeln!(out, "{} {} 0", self.vertices.len(), self.triangles.len()).unwrap();
        for v in &self.vertices {
            writeln!(out, "{:.12} {:.12} 0", v[0], v[1]).unwrap();
        }
        for t in &self.triangles {
            writeln!(out, "3 {} {} {}", t[0], t[1], t[2]).unwrap();
        }
        out
    }

    pub fn write_off(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_off())?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn plan_counts() {
        let p = MeshPlan::coarsest(64);
        assert_eq!(p, MeshPlan { sectors: 8, level: 3 });
        assert_eq!(MeshPlan::coarsest(96).sectors, 6);
        assert_eq!(MeshPlan::coarsest(10), MeshPlan { sectors: 10, level: 0 });
        let body = GaugeBody::disk(64, 1.0).unwrap();
        let mesh = mesh_with_plan(&body, p).unwrap();
        assert_eq!(mesh.vertices.len(), p.num_vertices());
        assert_eq!(mesh.triangles.len(), p.num_triangles());
        assert_eq!(mesh.boundary_edges.len(), p.boundary_vertices());
        assert_eq!(mesh.boundary_map.len(), 64);
    }

    #[test]
    fn boundary_vertices_on_gauge_rays() {
        let body = GaugeBody::square(64, 1.0).unwrap();
        let mesh = mesh_convex(&body, MeshResolution::Target(0.2)).unwrap();
        for (j, &v) in mesh.boundary_map.iter().enumerate() {
            let p = mesh.vertices[v];
            let q = body.boundary_point(j);
            assert!((p[0] - q[0]).abs() < 1e-12 && (p[1] - q[1]).abs() < 1e-12);
        }
        assert!(mesh.max_edge() <= 0.2);
    }

    #[test]
    fn disk_and_square_areas() {
        let disk = GaugeBody::disk(256, 1.0).unwrap();
        let mesh = mesh_convex(&disk, MeshResolution::Target(0.1)).unwrap();
        assert!((mesh.area() - PI).abs() < 1e-3);
        let sq = GaugeBody::square(256, 1.0).unwrap();
        let mesh = mesh_convex(&sq, MeshResolution::Target(0.1)).unwrap();
        assert_relative_eq!(mesh.area(), 4.0, epsilon = 1e-12);
    }

    #[test]
    fn refinement_halves_edges() {
        let disk = GaugeBody::disk(64, 1.0).unwrap();
        let p = choose_plan(&disk, MeshResolution::Target(0.1)).unwrap();
        let e0 = mesh_with_plan(&disk, p).unwrap().max_edge();
        let e1 = mesh_with_plan(&disk, p.refined()).unwrap().max_edge();
        assert_relative_eq!(e1 / e0, 0.5, max_relative = 0.05);
    }

    #[test]
    fn rejects_incompatible_plan() {
        let body = GaugeBody::disk(64, 1.0).unwrap();
        let bad = MeshPlan { sectors: 8, level: 2 };
        assert!(mesh_with_plan(&body, bad).is_err());
    }

    #[test]
    fn off_export_header() {
        let body = GaugeBody::disk(16, 1.0).unwrap();
        let mesh = mesh_with_plan(&body, MeshPlan::coarsest(16)).unwrap();
        let off = mesh.to_off();
        let mut lines = off.lines();
        assert_eq!(lines.next(), Some("OFF"));
        assert_eq!(
            lines.next().unwrap(),
            format!("{} {} 0", mesh.vertices.len(), mesh.triangles.len())
        );
    }
}
