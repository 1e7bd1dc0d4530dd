use std::f64::consts::PI;
use std::sync::Arc;

use super::mesh::{mesh_convex, Mesh};
use super::sparse::{dot, pcg, CsrMatrix, Preconditioner};
use super::{PdeOptions, SourceField, TraceMethod};
use crate::body::GaugeBody;
use crate::error::{Error, Result};

/// Area and barycentric-coordinate gradients of one triangle.
#[derive(Debug, Clone, Copy)]
pub(crate) struct TriGeom {
    pub area: f64,
    pub grads: [[f64; 2]; 3],
}

pub(crate) fn tri_geom(mesh: &Mesh, t: &[usize; 3]) -> TriGeom {
    let [p0, p1, p2] = t.map(|i| mesh.vertices[i]);
    let two_a = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p1[1] - p0[1]) * (p2[0] - p0[0]);
    let inv = 1.0 / two_a;
    TriGeom {
        area: 0.5 * two_a,
        grads: [
            [(p1[1] - p2[1]) * inv, (p2[0] - p1[0]) * inv],
            [(p2[1] - p0[1]) * inv, (p0[0] - p2[0]) * inv],
            [(p0[1] - p1[1]) * inv, (p1[0] - p0[0]) * inv],
        ],
    }
}

pub(crate) fn centroid(mesh: &Mesh, t: &[usize; 3]) -> [f64; 2] {
    let [a, b, c] = t.map(|i| mesh.vertices[i]);
    [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
}

/// Piecewise constant gradient of a nodal field on triangle `t`.
pub(crate) fn tri_gradient(g: &TriGeom, t: &[usize; 3], values: &[f64]) -> [f64; 2] {
    let mut out = [0.0; 2];
    for k in 0..3 {
        out[0] += values[t[k]] * g.grads[k][0];
        out[1] += values[t[k]] * g.grads[k][1];
    }
    out
}

struct System {
    stiffness: CsrMatrix,
    mass: CsrMatrix,
}

/// Stiffness and consistent mass matrices restricted to interior vertices.
fn assemble(mesh: &Mesh) -> System {
    let ni = mesh.num_interior;
    let mut k = Vec::with_capacity(9 * mesh.triangles.len());
    let mut m = Vec::with_capacity(9 * mesh.triangles.len());
    for t in &mesh.triangles {
        let g = tri_geom(mesh, t);
        for a in 0..3 {
            if t[a] >= ni {
                continue;
            }
            for b in 0..3 {
                if t[b] >= ni {
                    continue;
                }
                let kab = g.area * (g.grads[a][0] * g.grads[b][0] + g.grads[a][1] * g.grads[b][1]);
                let mab = g.area / 12.0 * if a == b { 2.0 } else { 1.0 };
                k.push((t[a], t[b], kab));
                m.push((t[a], t[b], mab));
            }
        }
    }
    System {
        stiffness: CsrMatrix::from_triplets(ni, k),
        mass: CsrMatrix::from_triplets(ni, m),
    }
}

/// Discrete solution of a Dirichlet problem on a mesh of `Omega_u`.
#[derive(Debug, Clone)]
pub struct FemSolution {
    pub mesh: Arc<Mesh>,
    /// Values at every vertex; zero on the boundary.
    pub nodal_values: Vec<f64>,
    /// `-1/2 int U f` (for an eigenfunction, `f = lambda U`).
    pub energy: f64,
    /// `-1/2 sum_T |grad U|_T^2 area(T)`.
    pub energy_from_gradient: f64,
    /// `|grad U|^2` on the boundary averaged over each grid node's angular window.
    pub boundary_grad_sq: Vec<f64>,
    /// Normal derivative at each boundary vertex (flux recovery), in
    /// counterclockwise order.
    pub boundary_flux: Vec<f64>,
    pub trace: TraceMethod,
}

impl FemSolution {
    /// `int U^2` with the consistent mass matrix.
    pub fn l2_norm_sq(&self) -> f64 {
        let mesh = &self.mesh;
        mesh.triangles
            .iter()
            .map(|t| {
                let g = tri_geom(mesh, t);
                let v = t.map(|i| self.nodal_values[i]);
                let s: f64 = v.iter().sum();
                g.area / 12.0 * (v.iter().map(|x| x * x).sum::<f64>() + s * s)
            })
            .sum()
    }
}

/// First Dirichlet eigenpair; the eigenfunction is positive with `int U^2 = 1`.
#[derive(Debug, Clone)]
pub struct EigenPair {
    pub lambda: f64,
    pub eigenfunction: FemSolution,
    pub iterations: usize,
}

/// Solves `-Delta U = f` in `Omega_u`, `U = 0` on the boundary, with meshes
/// refined until every edge is at most `target_h`.
pub fn dirichlet_energy(body: &GaugeBody, f: &SourceField, target_h: f64) -> Result<FemSolution> {
    dirichlet_energy_with(body, f, &PdeOptions::with_h(target_h))
}

pub fn dirichlet_energy_with(
    body: &GaugeBody,
    f: &SourceField,
    opts: &PdeOptions,
) -> Result<FemSolution> {
    let mesh = Arc::new(mesh_convex(body, opts.resolution)?);
    let ni = mesh.num_interior;
    let sys = assemble(&mesh);
    let mut load_all = vec![0.0; mesh.num_vertices()];
    for t in &mesh.triangles {
        let g = tri_geom(&mesh, t);
        let share = f.value(centroid(&mesh, t)) * g.area / 3.0;
        for &v in t {
            load_all[v] += share;
        }
    }
    let load = &load_all[..ni];
    let pre = Preconditioner::for_matrix(&sys.stiffness);
    let mut x = vec![0.0; ni];
    pcg(&sys.stiffness, load, &mut x, &pre, opts.cg_tol, 10 * ni + 100)?;
    let mut values = x;
    values.resize(mesh.num_vertices(), 0.0);
    let energy = -0.5 * dot(&values[..ni], load);
    finish(mesh, values, energy, &load_all, opts.trace)
}

/// Assembles the residual `(K U - F)_b` at each boundary vertex, builds the
/// boundary trace and the two energy expressions.
fn finish(
    mesh: Arc<Mesh>,
    values: Vec<f64>,
    energy: f64,
    load_all: &[f64],
    trace: TraceMethod,
) -> Result<FemSolution> {
    let ni = mesh.num_interior;
    let nb = mesh.num_vertices() - ni;
    let mut residual = vec![0.0; nb];
    let mut grad_energy = 0.0;
    for t in &mesh.triangles {
        let g = tri_geom(&mesh, t);
        let grad = tri_gradient(&g, t, &values);
        grad_energy += g.area * (grad[0] * grad[0] + grad[1] * grad[1]);
        for a in 0..3 {
            if t[a] >= ni {
                residual[t[a] - ni] +=
                    g.area * (grad[0] * g.grads[a][0] + grad[1] * g.grads[a][1]);
            }
        }
    }
    let boundary_flux: Vec<f64> = (0..nb)
        .map(|q| {
            let prev = (q + nb - 1) % nb;
            let next = (q + 1) % nb;
            let len = 0.5 * (edge_len(&mesh, ni + prev, ni + q) + edge_len(&mesh, ni + q, ni + next));
            (residual[q] - load_all[ni + q]) / len
        })
        .collect();

    let grid_n = mesh.boundary_map.len();
    let sub = nb / grid_n;
    let boundary_grad_sq: Vec<f64> = match trace {
        TraceMethod::FluxRecovery => {
            let sq: Vec<f64> = boundary_flux.iter().map(|x| x * x).collect();
            (0..grid_n)
                .map(|j| window_average(&sq, (j * sub) as f64, 0.5 * sub as f64, true))
                .collect()
        }
        TraceMethod::AdjacentTriangle => {
            let sq: Vec<f64> = mesh
                .boundary_edges
                .iter()
                .map(|e| {
                    let t = &mesh.triangles[e.triangle];
                    let g = tri_geom(&mesh, t);
                    let grad = tri_gradient(&g, t, &values);
                    grad[0] * grad[0] + grad[1] * grad[1]
                })
                .collect();
            (0..grid_n)
                .map(|j| window_average(&sq, (j * sub) as f64, 0.5 * sub as f64, false))
                .collect()
        }
    };
    if boundary_grad_sq.iter().any(|x: &f64| !x.is_finite()) || !energy.is_finite() {
        return Err(Error::NonFinite("finite element solution"));
    }
    Ok(FemSolution {
        mesh,
        nodal_values: values,
        energy,
        energy_from_gradient: -0.5 * grad_energy,
        boundary_grad_sq,
        boundary_flux,
        trace,
    })
}

fn edge_len(mesh: &Mesh, a: usize, b: usize) -> f64 {
    let (p, q) = (mesh.vertices[a], mesh.vertices[b]);
    (p[0] - q[0]).hypot(p[1] - q[1])
}

/// Mean over `[center - half, center + half]` of a periodic sequence viewed
/// either as a piecewise-linear function with nodes at the integers
/// (`linear`) or as a constant on each `[k, k + 1)`.
fn window_average(values: &[f64], center: f64, half: f64, linear: bool) -> f64 {
    let n = values.len() as isize;
    let at = |k: isize| values[k.rem_euclid(n) as usize];
    let (lo, hi) = (center - half, center + half);
    let mut total = 0.0;
    let mut x = lo;
    while x < hi - 1e-12 {
        let k = x.floor();
        let next = (k + 1.0).min(hi);
        let ki = k as isize;
        total += if linear {
            let f = |y: f64| at(ki) + (at(ki + 1) - at(ki)) * (y - k);
            0.5 * (f(x) + f(next)) * (next - x)
        } else {
            at(ki) * (next - x)
        };
        x = next;
    }
    total / (hi - lo)
}

/// Smallest eigenvalue of `-Delta` with Dirichlet conditions on `Omega_u`.
pub fn lambda1(body: &GaugeBody, target_h: f64) -> Result<EigenPair> {
    lambda1_with(body, &PdeOptions::with_h(target_h), None)
}

/// Inverse iteration on `K x = lambda M x`; `warm` may hold interior values of
/// a previous eigenvector on the same mesh topology.
pub fn lambda1_with(body: &GaugeBody, opts: &PdeOptions, warm: Option<&[f64]>) -> Result<EigenPair> {
    let mesh = Arc::new(mesh_convex(body, opts.resolution)?);
    let ni = mesh.num_interior;
    let sys = assemble(&mesh);
    let pre = Preconditioner::for_matrix(&sys.stiffness);
    let mut x: Vec<f64> = match warm {
        Some(w) if w.len() >= ni && w[..ni].iter().any(|&v| v != 0.0) => w[..ni].to_vec(),
        _ => mesh.params[..ni]
            .iter()
            .map(|&(s, _)| (0.5 * PI * s).cos())
            .collect(),
    };
    let norm = sys.mass.form(&x, &x).sqrt();
    x.iter_mut().for_each(|v| *v /= norm);
    // Rayleigh quotient of the starting vector seeds the CG initial guess.
    let mut lambda = sys.stiffness.form(&x, &x);
    let mut change = f64::INFINITY;
    for it in 1..=opts.eigen_max_iter {
        let rhs = sys.mass.mul_vec(&x);
        let mut y: Vec<f64> = x.iter().map(|v| v / lambda).collect();
        pcg(&sys.stiffness, &rhs, &mut y, &pre, opts.cg_tol, 10 * ni + 100)?;
        let my = sys.mass.mul_vec(&y);
        let norm = dot(&y, &my).sqrt();
        y.iter_mut().for_each(|v| *v /= norm);
        let next = sys.stiffness.form(&y, &y);
        change = (next - lambda).abs() / next.abs();
        lambda = next;
        x = y;
        if change <= opts.eigen_tol {
            if x.iter().sum::<f64>() < 0.0 {
                x.iter_mut().for_each(|v| *v = -*v);
            }
            let mut values = x;
            values.resize(mesh.num_vertices(), 0.0);
            let load_all: Vec<f64> = {
                // Consistent load of f = lambda U, including boundary rows.
                let mut l = vec![0.0; mesh.num_vertices()];
                for t in &mesh.triangles {
                    let g = tri_geom(&mesh, t);
                    let v = t.map(|i| values[i]);
                    let s: f64 = v.iter().sum();
                    for a in 0..3 {
                        l[t[a]] += lambda * g.area / 12.0 * (v[a] + s);
                    }
                }
                l
            };
            let energy = -0.5 * lambda;
            let eigenfunction = finish(mesh, values, energy, &load_all, opts.trace)?;
            return Ok(EigenPair { lambda, eigenfunction, iterations: it });
        }
    }
    Err(Error::EigenNotConverged {
        iterations: opts.eigen_max_iter,
        residual: change,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pde::MeshResolution;
    use approx::assert_relative_eq;

    const J01_SQ: f64 = 5.783185962946784;

    #[test]
    fn disk_torsion() {
        let disk = GaugeBody::disk(64, 1.0).unwrap();
        let sol = dirichlet_energy(&disk, &SourceField::default(), 0.05).unwrap();
        assert!((sol.energy + PI / 16.0).abs() < 2e-3, "energy {}", sol.energy);
        assert_relative_eq!(sol.energy, sol.energy_from_gradient, max_relative = 1e-8);
        for v in sol.mesh.boundary_vertices() {
            assert_eq!(sol.nodal_values[v], 0.0);
        }
        // |grad U| = r/2 = 1/2 on the unit circle.
        for &g in &sol.boundary_grad_sq {
            assert!((g - 0.25).abs() < 0.01, "trace {g}");
        }
    }

    #[test]
    fn disk_eigenvalue() {
        let disk = GaugeBody::disk(64, 1.0).unwrap();
        let pair = lambda1(&disk, 0.05).unwrap();
        assert!((pair.lambda / J01_SQ - 1.0).abs() < 5e-3, "lambda {}", pair.lambda);
        assert_relative_eq!(pair.eigenfunction.l2_norm_sq(), 1.0, epsilon = 1e-8);
        let ni = pair.eigenfunction.mesh.num_interior;
        assert!(pair.eigenfunction.nodal_values[..ni].iter().all(|&v| v > 0.0));
        assert_relative_eq!(
            pair.eigenfunction.energy,
            pair.eigenfunction.energy_from_gradient,
            max_relative = 1e-8
        );
    }

    #[test]
    fn adjacent_triangle_trace_is_close() {
        let disk = GaugeBody::disk(64, 1.0).unwrap();
        let opts = PdeOptions {
            resolution: MeshResolution::Target(0.05),
            trace: TraceMethod::AdjacentTriangle,
            ..PdeOptions::default()
        };
        let sol = dirichlet_energy_with(&disk, &SourceField::default(), &opts).unwrap();
        for &g in &sol.boundary_grad_sq {
            assert!((g - 0.25).abs() < 0.03, "trace {g}");
        }
    }

    #[test]
    fn window_average_of_linear_data() {
        let v: Vec<f64> = vec![0.0, 1.0, 2.0, 3.0, 2.0, 1.0];
        assert_relative_eq!(window_average(&v, 2.0, 0.5, true), 2.0, epsilon = 1e-12);
        assert_relative_eq!(window_average(&v, 3.0, 1.0, true), 2.5, epsilon = 1e-12);
        assert_relative_eq!(window_average(&v, 2.0, 1.0, false), 1.5, epsilon = 1e-12);
    }
}
