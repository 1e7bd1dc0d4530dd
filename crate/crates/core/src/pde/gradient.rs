//! Shape gradients of the Dirichlet energy and of `lambda_1` as nodal
//! fields `g` with `dJ(u)[v] = dtheta * sum_j g_j v_j`.
//!
//! Two routes are offered. The Hadamard route evaluates the boundary
//! integrals `int 1/2 |grad U|^2 v / u^3` and `int |grad U|^2 v / u^3` with the
//! reconstructed trace. The discrete route differentiates the finite element
//! functional itself with respect to the vertex coordinates, which move with
//! `u` because every vertex sits at `s e^{i phi} / u_poly(phi)`.

use super::fem::{centroid, dirichlet_energy, lambda1, tri_geom, tri_gradient, EigenPair, FemSolution};
use super::mesh::Mesh;
use super::SourceField;
use crate::body::{interpolation_weights, GaugeBody};
use crate::error::{Error, Result};
use crate::periodic::PeriodicField;

/// Hadamard gradient `1/2 |grad U|^2 / u^3` of the Dirichlet energy.
pub fn energy_shape_gradient(body: &GaugeBody, f: &SourceField, target_h: f64) -> Result<PeriodicField> {
    let sol = dirichlet_energy(body, f, target_h)?;
    energy_hadamard_gradient(body, &sol)
}

/// Hadamard gradient `|grad U|^2 / u^3` of `lambda_1`.
pub fn lambda1_shape_gradient(body: &GaugeBody, target_h: f64) -> Result<PeriodicField> {
    let pair = lambda1(body, target_h)?;
    lambda1_hadamard_gradient(body, &pair)
}

pub fn energy_hadamard_gradient(body: &GaugeBody, sol: &FemSolution) -> Result<PeriodicField> {
    hadamard(body, sol, 0.5)
}

pub fn lambda1_hadamard_gradient(body: &GaugeBody, pair: &EigenPair) -> Result<PeriodicField> {
    hadamard(body, &pair.eigenfunction, 1.0)
}

fn hadamard(body: &GaugeBody, sol: &FemSolution, factor: f64) -> Result<PeriodicField> {
    if sol.boundary_grad_sq.len() != body.len() {
        return Err(Error::ResolutionMismatch {
            fine: sol.boundary_grad_sq.len(),
            expected: body.len(),
        });
    }
    let g = body
        .gauge()
        .samples()
        .iter()
        .zip(&sol.boundary_grad_sq)
        .map(|(u, t)| factor * t / (u * u * u))
        .collect();
    PeriodicField::new(g).map_err(|_| Error::NonFinite("Hadamard shape gradient"))
}

/// Exact derivative of the discrete energy `-1/2 F^T U` with the mesh topology
/// of `sol` held fixed.
pub fn energy_discrete_gradient(
    body: &GaugeBody,
    f: &SourceField,
    sol: &FemSolution,
) -> Result<PeriodicField> {
    let mesh = &sol.mesh;
    let u = &sol.nodal_values;
    let mut dx = vec![[0.0; 2]; mesh.num_vertices()];
    for t in &mesh.triangles {
        let g = tri_geom(mesh, t);
        let grad = tri_gradient(&g, t, u);
        let half_sq = 0.5 * (grad[0] * grad[0] + grad[1] * grad[1]);
        let c = centroid(mesh, t);
        let fc = f.value(c);
        let df = f.gradient(c);
        let mean_u = (u[t[0]] + u[t[1]] + u[t[2]]) / 3.0;
        for a in 0..3 {
            let gl = g.grads[a];
            let dot = grad[0] * gl[0] + grad[1] * gl[1];
            for k in 0..2 {
                dx[t[a]][k] += g.area * (half_sq * gl[k] - dot * grad[k])
                    - mean_u * (fc * g.area * gl[k] + g.area * df[k] / 3.0);
            }
        }
    }
    chain_to_gauge(body, mesh, &dx)
}

/// Exact derivative of the discrete eigenvalue, `U^T dK U - lambda U^T dM U`
/// with `U^T M U = 1`.
pub fn lambda1_discrete_gradient(body: &GaugeBody, pair: &EigenPair) -> Result<PeriodicField> {
    let sol = &pair.eigenfunction;
    let mesh = &sol.mesh;
    let u = &sol.nodal_values;
    let lambda = pair.lambda;
    let mut dx = vec![[0.0; 2]; mesh.num_vertices()];
    for t in &mesh.triangles {
        let g = tri_geom(mesh, t);
        let grad = tri_gradient(&g, t, u);
        let half_sq = 0.5 * (grad[0] * grad[0] + grad[1] * grad[1]);
        let v = t.map(|i| u[i]);
        let s: f64 = v.iter().sum();
        // U^T M_T U divided by the area; M_T scales with the area only.
        let mass_density = (v.iter().map(|x| x * x).sum::<f64>() + s * s) / 12.0;
        for a in 0..3 {
            let gl = g.grads[a];
            let dot = grad[0] * gl[0] + grad[1] * gl[1];
            for k in 0..2 {
                dx[t[a]][k] += 2.0 * g.area * (half_sq * gl[k] - dot * grad[k])
                    - lambda * mass_density * g.area * gl[k];
            }
        }
    }
    chain_to_gauge(body, mesh, &dx)
}

/// Pulls vertex-coordinate derivatives back to the gauge samples:
/// `dx_v / du_j = -x_v w_j / u_poly(phi_v)` with `w_j` the interpolation weight.
fn chain_to_gauge(body: &GaugeBody, mesh: &Mesh, dx: &[[f64; 2]]) -> Result<PeriodicField> {
    let n = body.len();
    if !mesh.plan.compatible_with(n) {
        return Err(Error::ResolutionMismatch {
            fine: mesh.boundary_map.len(),
            expected: n,
        });
    }
    let samples = body.gauge().samples();
    let mut g = vec![0.0; n];
    for (v, &(s, phi)) in mesh.params.iter().enumerate() {
        if s == 0.0 {
            continue;
        }
        let (j, wa, wb) = interpolation_weights(n, phi);
        let jn = (j + 1) % n;
        let u_poly = wa * samples[j] + wb * samples[jn];
        let x = mesh.vertices[v];
        let proj = (dx[v][0] * x[0] + dx[v][1] * x[1]) / u_poly;
        g[j] -= proj * wa;
        g[jn] -= proj * wb;
    }
    let dt = body.dtheta();
    PeriodicField::new(g.into_iter().map(|x| x / dt).collect())
        .map_err(|_| Error::NonFinite("discrete shape gradient"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pde::{dirichlet_energy_with, lambda1_with, MeshResolution, PdeOptions};
    use std::f64::consts::PI;

    const J01_SQ: f64 = 5.783185962946784;

    fn bumpy(n: usize) -> GaugeBody {
        GaugeBody::star_shaped(
            PeriodicField::from_fn(n, |t| 1.0 + 0.08 * (2.0 * t).cos() + 0.03 * (3.0 * t + 0.4).sin())
                .unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn disk_dilation_derivatives() {
        let disk = GaugeBody::disk(64, 1.0).unwrap();
        let one = PeriodicField::constant(64, 1.0).unwrap();
        let ge = energy_shape_gradient(&disk, &SourceField::default(), 0.05).unwrap();
        assert!((ge.dot(&one) / (PI / 4.0) - 1.0).abs() < 0.02);
        let gl = lambda1_shape_gradient(&disk, 0.05).unwrap();
        assert!((gl.dot(&one) / (2.0 * J01_SQ) - 1.0).abs() < 0.02);
        let cos = PeriodicField::from_fn(64, f64::cos).unwrap();
        assert!(ge.dot(&cos).abs() < 1e-8);
    }

    #[test]
    fn discrete_gradients_match_finite_differences() {
        let n = 64;
        let body = bumpy(n);
        let opts = PdeOptions::with_h(0.15);
        let plan = crate::pde::choose_plan(&body, opts.resolution).unwrap();
        let fixed = PdeOptions { resolution: MeshResolution::Plan(plan), ..opts };
        let f = SourceField::Affine { c0: 1.0, cx: 0.3, cy: -0.2 };
        let v = PeriodicField::from_fn(n, |t| 0.5 + (t + 0.3).cos() - 0.4 * (2.0 * t).sin()).unwrap();
        let h = 1e-5;
        let plus = GaugeBody::star_shaped(body.gauge().axpy(h, &v).unwrap()).unwrap();
        let minus = GaugeBody::star_shaped(body.gauge().axpy(-h, &v).unwrap()).unwrap();

        let sol = dirichlet_energy_with(&body, &f, &fixed).unwrap();
        let g = energy_discrete_gradient(&body, &f, &sol).unwrap();
        let ep = dirichlet_energy_with(&plus, &f, &fixed).unwrap().energy;
        let em = dirichlet_energy_with(&minus, &f, &fixed).unwrap().energy;
        let fd = (ep - em) / (2.0 * h);
        assert!((g.dot(&v) - fd).abs() <= 1e-6 * fd.abs().max(1e-3), "{} vs {fd}", g.dot(&v));

        let pair = lambda1_with(&body, &fixed, None).unwrap();
        let g = lambda1_discrete_gradient(&body, &pair).unwrap();
        let lp = lambda1_with(&plus, &fixed, None).unwrap().lambda;
        let lm = lambda1_with(&minus, &fixed, None).unwrap().lambda;
        let fd = (lp - lm) / (2.0 * h);
        assert!((g.dot(&v) - fd).abs() <= 1e-5 * fd.abs(), "{} vs {fd}", g.dot(&v));
    }
}
