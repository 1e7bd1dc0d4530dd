//! Convex bodies represented by gauge functions, support functions and
//! vertex lists.

mod duality;
mod geometry;
mod polygon;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::config::DEFAULT_U_MIN;
use crate::error::{Error, Result};
use crate::periodic::{curvature_measure, PeriodicField};

pub use duality::{gauge_to_support, support_functionals, SupportFunctionals};
pub use geometry::{
    area, area_gradient, area_hessian_form, perimeter, perimeter_gradient,
    perimeter_hessian_form,
};
pub use polygon::{gauge_to_polygon, polygon_to_gauge, read_polygon_csv, write_polygon_csv};

/// Body `{ r e^{i theta} : r u(theta) < 1 }` given by its sampled gauge `u`.
///
/// Positivity (`min u >= u_min`) is always enforced. Convexity is checked by
/// [`GaugeBody::new`] but not by [`GaugeBody::star_shaped`], which is used for
/// finite-difference perturbations that may leave the convexity cone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaugeBody {
    u: PeriodicField,
}

impl GaugeBody {
    /// Convex body: positive gauge and nonnegative curvature node masses up
    /// to `tol_cone`.
    pub fn new(u: PeriodicField, u_min: f64, tol_cone: f64) -> Result<Self> {
        let body = Self::star_shaped_with(u, u_min)?;
        let worst = curvature_measure(&body.u).min_mass();
        if worst < -tol_cone {
            return Err(Error::InvalidArgument(format!(
                "gauge is not convex: min node mass of u''+u is {worst:e}"
            )));
        }
        Ok(body)
    }

    /// Star-shaped body with the default `u_min`.
    pub fn star_shaped(u: PeriodicField) -> Result<Self> {
        Self::star_shaped_with(u, DEFAULT_U_MIN)
    }

    pub fn star_shaped_with(u: PeriodicField, u_min: f64) -> Result<Self> {
        let min_u = u.min();
        if min_u < u_min {
            return Err(Error::Degenerate { min_u, u_min });
        }
        Ok(Self { u })
    }

    /// Disk of radius `r` centered at the origin.
    pub fn disk(n: usize, r: f64) -> Result<Self> {
        Self::star_shaped(PeriodicField::constant(n, 1.0 / r)?)
    }

    /// Axis-aligned square `[-a, a]^2`.
    pub fn square(n: usize, a: f64) -> Result<Self> {
        Self::star_shaped(PeriodicField::from_fn(n, |t| {
            t.cos().abs().max(t.sin().abs()) / a
        })?)
    }

    pub fn gauge(&self) -> &PeriodicField {
        &self.u
    }

    pub fn into_gauge(self) -> PeriodicField {
        self.u
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    pub fn dtheta(&self) -> f64 {
        self.u.dtheta()
    }

    pub fn is_convex(&self, tol_cone: f64) -> bool {
        curvature_measure(&self.u).min_mass() >= -tol_cone
    }

    /// Boundary point `e^{i theta_j} / u_j`.
    pub fn boundary_point(&self, j: usize) -> [f64; 2] {
        let t = self.u.theta(j);
        let r = 1.0 / self.u.samples()[j];
        [r * t.cos(), r * t.sin()]
    }

    pub fn max_radius(&self) -> f64 {
        1.0 / self.u.min()
    }

    /// Gauge of the polygon through the boundary points, evaluated at any
    /// angle: between two grid angles it is the unique `a cos + b sin`
    /// matching both samples.
    pub fn interpolate(&self, phi: f64) -> f64 {
        let (j, w_left, w_right) = self.interpolation_weights(phi);
        let n = self.len();
        w_left * self.u.samples()[j] + w_right * self.u.samples()[(j + 1) % n]
    }

    /// `(j, a, b)` with `u_poly(phi) = a u_j + b u_{j+1}`.
    pub fn interpolation_weights(&self, phi: f64) -> (usize, f64, f64) {
        interpolation_weights(self.len(), phi)
    }

    /// Resamples the polygonal interpolant on a grid of `n` nodes.
    pub fn resample(&self, n: usize) -> Result<Self> {
        let u = PeriodicField::from_fn(n, |t| self.interpolate(t))?;
        Self::star_shaped(u)
    }

    /// Scales the body by `c` (gauge divided by `c`).
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::star_shaped(self.u.map(|x| x / c)?)
    }
}

/// Weights of the cosine-type interpolation between neighbouring grid nodes.
pub(crate) fn interpolation_weights(n: usize, phi: f64) -> (usize, f64, f64) {
    let dt = 2.0 * PI / n as f64;
    let phi = phi.rem_euclid(2.0 * PI);
    let mut j = (phi / dt).floor() as usize;
    if j >= n {
        j = n - 1;
    }
    let local = phi - j as f64 * dt;
    let s = dt.sin();
    let a = (dt - local).sin() / s;
    let b = local.sin() / s;
    (j, a, b)
}

/// Body given by its support function `h(theta) = max_{x in Omega} x . e^{i theta}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportBody {
    h: PeriodicField,
}

impl SupportBody {
    pub fn new(h: PeriodicField, tol_cone: f64) -> Result<Self> {
        if h.min() <= 0.0 {
            return Err(Error::InvalidArgument(
                "support function must be positive (origin interior)".into(),
            ));
        }
        let worst = curvature_measure(&h).min_mass();
        if worst < -tol_cone {
            return Err(Error::InvalidArgument(format!(
                "support function is not convex: min node mass {worst:e}"
            )));
        }
        Ok(Self { h })
    }

    pub fn support(&self) -> &PeriodicField {
        &self.h
    }

    pub fn into_support(self) -> PeriodicField {
        self.h
    }
}

/// Convex polygon with counterclockwise vertices and the origin inside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolygonBody {
    vertices: Vec<[f64; 2]>,
}

impl PolygonBody {
    pub fn new(vertices: Vec<[f64; 2]>) -> Result<Self> {
        let n = vertices.len();
        if n < 3 {
            return Err(Error::InvalidPolygon(format!("{n} vertices, need at least 3")));
        }
        for i in 0..n {
            let a = vertices[i];
            let b = vertices[(i + 1) % n];
            let c = vertices[(i + 2) % n];
            let cross = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0]);
            if cross <= 0.0 {
                return Err(Error::InvalidPolygon(format!(
                    "vertex {} is not a strictly convex counterclockwise turn",
                    (i + 1) % n
                )));
            }
            // Origin strictly on the left of each edge.
            let side = a[0] * b[1] - a[1] * b[0];
            if side <= 0.0 {
                return Err(Error::InvalidPolygon(
                    "origin is not strictly inside the polygon".into(),
                ));
            }
        }
        // A strictly convex sequence could still wind more than once.
        let turn: f64 = (0..n)
            .map(|i| {
                let a = vertices[i];
                let b = vertices[(i + 1) % n];
                (a[0] * b[1] - a[1] * b[0]).atan2(a[0] * b[0] + a[1] * b[1])
            })
            .sum();
        if (turn - 2.0 * PI).abs() > 1e-6 {
            return Err(Error::InvalidPolygon("vertices wind more than once".into()));
        }
        Ok(Self { vertices })
    }

    /// Regular polygon with `k` vertices on the circle of radius `r`, first
    /// vertex at angle `phase`.
    pub fn regular(k: usize, r: f64, phase: f64) -> Result<Self> {
        Self::new(
            (0..k)
                .map(|i| {
                    let t = phase + 2.0 * PI * i as f64 / k as f64;
                    [r * t.cos(), r * t.sin()]
                })
                .collect(),
        )
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    /// Shoelace area.
    pub fn area(&self) -> f64 {
        let n = self.vertices.len();
        0.5 * (0..n)
            .map(|i| {
                let a = self.vertices[i];
                let b = self.vertices[(i + 1) % n];
                a[0] * b[1] - a[1] * b[0]
            })
            .sum::<f64>()
    }

    pub fn perimeter(&self) -> f64 {
        let n = self.vertices.len();
        (0..n)
            .map(|i| {
                let a = self.vertices[i];
                let b = self.vertices[(i + 1) % n];
                (b[0] - a[0]).hypot(b[1] - a[1])
            })
            .sum()
    }

    pub fn max_radius(&self) -> f64 {
        self.vertices.iter().map(|v| v[0].hypot(v[1])).fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn positivity_guard() {
        let u = PeriodicField::from_fn(16, |t| t.cos()).unwrap();
        assert!(matches!(GaugeBody::star_shaped(u), Err(Error::Degenerate { .. })));
    }

    #[test]
    fn convexity_check() {
        let u = PeriodicField::from_fn(64, |t| 1.0 + 0.3 * (4.0 * t).cos()).unwrap();
        assert!(GaugeBody::new(u.clone(), 1e-6, 1e-10).is_err());
        assert!(GaugeBody::star_shaped(u).is_ok());
        assert!(GaugeBody::new(PeriodicField::constant(16, 1.0).unwrap(), 1e-6, 1e-10).is_ok());
    }

    #[test]
    fn interpolation_reproduces_chords() {
        let body = GaugeBody::disk(16, 1.0).unwrap();
        let dt = body.dtheta();
        // Midpoint of a chord of the unit circle lies at distance cos(dt/2).
        let u_mid = body.interpolate(0.5 * dt);
        assert_relative_eq!(1.0 / u_mid, (dt / 2.0).cos(), epsilon = 1e-14);
        assert_relative_eq!(body.interpolate(3.0 * dt), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn polygon_validation() {
        assert!(PolygonBody::regular(4, 1.0, 0.3).is_ok());
        let cw: Vec<_> = PolygonBody::regular(4, 1.0, 0.0)
            .unwrap()
            .vertices()
            .iter()
            .rev()
            .copied()
            .collect();
        assert!(PolygonBody::new(cw).is_err());
        let off = vec![[2.0, 0.0], [3.0, 0.0], [3.0, 1.0], [2.0, 1.0]];
        assert!(PolygonBody::new(off).is_err());
        let sq = PolygonBody::new(vec![[1.0, 1.0], [-1.0, 1.0], [-1.0, -1.0], [1.0, -1.0]]).unwrap();
        assert_relative_eq!(sq.area(), 4.0);
        assert_relative_eq!(sq.perimeter(), 8.0);
    }
}
