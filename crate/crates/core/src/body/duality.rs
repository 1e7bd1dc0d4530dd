use crate::body::{GaugeBody, SupportBody};
use crate::error::Result;
use crate::periodic::PeriodicField;

/// Area and perimeter computed from a support function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupportFunctionals {
    pub area: f64,
    pub perimeter: f64,
}

/// `P = int h` (trapezoid) and `|Omega| = 1/2 int (h^2 - h'^2)`, the latter by
/// the midpoint rule on each grid interval.
pub fn support_functionals(body: &SupportBody) -> SupportFunctionals {
    let h = body.support();
    let n = h.len();
    let dt = h.dtheta();
    let s = h.samples();
    let area = 0.5
        * dt
        * (0..n)
            .map(|j| {
                let (a, b) = (s[j], s[(j + 1) % n]);
                let (m, q) = (0.5 * (a + b), (b - a) / dt);
                m * m - q * q
            })
            .sum::<f64>();
    SupportFunctionals {
        area,
        perimeter: h.integrate(),
    }
}

/// `h(theta_i) = max_j cos(theta_i - theta_j) / u_j`, maximizing over the
/// sampled boundary points.
///
/// Applied to a support function viewed as a gauge, this computes the
/// support function of the polar body, so two applications return the
/// original gauge.
pub fn gauge_to_support(body: &GaugeBody, tol_cone: f64) -> Result<SupportBody> {
    let u = body.gauge();
    let n = u.len();
    let dt = u.dtheta();
    // cos(theta_i - theta_j) depends on i - j only.
    let cos_table: Vec<f64> = (0..n).map(|k| (k as f64 * dt).cos()).collect();
    let radii: Vec<f64> = u.samples().iter().map(|x| 1.0 / x).collect();
    let h: Vec<f64> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| cos_table[(i + n - j) % n] * radii[j])
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    // Vertex maximization yields the support function of the inscribed
    // polygon, which is convex; a tiny roundoff slack is tolerated.
    SupportBody::new(PeriodicField::new(h)?, tol_cone.max(1e-9))
}
