use serde::{Deserialize, Serialize};

/// Smallest admissible gauge value; below this the body is treated as unbounded.
pub const DEFAULT_U_MIN: f64 = 1e-6;

/// Numerical tolerances shared by the optimizer and the diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
pub struct Tolerances {
    pub u_min: f64,
    /// Allowed negative node mass of `u'' + u` for a body to count as convex.
    pub tol_cone: f64,
    /// Allowed equality-constraint residual at termination.
    pub tol_eq: f64,
    /// Relative stationarity target.
    pub tol_kkt: f64,
    /// Complementarity target `sum eta_j (Du)_j`.
    pub tol_comp: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            u_min: DEFAULT_U_MIN,
            tol_cone: 1e-10,
            tol_eq: 1e-8,
            tol_kkt: 1e-4,
            tol_comp: 1e-6,
        }
    }
}
