//! P1 finite elements on `Omega_u`: the Dirichlet energy of a Poisson
//! problem, the first Dirichlet eigenvalue, and their shape gradients with
//! respect to the sampled gauge.

mod fem;
mod gradient;
mod mesh;
pub mod sparse;

use serde::{Deserialize, Serialize};

pub use fem::{
    dirichlet_energy, dirichlet_energy_with, lambda1, lambda1_with, EigenPair, FemSolution,
};
pub use gradient::{
    energy_discrete_gradient, energy_hadamard_gradient, energy_shape_gradient,
    lambda1_discrete_gradient, lambda1_hadamard_gradient, lambda1_shape_gradient,
};
pub use mesh::{
    choose_plan, mesh_convex, mesh_with_plan, BoundaryEdge, Mesh, MeshPlan, MeshResolution,
};

/// Right-hand side `f(x, y)` of the Poisson problem `-Delta U = f`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
pub enum SourceField {
    Constant {
        value: f64,
    },
    /// `c0 + cx x + cy y`.
    Affine {
        c0: f64,
        cx: f64,
        cy: f64,
    },
    /// `amplitude * exp(-|x - center|^2 / (2 width^2))`.
    Gaussian {
        amplitude: f64,
        center: [f64; 2],
        width: f64,
    },
}

impl Default for SourceField {
    fn default() -> Self {
        SourceField::Constant { value: 1.0 }
    }
}

impl SourceField {
    pub fn value(&self, p: [f64; 2]) -> f64 {
        match *self {
            SourceField::Constant { value } => value,
            SourceField::Affine { c0, cx, cy } => c0 + cx * p[0] + cy * p[1],
            SourceField::Gaussian { amplitude, center, width } => {
                let d2 = (p[0] - center[0]).powi(2) + (p[1] - center[1]).powi(2);
                amplitude * (-d2 / (2.0 * width * width)).exp()
            }
        }
    }

    pub fn gradient(&self, p: [f64; 2]) -> [f64; 2] {
        match *self {
            SourceField::Constant { .. } => [0.0, 0.0],
            SourceField::Affine { cx, cy, .. } => [cx, cy],
            SourceField::Gaussian { center, width, .. } => {
                let f = self.value(p);
                let w2 = width * width;
                [-(p[0] - center[0]) / w2 * f, -(p[1] - center[1]) / w2 * f]
            }
        }
    }
}

/// How `|grad U|^2` on the boundary is reconstructed from the P1 solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
pub enum TraceMethod {
    /// Normal derivative from the residual of the discrete equation at each
    /// boundary vertex, divided by its lumped boundary length.
    #[default]
    FluxRecovery,
    /// Constant gradient of the triangle adjacent to each boundary edge.
    AdjacentTriangle,
}

/// Which gradient of a PDE functional is reported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
pub enum GradientMode {
    /// Exact derivative of the discrete functional with the mesh topology
    /// held fixed.
    #[default]
    Discrete,
    /// Boundary-integral formula evaluated with the reconstructed trace.
    Hadamard,
}

/// Solver settings shared by energy and eigenvalue computations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PdeOptions {
    pub resolution: MeshResolution,
    pub trace: TraceMethod,
    pub cg_tol: f64,
    /// Relative eigenvalue change that stops inverse iteration.
    pub eigen_tol: f64,
    pub eigen_max_iter: usize,
}

impl Default for PdeOptions {
    fn default() -> Self {
        Self {
            resolution: MeshResolution::Target(0.05),
            trace: TraceMethod::FluxRecovery,
            cg_tol: 1e-12,
            eigen_tol: 1e-13,
            eigen_max_iter: 500,
        }
    }
}

impl PdeOptions {
    pub fn with_h(h: f64) -> Self {
        Self {
            resolution: MeshResolution::Target(h),
            ..Self::default()
        }
    }

    pub fn with_plan(plan: MeshPlan) -> Self {
        Self {
            resolution: MeshResolution::Plan(plan),
            ..Self::default()
        }
    }
}
