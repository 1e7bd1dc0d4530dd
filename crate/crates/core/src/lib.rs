//! Shape optimization over planar convex bodies described by their gauge
//! function `u`, where `Omega_u = { r e^{i theta} : r u(theta) < 1 }` and
//! convexity is the cone condition `u'' + u >= 0`.
//!
//! Modules, bottom-up:
//!
//! * [`periodic`]: sampled periodic fields, Fourier seminorms, the discrete
//!   curvature measure `u'' + u`.
//! * [`body`]: gauge/support/polygon representations and the area and
//!   perimeter functionals with their first and second derivatives.
//! * [`pde`]: P1 finite elements on `Omega_u` for the Dirichlet energy and the
//!   first Dirichlet eigenvalue, with shape gradients.
//! * [`functional`]: composite objectives `sum c_i X_i^{p_i}` and constraints.
//! * [`optimize`]: projected gradient over the discrete convexity cone with an
//!   augmented Lagrangian, and KKT multiplier recovery.
//! * [`analyze`]: smooth/polygonal classification, corner-gap bounds,
//!   coercivity probes and derivative checks.

// `!(x > 0.0)` deliberately rejects NaN along with nonpositive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analyze;
pub mod body;
pub mod config;
pub mod error;
pub mod functional;
pub mod optimize;
pub mod pde;
pub mod periodic;

pub use config::Tolerances;
pub use error::{Error, Result};
pub use periodic::PeriodicField;
