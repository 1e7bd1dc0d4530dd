//! Diagnostics on computed optima: curvature atom detection and the
//! smooth/polygonal verdict, corner-gap bounds, localized test directions,
//! coercivity probes and derivative checks.

mod check;
mod classify;
mod corners;
mod probe;

pub use check::{check_gradient, directional_derivative, fd_second_form, DerivativeCheckReport, LevelCheck};
pub use classify::{
    classify, classify_body, detect_atoms, Atom, ClassifyConfig, RegularityVerdict, VerdictKind,
};
pub use corners::{corner_gap_bound, localized_direction, poincare_constant, CornerGap};
pub use probe::{coercivity_probe, probe_direction, CoercivityFit, ProbeConfig};
