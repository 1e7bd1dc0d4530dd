use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::periodic::{check_grid_size, PeriodicField};

/// `C = pi^{s-1}`, the constant of the Poincare-type inequality
/// `|v|_{H^s} <= C eps^{1-s} |v|_{H^1}` for fields supported on an arc of
/// length `eps < pi`.
pub fn poincare_constant(s: f64) -> f64 {
    PI.powf(s - 1.0)
}

/// Lower bound on the angular gap between corners.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CornerGap {
    /// Any three consecutive corners span at least `gap`.
    Gap { gap: f64 },
    /// Without `beta` and `gamma` a component carries at most two corners.
    AtMostTwo,
}

impl CornerGap {
    /// Maximum number of corners on an arc of length `interval`:
    /// `2 |I| / A + 2`.
    pub fn count_bound(&self, interval: f64) -> f64 {
        match *self {
            CornerGap::Gap { gap } => 2.0 * interval / gap + 2.0,
            CornerGap::AtMostTwo => 2.0,
        }
    }

    pub fn gap(&self) -> Option<f64> {
        match *self {
            CornerGap::Gap { gap } => Some(gap),
            CornerGap::AtMostTwo => None,
        }
    }
}

/// Smallest arc `A` spanned by three consecutive corners when the second
/// form satisfies `j'' <= -alpha |v|_{H^1}^2 + gamma |v|_{H^s} |v|_{H^1}
/// + beta |v|_{H^s}^2`.
pub fn corner_gap_bound(alpha: f64, beta: f64, gamma: f64, s: f64) -> Result<CornerGap> {
    if !(alpha > 0.0) || !(beta >= 0.0) || !(gamma >= 0.0) || !(0.0..1.0).contains(&s) {
        return Err(Error::InvalidArgument(format!(
            "corner gap needs alpha > 0, beta >= 0, gamma >= 0, 0 <= s < 1; got \
             alpha = {alpha}, beta = {beta}, gamma = {gamma}, s = {s}"
        )));
    }
    let c = poincare_constant(s);
    let root = if beta > 0.0 {
        (-gamma + (gamma * gamma + 4.0 * alpha * beta).sqrt()) / (2.0 * beta * c)
    } else if gamma > 0.0 {
        alpha / (c * gamma)
    } else {
        return Ok(CornerGap::AtMostTwo);
    };
    Ok(CornerGap::Gap { gap: root.powf(1.0 / (1.0 - s)) })
}

/// Samples of the `v` with `v'' + v = delta_{theta2}` on `(theta1, theta3)`
/// and `v = 0` elsewhere:
/// `v = A sin(theta - theta1)` before `theta2`, `B sin(theta3 - theta)` after,
/// continuous with unit derivative jump at `theta2`.
pub fn localized_direction(theta1: f64, theta2: f64, theta3: f64, n: usize) -> Result<PeriodicField> {
    check_grid_size(n)?;
    let a = theta2 - theta1;
    let b = theta3 - theta2;
    if !(a > 0.0 && b > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "need theta1 < theta2 < theta3, got {theta1}, {theta2}, {theta3}"
        )));
    }
    let span = a + b;
    if span >= PI {
        return Err(Error::InvalidArgument(format!(
            "theta3 - theta1 = {span} must be below pi (resonance of d^2 + 1)"
        )));
    }
    let coef_a = -b.sin() / span.sin();
    let coef_b = -a.sin() / span.sin();
    PeriodicField::from_fn(n, |t| {
        let x = (t - theta1).rem_euclid(TAU);
        if x <= a {
            coef_a * x.sin()
        } else if x < span {
            coef_b * (span - x).sin()
        } else {
            0.0
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::periodic::curvature_measure;
    use approx::assert_relative_eq;

    #[test]
    fn gap_formula() {
        let g = corner_gap_bound(1.0, 1.0, 0.0, 0.0).unwrap();
        assert_relative_eq!(g.gap().unwrap(), PI, epsilon = 1e-12);
        assert_relative_eq!(g.count_bound(TAU), 6.0, epsilon = 1e-12);
        assert_eq!(corner_gap_bound(1.0, 0.0, 0.0, 0.3).unwrap(), CornerGap::AtMostTwo);
        assert!(corner_gap_bound(0.0, 1.0, 1.0, 0.0).is_err());
        assert!(corner_gap_bound(1.0, -1.0, 1.0, 0.0).is_err());
        assert!(corner_gap_bound(1.0, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn gap_without_beta() {
        let g = corner_gap_bound(2.0, 0.0, 1.0, 0.5).unwrap().gap().unwrap();
        let c = poincare_constant(0.5);
        assert_relative_eq!(g, (2.0 / c).powi(2), epsilon = 1e-12);
    }

    #[test]
    fn doubling_alpha_doubles_gap_at_s0() {
        let a1 = corner_gap_bound(1.0, 0.0, 0.7, 0.0).unwrap().gap().unwrap();
        let a2 = corner_gap_bound(2.0, 0.0, 0.7, 0.0).unwrap().gap().unwrap();
        assert_relative_eq!(a2, 2.0 * a1, epsilon = 1e-12);
    }

    #[test]
    fn quarter_arcs() {
        let n = 64;
        let v = localized_direction(0.0, PI / 4.0, PI / 2.0, n).unwrap();
        assert_relative_eq!(v.samples()[n / 8], -0.5, epsilon = 1e-12);
        assert_relative_eq!(v.samples()[n / 16], -(0.5f64.sqrt()) * (PI / 8.0).sin(), epsilon = 1e-12);
        for k in 1..n / 8 {
            assert_relative_eq!(v.samples()[n / 8 - k], v.samples()[n / 8 + k], epsilon = 1e-12);
        }
        let m = curvature_measure(&v);
        let big: Vec<usize> = (0..n).filter(|&j| m.node_masses[j].abs() > 1e-10).collect();
        assert_eq!(big, vec![0, n / 8, n / 4]);
        assert_relative_eq!(m.node_masses[n / 8], 1.0, epsilon = 1e-2);
    }

    #[test]
    fn resonant_span_rejected() {
        assert!(localized_direction(0.0, 1.0, PI, 64).is_err());
        assert!(localized_direction(0.0, 0.0, 1.0, 64).is_err());
    }
}
