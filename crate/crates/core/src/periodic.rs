//! Periodic scalar fields sampled on a uniform grid of the circle.
//!
//! Fourier coefficients use the normalized convention
//! `c(n) = (1/2pi) * integral of u(theta) exp(-i n theta)`, so that
//! `|u|_{H^s}^2 = sum |n|^{2s} |c(n)|^2`. Plain integrals use the trapezoid
//! rule on the grid, which is spectrally accurate for smooth periodic data.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Samples of a 2pi-periodic function at `theta_j = 2 pi j / N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct PeriodicField {
    samples: Vec<f64>,
}

impl TryFrom<Vec<f64>> for PeriodicField {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        PeriodicField::new(v)
    }
}

impl From<PeriodicField> for Vec<f64> {
    fn from(f: PeriodicField) -> Self {
        f.samples
    }
}

/// Checks the grid-size invariant: even and at least 8.
pub fn check_grid_size(n: usize) -> Result<()> {
    if n < 8 || !n.is_multiple_of(2) {
        return Err(Error::InvalidGrid(format!(
            "grid size must be even and >= 8, got {n}"
        )));
    }
    Ok(())
}

impl PeriodicField {
    pub fn new(samples: Vec<f64>) -> Result<Self> {
        check_grid_size(samples.len())?;
        if samples.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("periodic field samples"));
        }
        Ok(Self { samples })
    }

    /// Samples `f` at the grid angles.
    pub fn from_fn(n: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        check_grid_size(n)?;
        let dt = 2.0 * PI / n as f64;
        Self::new((0..n).map(|j| f(j as f64 * dt)).collect())
    }

    pub fn constant(n: usize, value: f64) -> Result<Self> {
        Self::from_fn(n, |_| value)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dtheta(&self) -> f64 {
        2.0 * PI / self.samples.len() as f64
    }

    pub fn theta(&self, j: usize) -> f64 {
        j as f64 * self.dtheta()
    }

    pub fn thetas(&self) -> Vec<f64> {
        (0..self.len()).map(|j| self.theta(j)).collect()
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    /// Sample at a (possibly negative or overflowing) index, wrapped modulo N.
    pub fn at(&self, j: isize) -> f64 {
        let n = self.samples.len() as isize;
        self.samples[j.rem_euclid(n) as usize]
    }

    pub fn min(&self) -> f64 {
        self.samples.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.samples.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Applies `f` samplewise. Fails if the result is not finite.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.samples.iter().map(|&x| f(x)).collect())
    }

    /// Combines two fields on the same grid samplewise.
    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if other.len() != self.len() {
            return Err(Error::InvalidGrid(format!(
                "grid sizes differ: {} vs {}",
                self.len(),
                other.len()
            )));
        }
        Self::new(
            self.samples
                .iter()
                .zip(&other.samples)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        )
    }

    /// `self + t * dir`.
    pub fn axpy(&self, t: f64, dir: &Self) -> Result<Self> {
        self.zip_map(dir, |a, b| a + t * b)
    }

    /// Trapezoid integral over the circle, `dtheta * sum_j u_j`.
    pub fn integrate(&self) -> f64 {
        self.dtheta() * self.samples.iter().sum::<f64>()
    }

    /// Weighted pairing `dtheta * sum_j u_j v_j`.
    pub fn dot(&self, other: &Self) -> f64 {
        self.dtheta()
            * self
                .samples
                .iter()
                .zip(&other.samples)
                .map(|(a, b)| a * b)
                .sum::<f64>()
    }

    /// Rotates the field by `k` grid steps: `out_j = u_{j-k}`.
    pub fn shifted(&self, k: isize) -> Self {
        let n = self.len() as isize;
        Self {
            samples: (0..n).map(|j| self.at(j - k)).collect(),
        }
    }

    /// Centered difference approximation of `u'`.
    pub fn centered_derivative(&self) -> Vec<f64> {
        let dt = self.dtheta();
        let n = self.len() as isize;
        (0..n)
            .map(|j| (self.at(j + 1) - self.at(j - 1)) / (2.0 * dt))
            .collect()
    }
}

impl Add for &PeriodicField {
    type Output = PeriodicField;
    fn add(self, rhs: &PeriodicField) -> PeriodicField {
        assert_eq!(self.len(), rhs.len(), "grid sizes differ");
        PeriodicField {
            samples: self.samples.iter().zip(&rhs.samples).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &PeriodicField {
    type Output = PeriodicField;
    fn sub(self, rhs: &PeriodicField) -> PeriodicField {
        assert_eq!(self.len(), rhs.len(), "grid sizes differ");
        PeriodicField {
            samples: self.samples.iter().zip(&rhs.samples).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Mul<f64> for &PeriodicField {
    type Output = PeriodicField;
    fn mul(self, rhs: f64) -> PeriodicField {
        PeriodicField {
            samples: self.samples.iter().map(|a| a * rhs).collect(),
        }
    }
}

impl Neg for &PeriodicField {
    type Output = PeriodicField;
    fn neg(self) -> PeriodicField {
        self * -1.0
    }
}

/// Fourier coefficients `c(n)` for `n = -N/2 .. N/2-1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralCoeffs {
    coeffs: Vec<Complex64>,
}

impl SpectralCoeffs {
    pub fn grid_size(&self) -> usize {
        self.coeffs.len()
    }

    /// Coefficient of frequency `n`, with `-N/2 <= n < N/2`.
    pub fn get(&self, n: i64) -> Complex64 {
        let len = self.coeffs.len() as i64;
        assert!(
            (-len / 2..len / 2).contains(&n),
            "frequency {n} outside the resolved band"
        );
        self.coeffs[n.rem_euclid(len) as usize]
    }

    /// Iterator over `(n, c(n))` in the signed frequency range.
    pub fn iter(&self) -> impl Iterator<Item = (i64, Complex64)> + '_ {
        let len = self.coeffs.len() as i64;
        (-len / 2..len / 2).map(move |n| (n, self.coeffs[n.rem_euclid(len) as usize]))
    }

    /// `sum_n |c(n)|^2`, the spectral L^2 norm squared.
    pub fn l2_sq(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }

    /// `sum_{n != 0} |n|^{2s} |c(n)|^2`.
    pub fn seminorm_sq(&self, s: f64) -> f64 {
        self.iter()
            .filter(|(n, _)| *n != 0)
            .map(|(n, c)| (n.unsigned_abs() as f64).powf(2.0 * s) * c.norm_sqr())
            .sum()
    }

    /// Reconstructs grid samples, `u_j = sum_n c(n) exp(i n theta_j)`.
    pub fn inverse(&self) -> Vec<f64> {
        let n = self.coeffs.len();
        let mut buf = self.coeffs.clone();
        FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
        buf.iter().map(|c| c.re).collect()
    }
}

pub fn spectral_coeffs(field: &PeriodicField) -> SpectralCoeffs {
    let n = field.len();
    let mut buf: Vec<Complex64> = field
        .samples()
        .iter()
        .map(|&x| Complex64::new(x, 0.0))
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let scale = 1.0 / n as f64;
    for c in &mut buf {
        *c *= scale;
    }
    SpectralCoeffs { coeffs: buf }
}

fn check_order(s: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::InvalidArgument(format!(
            "Sobolev order must lie in [0, 1], got {s}"
        )));
    }
    Ok(())
}

/// `|u|_{H^s} = (sum_{n != 0} |n|^{2s} |c(n)|^2)^{1/2}`.
pub fn sobolev_seminorm(field: &PeriodicField, s: f64) -> Result<f64> {
    check_order(s)?;
    Ok(spectral_coeffs(field).seminorm_sq(s).sqrt())
}

/// `||u||_{H^s} = (||u||_{L^2}^2 + |u|_{H^s}^2)^{1/2}` with the spectral L^2 norm.
pub fn sobolev_norm(field: &PeriodicField, s: f64) -> Result<f64> {
    check_order(s)?;
    let c = spectral_coeffs(field);
    Ok((c.l2_sq() + c.seminorm_sq(s)).sqrt())
}

/// Spectral L^2 norm, `(sum |c(n)|^2)^{1/2} = ((1/2pi) int u^2)^{1/2}`.
pub fn l2_norm(field: &PeriodicField) -> f64 {
    spectral_coeffs(field).l2_sq().sqrt()
}

/// Weights of the discrete operator whose rows give the node masses of
/// `u'' + u`: `m_j = kappa * (u_{j-1} - 2 cos(dt) u_j + u_{j+1})`.
///
/// `kappa = dt / (2 (1 - cos dt))` makes constants carry mass exactly `dt`
/// per node while grid samples of `cos` and `sin` are annihilated.
pub fn curvature_stencil(n: usize) -> (f64, f64) {
    let dt = 2.0 * PI / n as f64;
    let one_minus_cos = 2.0 * (dt / 2.0).sin().powi(2);
    let kappa = dt / (2.0 * one_minus_cos);
    (kappa, dt.cos())
}

/// Discretized curvature measure `u'' + u`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvatureMeasure {
    pub node_masses: Vec<f64>,
    /// Detected point masses `(theta, mass)`; filled by the classifier.
    pub atoms: Vec<(f64, f64)>,
    /// Absolutely continuous part per unit angle; filled by the classifier.
    pub density: Vec<f64>,
    pub total_mass: f64,
}

impl CurvatureMeasure {
    pub fn grid_size(&self) -> usize {
        self.node_masses.len()
    }

    pub fn dtheta(&self) -> f64 {
        2.0 * PI / self.node_masses.len() as f64
    }

    pub fn min_mass(&self) -> f64 {
        self.node_masses.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

pub fn curvature_measure(field: &PeriodicField) -> CurvatureMeasure {
    let (kappa, c) = curvature_stencil(field.len());
    let n = field.len() as isize;
    let node_masses: Vec<f64> = (0..n)
        .map(|j| kappa * (field.at(j - 1) - 2.0 * c * field.at(j) + field.at(j + 1)))
        .collect();
    let total_mass = node_masses.iter().sum();
    CurvatureMeasure {
        node_masses,
        atoms: Vec::new(),
        density: Vec::new(),
        total_mass,
    }
}

/// Finds the arc outside the longest circular run of exact zeros.
///
/// Returns `(start_index, support_length_in_nodes)` where the support is the
/// closed arc between the two zeros that bound the nonzero samples.
fn support_arc(field: &PeriodicField) -> Result<(usize, usize)> {
    let n = field.len();
    let zero: Vec<bool> = field.samples().iter().map(|&x| x == 0.0).collect();
    if zero.iter().all(|&z| z) {
        return Err(Error::SupportNotFound("field is identically zero".into()));
    }
    if !zero.iter().any(|&z| z) {
        return Err(Error::SupportNotFound("field has no zero samples".into()));
    }
    // Longest circular run of zeros.
    let mut best_len = 0;
    let mut best_end = 0; // index of the last zero in the run
    let mut run = 0;
    for k in 0..2 * n {
        if zero[k % n] {
            run += 1;
            if run > best_len && run <= n {
                best_len = run;
                best_end = k % n;
            }
        } else {
            run = 0;
        }
    }
    // The support arc spans from the last zero of the run to the first zero
    // after it, both endpoints included.
    let support_nodes = n - best_len + 2;
    Ok((best_end, support_nodes))
}

/// Ratio bounded by the Poincare-type inequality for compactly supported
/// fields: `||u||_{L^2} / |u|_{H^1}` when `s = 0`, and `|u|_{H^s} / |u|_{H^1}`
/// for `0 < s < 1`, to be compared with `pi^{s-1} eps^{1-s}`.
///
/// The norms are the exact Fourier norms of the piecewise-linear interpolant
/// of the samples, which is a genuine `H^1` function with the detected
/// support. Returns `(ratio, eps)` where `eps` is the support arc length.
pub fn poincare_ratio(field: &PeriodicField, s: f64) -> Result<(f64, f64)> {
    if !(0.0..1.0).contains(&s) {
        return Err(Error::InvalidArgument(format!(
            "Poincare ratio needs s in [0, 1), got {s}"
        )));
    }
    let (_, support_nodes) = support_arc(field)?;
    let dt = field.dtheta();
    let eps = (support_nodes - 1) as f64 * dt;
    if eps >= PI {
        return Err(Error::SupportNotFound(format!(
            "support arc {eps:.4} is not shorter than pi (no zero run of length >= pi)"
        )));
    }
    let coeffs = spectral_coeffs(field);
    let n = field.len();
    let numerator_sq = if s == 0.0 {
        piecewise_linear_norm_sq(&coeffs, n, None)
    } else {
        piecewise_linear_norm_sq(&coeffs, n, Some(s))
    };
    let h1_sq = piecewise_linear_norm_sq(&coeffs, n, Some(1.0));
    if h1_sq <= 0.0 {
        return Err(Error::SupportNotFound("field has zero H^1 seminorm".into()));
    }
    Ok(((numerator_sq / h1_sq).sqrt(), eps))
}

/// Exact Fourier norm of the piecewise-linear interpolant of grid samples.
///
/// The interpolant has coefficients `c_dft(r) * sinc^2(pi m / N)` for every
/// frequency `m = r + kN`. `order = None` gives the L^2 norm squared,
/// `Some(s)` the `H^s` seminorm squared.
fn piecewise_linear_norm_sq(coeffs: &SpectralCoeffs, n: usize, order: Option<f64>) -> f64 {
    let nf = n as f64;
    let mut total = 0.0;
    for (r, c) in coeffs.iter() {
        let a2 = c.norm_sqr();
        if a2 == 0.0 {
            continue;
        }
        total += a2 * aliased_weight(r, nf, order);
    }
    total
}

/// `sum_k w(r + kN) sinc^4(pi (r + kN) / N)` with `w(m) = |m|^{2s}` (or 1).
fn aliased_weight(r: i64, nf: f64, order: Option<f64>) -> f64 {
    let exponent = order.map(|s| 2.0 * s).unwrap_or(0.0);
    if r == 0 {
        // sinc vanishes at every nonzero alias of the mean.
        return if order.is_some() { 0.0 } else { 1.0 };
    }
    let sin4 = (PI * r as f64 / nf).sin().powi(4);
    let pre = sin4 * nf.powi(4) / PI.powi(4);
    // term(m) = |m|^{exponent - 4} for m = r + kN.
    let p = exponent - 4.0;
    let term = |m: f64| m.abs().powf(p);
    const K: i64 = 2000;
    let mut sum = term(r as f64);
    for k in 1..=K {
        let kf = k as f64;
        sum += term(r as f64 + kf * nf) + term(r as f64 - kf * nf);
    }
    // Tail of both sides: 2 * int_{K+1/2}^inf (x N)^p dx.
    let x0 = K as f64 + 0.5;
    sum += 2.0 * nf.powf(p) * x0.powf(p + 1.0) / (-(p + 1.0));
    pre * sum
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn rejects_bad_grids() {
        assert!(PeriodicField::new(vec![1.0; 6]).is_err());
        assert!(PeriodicField::new(vec![1.0; 9]).is_err());
        assert!(PeriodicField::new(vec![f64::NAN; 8]).is_err());
        assert!(PeriodicField::new(vec![1.0; 8]).is_ok());
    }

    #[test]
    fn coefficients_of_constant_and_cosine() {
        let one = PeriodicField::constant(16, 1.0).unwrap();
        let c = spectral_coeffs(&one);
        assert_relative_eq!(c.get(0).re, 1.0, epsilon = 1e-14);
        for n in 1..8 {
            assert!(c.get(n).norm() < 1e-14);
            assert!(c.get(-n).norm() < 1e-14);
        }
        let cos = PeriodicField::from_fn(16, f64::cos).unwrap();
        let c = spectral_coeffs(&cos);
        assert_relative_eq!(c.get(1).re, 0.5, epsilon = 1e-14);
        assert_relative_eq!(c.get(-1).re, 0.5, epsilon = 1e-14);
        assert!(c.get(0).norm() < 1e-14 && c.get(2).norm() < 1e-14);
    }

    #[test]
    fn inverse_transform_roundtrip() {
        let u = PeriodicField::from_fn(64, |t| t.sin().exp()).unwrap();
        let back = spectral_coeffs(&u).inverse();
        let err = u
            .samples()
            .iter()
            .zip(&back)
            .map(|(a, b)| (a - b).abs() / a.abs())
            .fold(0.0, f64::max);
        assert!(err <= 1e-12, "roundtrip error {err}");
    }

    #[test]
    fn seminorm_examples() {
        let cos = PeriodicField::from_fn(32, f64::cos).unwrap();
        assert_relative_eq!(sobolev_seminorm(&cos, 1.0).unwrap(), 0.5f64.sqrt(), epsilon = 1e-13);
        let c = PeriodicField::constant(32, 3.7).unwrap();
        for s in [0.0, 0.3, 1.0] {
            assert!(sobolev_seminorm(&c, s).unwrap() < 1e-13);
        }
        let cos3 = PeriodicField::from_fn(32, |t| (3.0 * t).cos()).unwrap();
        assert_relative_eq!(sobolev_seminorm(&cos3, 0.5).unwrap(), 1.5f64.sqrt(), epsilon = 1e-13);
        assert!(sobolev_seminorm(&cos3, 1.5).is_err());
        assert!(sobolev_seminorm(&cos3, -0.1).is_err());
        // Full norm adds the L^2 part: |cos 3t|_L2^2 = 1/2.
        assert_relative_eq!(sobolev_norm(&cos3, 0.5).unwrap(), 2.0f64.sqrt(), epsilon = 1e-13);
    }

    #[test]
    fn curvature_of_constant_and_harmonic() {
        let one = PeriodicField::constant(64, 1.0).unwrap();
        let m = curvature_measure(&one);
        let dt = one.dtheta();
        for &x in &m.node_masses {
            assert_relative_eq!(x, dt, epsilon = 1e-14);
        }
        assert_relative_eq!(m.total_mass, 2.0 * PI, epsilon = 1e-12);

        let u = PeriodicField::from_fn(64, |t| 1.0 + 0.5 * t.cos()).unwrap();
        let m = curvature_measure(&u);
        for &x in &m.node_masses {
            assert_relative_eq!(x, dt, epsilon = 1e-13);
        }
        assert_relative_eq!(m.total_mass, 2.0 * PI, epsilon = 1e-12);
    }

    #[test]
    fn curvature_of_square_gauge_concentrates_at_corners() {
        let n = 256;
        let u = PeriodicField::from_fn(n, |t| t.cos().abs().max(t.sin().abs())).unwrap();
        let m = curvature_measure(&u);
        for k in 0..4 {
            let j = n / 8 + k * n / 4;
            assert_relative_eq!(m.node_masses[j], 2f64.sqrt(), max_relative = 0.02);
        }
        assert_relative_eq!(m.total_mass, 4.0 * 2f64.sqrt(), max_relative = 1e-3);
    }

    #[test]
    fn half_sine_saturates_poincare() {
        let n = 1024;
        let k = 256;
        let dt = 2.0 * PI / n as f64;
        let eps = k as f64 * dt;
        let v = PeriodicField::from_fn(n, |t| {
            if t <= eps + 1e-12 {
                (PI * t / eps).sin().max(0.0)
            } else {
                0.0
            }
        })
        .unwrap();
        // Clean the endpoint to an exact zero.
        let mut s = v.into_samples();
        s[k] = 0.0;
        let v = PeriodicField::new(s).unwrap();
        let (ratio, found_eps) = poincare_ratio(&v, 0.0).unwrap();
        assert_relative_eq!(found_eps, eps, epsilon = 1e-12);
        assert_relative_eq!(ratio, eps / PI, max_relative = 1e-4);
    }

    #[test]
    fn hat_function_ratio() {
        let n = 1024;
        let k = 128;
        let dt = 2.0 * PI / n as f64;
        let eps = k as f64 * dt;
        let v = PeriodicField::new(
            (0..n)
                .map(|j| {
                    if j <= k {
                        1.0 - ((j as f64 * dt) - eps / 2.0).abs() / (eps / 2.0)
                    } else {
                        0.0
                    }
                })
                .collect(),
        )
        .unwrap();
        let (ratio, _) = poincare_ratio(&v, 0.0).unwrap();
        assert_relative_eq!(ratio, eps / 12f64.sqrt(), max_relative = 1e-9);
    }

    #[test]
    fn poincare_rejects_wide_support() {
        let u = PeriodicField::from_fn(64, |t| 1.0 + 0.1 * t.cos()).unwrap();
        assert!(poincare_ratio(&u, 0.0).is_err());
        let wide = PeriodicField::from_fn(64, |t| if t < 4.0 { t.sin().abs() + 0.1 } else { 0.0 })
            .unwrap();
        assert!(poincare_ratio(&wide, 0.0).is_err());
        assert!(poincare_ratio(&wide, 1.0).is_err());
    }
}
