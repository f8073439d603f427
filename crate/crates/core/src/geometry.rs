//! Pointwise metric quantities of `omega_t`, the restriction of the product
//! cusp metric `sum_k (i/pi) da_k ^ dbar a_k / a_k^2` to the fiber.
//!
//! In the log coordinates `w_j = log z_j` (`j = 1..=n`) one has
//! `d a_j / d w_i = delta_ij` and `d a_0 / d w_i = -1`, so
//!
//! ```text
//! omega_t = i sum_{jk} G_jk dw_j ^ dbar w_k,   G_jk = (delta_jk / a_j^2 + 1 / a_0^2) / pi
//! ```
//!
//! which is real and independent of the angles.

use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::DMatrix;
#[allow(unused_imports)] // inherent methods take over when std is linked
use num_traits::Float;

use crate::error::{Error, Result};
use crate::hermitian::{Basis, HermitianForm};
use crate::point::LogPoint;

/// Agreement demanded between the closed-form and dense determinants.
pub const DETERMINANT_TOL: f64 = 1e-8;

pub(crate) fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Real matrix `G_jk` of `omega_t` in the `w` coordinates.
pub(crate) fn coordinate_matrix(p: &LogPoint) -> DMatrix<f64> {
    let a = p.a();
    let n = p.n();
    let tail = 1.0 / (a[0] * a[0]);
    DMatrix::from_fn(n, n, |i, j| {
        let diag = if i == j { 1.0 / (a[i + 1] * a[i + 1]) } else { 0.0 };
        (diag + tail) / PI
    })
}

pub fn coordinate_metric(p: &LogPoint) -> HermitianForm {
    HermitianForm::from_real(coordinate_matrix(p), Basis::CoordinateW)
        .expect("diagonal plus rank-one with positive weights is positive definite")
}

fn require_chart(p: &LogPoint) -> Result<()> {
    let j = p.dominant_index();
    if j != 0 {
        return Err(Error::Chart {
            dominant: j,
            dominant_sq: p.a()[j] * p.a()[j],
            a0_sq: p.a0() * p.a0(),
        });
    }
    Ok(())
}

/// Metric in the proper frame `W_i = a_i d/dw_i`: `(I + v v^T) / pi` with `v_j = a_j / a_0`.
///
/// Requires slot 0 to carry the dominant log-modulus (see
/// [`LogPoint::dominant_chart`]); then every eigenvalue lies in `[1/pi, (n+1)/pi]`.
pub fn frame_metric(p: &LogPoint) -> Result<HermitianForm> {
    require_chart(p)?;
    let a = p.a();
    let n = p.n();
    let v: Vec<f64> = a[1..].iter().map(|x| x / a[0]).collect();
    let m = DMatrix::from_fn(n, n, |i, j| ((if i == j { 1.0 } else { 0.0 }) + v[i] * v[j]) / PI);
    Ok(HermitianForm::from_real(m, Basis::ProperFrame)
        .expect("identity plus rank-one is positive definite"))
}

/// `det G = a^2 / (pi^n prod_{k=0}^n a_k^2)`.
pub fn metric_determinant_closed(p: &LogPoint) -> f64 {
    let prod: f64 = p.a().iter().map(|x| x * x).product();
    p.a_squared() / (PI.powi(p.n() as i32) * prod)
}

/// Determinant of the dense coordinate matrix, the independent route.
pub fn metric_determinant_dense(p: &LogPoint) -> f64 {
    coordinate_metric(p).determinant()
}

/// Closed-form determinant, cross-checked against the dense one.
pub fn metric_determinant(p: &LogPoint) -> Result<f64> {
    let closed = metric_determinant_closed(p);
    let dense = metric_determinant_dense(p);
    let discrepancy = ((closed - dense) / closed).abs();
    if !(discrepancy <= DETERMINANT_TOL) {
        return Err(Error::IdentityViolation {
            identity: "metric determinant",
            discrepancy,
            tolerance: DETERMINANT_TOL,
        });
    }
    Ok(closed)
}

/// Density of `omega_t^n` against `prod_k da_k ^ dtheta_k`:
/// `n! pi^{-n} a^2 / prod_{k=0}^n a_k^2`.
pub fn volume_density(p: &LogPoint) -> f64 {
    factorial(p.n()) * metric_determinant_closed(p)
}

/// `phi_t = -log(omega_t^n / V_t)` with the potential volume form
/// `V_t = (log|t|^2)^2 / prod a_k^2 * prod i dz_k ^ dbar z_k / |z_k|^2`.
///
/// Both forms are densities against `prod da_k ^ dtheta_k`, which gives
/// `e^{-phi} = n! pi^{-n} a^2 / lt^2`.
pub fn phi(p: &LogPoint) -> f64 {
    let n = p.n();
    let ratio = p.a_squared() / (p.lt() * p.lt());
    (PI.powi(n as i32) / factorial(n)).ln() - ratio.ln()
}

/// Range `[log(pi^n / n!), log(pi^n (n+1) / n!)]` containing every value of [`phi`].
pub fn phi_bounds(n: usize) -> (f64, f64) {
    let base = (PI.powi(n as i32) / factorial(n)).ln();
    (base, base + (n as f64 + 1.0).ln())
}

/// Frame derivatives `W_i phi = -a_i (2 a_i - 2 a_0) / a^2`, `i = 1..=n`.
pub fn grad_phi_frame(p: &LogPoint) -> Result<Vec<f64>> {
    require_chart(p)?;
    let a = p.a();
    let a2 = p.a_squared();
    Ok(a[1..].iter().map(|&ai| -ai * (2.0 * ai - 2.0 * a[0]) / a2).collect())
}
