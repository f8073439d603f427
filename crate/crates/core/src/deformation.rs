//! The lift `W = grad log t / |grad log t|^2` of `t d/dt`, its Kodaira-Spencer
//! representative `dbar W`, and the flow of `W`.
//!
//! In the ambient log coordinates `W = sum_{k=0}^n c_k d/dw_k` with
//! `c_k = a_k^2 / a^2`. The coefficients are real functions of the moduli,
//! so `dbar c_k = sum_j (d c_k / d a_j) dbar w_j`.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::{Complex, DMatrix};
#[allow(unused_imports)] // inherent methods take over when std is linked
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{coordinate_metric, volume_density};
use crate::hermitian::{Basis, HermitianForm};
use crate::point::LogPoint;

/// Agreement demanded between the closed-form norm and the tensor contraction.
pub const NORM_TOL: f64 = 1e-8;

/// RK4 steps per unit flow time used by [`default_flow_steps`].
pub const DEFAULT_STEPS_PER_UNIT: f64 = 100.0;

/// Coefficients `c_k = a_k^2 / a^2`, `k = 0..=n`; they sum to one, which is `W(log t) = 1`.
pub fn w_coefficients(p: &LogPoint) -> Vec<f64> {
    let a2 = p.a_squared();
    p.a().iter().map(|x| x * x / a2).collect()
}

/// Where the components of a vector-valued form live.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FormSpace {
    /// Indices `0..=n` over the ambient `w_0..w_n`.
    Ambient,
    /// Indices `1..=n` over the fiber coordinates, `w_0` eliminated.
    Fiber,
}

/// A `(0,1)`-form with values in `T^{1,0}`: `B[(i, k)]` is the coefficient of
/// `d/dw_i (x) dbar w_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorValuedForm {
    components: DMatrix<Complex<f64>>,
    space: FormSpace,
}

impl VectorValuedForm {
    pub fn new(components: DMatrix<Complex<f64>>, space: FormSpace) -> Result<Self> {
        if !components.is_square() {
            return Err(Error::domain("vector-valued form components must be square"));
        }
        if components.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::domain("vector-valued form has a non-finite component"));
        }
        Ok(VectorValuedForm { components, space })
    }

    pub fn dim(&self) -> usize {
        self.components.nrows()
    }

    pub fn space(&self) -> FormSpace {
        self.space
    }

    pub fn components(&self) -> &DMatrix<Complex<f64>> {
        &self.components
    }

    /// Pulls an ambient form back to the fiber.
    ///
    /// The form slot uses `dbar w_0 = -sum_k dbar w_k` on `X_t`. The vector
    /// slot keeps rows `1..=n`; row 0 of a form tangent to the fibers is minus
    /// their sum and carries no extra information.
    pub fn restrict_to_fiber(&self) -> Result<VectorValuedForm> {
        if self.space != FormSpace::Ambient {
            return Err(Error::domain("form is already on the fiber"));
        }
        let n = self.dim() - 1;
        let b = &self.components;
        let fiber = DMatrix::from_fn(n, n, |i, k| b[(i + 1, k + 1)] - b[(i + 1, 0)]);
        VectorValuedForm::new(fiber, FormSpace::Fiber)
    }

    /// `|B|^2 = g_{i jbar} g^{k lbar} B^i_kbar conj(B^j_lbar)`, written as
    /// `Re tr(B^H g B conj(g^{-1}))`.
    pub fn norm_sq(&self, metric: &HermitianForm) -> Result<f64> {
        if metric.dim() != self.dim() {
            return Err(Error::domain(format!(
                "metric dimension {} does not match form dimension {}",
                metric.dim(),
                self.dim()
            )));
        }
        let b = &self.components;
        let inner = b.adjoint() * metric.entries() * b;
        let dual = metric.inverse().map(|z| z.conj());
        Ok((inner * dual).trace().re)
    }
}

/// Product cusp metric of the polydisk, diagonal `1 / (pi a_k^2)` in `w_0..w_n`.
pub fn ambient_metric(p: &LogPoint) -> HermitianForm {
    let a = p.a();
    let m = DMatrix::from_fn(a.len(), a.len(), |i, j| {
        if i == j {
            1.0 / (PI * a[i] * a[i])
        } else {
            0.0
        }
    });
    HermitianForm::from_real(m, Basis::AmbientW).expect("positive diagonal")
}

/// `dbar W` in the ambient coordinates:
/// `B[(i, k)] = d c_i / d a_k = 2 a_i delta_ik / a^2 - 2 a_i^2 a_k / a^4`.
///
/// Columns sum to zero over `i`, so the form is tangent to the fibers; use
/// [`VectorValuedForm::restrict_to_fiber`] for the fiber components.
pub fn dbar_w_components(p: &LogPoint) -> VectorValuedForm {
    let a = p.a();
    let a2 = p.a_squared();
    let m = DMatrix::from_fn(a.len(), a.len(), |i, k| {
        let own = if i == k { 2.0 * a[i] / a2 } else { 0.0 };
        Complex::new(own - 2.0 * a[i] * a[i] * a[k] / (a2 * a2), 0.0)
    });
    VectorValuedForm::new(m, FormSpace::Ambient).expect("finite rational functions of a")
}

/// `(4 / a^6) sum_{i != j} a_i^2 a_j^2`, summed over ordered pairs.
pub fn dbar_w_norm_sq_closed(p: &LogPoint) -> f64 {
    let c = w_coefficients(p);
    let mut pairs = 0.0;
    for i in 0..c.len() {
        for j in (i + 1)..c.len() {
            pairs += c[i] * c[j];
        }
    }
    8.0 * pairs / p.a_squared()
}

/// Closed-form `|dbar W|^2`, cross-checked against the contraction of
/// [`dbar_w_components`] with the ambient product metric.
pub fn dbar_w_norm_sq(p: &LogPoint) -> Result<f64> {
    let closed = dbar_w_norm_sq_closed(p);
    let contracted = dbar_w_components(p).norm_sq(&ambient_metric(p))?;
    let discrepancy = ((closed - contracted) / closed).abs();
    if !(discrepancy <= NORM_TOL) {
        return Err(Error::IdentityViolation {
            identity: "dbar W norm",
            discrepancy,
            tolerance: NORM_TOL,
        });
    }
    Ok(closed)
}

/// `|dbar W|^2` with both slots measured by the induced metric of `X_t`.
///
/// Restricting the form slot to the fiber drops its conormal part, so this
/// never exceeds the ambient value and equals it where all `a_k` coincide.
pub fn dbar_w_norm_sq_fiber(p: &LogPoint) -> f64 {
    dbar_w_components(p)
        .restrict_to_fiber()
        .and_then(|b| b.norm_sq(&coordinate_metric(p)))
        .expect("fiber form and induced metric share dimension n")
}

/// `|dbar W|^2` times the density of `omega_t^n` against `prod da_k dtheta_k`.
pub fn wp_integrand(p: &LogPoint) -> f64 {
    dbar_w_norm_sq_closed(p) * volume_density(p)
}

/// RK4 step count for flow time `sigma` at [`DEFAULT_STEPS_PER_UNIT`].
pub fn default_flow_steps(sigma: f64) -> usize {
    ((sigma.abs() * DEFAULT_STEPS_PER_UNIT).ceil() as usize).max(1)
}

fn w_field(a: &[f64], out: &mut [f64]) {
    let a2: f64 = a.iter().map(|x| x * x).sum();
    for (o, x) in out.iter_mut().zip(a) {
        *o = 2.0 * x * x / a2;
    }
}

/// Flow of the real field `W + bar W` for time `sigma`, by RK4 with `steps` steps.
///
/// In log coordinates this is `d a_k / d sigma = 2 a_k^2 / a^2` with the
/// angles fixed; the image lies on the fiber `lt + 2 sigma`. Negative
/// `sigma` runs the inverse flow toward the central fiber.
pub fn flow_map(p: &LogPoint, sigma: f64, steps: usize) -> Result<LogPoint> {
    if !sigma.is_finite() {
        return Err(Error::domain("flow time must be finite"));
    }
    if sigma == 0.0 {
        return Ok(p.clone());
    }
    if steps == 0 {
        return Err(Error::domain("a nonzero flow time needs at least one step"));
    }
    let dim = p.a().len();
    let h = sigma / steps as f64;
    let mut a = p.a().to_vec();
    let (mut k1, mut k2, mut k3, mut k4) = (
        alloc::vec![0.0; dim],
        alloc::vec![0.0; dim],
        alloc::vec![0.0; dim],
        alloc::vec![0.0; dim],
    );
    let mut stage = alloc::vec![0.0; dim];
    let check = |v: &[f64], step: usize| -> Result<()> {
        match v.iter().position(|x| !(*x < 0.0)) {
            Some(k) => Err(Error::domain(format!(
                "flow left the punctured polydisk: a_{k} = {} at step {step}",
                v[k]
            ))),
            None => Ok(()),
        }
    };
    for step in 0..steps {
        w_field(&a, &mut k1);
        for i in 0..dim {
            stage[i] = a[i] + 0.5 * h * k1[i];
        }
        check(&stage, step)?;
        w_field(&stage, &mut k2);
        for i in 0..dim {
            stage[i] = a[i] + 0.5 * h * k2[i];
        }
        check(&stage, step)?;
        w_field(&stage, &mut k3);
        for i in 0..dim {
            stage[i] = a[i] + h * k3[i];
        }
        check(&stage, step)?;
        w_field(&stage, &mut k4);
        for i in 0..dim {
            a[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        check(&a, step)?;
    }
    LogPoint::from_log_moduli(a, p.theta().to_vec())
}
