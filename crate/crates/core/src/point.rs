use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::config::ModelConfig;
use crate::error::{Error, Result};

/// A point of the fiber `X_t` in log coordinates.
///
/// `a[k] = log|z_k|^2` for `k = 0..=n`, all negative, summing to `lt = log|t|^2`.
/// `theta[k-1] = arg z_k` for `k = 1..=n`; `arg z_0` is fixed by `arg t` and
/// never enters a modulus-dependent quantity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogPoint {
    a: Vec<f64>,
    theta: Vec<f64>,
    lt: f64,
}

impl LogPoint {
    /// Builds the point from `lt` and the free log-moduli `a_1..a_n`;
    /// `a_0 = lt - sum a_k` is reconstructed.
    pub fn new(lt: f64, tail: &[f64], theta: &[f64]) -> Result<Self> {
        if tail.is_empty() {
            return Err(Error::domain("a fiber point needs n >= 1 free coordinates"));
        }
        if theta.len() != tail.len() {
            return Err(Error::domain(format!(
                "theta has {} entries, expected n = {}",
                theta.len(),
                tail.len()
            )));
        }
        let a0 = lt - tail.iter().sum::<f64>();
        let mut a = Vec::with_capacity(tail.len() + 1);
        a.push(a0);
        a.extend_from_slice(tail);
        Self::checked(a, theta.to_vec(), lt)
    }

    /// Builds the point from all `n+1` log-moduli; `lt` is their sum.
    pub fn from_log_moduli(a: Vec<f64>, theta: Vec<f64>) -> Result<Self> {
        if a.len() < 2 || theta.len() + 1 != a.len() {
            return Err(Error::domain(format!(
                "need n+1 >= 2 log-moduli and n angles, got {} and {}",
                a.len(),
                theta.len()
            )));
        }
        let lt = a.iter().sum();
        Self::checked(a, theta, lt)
    }

    fn checked(a: Vec<f64>, theta: Vec<f64>, lt: f64) -> Result<Self> {
        if let Some((k, &ak)) = a.iter().enumerate().find(|(_, &ak)| !(ak < 0.0) || !ak.is_finite()) {
            return Err(Error::domain(format!(
                "a_{k} = {ak} is not a finite negative number; the point leaves the punctured polydisk"
            )));
        }
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::domain("angles must be finite"));
        }
        Ok(LogPoint { a, theta, lt })
    }

    /// Fiber complex dimension.
    pub fn n(&self) -> usize {
        self.theta.len()
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn a0(&self) -> f64 {
        self.a[0]
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    /// `log|t|^2` of the fiber containing the point.
    pub fn lt(&self) -> f64 {
        self.lt
    }

    /// `a^2 = sum_k a_k^2`, always within `[lt^2/(n+1), lt^2]`.
    pub fn a_squared(&self) -> f64 {
        self.a.iter().map(|x| x * x).sum()
    }

    /// Rescaled log-moduli `b_k = a_k / |lt|` for `k = 0..=n`.
    pub fn b(&self) -> Vec<f64> {
        let s = self.lt.abs();
        self.a.iter().map(|x| -x / s).collect()
    }

    /// Index of the largest `a_k^2`, lowest index on ties.
    pub fn dominant_index(&self) -> usize {
        let mut best = 0;
        for (k, ak) in self.a.iter().enumerate() {
            if ak * ak > self.a[best] * self.a[best] {
                best = k;
            }
        }
        best
    }

    /// True when slot 0 carries the largest `a_k^2`.
    pub fn is_chart_valid(&self) -> bool {
        self.dominant_index() == 0
    }

    /// The same geometric point with the dominant coordinate moved to slot 0,
    /// so that it is the one eliminated by `prod z_k = t`.
    ///
    /// The model is symmetric in `z_0..z_n`, so relabelling is an isometry.
    /// The angle of the coordinate that moves out of slot 0 is taken with
    /// `arg t = 0`.
    pub fn dominant_chart(&self) -> LogPoint {
        let j = self.dominant_index();
        if j == 0 {
            return self.clone();
        }
        let mut a = self.a.clone();
        a.swap(0, j);
        let mut theta = self.theta.clone();
        let theta0 = -self.theta.iter().sum::<f64>();
        theta[j - 1] = wrap_angle(theta0);
        LogPoint {
            a,
            theta,
            lt: self.lt,
        }
    }

    /// Image under `a -> lambda a`, which maps the fiber `lt` onto `lambda lt`.
    pub fn rescaled(&self, lambda: f64) -> Result<LogPoint> {
        if !(lambda > 0.0) {
            return Err(Error::domain(format!("rescaling factor {lambda} must be positive")));
        }
        Self::checked(
            self.a.iter().map(|x| x * lambda).collect(),
            self.theta.clone(),
            self.lt * lambda,
        )
    }

    pub fn with_theta(&self, theta: &[f64]) -> Result<LogPoint> {
        if theta.len() != self.n() {
            return Err(Error::domain("theta length must equal n"));
        }
        Self::checked(self.a.clone(), theta.to_vec(), self.lt)
    }

    /// Moves free coordinate `k` (1-based) by `delta` inside the same fiber;
    /// `a_0` absorbs the change.
    pub(crate) fn shifted(&self, k: usize, delta: f64) -> LogPoint {
        let mut a = self.a.clone();
        a[k] += delta;
        a[0] -= delta;
        LogPoint {
            a,
            theta: self.theta.clone(),
            lt: self.lt,
        }
    }
}

fn wrap_angle(x: f64) -> f64 {
    let r = x % (2.0 * PI);
    if r < 0.0 {
        r + 2.0 * PI
    } else {
        r
    }
}

/// Builds a fiber point from rescaled coordinates `b_k = a_k / |lt|`, `k = 1..=n`.
pub fn make_point(b: &[f64], theta: &[f64], config: &ModelConfig) -> Result<LogPoint> {
    if b.len() != config.n {
        return Err(Error::domain(format!("b has {} entries, expected n = {}", b.len(), config.n)));
    }
    if let Some(bk) = b.iter().find(|&&bk| !(bk > 0.0 && bk < 1.0)) {
        return Err(Error::domain(format!("b_k = {bk} must lie in (0, 1)")));
    }
    let total: f64 = b.iter().sum();
    if !(total < 1.0) {
        return Err(Error::domain(format!("sum of b_k = {total} must be below 1")));
    }
    let scale = config.lt.abs();
    let tail: Vec<f64> = b.iter().map(|bk| -bk * scale).collect();
    LogPoint::new(config.lt, &tail, theta)
}
