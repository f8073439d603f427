use alloc::format;
#[allow(unused_imports)] // inherent methods take over when std is linked
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The triple `(n, log|t|^2, log c^2)` fixing a fiber and its truncation.
///
/// Both `t` and `c` are stored through their logs: `lt = log|t|^2` and
/// `log_c2 = log c^2`. The truncation parameter is `eps = log_c2 / lt`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub n: usize,
    pub lt: f64,
    pub log_c2: f64,
}

impl ModelConfig {
    pub fn new(n: usize, lt: f64, log_c2: f64) -> Result<Self> {
        let config = ModelConfig { n, lt, log_c2 };
        config.validate()?;
        Ok(config)
    }

    /// Builds a config from the truncation radius `c` itself.
    pub fn with_radius(n: usize, lt: f64, c: f64) -> Result<Self> {
        if !(c > 0.0 && c < 1.0) {
            return Err(Error::domain(format!("truncation radius c = {c} must lie in (0, 1)")));
        }
        Self::new(n, lt, 2.0 * c.ln())
    }

    pub fn eps(&self) -> f64 {
        self.log_c2 / self.lt
    }

    /// Checks `n >= 1`, `lt < log c^2 < 0` and `eps < 1/(n+1)`.
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::domain("fiber dimension n must be at least 1"));
        }
        if !self.lt.is_finite() || !self.log_c2.is_finite() {
            return Err(Error::domain("log|t|^2 and log c^2 must be finite"));
        }
        if !(self.log_c2 < 0.0) {
            return Err(Error::domain(format!("log c^2 = {} must be negative", self.log_c2)));
        }
        if !(self.lt < self.log_c2) {
            return Err(Error::domain(format!(
                "log|t|^2 = {} must be below log c^2 = {}",
                self.lt, self.log_c2
            )));
        }
        let eps = self.eps();
        let limit = 1.0 / (self.n as f64 + 1.0);
        if eps >= limit {
            return Err(Error::domain(format!(
                "eps = {eps} >= 1/(n+1) = {limit}: the truncated fiber is empty"
            )));
        }
        Ok(())
    }

    /// Same `n` and `c`, different fiber.
    pub fn with_lt(&self, lt: f64) -> Result<Self> {
        Self::new(self.n, lt, self.log_c2)
    }
}
