//! Truncated-fiber volume, the Weil–Petersson ratio, power-law sweeps in
//! `log|t|^2`, and uniform-boundedness scans.
//!
//! Integrals are taken in the rescaled coordinates `b_k = a_k / |lt|`. The
//! angular integral contributes `(2 pi)^n` and the change of variables
//! `|lt|^n`; both are applied here, so a b-space integrand returned by
//! [`volume_b_integrand`] integrates to the fiber volume itself.
//!
//! Every integrand is invariant under permuting `z_0..z_n`, and so is the
//! truncated region. Since `sum_j c_j = 1` with `c_j = b_j^2 / b^2`, the
//! integral splits into `n+1` equal pieces; we integrate `(n+1) c_0 f`, whose
//! `c_0` factor cancels the `b_0^{-2}` singularity on the face
//! `sum b = 1 - eps` that the importance proposal does not cover.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)] // inherent methods take over when std is linked
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::ModelConfig;
use crate::curvature::curvature_sup;
use crate::deformation::{default_flow_steps, flow_map, wp_integrand};
use crate::error::{Error, Result};
use crate::geometry::{frame_metric, grad_phi_frame, phi, phi_bounds, volume_density};
use crate::point::LogPoint;
use crate::quadrature::{mc_integrate_with, IntegralEstimate, McSettings, ShardRunner, TruncatedDomain};

/// Relative slack of the Weil–Petersson ratio check, on top of `3 sigma`.
pub const WP_RATIO_REL_TOL: f64 = 0.05;
/// Largest log-space residual tolerated by a power-law fit.
pub const DEFAULT_MAX_FIT_RESIDUAL: f64 = 0.05;
/// Slack for the closed-form pointwise bounds checked by [`run_bounds_scan`].
pub const BOUND_SLACK: f64 = 1e-12;
/// Flow identities must hold to this multiple of `|lt|`.
pub const FLOW_REL_TOL: f64 = 1e-9;

fn point_from_b(config: &ModelConfig, b: &[f64]) -> Option<LogPoint> {
    let scale = config.lt.abs();
    let tail: Vec<f64> = b.iter().map(|x| -x * scale).collect();
    LogPoint::new(config.lt, &tail, &alloc::vec![0.0; b.len()]).ok()
}

fn pullback<G>(config: &ModelConfig, density: G) -> impl Fn(&[f64]) -> f64 + Sync
where
    G: Fn(&LogPoint) -> f64 + Sync,
{
    let n = config.n;
    let jacobian = (2.0 * PI * config.lt.abs()).powi(n as i32);
    let cfg = *config;
    move |b: &[f64]| match point_from_b(&cfg, b) {
        Some(p) => {
            let c0 = p.a0() * p.a0() / p.a_squared();
            (n as f64 + 1.0) * c0 * density(&p) * jacobian
        }
        None => f64::NAN,
    }
}

/// b-space integrand whose integral over the truncated region is the volume
/// of `X_t ∩ (D*_c)^{n+1}`. Analytically it equals `(n+1)! 2^n |lt|^{-n} prod b_k^{-2}`.
pub fn volume_b_integrand(config: &ModelConfig) -> impl Fn(&[f64]) -> f64 + Sync {
    pullback(config, volume_density)
}

/// b-space integrand whose integral is `∫ |dbar W|^2 omega_t^n` over the truncated fiber.
pub fn wp_b_integrand(config: &ModelConfig) -> impl Fn(&[f64]) -> f64 + Sync {
    pullback(config, wp_integrand)
}

/// Volume of the truncated fiber.
pub fn run_volume(
    config: &ModelConfig,
    settings: &McSettings,
    runner: &dyn ShardRunner,
) -> Result<IntegralEstimate> {
    let dom = TruncatedDomain::new(config)?;
    mc_integrate_with(&volume_b_integrand(config), &dom, settings, runner)
}

/// `value * |log c^2|^n / ((n+1)! 2^n)`, which tends to 1 as `eps -> 0`.
pub fn normalized_volume(config: &ModelConfig, volume: f64) -> f64 {
    let n = config.n;
    let fact: f64 = (1..=n + 1).map(|k| k as f64).product();
    volume * config.log_c2.abs().powi(n as i32) / (fact * 2f64.powi(n as i32))
}

/// `2 n |log c^2| (1 + pi/2) / |lt|^3`, the predicted asymptotic ratio.
pub fn predicted_wp_ratio(config: &ModelConfig) -> f64 {
    2.0 * config.n as f64 * config.log_c2.abs() * (1.0 + PI / 2.0) / config.lt.abs().powi(3)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WpRatio {
    pub ratio: f64,
    pub ratio_std_error: f64,
    pub predicted: f64,
    /// `(ratio - predicted) / predicted`
    pub rel_dev: f64,
    pub volume: IntegralEstimate,
    pub wp_integral: IntegralEstimate,
}

impl WpRatio {
    /// `|ratio - predicted| <= 5% predicted + 3 sigma`.
    pub fn matches_prediction(&self) -> bool {
        (self.ratio - self.predicted).abs() <= WP_RATIO_REL_TOL * self.predicted + 3.0 * self.ratio_std_error
    }
}

/// `∫ |dbar W|^2 omega_t^n / ∫ omega_t^n` over the truncated fiber.
///
/// Numerator and denominator use independent streams, and the ratio error is
/// propagated from both.
pub fn run_wp_ratio(config: &ModelConfig, settings: &McSettings, runner: &dyn ShardRunner) -> Result<WpRatio> {
    let dom = TruncatedDomain::new(config)?;
    let wp_integral = mc_integrate_with(&wp_b_integrand(config), &dom, settings, runner)?;
    let volume = mc_integrate_with(&volume_b_integrand(config), &dom, &settings.reseeded(1), runner)?;
    let ratio = wp_integral.value / volume.value;
    let ratio_std_error = ratio * (wp_integral.rel_error().powi(2) + volume.rel_error().powi(2)).sqrt();
    let predicted = predicted_wp_ratio(config);
    Ok(WpRatio {
        ratio,
        ratio_std_error,
        predicted,
        rel_dev: (ratio - predicted) / predicted,
        volume,
        wp_integral,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepQuantity {
    WpRatio,
    Volume,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub lt: f64,
    pub value: f64,
    pub std_error: f64,
    /// For ratio sweeps, `log C` in `∫ |dbar W / t|^2 omega_t^n = C / (|log|t||^3 |t|^2)`,
    /// computed as `log(ratio * volume) + 3 log(|lt| / 2)` so `|t|` never appears.
    pub log_implied_constant: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub quantity: SweepQuantity,
    pub n: usize,
    pub log_c2: f64,
    pub rows: Vec<SweepRow>,
    pub fitted_exponent: f64,
    pub exponent_std_error: f64,
    /// Largest `|log value - fit|` over the rows.
    pub fit_residual: f64,
    /// `max - min` of the implied log-constants, for ratio sweeps.
    pub implied_constant_spread: Option<f64>,
}

/// Weighted least-squares line through `(x, y)`; returns `(slope, intercept, slope_std_error)`.
pub fn weighted_line_fit(x: &[f64], y: &[f64], w: &[f64]) -> (f64, f64, f64) {
    let sw: f64 = w.iter().sum();
    let xm = x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let ym = y.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for i in 0..x.len() {
        sxx += w[i] * (x[i] - xm) * (x[i] - xm);
        sxy += w[i] * (x[i] - xm) * (y[i] - ym);
    }
    let slope = sxy / sxx;
    (slope, ym - slope * xm, (1.0 / sxx).sqrt())
}

/// Runs `quantity` on each fiber of `lt_list` and fits `log value` against `log |lt|`.
///
/// Rows share `settings`, so neighbouring fibers see common random numbers.
/// Fit weights are the inverse variances of `log value`; exact rows fall back
/// to equal weights.
pub fn run_sweep(
    base: &ModelConfig,
    lt_list: &[f64],
    quantity: SweepQuantity,
    settings: &McSettings,
    runner: &dyn ShardRunner,
    max_residual: f64,
) -> Result<SweepReport> {
    if lt_list.len() < 4 {
        return Err(Error::domain(format!("a sweep needs at least 4 fibers, got {}", lt_list.len())));
    }
    let mags: Vec<f64> = lt_list.iter().map(|x| x.abs()).collect();
    let (lo, hi) = mags
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(l, h), &m| (l.min(m), h.max(m)));
    if !(hi / lo >= 100.0) {
        return Err(Error::domain(format!(
            "a sweep must span at least two decades of |log|t|^2|, got {lo}..{hi}"
        )));
    }
    let mut rows = Vec::with_capacity(lt_list.len());
    for &lt in lt_list {
        let config = base.with_lt(lt)?;
        let row = match quantity {
            SweepQuantity::WpRatio => {
                let r = run_wp_ratio(&config, settings, runner)?;
                SweepRow {
                    lt,
                    value: r.ratio,
                    std_error: r.ratio_std_error,
                    log_implied_constant: Some((r.ratio * r.volume.value).ln() + 3.0 * (lt.abs() / 2.0).ln()),
                }
            }
            SweepQuantity::Volume => {
                let v = run_volume(&config, settings, runner)?;
                SweepRow {
                    lt,
                    value: v.value,
                    std_error: v.std_error,
                    log_implied_constant: None,
                }
            }
        };
        rows.push(row);
    }
    let x: Vec<f64> = rows.iter().map(|r| r.lt.abs().ln()).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.value.ln()).collect();
    let w: Vec<f64> = if rows.iter().all(|r| r.std_error > 0.0) {
        rows.iter().map(|r| (r.value / r.std_error).powi(2)).collect()
    } else {
        alloc::vec![1.0; rows.len()]
    };
    let (slope, intercept, slope_se) = weighted_line_fit(&x, &y, &w);
    let fit_residual = x
        .iter()
        .zip(&y)
        .map(|(xi, yi)| (yi - (intercept + slope * xi)).abs())
        .fold(0.0, f64::max);
    if !slope.is_finite() {
        return Err(Error::Fit {
            residual: f64::INFINITY,
            threshold: max_residual,
        });
    }
    if fit_residual > max_residual {
        return Err(Error::Fit {
            residual: fit_residual,
            threshold: max_residual,
        });
    }
    let logs: Vec<f64> = rows.iter().filter_map(|r| r.log_implied_constant).collect();
    let implied_constant_spread = (!logs.is_empty()).then(|| {
        let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = logs.iter().copied().fold(f64::INFINITY, f64::min);
        max - min
    });
    Ok(SweepReport {
        quantity,
        n: base.n,
        log_c2: base.log_c2,
        rows,
        fitted_exponent: slope,
        exponent_std_error: slope_se,
        fit_residual,
        implied_constant_spread,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub n: usize,
    pub lt: f64,
    pub samples: usize,
    pub phi_range: (f64, f64),
    pub grad_phi_max: f64,
    pub frame_eigen_range: (f64, f64),
    pub curvature_sup: f64,
}

fn check_range(quantity: &'static str, value: f64, lower: f64, upper: f64, p: &LogPoint) -> Result<()> {
    if value >= lower - BOUND_SLACK && value <= upper + BOUND_SLACK {
        Ok(())
    } else {
        Err(Error::InvariantViolation {
            quantity,
            value,
            lower,
            upper,
            b: p.b(),
        })
    }
}

/// Draws a point uniformly from the open b-simplex with uniform angles.
pub fn sample_uniform_point(rng: &mut ChaCha8Rng, lt: f64, n: usize) -> LogPoint {
    loop {
        let e: Vec<f64> = (0..=n).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
        let theta: Vec<f64> = (0..n).map(|_| 2.0 * PI * rng.random::<f64>()).collect();
        if e.iter().any(|x| !(*x > 0.0)) {
            continue;
        }
        let total: f64 = e.iter().sum();
        let tail: Vec<f64> = e[1..].iter().map(|x| lt * x / total).collect();
        if let Ok(p) = LogPoint::new(lt, &tail, &theta) {
            return p;
        }
    }
}

/// Samples `m` points uniformly on the fiber's b-simplex, moves each to its
/// dominant chart, and records the extremes of `phi`, `|W_i phi|`, the frame
/// spectrum and the curvature sup norm. Every closed-form bound is asserted.
pub fn run_bounds_scan(config: &ModelConfig, m: usize, seed: u64) -> Result<BoundsReport> {
    if m < 1000 {
        return Err(Error::domain(format!("a bounds scan needs at least 1000 points, got {m}")));
    }
    let n = config.n;
    let nf = n as f64;
    let (phi_lo, phi_hi) = phi_bounds(n);
    let grad_bound = 4.0 * (nf + 1.0);
    let (eig_lo, eig_hi) = (1.0 / PI, (nf + 1.0) / PI);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = BoundsReport {
        n,
        lt: config.lt,
        samples: m,
        phi_range: (f64::INFINITY, f64::NEG_INFINITY),
        grad_phi_max: 0.0,
        frame_eigen_range: (f64::INFINITY, f64::NEG_INFINITY),
        curvature_sup: 0.0,
    };
    for _ in 0..m {
        let p = sample_uniform_point(&mut rng, config.lt, n).dominant_chart();
        let f = phi(&p);
        check_range("phi", f, phi_lo, phi_hi, &p)?;
        report.phi_range = (report.phi_range.0.min(f), report.phi_range.1.max(f));
        for g in grad_phi_frame(&p)? {
            check_range("|W_i phi|", g.abs(), 0.0, grad_bound, &p)?;
            report.grad_phi_max = report.grad_phi_max.max(g.abs());
        }
        let ev = frame_metric(&p)?.eigenvalues();
        let (lo, hi) = (ev[0], ev[n - 1]);
        check_range("frame eigenvalue", lo, eig_lo, eig_hi, &p)?;
        check_range("frame eigenvalue", hi, eig_lo, eig_hi, &p)?;
        report.frame_eigen_range = (report.frame_eigen_range.0.min(lo), report.frame_eigen_range.1.max(hi));
        report.curvature_sup = report.curvature_sup.max(curvature_sup(&p)?);
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowReport {
    pub n: usize,
    pub lt: f64,
    pub samples: usize,
    pub sigma_max: f64,
    /// Largest `|sum a_k(sigma) - (lt + 2 sigma)|`.
    pub max_sum_error: f64,
    /// Largest `max_k |Phi_{s+u}(p)_k - Phi_u(Phi_s(p))_k|`.
    pub max_composition_error: f64,
    pub tolerance: f64,
}

/// Flows `m` uniform points for random times `s, u` with `s + u <= sigma_max`
/// and checks the conserved sum and the composition law.
///
/// Points too close to a coordinate axis to survive the flow are redrawn.
pub fn run_flow_check(config: &ModelConfig, m: usize, sigma_max: f64, seed: u64) -> Result<FlowReport> {
    if m == 0 {
        return Err(Error::domain("a flow check needs at least one point"));
    }
    if !(sigma_max > 0.0 && sigma_max.is_finite()) {
        return Err(Error::domain(format!("sigma_max must be positive and finite, got {sigma_max}")));
    }
    let n = config.n;
    // |da_k / dsigma| <= 2, so this keeps every coordinate negative along the orbit
    let ceiling = -(2.0 * sigma_max + 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tolerance = FLOW_REL_TOL * config.lt.abs();
    let mut report = FlowReport {
        n,
        lt: config.lt,
        samples: m,
        sigma_max,
        max_sum_error: 0.0,
        max_composition_error: 0.0,
        tolerance,
    };
    let mut draws = 0usize;
    let mut done = 0usize;
    while done < m {
        draws += 1;
        if draws > 100 * m + 1000 {
            return Err(Error::domain(format!(
                "|log|t|^2| = {} is too small to flow for time {sigma_max}",
                config.lt.abs()
            )));
        }
        let p = sample_uniform_point(&mut rng, config.lt, n);
        if p.a().iter().any(|x| *x > ceiling) {
            continue;
        }
        let s = sigma_max * rng.random::<f64>();
        let u = (sigma_max - s) * rng.random::<f64>();
        let direct = flow_map(&p, s + u, default_flow_steps(s + u))?;
        let first = flow_map(&p, s, default_flow_steps(s))?;
        let composed = flow_map(&first, u, default_flow_steps(u))?;
        let sum_err = (direct.lt() - (config.lt + 2.0 * (s + u))).abs();
        let comp_err = direct
            .a()
            .iter()
            .zip(composed.a())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        report.max_sum_error = report.max_sum_error.max(sum_err);
        report.max_composition_error = report.max_composition_error.max(comp_err);
        for (identity, err) in [("sum a_k = lt + 2 sigma", sum_err), ("flow composition", comp_err)] {
            if !(err <= tolerance) {
                return Err(Error::IdentityViolation {
                    identity,
                    discrepancy: err / config.lt.abs(),
                    tolerance: FLOW_REL_TOL,
                });
            }
        }
        done += 1;
    }
    Ok(report)
}
