//! Kähler curvature of `g_t`.
//!
//! The Hermitian components used here are `g_{ij} = G_ij / 2`, i.e. the
//! complexification of the Riemannian metric `Re sum G_jk dw_j dbar w_k`. In
//! this normalization the orthonormalized holomorphic sectional curvature of
//! a curve equals its Gaussian curvature; a single cusp factor
//! `|dw|^2 / (pi a^2)` has `K = -4 pi`.
//!
//! Since every metric coefficient is a rational function of the log-moduli and
//! `d a_j / d w_k = d a_j / d bar w_k = delta_jk` (with `a_0` absorbing the
//! change), all derivatives are taken analytically. A finite-difference route
//! is kept as an oracle.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::DMatrix;
#[allow(unused_imports)] // inherent methods take over when std is linked
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::coordinate_matrix;
use crate::hermitian::{Basis, HermitianForm};
use crate::point::LogPoint;

/// Relative frame step of the finite-difference oracle.
pub const FD_STEP: f64 = 1e-3;

/// Rank-4 real tensor `R[i][j][k][l] = R_{i jbar k lbar}` of dimension `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureTensor {
    n: usize,
    data: Vec<f64>,
}

impl CurvatureTensor {
    fn zeros(n: usize) -> Self {
        CurvatureTensor {
            n,
            data: vec![0.0; n * n * n * n],
        }
    }

    fn idx(&self, i: usize, j: usize, k: usize, l: usize) -> usize {
        ((i * self.n + j) * self.n + k) * self.n + l
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.data[self.idx(i, j, k, l)]
    }

    fn set(&mut self, i: usize, j: usize, k: usize, l: usize, v: f64) {
        let at = self.idx(i, j, k, l);
        self.data[at] = v;
    }

    /// Largest absolute component.
    pub fn sup_norm(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Largest absolute componentwise difference.
    pub fn max_abs_diff(&self, other: &CurvatureTensor) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (x, y)| m.max((x - y).abs()))
    }

    /// Components in the frame `S e_a` where `S = g^{-1/2}`.
    fn orthonormalized(&self, s: &DMatrix<f64>) -> CurvatureTensor {
        let n = self.n;
        // contract one index at a time
        let mut cur = self.clone();
        for slot in 0..4 {
            let mut next = CurvatureTensor::zeros(n);
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        for l in 0..n {
                            let mut acc = 0.0;
                            for m in 0..n {
                                let (src, coef) = match slot {
                                    0 => ((m, j, k, l), s[(m, i)]),
                                    1 => ((i, m, k, l), s[(m, j)]),
                                    2 => ((i, j, m, l), s[(m, k)]),
                                    _ => ((i, j, k, m), s[(m, l)]),
                                };
                                acc += coef * cur.get(src.0, src.1, src.2, src.3);
                            }
                            next.set(i, j, k, l, acc);
                        }
                    }
                }
            }
            cur = next;
        }
        cur
    }
}

/// First and second derivatives of the metric along `D_k = d/da_k - d/da_0`.
struct MetricJet {
    metric: DMatrix<f64>,
    /// `d1[k][(i, j)] = D_k g_ij`
    d1: Vec<DMatrix<f64>>,
    /// `d2[k * n + l][(i, j)] = D_k D_l g_ij`
    d2: Vec<DMatrix<f64>>,
}

fn riemannian_components(p: &LogPoint) -> DMatrix<f64> {
    coordinate_matrix(p) * 0.5
}

fn analytic_jet(p: &LogPoint) -> MetricJet {
    let n = p.n();
    let a = p.a();
    let c = 1.0 / (2.0 * PI);
    let a0 = a[0];
    let d1 = (0..n)
        .map(|k| {
            DMatrix::from_fn(n, n, |i, j| {
                let own = if i == j && j == k { -2.0 / a[i + 1].powi(3) } else { 0.0 };
                c * (own + 2.0 / a0.powi(3))
            })
        })
        .collect();
    let mut d2 = Vec::with_capacity(n * n);
    for k in 0..n {
        for l in 0..n {
            d2.push(DMatrix::from_fn(n, n, |i, j| {
                let own = if i == j && j == k && k == l { 6.0 / a[i + 1].powi(4) } else { 0.0 };
                c * (own + 6.0 / a0.powi(4))
            }));
        }
    }
    MetricJet {
        metric: riemannian_components(p),
        d1,
        d2,
    }
}

/// Central differences with step `h |a_k|` along direction `k`.
fn finite_difference_jet(p: &LogPoint, h: f64) -> MetricJet {
    let n = p.n();
    let step: Vec<f64> = p.a()[1..].iter().map(|x| h * x.abs()).collect();
    let g = |q: &LogPoint| riemannian_components(q);
    let centre = g(p);
    let d1 = (0..n)
        .map(|k| {
            let s = step[k];
            (g(&p.shifted(k + 1, s)) - g(&p.shifted(k + 1, -s))) / (2.0 * s)
        })
        .collect();
    let mut d2 = Vec::with_capacity(n * n);
    for k in 0..n {
        for l in 0..n {
            let (sk, sl) = (step[k], step[l]);
            let m = if k == l {
                (g(&p.shifted(k + 1, sk)) - &centre * 2.0 + g(&p.shifted(k + 1, -sk))) / (sk * sk)
            } else {
                let pp = g(&p.shifted(k + 1, sk).shifted(l + 1, sl));
                let pm = g(&p.shifted(k + 1, sk).shifted(l + 1, -sl));
                let mp = g(&p.shifted(k + 1, -sk).shifted(l + 1, sl));
                let mm = g(&p.shifted(k + 1, -sk).shifted(l + 1, -sl));
                (pp - pm - mp + mm) / (4.0 * sk * sl)
            };
            d2.push(m);
        }
    }
    MetricJet {
        metric: centre,
        d1,
        d2,
    }
}

/// `R_{i jbar k lbar} = -d_k dbar_l g_{i jbar} + g^{p qbar} (d_k g_{i qbar}) (dbar_l g_{p jbar})`,
/// then orthonormalized with `g^{-1/2}`.
fn assemble(jet: &MetricJet, n: usize) -> CurvatureTensor {
    let form = HermitianForm::from_real(jet.metric.clone(), Basis::CoordinateW)
        .expect("metric is positive definite");
    let inv = form.inverse().map(|z| z.re);
    let s = form.inverse_sqrt().map(|z| z.re);
    let mut r = CurvatureTensor::zeros(n);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let mut quad = 0.0;
                    for pp in 0..n {
                        for q in 0..n {
                            quad += inv[(pp, q)] * jet.d1[k][(i, q)] * jet.d1[l][(pp, j)];
                        }
                    }
                    r.set(i, j, k, l, -jet.d2[k * n + l][(i, j)] + quad);
                }
            }
        }
    }
    r.orthonormalized(&s)
}

/// Orthonormalized curvature tensor from the analytic derivatives.
pub fn curvature_tensor(p: &LogPoint) -> CurvatureTensor {
    assemble(&analytic_jet(p), p.n())
}

/// Orthonormalized curvature tensor from finite differences with relative frame step `h`.
pub fn curvature_tensor_fd(p: &LogPoint, h: f64) -> CurvatureTensor {
    assemble(&finite_difference_jet(p, h), p.n())
}

/// Allowed gap between the two routes for relative step `h`.
pub fn fd_tolerance(h: f64, scale: f64) -> f64 {
    1e-6f64.max(10.0 * h * h) * scale
}

/// Sup norm of the orthonormalized curvature tensor, cross-checked against
/// the finite-difference route.
pub fn curvature_sup(p: &LogPoint) -> Result<f64> {
    let analytic = curvature_tensor(p);
    let sup = analytic.sup_norm();
    let fd = curvature_tensor_fd(p, FD_STEP);
    let gap = analytic.max_abs_diff(&fd);
    let tol = fd_tolerance(FD_STEP, sup);
    if !(gap <= tol) {
        return Err(Error::IdentityViolation {
            identity: "analytic vs finite-difference curvature",
            discrepancy: gap / sup,
            tolerance: tol / sup,
        });
    }
    Ok(sup)
}

/// Curvature sup norms over a set of points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvatureReport {
    pub sup_norm: f64,
    pub per_point: Vec<(LogPoint, f64)>,
}

impl CurvatureReport {
    pub fn measure<'a>(points: impl IntoIterator<Item = &'a LogPoint>) -> Result<Self> {
        let per_point = points
            .into_iter()
            .map(|p| curvature_sup(p).map(|s| (p.clone(), s)))
            .collect::<Result<Vec<_>>>()?;
        let sup_norm = per_point.iter().fold(0.0, |m: f64, (_, s)| m.max(*s));
        Ok(CurvatureReport { sup_norm, per_point })
    }
}
