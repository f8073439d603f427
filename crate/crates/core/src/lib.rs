//! Model geometry of the degenerating family `X_t = {z_0 z_1 ... z_n = t}` inside
//! the punctured polydisk, carried entirely in log coordinates.
//!
//! Every pointwise quantity is a function of the log-moduli `a_k = log|z_k|^2`
//! and of `log|t|^2 = sum a_k`, so `|t|` is never materialized and fibers with
//! `|t| ~ e^{-10^4}` are as cheap as `|t| ~ 0.1`.
//!
//! The crate is `no_std` (with `alloc`). Parallel shard execution, file formats
//! and the command line live in the companion `degen` crate.
#![no_std]
// `!(x < y)` is used deliberately so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod config;
pub mod curvature;
pub mod deformation;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod hermitian;
pub mod point;
pub mod quadrature;

pub use config::ModelConfig;
pub use curvature::{curvature_sup, curvature_tensor, CurvatureReport, CurvatureTensor};
pub use deformation::{
    dbar_w_components, dbar_w_norm_sq, dbar_w_norm_sq_fiber, flow_map, w_coefficients,
    wp_integrand, FormSpace, VectorValuedForm,
};
pub use error::{Error, Result};
pub use experiments::{
    predicted_wp_ratio, run_bounds_scan, run_flow_check, run_sweep, run_volume, run_wp_ratio,
    BoundsReport, FlowReport, SweepQuantity, SweepReport, SweepRow, WpRatio,
};
pub use geometry::{
    coordinate_metric, frame_metric, grad_phi_frame, metric_determinant, phi, volume_density,
};
pub use hermitian::{Basis, HermitianForm};
pub use point::{make_point, LogPoint};
pub use quadrature::{
    exact_volume_n1, mc_integrate, IntegralEstimate, McSettings, Method, Serial, ShardRunner,
    ShardTally, TruncatedDomain,
};
