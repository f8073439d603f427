//! Integration over the truncated fiber in rescaled coordinates
//! `b_k = a_k / |log|t|^2|`.
//!
//! The truncated fiber `X_t ∩ (D*_c)^{n+1}` becomes
//! `{ b in R^n : b_k >= eps, sum b_k <= 1 - eps }` with `eps = log c^2 / log|t|^2`.
//! Integrands of interest either carry a `prod b_k^{-2}` weight that piles up
//! on the faces `b_k = eps`, or stay bounded there. The Monte Carlo proposal is
//! an even per-coordinate mixture of `b^{-2}` and uniform, which keeps weights
//! bounded for both shapes at every `eps`.
//!
//! Sampling is split into shards. Shard `s` draws from the ChaCha8 stream `s`
//! of the generator seeded with `seed`, and shard tallies are merged in shard
//! order, so an estimate depends only on `(f, domain, samples, seed, shards)`
//! and never on how shards are scheduled.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // inherent methods take over when std is linked
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::ModelConfig;
use crate::error::{Error, Result};

/// Fewest proposals accepted by [`mc_integrate`].
pub const MIN_SAMPLES: u64 = 1000;
/// Rejection acceptance below this rate is reported as a sampler failure.
pub const MIN_ACCEPTANCE: f64 = 1e-4;
/// Probability of the `b^{-2}` component in each coordinate's proposal.
pub const FACE_WEIGHT: f64 = 0.5;
pub const DEFAULT_SHARDS: usize = 64;

/// `{ b : b_k >= eps, sum b_k <= 1 - eps }`, so that `b_0 = 1 - sum b_k >= eps` too.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncatedDomain {
    pub n: usize,
    pub eps: f64,
}

impl TruncatedDomain {
    pub fn new(config: &ModelConfig) -> Result<Self> {
        config.validate()?;
        Ok(TruncatedDomain {
            n: config.n,
            eps: config.eps(),
        })
    }

    pub fn contains(&self, b: &[f64]) -> bool {
        b.len() == self.n && b.iter().all(|&x| x >= self.eps) && b.iter().sum::<f64>() <= 1.0 - self.eps
    }

    /// Side length of the simplex `{u >= 0, sum u <= side}` obtained by `u = b - eps`.
    pub fn side(&self) -> f64 {
        1.0 - (self.n as f64 + 1.0) * self.eps
    }

    /// Largest value any single `b_k` reaches in the region.
    fn coordinate_max(&self) -> f64 {
        1.0 - self.n as f64 * self.eps
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    MonteCarlo,
    Exact1D,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegralEstimate {
    pub value: f64,
    pub std_error: f64,
    pub samples: u64,
    pub method: Method,
}

impl IntegralEstimate {
    pub fn exact(value: f64) -> Self {
        IntegralEstimate {
            value,
            std_error: 0.0,
            samples: 0,
            method: Method::Exact1D,
        }
    }

    /// Relative standard error.
    pub fn rel_error(&self) -> f64 {
        self.std_error / self.value.abs()
    }
}

/// Running mean and second moment of importance weights (Welford).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ShardTally {
    pub proposals: u64,
    pub accepted: u64,
    mean: f64,
    m2: f64,
}

impl ShardTally {
    pub fn push(&mut self, weight: f64, accepted: bool) {
        self.proposals += 1;
        self.accepted += accepted as u64;
        let delta = weight - self.mean;
        self.mean += delta / self.proposals as f64;
        self.m2 += delta * (weight - self.mean);
    }

    /// Pairwise combination of two tallies.
    pub fn merge(&self, other: &ShardTally) -> ShardTally {
        if self.proposals == 0 {
            return *other;
        }
        if other.proposals == 0 {
            return *self;
        }
        let (na, nb) = (self.proposals as f64, other.proposals as f64);
        let n = na + nb;
        let delta = other.mean - self.mean;
        ShardTally {
            proposals: self.proposals + other.proposals,
            accepted: self.accepted + other.accepted,
            mean: self.mean + delta * nb / n,
            m2: self.m2 + other.m2 + delta * delta * na * nb / n,
        }
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Standard error of the mean.
    pub fn std_error(&self) -> f64 {
        if self.proposals < 2 {
            return f64::INFINITY;
        }
        let n = self.proposals as f64;
        (self.m2 / (n - 1.0) / n).sqrt()
    }
}

/// Executes independent shard jobs. Implementations may run them in any
/// order or in parallel but must return results indexed by shard.
pub trait ShardRunner {
    fn run_shards(&self, shards: usize, job: &(dyn Fn(usize) -> ShardTally + Sync)) -> Vec<ShardTally>;
}

/// Runs shards one after another on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Serial;

impl ShardRunner for Serial {
    fn run_shards(&self, shards: usize, job: &(dyn Fn(usize) -> ShardTally + Sync)) -> Vec<ShardTally> {
        (0..shards).map(job).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct McSettings {
    pub samples: u64,
    pub seed: u64,
    pub shards: usize,
}

impl McSettings {
    pub fn new(samples: u64, seed: u64) -> Self {
        McSettings {
            samples,
            seed,
            shards: DEFAULT_SHARDS,
        }
    }

    /// Same sample budget on an independent family of streams.
    pub fn reseeded(&self, salt: u64) -> Self {
        McSettings {
            seed: self.seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15),
            ..*self
        }
    }

    fn shard_len(&self, shard: usize) -> u64 {
        let shards = self.shards as u64;
        self.samples / shards + u64::from((shard as u64) < self.samples % shards)
    }
}

/// Importance-sampled integral of `f` over `dom` with `samples` proposals,
/// `DEFAULT_SHARDS` shards, run serially.
pub fn mc_integrate<F>(f: &F, dom: &TruncatedDomain, samples: u64, seed: u64) -> Result<IntegralEstimate>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    mc_integrate_with(f, dom, &McSettings::new(samples, seed), &Serial)
}

/// Importance-sampled integral of `f` over `dom`.
///
/// Each coordinate is drawn on `[eps, 1 - n eps]`, with probability
/// [`FACE_WEIGHT`] from the density proportional to `b^{-2}` (by inverting its CDF) and
/// otherwise uniformly. Proposals outside `sum b <= 1 - eps` count as
/// zero-weight samples. The mean weight is an unbiased estimate of the integral.
pub fn mc_integrate_with<F>(
    f: &F,
    dom: &TruncatedDomain,
    settings: &McSettings,
    runner: &dyn ShardRunner,
) -> Result<IntegralEstimate>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if settings.samples < MIN_SAMPLES {
        return Err(Error::domain(format!(
            "at least {MIN_SAMPLES} samples are required, got {}",
            settings.samples
        )));
    }
    if settings.shards == 0 {
        return Err(Error::domain("shard count must be positive"));
    }
    let eps = dom.eps;
    if !(eps > 0.0 && eps < 1.0 / (dom.n as f64 + 1.0)) {
        return Err(Error::domain(format!("eps = {eps} leaves an empty region")));
    }
    let lo_inv = 1.0 / eps;
    let hi = dom.coordinate_max();
    let norm = lo_inv - 1.0 / hi;
    let width = hi - eps;
    let upper = 1.0 - eps;
    let n = dom.n;

    let job = |shard: usize| {
        let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
        rng.set_stream(shard as u64);
        let mut b = vec![0.0; n];
        let mut tally = ShardTally::default();
        for _ in 0..settings.shard_len(shard) {
            let mut density = 1.0;
            for bk in b.iter_mut() {
                let u: f64 = rng.random();
                *bk = if rng.random::<f64>() < FACE_WEIGHT {
                    1.0 / (lo_inv - u * norm)
                } else {
                    eps + u * width
                };
                density *= FACE_WEIGHT / (*bk * *bk * norm) + (1.0 - FACE_WEIGHT) / width;
            }
            let inside = b.iter().sum::<f64>() <= upper;
            let weight = if inside { f(&b) / density } else { 0.0 };
            tally.push(weight, inside);
        }
        tally
    };

    let tallies = runner.run_shards(settings.shards, &job);
    if tallies.len() != settings.shards {
        return Err(Error::domain("shard runner returned the wrong number of tallies"));
    }
    let total = tallies.iter().fold(ShardTally::default(), |acc, t| acc.merge(t));
    let rate = total.accepted as f64 / total.proposals as f64;
    if rate < MIN_ACCEPTANCE {
        return Err(Error::Sampler {
            rate,
            minimum: MIN_ACCEPTANCE,
        });
    }
    let value = total.mean();
    // Rounding in the running means, which dominates when the weights are
    // (nearly) constant and the sample variance vanishes.
    let rounding = f64::EPSILON * value.abs() * (settings.shard_len(0) as f64).sqrt();
    let std_error = total.std_error().hypot(rounding);
    if !value.is_finite() || !std_error.is_finite() {
        return Err(Error::domain("integrand produced a non-finite estimate"));
    }
    Ok(IntegralEstimate {
        value,
        std_error,
        samples: total.proposals,
        method: Method::MonteCarlo,
    })
}

/// Exact volume of the truncated fiber for `n = 1`: `(4/|lt|)(1/eps - 1/(1-eps))`.
pub fn exact_volume_n1(config: &ModelConfig) -> Result<f64> {
    let dom = TruncatedDomain::new(config)?;
    if dom.n != 1 {
        return Err(Error::domain(format!("closed-form volume needs n = 1, got n = {}", dom.n)));
    }
    let eps = dom.eps;
    Ok(4.0 / config.lt.abs() * (1.0 / eps - 1.0 / (1.0 - eps)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dom(n: usize, eps: f64) -> TruncatedDomain {
        TruncatedDomain { n, eps }
    }

    #[test]
    fn domain_from_config() {
        let d = TruncatedDomain::new(&ModelConfig::with_radius(1, -460.517, 0.1).unwrap()).unwrap();
        assert!((d.eps - 0.01).abs() < 1e-6);
        assert!(d.contains(&[0.011]) && d.contains(&[0.985]) && !d.contains(&[0.995]));
        let d = TruncatedDomain::new(&ModelConfig::new(1, -20.0, -2.0).unwrap()).unwrap();
        assert!((d.eps - 0.1).abs() < 1e-15);
        let bad = ModelConfig { n: 2, lt: -5.0, log_c2: -2.0 };
        assert!(matches!(TruncatedDomain::new(&bad), Err(Error::Domain(_))));
    }

    #[test]
    fn constant_and_inverse_square_in_one_dimension() {
        let d = dom(1, 0.1);
        let est = mc_integrate(&|_: &[f64]| 1.0, &d, 100_000, 3).unwrap();
        assert!((est.value - 0.8).abs() < 3.0 * est.std_error, "{est:?}");
        // the b^{-2} component bounds the weights of 1/b^2
        let est = mc_integrate(&|b: &[f64]| 1.0 / (b[0] * b[0]), &d, 100_000, 3).unwrap();
        assert!((est.value - (10.0 - 1.0 / 0.9)).abs() < 3.0 * est.std_error);
        assert!(est.std_error < 2e-3 * est.value);
        assert!((10.0f64 - 1.0 / 0.9 - 8.8889).abs() < 1e-4);
    }

    #[test]
    fn same_seed_same_bits() {
        let d = dom(2, 0.05);
        let f = |b: &[f64]| b[0] + b[1] * b[1];
        let x = mc_integrate(&f, &d, 10_000, 11).unwrap();
        let y = mc_integrate(&f, &d, 10_000, 11).unwrap();
        assert_eq!(x.value.to_bits(), y.value.to_bits());
        assert_eq!(x.std_error.to_bits(), y.std_error.to_bits());
        let z = mc_integrate(&f, &d, 10_000, 12).unwrap();
        assert_ne!(x.value, z.value);
    }

    #[test]
    fn rejects_tiny_budgets() {
        assert!(mc_integrate(&|_: &[f64]| 1.0, &dom(1, 0.1), 10, 0).is_err());
    }

    #[test]
    fn merge_matches_sequential_tally() {
        let xs = [1.0, 4.0, -2.0, 0.5, 9.0, 3.0, 3.0];
        let mut whole = ShardTally::default();
        xs.iter().for_each(|&x| whole.push(x, true));
        let (mut l, mut r) = (ShardTally::default(), ShardTally::default());
        xs[..3].iter().for_each(|&x| l.push(x, true));
        xs[3..].iter().for_each(|&x| r.push(x, true));
        let m = l.merge(&r);
        assert!((m.mean() - whole.mean()).abs() < 1e-14);
        assert!((m.std_error() - whole.std_error()).abs() < 1e-14);
    }

    // Oracle: monomial integrals over the simplex {u >= 0, sum u <= L},
    // int prod u_k^{m_k} du = prod m_k! / (|m| + n)! * L^{|m| + n}.
    fn simplex_monomial(n: usize, powers: &[u32], side: f64) -> f64 {
        let fact = |k: u32| (1..=k).map(|x| x as f64).product::<f64>();
        let total: u32 = powers.iter().sum();
        let num: f64 = powers.iter().map(|&m| fact(m)).product();
        num / fact(total + n as u32) * side.powi((total + n as u32) as i32)
    }

    #[test]
    fn polynomials_match_exact_simplex_integrals() {
        // f(b) = 1 + 3 u_1 - 2 u_1 u_n + 5 u_1^2 with u = b - eps
        for n in 1..=3usize {
            for eps in [0.02, 0.1] {
                let d = dom(n, eps);
                let side = d.side();
                let mut p1 = vec![0u32; n];
                p1[0] = 1;
                let mut p11 = vec![0u32; n];
                p11[0] += 1;
                p11[n - 1] += 1;
                let mut p2 = vec![0u32; n];
                p2[0] = 2;
                let exact = simplex_monomial(n, &vec![0; n], side) + 3.0 * simplex_monomial(n, &p1, side)
                    - 2.0 * simplex_monomial(n, &p11, side)
                    + 5.0 * simplex_monomial(n, &p2, side);
                let f = move |b: &[f64]| {
                    let u1 = b[0] - eps;
                    let un = b[n - 1] - eps;
                    1.0 + 3.0 * u1 - 2.0 * u1 * un + 5.0 * u1 * u1
                };
                let misses = (0..100u64)
                    .filter(|&seed| {
                        let est = mc_integrate(&f, &d, 20_000, seed).unwrap();
                        (est.value - exact).abs() > 3.0 * est.std_error
                    })
                    .count();
                // 0.27 misses expected; 4 or more has probability ~2.5e-4
                assert!(misses <= 3, "n = {n}, eps = {eps}: {misses} seeds outside 3 sigma");
            }
        }
    }

    #[test]
    fn standard_error_scales_as_inverse_root_n() {
        let d = dom(2, 0.05);
        let f = |b: &[f64]| 1.0 + b[0] * b[1];
        let small = mc_integrate(&f, &d, 40_000, 5).unwrap();
        let large = mc_integrate(&f, &d, 80_000, 5).unwrap();
        let ratio = large.std_error / small.std_error;
        assert!((0.6..=0.82).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn exact_volume_examples() {
        let v = exact_volume_n1(&ModelConfig::new(1, -20.0, -2.0).unwrap()).unwrap();
        assert!((v - 0.2 * (10.0 - 1.0 / 0.9)).abs() < 1e-14);
        assert!((v - 1.77778).abs() < 1e-5);
        // eps -> 0 gives 4 / |log c^2|
        let v = exact_volume_n1(&ModelConfig::new(1, -2.0e9, -2.0).unwrap()).unwrap();
        assert!((v - 2.0).abs() < 1e-8);
        assert!(exact_volume_n1(&ModelConfig::new(2, -20.0, -2.0).unwrap()).is_err());
    }

    #[test]
    fn mc_volume_n1_agrees_with_closed_form() {
        let cfg = ModelConfig::new(1, -20.0, -2.0).unwrap();
        let d = TruncatedDomain::new(&cfg).unwrap();
        let pref = 4.0 / 20.0;
        let est = mc_integrate(&|b: &[f64]| pref / (b[0] * b[0]), &d, 10_000, 1).unwrap();
        let exact = exact_volume_n1(&cfg).unwrap();
        assert!((est.value - exact).abs() <= 3.0 * est.std_error);
    }
}
