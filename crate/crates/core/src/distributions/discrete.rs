//! Exact sampling from the discrete Gaussian on ℤ.
//!
//! Rejection sampling from a discrete Laplace proposal, following Canonne,
//! Kamath and Steinke, "The Discrete Gaussian for Differential Privacy"
//! (2020), Algorithms 2 and 3. The Bernoulli(exp(-x)) coins are drawn with
//! 64-bit uniforms; no continuous Gaussian is ever rounded.

use rand::Rng;

use crate::error::{check_positive, Error, Result};
use crate::rng::RngStream;

/// p.m.f. ∝ exp(-(z - location)² / (2·scale_sq)) on the integers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscreteGaussianParams {
    location: i64,
    scale_sq: f64,
}

impl DiscreteGaussianParams {
    /// Largest supported σ², keeping every draw well inside i64.
    pub const MAX_SCALE_SQ: f64 = 1e24;
    const MAX_LOCATION: i64 = 1 << 62;

    pub fn new(location: i64, scale_sq: f64) -> Result<Self> {
        check_positive("scale_sq", scale_sq)?;
        if scale_sq > Self::MAX_SCALE_SQ {
            return Err(Error::param(
                "scale_sq",
                format!("must not exceed {:e}, got {scale_sq:e}", Self::MAX_SCALE_SQ),
            ));
        }
        if location.unsigned_abs() > Self::MAX_LOCATION as u64 {
            return Err(Error::param("location", "magnitude must not exceed 2^62"));
        }
        Ok(Self { location, scale_sq })
    }

    pub fn location(&self) -> i64 {
        self.location
    }

    pub fn scale_sq(&self) -> f64 {
        self.scale_sq
    }
}

fn bernoulli_exp_neg(x: f64, rng: &mut RngStream) -> bool {
    rng.random::<f64>() < (-x).exp()
}

/// Discrete Laplace with P(Y = y) ∝ exp(-|y| / t).
fn sample_discrete_laplace(t: u64, rng: &mut RngStream) -> i64 {
    let tf = t as f64;
    loop {
        let u = rng.random_range(0..t);
        if !bernoulli_exp_neg(u as f64 / tf, rng) {
            continue;
        }
        let mut v = 0u64;
        while bernoulli_exp_neg(1.0, rng) {
            v += 1;
        }
        let magnitude = (u + t * v) as i64;
        let negative = rng.random::<bool>();
        if negative && magnitude == 0 {
            continue;
        }
        return if negative { -magnitude } else { magnitude };
    }
}

/// One draw from the discrete Gaussian described by `params`.
pub fn sample_discrete_gaussian(params: &DiscreteGaussianParams, rng: &mut RngStream) -> i64 {
    let sigma_sq = params.scale_sq;
    let sigma = sigma_sq.sqrt();
    let t = sigma.floor() as u64 + 1;
    let tf = t as f64;
    loop {
        let y = sample_discrete_laplace(t, rng);
        let gap = (y.unsigned_abs() as f64) - sigma_sq / tf;
        if bernoulli_exp_neg(gap * gap / (2.0 * sigma_sq), rng) {
            return params.location + y;
        }
    }
}
