//! The homogeneous CLWE distribution H_{w,β,γ}.
//!
//! H_{w,β,γ} is a mixture of Gaussians whose means sit on the line through
//! `w`, spaced γ/(β²+γ²) apart, with weights a_z = exp(-πz²/(β²+γ²)) and a
//! shared covariance (1/2π)(I - γ²/(β²+γ²)·wwᵀ). Sampling draws the
//! component index from the discrete Gaussian with variance (β²+γ²)/2π and
//! then the component itself.

use serde::{Deserialize, Serialize};
use libm::erfc;

use super::discrete::{sample_discrete_gaussian, DiscreteGaussianParams};
use super::gaussian::sample_std_gaussian_vec;
use super::sphere::sample_uniform_sphere;
use crate::error::{check_positive, Error, Result};
use crate::rng::RngStream;

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;
const TAIL_MASS: f64 = 1e-15;

/// Key-free part of the pancake parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PancakeShape {
    beta: f64,
    gamma: f64,
}

impl PancakeShape {
    pub fn new(beta: f64, gamma: f64) -> Result<Self> {
        check_positive("beta", beta)?;
        check_positive("gamma", gamma)?;
        let shape = Self { beta, gamma };
        if shape.index_scale_sq().is_nan() || shape.index_scale_sq() > DiscreteGaussianParams::MAX_SCALE_SQ {
            return Err(Error::param(
                "gamma",
                format!("β²+γ² = {:e} is too large for the component-index sampler", shape.norm_sq()),
            ));
        }
        Ok(shape)
    }

    /// γ = 2√d, the smallest spacing parameter the hardness results allow.
    pub fn default_gamma(d: usize) -> f64 {
        2.0 * (d as f64).sqrt()
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// β² + γ².
    pub fn norm_sq(&self) -> f64 {
        self.beta * self.beta + self.gamma * self.gamma
    }

    /// Distance between neighbouring component means, γ/(β²+γ²).
    pub fn spacing(&self) -> f64 {
        self.gamma / self.norm_sq()
    }

    /// Standard deviation of one component along `w`.
    pub fn component_std_along_w(&self) -> f64 {
        self.beta / (TWO_PI * self.norm_sq()).sqrt()
    }

    /// Variance of the component-index discrete Gaussian.
    pub fn index_scale_sq(&self) -> f64 {
        self.norm_sq() / TWO_PI
    }

    pub fn with_key(self, w: Vec<f64>) -> Result<PancakeParams> {
        PancakeParams::from_shape(self, w)
    }

    pub fn with_random_key(self, d: usize, rng: &mut RngStream) -> Result<PancakeParams> {
        let w = sample_uniform_sphere(d, rng)?;
        PancakeParams::from_shape(self, w)
    }
}

/// Full parameterisation (w, β, γ); `w` is the secret backdoor key.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PancakeParams {
    shape: PancakeShape,
    w: Vec<f64>,
}

impl PancakeParams {
    pub fn new(w: Vec<f64>, beta: f64, gamma: f64) -> Result<Self> {
        Self::from_shape(PancakeShape::new(beta, gamma)?, w)
    }

    fn from_shape(shape: PancakeShape, w: Vec<f64>) -> Result<Self> {
        if w.is_empty() {
            return Err(Error::InvalidDimension(0));
        }
        if w.iter().any(|x| !x.is_finite()) {
            return Err(Error::param("w", "non-finite component"));
        }
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::param("w", format!("must be a unit vector, |w| = {norm}")));
        }
        Ok(Self { shape, w })
    }

    pub fn d(&self) -> usize {
        self.w.len()
    }

    pub fn w(&self) -> &[f64] {
        &self.w
    }

    pub fn shape(&self) -> PancakeShape {
        self.shape
    }

    pub fn beta(&self) -> f64 {
        self.shape.beta
    }

    pub fn gamma(&self) -> f64 {
        self.shape.gamma
    }
}

/// a_{β,γ,z} = exp(-πz²/(β²+γ²)).
pub fn hclwe_component_weight(z: i64, beta: f64, gamma: f64) -> f64 {
    let zf = z as f64;
    (-std::f64::consts::PI * zf * zf / (beta * beta + gamma * gamma)).exp()
}

fn index_params(shape: &PancakeShape) -> DiscreteGaussianParams {
    DiscreteGaussianParams::new(0, shape.index_scale_sq())
        .expect("β²+γ² > 0 for a validated shape")
}

/// One d-dimensional draw from H_{w,β,γ}.
pub fn sample_hclwe(params: &PancakeParams, rng: &mut RngStream) -> Result<Vec<f64>> {
    let shape = params.shape;
    let z = sample_discrete_gaussian(&index_params(&shape), rng);
    let mut g = sample_std_gaussian_vec(params.d(), rng)?;

    // (I - k·wwᵀ)g has variance (1-k)² along w; (1-k) = β/√(β²+γ²).
    let shrink = 1.0 - shape.beta / shape.norm_sq().sqrt();
    let along: f64 = g.iter().zip(&params.w).map(|(a, b)| a * b).sum();
    let offset = shape.spacing() * z as f64;
    let inv_sqrt_2pi = 1.0 / TWO_PI.sqrt();
    for (gi, wi) in g.iter_mut().zip(&params.w) {
        *gi = (*gi - shrink * along * wi) * inv_sqrt_2pi + offset * wi;
    }
    Ok(g)
}

/// Draws the projection onto `w` of an H_{w,β,γ} sample, i.e. a draw from
/// the one-dimensional H_{1,β,γ}, without materialising the full vector.
pub fn sample_hclwe_projection(shape: &PancakeShape, rng: &mut RngStream) -> f64 {
    use rand::Rng;
    let z = sample_discrete_gaussian(&index_params(shape), rng);
    let g: f64 = rng.sample(rand_distr::StandardNormal);
    shape.spacing() * z as f64 + shape.component_std_along_w() * g
}

/// Normalised density of the one-dimensional pancake distribution with
/// cached mixture weights.
#[derive(Debug, Clone)]
pub struct PancakeDensity1d {
    shape: PancakeShape,
    z_max: i64,
    weights: Vec<f64>,
    total: f64,
}

impl PancakeDensity1d {
    pub fn new(beta: f64, gamma: f64) -> Result<Self> {
        let shape = PancakeShape::new(beta, gamma)?;
        let b = shape.norm_sq();
        // two-sided tail beyond Z is at most √B·erfc(Z√(π/B))
        let mut total = 1.0;
        let mut z_max = 0i64;
        loop {
            let tail = b.sqrt() * erfc(z_max as f64 * (std::f64::consts::PI / b).sqrt());
            if tail < TAIL_MASS * total {
                break;
            }
            z_max += 1;
            total += 2.0 * hclwe_component_weight(z_max, beta, gamma);
        }
        let weights: Vec<f64> = (-z_max..=z_max)
            .map(|z| hclwe_component_weight(z, beta, gamma))
            .collect();
        let total = weights.iter().sum();
        Ok(Self {
            shape,
            z_max,
            weights,
            total,
        })
    }

    /// Largest |z| kept in the series.
    pub fn z_max(&self) -> i64 {
        self.z_max
    }

    pub fn pdf(&self, y: f64) -> f64 {
        let sd = self.shape.component_std_along_w();
        let spacing = self.shape.spacing();
        let norm = 1.0 / (sd * TWO_PI.sqrt());
        let mut acc = 0.0;
        for (i, a) in self.weights.iter().enumerate() {
            let z = i as i64 - self.z_max;
            let u = (y - spacing * z as f64) / sd;
            acc += a * (-0.5 * u * u).exp();
        }
        acc * norm / self.total
    }
}

/// Normalised density of H_{1,β,γ} at `y`.
///
/// Builds the truncated series on every call; use [`PancakeDensity1d`] when
/// evaluating many points.
pub fn hclwe_pdf_1d(y: f64, beta: f64, gamma: f64) -> Result<f64> {
    Ok(PancakeDensity1d::new(beta, gamma)?.pdf(y))
}
