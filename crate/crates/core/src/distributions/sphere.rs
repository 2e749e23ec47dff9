use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use statrs::function::gamma::ln_gamma;

use super::gaussian::sample_std_gaussian_vec;
use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Uniform point on S^{d-1}: a normalised standard Gaussian vector.
pub fn sample_uniform_sphere(d: usize, rng: &mut RngStream) -> Result<Vec<f64>> {
    loop {
        let mut v = sample_std_gaussian_vec(d, rng)?;
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        v.iter_mut().for_each(|x| *x /= norm);
        return Ok(v);
    }
}

/// Haar-uniform element of SO(d).
///
/// QR of a Gaussian matrix, columns rescaled by sign(R_ii) so Q is Haar on
/// O(d), then one column negated if det(Q) = -1.
pub fn sample_rotation(d: usize, rng: &mut RngStream) -> Result<DMatrix<f64>> {
    if d == 0 {
        return Err(Error::InvalidDimension(0));
    }
    let g = DMatrix::<f64>::from_fn(d, d, |_, _| rng.sample(StandardNormal));
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    if q.clone().lu().determinant() < 0.0 {
        q.column_mut(0).neg_mut();
    }
    Ok(q)
}

/// Density of one coordinate of a uniform point on S^{d-1}:
/// Γ(d/2)/(√π Γ((d-1)/2)) · (1-t²)^{(d-3)/2}.
pub fn sphere_coord_density(t: f64, d: usize) -> Result<f64> {
    if d < 2 {
        return Err(Error::InvalidDimension(d));
    }
    if !(-1.0..=1.0).contains(&t) {
        return Err(Error::Domain(format!("coordinate must lie in [-1, 1], got {t}")));
    }
    let df = d as f64;
    let log_c = ln_gamma(df / 2.0) - 0.5 * std::f64::consts::PI.ln() - ln_gamma((df - 1.0) / 2.0);
    let one_minus = 1.0 - t * t;
    let exponent = (df - 3.0) / 2.0;
    if one_minus == 0.0 {
        return Ok(match d {
            2 => f64::INFINITY,
            3 => log_c.exp(),
            _ => 0.0,
        });
    }
    Ok((log_c + exponent * one_minus.ln()).exp())
}
