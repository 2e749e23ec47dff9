use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Draws `d` i.i.d. standard normal coordinates.
pub fn sample_std_gaussian_vec(d: usize, rng: &mut RngStream) -> Result<Vec<f64>> {
    if d == 0 {
        return Err(Error::InvalidDimension(d));
    }
    Ok((0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_dimension_rejected() {
        let mut rng = RngStream::new(1, 0);
        assert_eq!(
            sample_std_gaussian_vec(0, &mut rng),
            Err(Error::InvalidDimension(0))
        );
    }

    #[test]
    fn deterministic_under_fixed_stream() {
        let a = sample_std_gaussian_vec(3, &mut RngStream::new(42, 0)).unwrap();
        let b = sample_std_gaussian_vec(3, &mut RngStream::new(42, 0)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn coordinate_mean_near_zero() {
        let n = 100_000;
        let v = sample_std_gaussian_vec(n, &mut RngStream::new(2, 0)).unwrap();
        let mean = v.iter().sum::<f64>() / n as f64;
        assert!(mean.abs() < 4.0 / (n as f64).sqrt(), "mean={mean}");
    }

    #[test]
    fn unit_variance() {
        let n = 1_000_000;
        let v = sample_std_gaussian_vec(n, &mut RngStream::new(3, 0)).unwrap();
        let mean = v.iter().sum::<f64>() / n as f64;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((0.99..=1.01).contains(&var), "var={var}");
    }
}
