//! Small statistical toolkit used by the attack and covertness harnesses.

use statrs::distribution::{Binomial, DiscreteCDF};

use crate::error::{Error, Result};

const Z_95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Kolmogorov survival function Q(λ) = 2 Σ (-1)^(k-1) exp(-2k²λ²).
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        // Jacobi theta form, fast for small λ
        let y = (-std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda)).exp();
        let s: f64 = [1, 3, 5, 7, 9, 11].iter().map(|&j| y.powi(j * j)).sum();
        return (1.0 - (2.0 * std::f64::consts::PI).sqrt() / lambda * s).clamp(0.0, 1.0);
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-300 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Two-sample Kolmogorov–Smirnov test with the asymptotic p-value
/// (Stephens' small-sample correction applied to the statistic).
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::param("samples", "both samples must be non-empty"));
    }
    if a.iter().chain(b).any(|x| !x.is_finite()) {
        return Err(Error::param("samples", "samples must be finite"));
    }
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    let (n, m) = (xs.len(), ys.len());

    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < n && j < m {
        let v = xs[i].min(ys[j]);
        while i < n && xs[i] <= v {
            i += 1;
        }
        while j < m && ys[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }

    let en = ((n * m) as f64 / (n + m) as f64).sqrt();
    let p_value = kolmogorov_q((en + 0.12 + 0.11 / en) * d);
    Ok(KsResult {
        statistic: d,
        p_value,
    })
}

/// Wilson score interval at 95% confidence.
pub fn wilson_ci_95(successes: u64, trials: u64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = Z_95 * Z_95;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = Z_95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Exact two-sided binomial test p-value (doubled smaller tail).
pub fn binomial_two_sided_p(successes: u64, trials: u64, p: f64) -> Result<f64> {
    if successes > trials {
        return Err(Error::param("successes", "exceeds trials"));
    }
    let dist = Binomial::new(p, trials)
        .map_err(|e| Error::param("p", e.to_string()))?;
    let lower = dist.cdf(successes);
    let upper = if successes == 0 {
        1.0
    } else {
        dist.sf(successes - 1)
    };
    Ok((2.0 * lower.min(upper)).min(1.0))
}

/// Standard error of a binomial proportion.
pub fn binomial_stderr(p: f64, trials: u64) -> f64 {
    (p * (1.0 - p) / trials as f64).sqrt()
}
