//! Privacy-bound calculators for the Gaussian and Gaussian-pancake
//! mechanisms.
//!
//! * [`gm_epsilon`] / [`gm_calibrate_sigma`]: exact (ε, δ) of the Gaussian
//!   mechanism and its inverse in σ.
//! * [`gpm_epsilon_lower`]: ε below which the pancake mechanism is provably
//!   *not* (ε, δ)-DP against the key holder, driven by the peak offset t.
//! * [`gpm_epsilon_upper`]: ε at which it *is* (ε, δ)-DP, obtained by
//!   treating it as a Gaussian mechanism with sensitivity inflated by
//!   √(β²+γ²)/β.

pub mod normal;

use serde::{Deserialize, Serialize};

use crate::distributions::{sample_uniform_sphere, PancakeParams, PancakeShape};
use crate::error::{check_dim, check_open_unit, check_positive, Error, Result};
use crate::mechanisms::QueryResult;
use crate::rng::RngStream;

pub use normal::{log_std_normal_cdf, std_normal_cdf, std_normal_inv_cdf, std_normal_pdf};

const SQRT_2PI: f64 = 2.506_628_274_631_000_5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrivacyKind {
    /// Exact guarantee of the Gaussian mechanism.
    GmExact,
    /// The pancake mechanism is NOT (ε, δ)-DP for any ε below this value.
    GpmLower,
    /// The pancake mechanism IS (ε, δ)-DP at this value.
    GpmUpper,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivacyPoint {
    pub epsilon: f64,
    pub delta: f64,
    pub kind: PrivacyKind,
}

impl PrivacyPoint {
    fn new(epsilon: f64, delta: f64, kind: PrivacyKind) -> Result<Self> {
        if epsilon.is_nan() || epsilon <= 0.0 {
            return Err(Error::Domain(format!(
                "ε = {epsilon} is not positive at δ = {delta}"
            )));
        }
        Ok(Self {
            epsilon,
            delta,
            kind,
        })
    }
}

fn gm_epsilon_raw(delta_sensitivity: f64, sigma: f64, inv_delta: f64) -> f64 {
    let u = delta_sensitivity / sigma;
    0.5 * u * u - u * inv_delta
}

/// ε = Δ²/(2σ²) - (Δ/σ)·Φ⁻¹(δ).
pub fn gm_epsilon(delta_sensitivity: f64, sigma: f64, delta: f64) -> Result<PrivacyPoint> {
    check_positive("delta_sensitivity", delta_sensitivity)?;
    check_positive("sigma", sigma)?;
    check_open_unit("delta", delta)?;
    let eps = gm_epsilon_raw(delta_sensitivity, sigma, std_normal_inv_cdf(delta)?);
    PrivacyPoint::new(eps, delta, PrivacyKind::GmExact)
}

/// σ such that the Gaussian mechanism is exactly (ε*, δ*)-DP.
///
/// Bisection in log σ over [Δ·1e-6, Δ·1e12]. The target ε* > 0 is reached
/// on a single branch of ε(σ) (the one where ε is decreasing in σ), so the
/// root found is the largest σ meeting the target.
pub fn gm_calibrate_sigma(delta_sensitivity: f64, eps_target: f64, delta_target: f64) -> Result<f64> {
    check_positive("delta_sensitivity", delta_sensitivity)?;
    check_positive("eps_target", eps_target)?;
    check_open_unit("delta_target", delta_target)?;
    let inv = std_normal_inv_cdf(delta_target)?;
    let f = |sigma: f64| gm_epsilon_raw(delta_sensitivity, sigma, inv) - eps_target;

    let mut lo = (delta_sensitivity * 1e-6).ln();
    let mut hi = (delta_sensitivity * 1e12).ln();
    if !(f(lo.exp()) > 0.0 && f(hi.exp()) < 0.0) {
        return Err(Error::Calibration(format!(
            "no σ in [{:e}, {:e}] gives ε = {eps_target} at δ = {delta_target}",
            lo.exp(),
            hi.exp()
        )));
    }
    // 200 halvings of a ~41-wide log bracket reach f64 resolution
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid.exp()) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi.exp())
}

/// Integer and fractional parts of the neighbours' gap along `w`, measured
/// in units of the mechanism's peak spacing √(2π)σ·γ/(β²+γ²).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakOffset {
    pub whole: i64,
    /// Always in [-0.5, 0.5).
    pub frac: f64,
}

impl PeakOffset {
    /// Splits `s` as `whole + frac`, `frac ∈ [-0.5, 0.5)`.
    pub fn split(s: f64) -> Self {
        let mut whole = (s + 0.5).floor();
        let mut frac = s - whole;
        if frac >= 0.5 {
            whole += 1.0;
            frac -= 1.0;
        } else if frac < -0.5 {
            whole -= 1.0;
            frac += 1.0;
        }
        Self {
            whole: whole as i64,
            frac,
        }
    }

    pub fn value(&self) -> f64 {
        self.whole as f64 + self.frac
    }
}

/// Output-space distance between neighbouring pancakes of the mechanism.
pub fn peak_spacing(shape: &PancakeShape, sigma: f64) -> f64 {
    SQRT_2PI * sigma * shape.spacing()
}

pub fn peak_offset_decompose(
    q0: &QueryResult,
    q1: &QueryResult,
    pp: &PancakeParams,
    sigma: f64,
) -> Result<PeakOffset> {
    check_dim(pp.d(), q0.len())?;
    check_dim(pp.d(), q1.len())?;
    check_positive("sigma", sigma)?;
    let proj: f64 = q1
        .values()
        .iter()
        .zip(q0.values())
        .zip(pp.w())
        .map(|((a, b), w)| (a - b) * w)
        .sum();
    Ok(PeakOffset::split(proj / peak_spacing(&pp.shape(), sigma)))
}

/// x = (γ|t|/β)·√(π/(2(β²+γ²))), the argument shared by the interval
/// bounds, the lower privacy bound and the attack bound.
pub(crate) fn separation_score(beta: f64, gamma: f64, t: f64) -> f64 {
    let b = beta * beta + gamma * gamma;
    gamma * t.abs() / beta * (std::f64::consts::PI / (2.0 * b)).sqrt()
}

/// `(1 - 2Φ(-x), 2Φ(-x))`: a lower bound on P[Y ∈ A(t)] for the unshifted
/// variable and an upper bound for the shifted one.
pub fn interval_mass_bounds(beta: f64, gamma: f64, t: f64) -> Result<(f64, f64)> {
    check_positive("beta", beta)?;
    check_positive("gamma", gamma)?;
    let tail = 2.0 * std_normal_cdf(-separation_score(beta, gamma, t));
    Ok((1.0 - tail, tail))
}

/// Is `y` inside A(t), the union of open intervals of half-width
/// γ|t|/(2(β²+γ²)) around every pancake centre γz/(β²+γ²)?
pub fn membership_in_a(y_projected: f64, beta: f64, gamma: f64, t: f64) -> bool {
    let b = beta * beta + gamma * gamma;
    let u = y_projected * b / gamma;
    (u - u.round()).abs() < 0.5 * t.abs()
}

/// ε̲ = log((1-δ)/(2Φ(-x)) - 1), evaluated in the log domain so that
/// extreme separations do not overflow.
pub fn gpm_epsilon_lower(beta: f64, gamma: f64, t: f64, delta: f64) -> Result<PrivacyPoint> {
    check_positive("beta", beta)?;
    check_positive("gamma", gamma)?;
    if !(delta > 0.0 && delta < 0.5) {
        return Err(Error::param("delta", format!("must lie in (0, 0.5), got {delta}")));
    }
    let log_phi = log_std_normal_cdf(-separation_score(beta, gamma, t));
    let tail = 2.0 * log_phi.exp();
    let numer = 1.0 - delta - tail;
    if numer <= 0.0 {
        return Err(Error::VacuousBound(format!(
            "log argument is non-positive at β={beta}, γ={gamma}, t={t}, δ={delta}"
        )));
    }
    let eps = numer.ln() - std::f64::consts::LN_2 - log_phi;
    if eps <= 0.0 {
        return Err(Error::VacuousBound(format!(
            "lower bound ε̲ = {eps} is not positive at β={beta}, γ={gamma}, t={t}, δ={delta}"
        )));
    }
    PrivacyPoint::new(eps, delta, PrivacyKind::GpmLower)
}

/// ε̄ = (β²+γ²)Δ²/(2β²σ²) - (√(β²+γ²)Δ/(βσ))·Φ⁻¹(δ).
pub fn gpm_epsilon_upper(
    beta: f64,
    gamma: f64,
    delta_sensitivity: f64,
    sigma: f64,
    delta: f64,
) -> Result<PrivacyPoint> {
    check_positive("beta", beta)?;
    check_positive("gamma", gamma)?;
    check_positive("delta_sensitivity", delta_sensitivity)?;
    check_positive("sigma", sigma)?;
    check_open_unit("delta", delta)?;
    let inflation = (beta * beta + gamma * gamma).sqrt() / beta;
    let eps = gm_epsilon_raw(inflation * delta_sensitivity, sigma, std_normal_inv_cdf(delta)?);
    PrivacyPoint::new(eps, delta, PrivacyKind::GpmUpper)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OffsetFrequency {
    /// Fraction of sampled keys with |t| ≥ 0.25.
    pub frequency: f64,
    pub trials: usize,
    /// Set when γ ≫ √d·σ/Δ does not hold (taken as γ < 10·√d·σ/Δ); the
    /// near-uniformity of t is then not expected.
    pub precondition_warning: bool,
}

/// Samples keys w uniformly on the sphere and reports how often the peak
/// offset of a gap of norm Δ along the first axis has |t| ≥ 0.25.
pub fn offset_frequency_montecarlo(
    d: usize,
    delta_sensitivity: f64,
    sigma: f64,
    beta: f64,
    gamma: f64,
    trials: usize,
    rng: &mut RngStream,
) -> Result<OffsetFrequency> {
    if trials == 0 {
        return Err(Error::param("trials", "must be at least 1"));
    }
    if d == 0 {
        return Err(Error::InvalidDimension(0));
    }
    check_positive("delta_sensitivity", delta_sensitivity)?;
    check_positive("sigma", sigma)?;
    let shape = PancakeShape::new(beta, gamma)?;
    let precondition_warning = gamma < 10.0 * (d as f64).sqrt() * sigma / delta_sensitivity;
    let spacing = peak_spacing(&shape, sigma);

    let mut hits = 0usize;
    for _ in 0..trials {
        let w = sample_uniform_sphere(d, rng)?;
        let offset = PeakOffset::split(w[0] * delta_sensitivity / spacing);
        if offset.frac.abs() >= 0.25 {
            hits += 1;
        }
    }
    Ok(OffsetFrequency {
        frequency: hits as f64 / trials as f64,
        trials,
        precondition_warning,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::sample_hclwe_projection;

    #[test]
    fn gm_epsilon_examples() {
        let p = gm_epsilon(1.0, 1.0, 0.5).unwrap();
        assert!((p.epsilon - 0.5).abs() < 1e-15);
        assert_eq!(p.kind, PrivacyKind::GmExact);
        // oracle: 0.005 + 0.1·6.3613409024040562...
        let p = gm_epsilon(1.0, 10.0, 1e-10).unwrap();
        assert!((p.epsilon - 0.641_134_090_240_405_6).abs() < 1e-5);
        assert!(gm_epsilon(1.0, 1.0, 1.0).is_err());
        assert!(gm_epsilon(1.0, 1.0, 0.0).is_err());
        assert!(gm_epsilon(-1.0, 1.0, 0.1).is_err());
    }

    #[test]
    fn gm_epsilon_decreasing_in_delta() {
        let deltas = [1e-12, 1e-10, 1e-6, 1e-3, 0.01, 0.1, 0.3, 0.45];
        let eps: Vec<f64> = deltas
            .iter()
            .map(|&d| gm_epsilon(1.0, 2.0, d).unwrap().epsilon)
            .collect();
        assert!(eps.windows(2).all(|w| w[0] > w[1]));
    }

    /// Closed-form positive root of u²/2 - c·u = ε in u = Δ/σ.
    fn sigma_closed_form(delta_sens: f64, eps: f64, delta: f64) -> f64 {
        let c = std_normal_inv_cdf(delta).unwrap();
        let u = c + (c * c + 2.0 * eps).sqrt();
        delta_sens / u
    }

    #[test]
    fn calibration_examples() {
        let s = gm_calibrate_sigma(1.0, 0.5, 0.5).unwrap();
        assert!((s - 1.0).abs() < 1e-12);
        let s = gm_calibrate_sigma(1.0, 0.125, 1e-10).unwrap();
        let back = gm_epsilon(1.0, s, 1e-10).unwrap().epsilon;
        assert!((back / 0.125 - 1.0).abs() < 1e-9);
        // 40-digit reference σ
        assert!((s / 50.969_205_977_598 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn calibration_matches_quadratic_root() {
        for &(eps, delta) in &[(0.125, 1e-10), (1.0, 1e-10), (3.0, 0.2), (0.7, 0.8), (50.0, 1e-5)] {
            let s = gm_calibrate_sigma(2.0, eps, delta).unwrap();
            let oracle = sigma_closed_form(2.0, eps, delta);
            assert!((s / oracle - 1.0).abs() < 1e-10, "eps={eps} delta={delta}");
        }
    }

    #[test]
    fn calibration_monotone_and_bracketed() {
        let s1 = gm_calibrate_sigma(1.0, 0.25, 1e-10).unwrap();
        let s2 = gm_calibrate_sigma(1.0, 0.5, 1e-10).unwrap();
        assert!(s2 < s1);
        assert!(matches!(
            gm_calibrate_sigma(1.0, 1e13, 1e-10),
            Err(Error::Calibration(_))
        ));
        assert!(gm_calibrate_sigma(1.0, 0.0, 1e-10).is_err());
        assert!(gm_calibrate_sigma(1.0, 1.0, 2.0).is_err());
    }

    #[test]
    fn peak_offset_boundaries() {
        assert_eq!(PeakOffset::split(0.0), PeakOffset { whole: 0, frac: 0.0 });
        assert_eq!(PeakOffset::split(2.5), PeakOffset { whole: 3, frac: -0.5 });
        assert_eq!(PeakOffset::split(-2.5), PeakOffset { whole: -2, frac: -0.5 });
        let p = PeakOffset::split(0.49999);
        assert_eq!(p.whole, 0);
        let p = PeakOffset::split(-0.5000001);
        assert_eq!(p.whole, -1);
        assert!(p.frac >= -0.5 && p.frac < 0.5);
    }

    #[test]
    fn peak_offset_of_identical_queries_is_zero() {
        let pp = PancakeParams::new(vec![0.6, 0.8], 0.01, 4.0).unwrap();
        let q = QueryResult::new(vec![3.0, -1.0]).unwrap();
        let off = peak_offset_decompose(&q, &q, &pp, 2.0).unwrap();
        assert_eq!(off, PeakOffset { whole: 0, frac: 0.0 });
        let short = QueryResult::new(vec![1.0]).unwrap();
        assert!(peak_offset_decompose(&q, &short, &pp, 2.0).is_err());
    }

    #[test]
    fn peak_offset_reconstructs_projection() {
        let pp = PancakeParams::new(vec![0.6, 0.8], 0.01, 4.0).unwrap();
        let q0 = QueryResult::new(vec![1.0, 2.0]).unwrap();
        let q1 = QueryResult::new(vec![4.7, -0.3]).unwrap();
        let sigma = 0.37;
        let off = peak_offset_decompose(&q0, &q1, &pp, sigma).unwrap();
        let s = (3.7 * 0.6 - 2.3 * 0.8) / peak_spacing(&pp.shape(), sigma);
        assert!((off.value() - s).abs() <= 1e-12 * s.abs());
    }

    #[test]
    fn interval_mass_examples() {
        assert_eq!(interval_mass_bounds(0.1, 4.0, 0.0).unwrap(), (0.0, 1.0));
        let (lo, _) = interval_mass_bounds(1e-4, 32.0, 0.25).unwrap();
        assert!(lo > 1.0 - 1e-15);
        for &(b, g, t) in &[(0.1, 4.0, 0.3), (0.5, 2.0, 0.1), (1e-3, 32.0, 0.49)] {
            let (lo, hi) = interval_mass_bounds(b, g, t).unwrap();
            assert_eq!(lo + hi, 1.0);
        }
        // 40-digit reference for (0.1, 4, 0.3)
        let (lo, _) = interval_mass_bounds(0.1, 4.0, 0.3).unwrap();
        assert!((lo - 0.999_829_247_911_368).abs() < 1e-12);
    }

    #[test]
    fn membership_examples() {
        let (b, g) = (0.01, 4.0);
        let n = b * b + g * g;
        for z in [-3i64, 0, 2, 7] {
            let centre = g * z as f64 / n;
            assert!(membership_in_a(centre, b, g, 0.3));
            assert!(!membership_in_a(centre + 0.5 * g / n, b, g, 0.3));
            assert!(!membership_in_a(centre + 0.5 * g / n, b, g, 0.99));
        }
        assert!(!membership_in_a(0.0, b, g, 0.0));
    }

    #[test]
    fn membership_frequency_respects_bound() {
        let shape = PancakeShape::new(0.01, 4.0).unwrap();
        let t = 0.3;
        let n = 100_000;
        let mut rng = RngStream::new(21, 0);
        let hits = (0..n)
            .filter(|_| membership_in_a(sample_hclwe_projection(&shape, &mut rng), 0.01, 4.0, t))
            .count();
        let freq = hits as f64 / n as f64;
        let (lo, _) = interval_mass_bounds(0.01, 4.0, t).unwrap();
        let se = (lo * (1.0 - lo) / n as f64).sqrt();
        assert!(freq >= lo - 3.0 * se, "freq={freq} bound={lo}");
    }

    #[test]
    fn lower_bound_examples() {
        assert!(matches!(
            gpm_epsilon_lower(0.01, 32.0, 0.0, 0.1),
            Err(Error::VacuousBound(_))
        ));
        // 40-digit reference values
        let p = gpm_epsilon_lower(0.01, 32.0, 0.25, 0.1).unwrap();
        assert!((p.epsilon - 494.439_918_163_034_4).abs() < 1e-6, "{}", p.epsilon);
        assert_eq!(p.kind, PrivacyKind::GpmLower);
        let p = gpm_epsilon_lower(1e-3, 32.0, 0.25, 0.1).unwrap();
        assert!((p.epsilon - 49_093.252_857_696_28).abs() < 1e-5, "{}", p.epsilon);
        assert!(p.epsilon > 1e4);
        // wide pancakes: log argument in (0, 1) gives a negative, vacuous ε̲
        assert!(matches!(
            gpm_epsilon_lower(0.5, 4.0, 0.25, 0.1),
            Err(Error::VacuousBound(_))
        ));
        assert!(gpm_epsilon_lower(0.01, 32.0, 0.25, 0.5).is_err());
    }

    #[test]
    fn lower_bound_increases_as_delta_falls() {
        let eps: Vec<f64> = [0.4, 0.3, 0.1, 0.01, 1e-6]
            .iter()
            .map(|&d| gpm_epsilon_lower(0.05, 8.0, 0.25, d).unwrap().epsilon)
            .collect();
        assert!(eps.windows(2).all(|w| w[0] < w[1]), "{eps:?}");
    }

    #[test]
    fn upper_bound_examples() {
        let p = gpm_epsilon_upper(0.01, 32.0, 1.0, 1.0, 0.1).unwrap();
        assert!((p.epsilon / 5_124_101.465_209_985 - 1.0).abs() < 1e-12);
        assert_eq!(p.kind, PrivacyKind::GpmUpper);
        let gm = gm_epsilon(1.0, 3.0, 1e-5).unwrap().epsilon;
        let up = gpm_epsilon_upper(1e6, 1.0, 1.0, 3.0, 1e-5).unwrap().epsilon;
        assert!((up / gm - 1.0).abs() < 1e-3);
    }

    #[test]
    fn upper_dominates_lower() {
        for &b in &[1e-2, 1e-3] {
            for &g in &[32.0, 256.0] {
                for &d in &[0.01, 0.1, 0.4] {
                    let lo = gpm_epsilon_lower(b, g, 0.25, d).unwrap().epsilon;
                    let up = gpm_epsilon_upper(b, g, 1.0, 1.0, d).unwrap().epsilon;
                    assert!(up >= lo);
                }
            }
        }
    }

    #[test]
    fn offset_frequency_examples() {
        let mut rng = RngStream::new(31, 0);
        let r = offset_frequency_montecarlo(256, 1.0, 1.0, 0.01, 1e5, 10_000, &mut rng).unwrap();
        assert!(!r.precondition_warning);
        assert!((0.45..=0.55).contains(&r.frequency), "{}", r.frequency);

        let r = offset_frequency_montecarlo(16, 1.0, 1.0, 0.01, 1.0, 100, &mut rng).unwrap();
        assert!(r.precondition_warning);
        assert!((0.0..=1.0).contains(&r.frequency));

        assert!(offset_frequency_montecarlo(16, 1.0, 1.0, 0.01, 1.0, 0, &mut rng).is_err());
    }
}
