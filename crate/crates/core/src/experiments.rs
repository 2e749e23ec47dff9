//! DP-hist query generation, L2-error parity, sampling benchmarks and
//! privacy-bound curves.

use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::accounting::{gm_calibrate_sigma, gm_epsilon, gpm_epsilon_lower, gpm_epsilon_upper};
use crate::attacks::{KeyPolicy, QueryPairSource};
use crate::distributions::{sample_hclwe, sample_std_gaussian_vec, PancakeParams};
use crate::error::{check_positive, Error, Result};
use crate::mechanisms::{MechanismConfig, MechanismKind, QueryResult};
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NeighbourRule {
    #[default]
    RemoveOne,
    AddOne,
}

/// Histogram query over `n` records with values in {1, …, d}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistQuerySpec {
    pub d: usize,
    pub n: usize,
    pub neighbour_rule: NeighbourRule,
}

impl HistQuerySpec {
    pub const DEFAULT_RECORDS: usize = 1000;

    pub fn new(d: usize, n: usize, neighbour_rule: NeighbourRule) -> Result<Self> {
        if d < 2 {
            return Err(Error::param("d", format!("histograms need d >= 2, got {d}")));
        }
        if n == 0 {
            return Err(Error::param("n", "at least one record is required"));
        }
        Ok(Self {
            d,
            n,
            neighbour_rule,
        })
    }

    pub fn with_default_records(d: usize) -> Result<Self> {
        Self::new(d, Self::DEFAULT_RECORDS, NeighbourRule::default())
    }
}

/// Draws a uniform dataset, returns its histogram and that of a neighbour.
pub fn gen_hist_query(spec: &HistQuerySpec, rng: &mut RngStream) -> Result<(QueryResult, QueryResult)> {
    let spec = HistQuerySpec::new(spec.d, spec.n, spec.neighbour_rule)?;
    let records: Vec<usize> = (0..spec.n).map(|_| rng.random_range(0..spec.d)).collect();
    let mut h0 = vec![0u64; spec.d];
    for &r in &records {
        h0[r] += 1;
    }
    let mut h1 = h0.clone();
    match spec.neighbour_rule {
        NeighbourRule::RemoveOne => h1[records[rng.random_range(0..spec.n)]] -= 1,
        NeighbourRule::AddOne => h1[rng.random_range(0..spec.d)] += 1,
    }
    let to_query = |h: Vec<u64>| QueryResult::new(h.into_iter().map(|c| c as f64).collect());
    Ok((to_query(h0)?, to_query(h1)?))
}

impl QueryPairSource for HistQuerySpec {
    fn dim(&self) -> usize {
        self.d
    }

    fn generate(&self, rng: &mut RngStream) -> Result<(QueryResult, QueryResult)> {
        gen_hist_query(self, rng)
    }
}

/// E‖N(0, σ²I_d)‖ = σ·√2·Γ((d+1)/2)/Γ(d/2).
pub fn expected_gm_l2(d: usize, sigma: f64) -> Result<f64> {
    if d == 0 {
        return Err(Error::InvalidDimension(0));
    }
    check_positive("sigma", sigma)?;
    let d = d as f64;
    Ok(sigma * 2f64.sqrt() * (ln_gamma((d + 1.0) / 2.0) - ln_gamma(d / 2.0)).exp())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct L2Report {
    pub mechanism: MechanismKind,
    pub d: usize,
    pub sigma: f64,
    pub trials: u64,
    pub mean: f64,
    /// Normal-approximation 95% interval for the mean.
    pub ci_95: (f64, f64),
    pub expected_gm: f64,
}

/// Mean ‖M(0) − 0‖ over `trials` runs of the mechanism calibrated to
/// (ε*, δ*) at unit sensitivity.
pub fn l2_error_experiment(
    d: usize,
    eps_star: f64,
    delta_star: f64,
    mech: MechanismKind,
    keys: &KeyPolicy,
    trials: u64,
    rng: &RngStream,
) -> Result<L2Report> {
    if trials == 0 {
        return Err(Error::param("trials", "must be at least 1"));
    }
    let sigma = gm_calibrate_sigma(1.0, eps_star, delta_star)?;
    let cfg = MechanismConfig::new(d, sigma, 1.0)?;
    let zero = QueryResult::zeros(d)?;
    let norms = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut r = rng.fork(i);
            let pp = match keys {
                KeyPolicy::FreshPerTrial(shape) => shape.with_random_key(d, &mut r)?,
                KeyPolicy::Fixed(pp) => pp.clone(),
            };
            let y = mech.apply(&zero, &cfg, &pp, &mut r)?;
            Ok(y.values().iter().map(|v| v * v).sum::<f64>().sqrt())
        })
        .collect::<Result<Vec<f64>>>()?;

    let n = trials as f64;
    let mean = norms.iter().sum::<f64>() / n;
    let sd = if trials > 1 {
        (norms.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let half = 1.959_963_984_540_054 * sd / n.sqrt();
    Ok(L2Report {
        mechanism: mech,
        d,
        sigma,
        trials,
        mean,
        ci_95: (mean - half, mean + half),
        expected_gm: expected_gm_l2(d, sigma)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub mechanism: String,
    pub d: usize,
    pub batch_size: usize,
    pub batches: usize,
    pub median_ms: f64,
    pub mean_ms: f64,
}

impl BenchReport {
    fn from_times(mechanism: &str, d: usize, batch_size: usize, mut times: Vec<f64>) -> Self {
        times.sort_by(f64::total_cmp);
        let k = times.len();
        let median_ms = if k % 2 == 1 {
            times[k / 2]
        } else {
            0.5 * (times[k / 2 - 1] + times[k / 2])
        };
        Self {
            mechanism: mechanism.to_string(),
            d,
            batch_size,
            batches: k,
            median_ms,
            mean_ms: times.iter().sum::<f64>() / k as f64,
        }
    }
}

/// Times noise sampling only, GM and GPM batches interleaved on the
/// calling thread.
pub fn bench_sampling(
    d: usize,
    sigma: f64,
    pp: &PancakeParams,
    batches: usize,
    batch_size: usize,
    rng: &mut RngStream,
) -> Result<(BenchReport, BenchReport)> {
    if batches == 0 || batch_size == 0 {
        return Err(Error::param("batch_size", "batches and batch_size must be at least 1"));
    }
    check_positive("sigma", sigma)?;
    crate::error::check_dim(d, pp.d())?;
    let gpm_scale = (2.0 * std::f64::consts::PI).sqrt() * sigma;
    let mut gm_times = Vec::with_capacity(batches);
    let mut gpm_times = Vec::with_capacity(batches);
    let mut sink = 0.0;
    for _ in 0..batches {
        let start = Instant::now();
        for _ in 0..batch_size {
            let mut n = sample_std_gaussian_vec(d, rng)?;
            n.iter_mut().for_each(|x| *x *= sigma);
            sink += n[0];
        }
        gm_times.push(start.elapsed().as_secs_f64() * 1e3);

        let start = Instant::now();
        for _ in 0..batch_size {
            let mut n = sample_hclwe(pp, rng)?;
            n.iter_mut().for_each(|x| *x *= gpm_scale);
            sink += n[0];
        }
        gpm_times.push(start.elapsed().as_secs_f64() * 1e3);
    }
    std::hint::black_box(sink);
    Ok((
        BenchReport::from_times("gm", d, batch_size, gm_times),
        BenchReport::from_times("gpm", d, batch_size, gpm_times),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundsRow {
    pub delta: f64,
    pub eps_gm: Option<f64>,
    pub eps_gpm_lower: Option<f64>,
    pub eps_gpm_upper: Option<f64>,
    /// Set when any of the three bounds is vacuous (non-positive ε).
    pub vacuous: bool,
}

fn vacuous_as_none(r: Result<crate::accounting::PrivacyPoint>) -> Result<Option<f64>> {
    match r {
        Ok(p) => Ok(Some(p.epsilon)),
        Err(Error::VacuousBound(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// ε of GM and both GPM bounds along a grid of δ ∈ (0, 0.5).
pub fn bounds_curve(
    beta: f64,
    gamma: f64,
    t: f64,
    delta_grid: &[f64],
    delta_sensitivity: f64,
    sigma: f64,
) -> Result<Vec<BoundsRow>> {
    if delta_grid.is_empty() {
        return Err(Error::param("delta_grid", "must be non-empty"));
    }
    delta_grid
        .iter()
        .map(|&delta| {
            if !(delta > 0.0 && delta < 0.5) {
                return Err(Error::param("delta", format!("grid values must lie in (0, 0.5), got {delta}")));
            }
            let eps_gm = vacuous_as_none(gm_epsilon(delta_sensitivity, sigma, delta))?;
            let eps_gpm_lower = vacuous_as_none(gpm_epsilon_lower(beta, gamma, t, delta))?;
            let eps_gpm_upper =
                vacuous_as_none(gpm_epsilon_upper(beta, gamma, delta_sensitivity, sigma, delta))?;
            Ok(BoundsRow {
                delta,
                eps_gm,
                eps_gpm_lower,
                eps_gpm_upper,
                vacuous: eps_gm.is_none() || eps_gpm_lower.is_none() || eps_gpm_upper.is_none(),
            })
        })
        .collect()
}
