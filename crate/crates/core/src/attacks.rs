//! The backdoor distinguishing attack, its success bound, a key-less
//! baseline attacker and the covertness test battery.

use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::accounting::{peak_offset_decompose, peak_spacing, separation_score, std_normal_cdf};
use crate::distributions::{sample_uniform_sphere, PancakeParams, PancakeShape};
use crate::error::{check_dim, check_positive, Error, Result};
use crate::mechanisms::{gm, gpm, MechanismConfig, MechanismKind, QueryResult};
use crate::rng::RngStream;
use crate::stats::{ks_two_sample, wilson_ci_95};

const SQRT_2PI: f64 = 2.506_628_274_631_000_5;

/// Result of one run of [`backdoor_distinguisher`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Distinction {
    pub guess: u8,
    /// Distance of z₀ to the nearest integer, in [0, 0.5].
    pub z0_frac: f64,
    pub z1_frac: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackOutcome {
    pub guessed_index: u8,
    pub true_index: u8,
    pub z0_frac: f64,
    pub z1_frac: f64,
}

impl AttackOutcome {
    pub fn is_success(&self) -> bool {
        self.guessed_index == self.true_index
    }
}

fn frac_distance(z: f64) -> f64 {
    (z - z.round()).abs()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Guesses which neighbour produced `y` by checking which hypothesis puts
/// `y` closer to a pancake of H_{w,β,γ}.
pub fn backdoor_distinguisher(
    q0: &QueryResult,
    q1: &QueryResult,
    y: &QueryResult,
    pp: &PancakeParams,
    sigma: f64,
) -> Result<Distinction> {
    check_positive("sigma", sigma)?;
    for v in [q0, q1, y] {
        check_dim(pp.d(), v.len())?;
    }
    let scale = pp.shape().norm_sq() / (SQRT_2PI * sigma * pp.gamma());
    let z = |q: &QueryResult| -> f64 {
        let proj: f64 = y
            .values()
            .iter()
            .zip(q.values())
            .zip(pp.w())
            .map(|((yi, qi), wi)| (yi - qi) * wi)
            .sum();
        scale * proj
    };
    let z0_frac = frac_distance(z(q0));
    let z1_frac = frac_distance(z(q1));
    Ok(Distinction {
        guess: u8::from(z1_frac < z0_frac),
        z0_frac,
        z1_frac,
    })
}

/// max(0, 1 − 2Φ(−x)) with x = (γ|t|/β)·√(π/(2(β²+γ²))).
pub fn attack_success_bound(beta: f64, gamma: f64, t: f64) -> Result<f64> {
    PancakeShape::new(beta, gamma)?;
    if !t.is_finite() {
        return Err(Error::param("t", "must be finite"));
    }
    let x = separation_score(beta, gamma, t);
    Ok((1.0 - 2.0 * std_normal_cdf(-x)).max(0.0))
}

/// Nearest-centre guess, available to an attacker without the key.
pub fn baseline_distinguisher(q0: &QueryResult, q1: &QueryResult, y: &QueryResult) -> Result<u8> {
    check_dim(y.len(), q0.len())?;
    check_dim(y.len(), q1.len())?;
    Ok(u8::from(y.l2_distance(q1) < y.l2_distance(q0)))
}

/// Produces neighbouring query results for attack trials.
pub trait QueryPairSource: Sync {
    fn dim(&self) -> usize;
    fn generate(&self, rng: &mut RngStream) -> Result<(QueryResult, QueryResult)>;
}

/// The same pair every trial, e.g. externally supplied gradients.
#[derive(Debug, Clone)]
pub struct FixedPair {
    pub q0: QueryResult,
    pub q1: QueryResult,
}

impl FixedPair {
    pub fn new(q0: QueryResult, q1: QueryResult) -> Result<Self> {
        check_dim(q0.len(), q1.len())?;
        Ok(Self { q0, q1 })
    }
}

impl QueryPairSource for FixedPair {
    fn dim(&self) -> usize {
        self.q0.len()
    }

    fn generate(&self, _rng: &mut RngStream) -> Result<(QueryResult, QueryResult)> {
        Ok((self.q0.clone(), self.q1.clone()))
    }
}

/// How the backdoor key is chosen across trials.
#[derive(Debug, Clone)]
pub enum KeyPolicy {
    /// A fresh uniform w per trial.
    FreshPerTrial(PancakeShape),
    /// One key for every trial.
    Fixed(PancakeParams),
}

impl KeyPolicy {
    pub fn shape(&self) -> PancakeShape {
        match self {
            KeyPolicy::FreshPerTrial(s) => *s,
            KeyPolicy::Fixed(pp) => pp.shape(),
        }
    }

    fn key(&self, d: usize, rng: &mut RngStream) -> Result<PancakeParams> {
        match self {
            KeyPolicy::FreshPerTrial(s) => s.with_random_key(d, rng),
            KeyPolicy::Fixed(pp) => {
                check_dim(d, pp.d())?;
                Ok(pp.clone())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub trials: u64,
    pub successes: u64,
    pub success_rate: f64,
    pub wilson_ci_95: (f64, f64),
    /// Mean per-trial attack bound; only for the plain pancake mechanism.
    pub theoretical_lower_bound: Option<f64>,
    pub elapsed_ms: f64,
}

/// One trial of the distinguishing game; returns the outcome and the
/// attack bound for the sampled key.
pub fn attack_trial<G: QueryPairSource + ?Sized>(
    query_gen: &G,
    mech: MechanismKind,
    cfg: &MechanismConfig,
    keys: &KeyPolicy,
    rng: &mut RngStream,
) -> Result<(AttackOutcome, f64)> {
    check_dim(cfg.d, query_gen.dim())?;
    let pp = keys.key(cfg.d, rng)?;
    let (q0, q1) = query_gen.generate(rng)?;
    check_dim(cfg.d, q0.len())?;
    check_dim(cfg.d, q1.len())?;
    let true_index = u8::from(rng.random_bool(0.5));
    let q = if true_index == 0 { &q0 } else { &q1 };
    let y = mech.apply(q, cfg, &pp, rng)?;
    let guess = backdoor_distinguisher(&q0, &q1, &y, &pp, cfg.sigma)?;
    let t = peak_offset_decompose(&q0, &q1, &pp, cfg.sigma)?.frac;
    let bound = attack_success_bound(pp.beta(), pp.gamma(), t)?;
    Ok((
        AttackOutcome {
            guessed_index: guess.guess,
            true_index,
            z0_frac: guess.z0_frac,
            z1_frac: guess.z1_frac,
        },
        bound,
    ))
}

/// Runs `trials` independent distinguishing games in parallel. Trial `i`
/// draws everything from `rng.fork(i)`, so the report depends only on the
/// inputs and the stream, not on scheduling.
pub fn run_attack_trials<G: QueryPairSource + ?Sized>(
    query_gen: &G,
    mech: MechanismKind,
    cfg: &MechanismConfig,
    keys: &KeyPolicy,
    trials: u64,
    rng: &RngStream,
) -> Result<TrialReport> {
    if trials == 0 {
        return Err(Error::param("trials", "must be at least 1"));
    }
    check_dim(cfg.d, query_gen.dim())?;
    let start = Instant::now();
    let results = (0..trials)
        .into_par_iter()
        .map(|i| attack_trial(query_gen, mech, cfg, keys, &mut rng.fork(i)))
        .collect::<Result<Vec<_>>>()?;

    let successes = results.iter().filter(|(o, _)| o.is_success()).count() as u64;
    let theoretical_lower_bound = (mech == MechanismKind::Gpm)
        .then(|| results.iter().map(|(_, b)| b).sum::<f64>() / trials as f64);
    Ok(TrialReport {
        trials,
        successes,
        success_rate: successes as f64 / trials as f64,
        wilson_ci_95: wilson_ci_95(successes, trials),
        theoretical_lower_bound,
        elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CovertVerdict {
    Indistinguishable,
    Distinguishable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovertnessReport {
    pub n_samples: usize,
    /// One p-value per random direction.
    pub direction_p_values: Vec<f64>,
    /// Bonferroni threshold α / n_directions.
    pub corrected_alpha: f64,
    pub rejections: usize,
    pub verdict: CovertVerdict,
    pub secret_p_value: f64,
}

/// Two-sample p-value for one projection direction. Each projection is
/// compared twice with Kolmogorov–Smirnov: as is, and reduced modulo the
/// public peak spacing. The smaller p-value is Bonferroni-doubled.
pub fn projection_p_value(a: &[Vec<f64>], b: &[Vec<f64>], u: &[f64], spacing: f64) -> Result<f64> {
    check_positive("spacing", spacing)?;
    let pa: Vec<f64> = a.iter().map(|x| dot(x, u)).collect();
    let pb: Vec<f64> = b.iter().map(|x| dot(x, u)).collect();
    let wrap = |v: &[f64]| -> Vec<f64> {
        v.iter()
            .map(|x| {
                let r = x / spacing;
                r - (r + 0.5).floor()
            })
            .collect()
    };
    let raw = ks_two_sample(&pa, &pb)?.p_value;
    let wrapped = ks_two_sample(&wrap(&pa), &wrap(&pb))?.p_value;
    Ok((2.0 * raw.min(wrapped)).min(1.0))
}

/// Compares a GM batch against a GPM batch along `n_directions` random
/// directions and along the secret direction w.
pub fn covertness_test_battery(
    n_samples: usize,
    d: usize,
    pp: &PancakeParams,
    sigma: f64,
    n_directions: usize,
    rng: &mut RngStream,
) -> Result<CovertnessReport> {
    if n_samples < 100 {
        return Err(Error::param("n_samples", "must be at least 100"));
    }
    if n_directions == 0 {
        return Err(Error::param("n_directions", "must be at least 1"));
    }
    check_dim(d, pp.d())?;
    let cfg = MechanismConfig::new(d, sigma, 1.0)?;
    let zero = QueryResult::zeros(d)?;
    let gm_batch = (0..n_samples)
        .map(|_| gm(&zero, &cfg, rng).map(QueryResult::into_values))
        .collect::<Result<Vec<_>>>()?;
    let gpm_batch = (0..n_samples)
        .map(|_| gpm(&zero, &cfg, pp, rng).map(QueryResult::into_values))
        .collect::<Result<Vec<_>>>()?;

    let mut directions = Vec::with_capacity(n_directions);
    while directions.len() < n_directions {
        let u = sample_uniform_sphere(d, rng)?;
        if d == 1 || dot(&u, pp.w()).abs() < 0.5 {
            directions.push(u);
        }
    }
    battery_report(&gm_batch, &gpm_batch, &directions, pp.w(), peak_spacing(&pp.shape(), sigma))
}

/// Battery over caller-supplied batches and directions.
pub fn battery_report(
    a: &[Vec<f64>],
    b: &[Vec<f64>],
    directions: &[Vec<f64>],
    secret: &[f64],
    spacing: f64,
) -> Result<CovertnessReport> {
    if directions.is_empty() {
        return Err(Error::param("directions", "must be non-empty"));
    }
    let direction_p_values = directions
        .par_iter()
        .map(|u| projection_p_value(a, b, u, spacing))
        .collect::<Result<Vec<_>>>()?;
    let corrected_alpha = 0.05 / directions.len() as f64;
    let rejections = direction_p_values
        .iter()
        .filter(|&&p| p < corrected_alpha)
        .count();
    Ok(CovertnessReport {
        n_samples: a.len(),
        direction_p_values,
        corrected_alpha,
        rejections,
        verdict: if rejections == 0 {
            CovertVerdict::Indistinguishable
        } else {
            CovertVerdict::Distinguishable
        },
        secret_p_value: projection_p_value(a, b, secret, spacing)?,
    })
}
