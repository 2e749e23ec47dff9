//! Privatisation mechanisms and the two mitigations.
//!
//! [`gm`] is the authentic Gaussian mechanism, [`gpm`] its backdoored
//! replacement. [`NoiseRotatedMechanism`] re-randomises any black-box noise
//! source with a Haar rotation. [`distributed_round`] and [`central_relay`]
//! dilute a backdoored server's noise with honest Gaussian noise.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::distributions::{
    sample_discrete_gaussian, sample_hclwe, sample_rotation, sample_std_gaussian_vec,
    DiscreteGaussianParams, PancakeParams,
};
use crate::error::{check_dim, check_positive, Error, Result};
use crate::rng::RngStream;

const SQRT_2PI: f64 = 2.506_628_274_631_000_5;

/// Largest dimension for which a dense Haar rotation is drawn.
pub const MAX_ROTATION_DIM: usize = 4096;

/// A real-valued query answer q(D) ∈ ℝ^d.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryResult(Vec<f64>);

impl QueryResult {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidDimension(0));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("values", "query results must be finite"));
        }
        Ok(Self(values))
    }

    pub fn zeros(d: usize) -> Result<Self> {
        Self::new(vec![0.0; d])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }

    pub fn l2_distance(&self, other: &QueryResult) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    /// `self + scale·noise`, coordinate-wise.
    fn perturbed(&self, noise: &[f64], scale: f64) -> QueryResult {
        QueryResult(
            self.0
                .iter()
                .zip(noise)
                .map(|(q, n)| q + scale * n)
                .collect(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MechanismConfig {
    pub d: usize,
    pub sigma: f64,
    pub delta_sensitivity: f64,
}

impl MechanismConfig {
    pub fn new(d: usize, sigma: f64, delta_sensitivity: f64) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidDimension(0));
        }
        check_positive("sigma", sigma)?;
        check_positive("delta_sensitivity", delta_sensitivity)?;
        Ok(Self {
            d,
            sigma,
            delta_sensitivity,
        })
    }
}

/// Gaussian mechanism: q + σ·N(0, I_d).
pub fn gm(q: &QueryResult, cfg: &MechanismConfig, rng: &mut RngStream) -> Result<QueryResult> {
    check_dim(cfg.d, q.len())?;
    let noise = sample_std_gaussian_vec(cfg.d, rng)?;
    Ok(q.perturbed(&noise, cfg.sigma))
}

/// Gaussian pancake mechanism: q + √(2π)σ·H_{w,β,γ}.
pub fn gpm(
    q: &QueryResult,
    cfg: &MechanismConfig,
    pp: &PancakeParams,
    rng: &mut RngStream,
) -> Result<QueryResult> {
    check_dim(cfg.d, q.len())?;
    check_dim(cfg.d, pp.d())?;
    let noise = sample_hclwe(pp, rng)?;
    Ok(q.perturbed(&noise, SQRT_2PI * cfg.sigma))
}

/// Discrete Gaussian mechanism on an integer query.
pub fn dgm(q_int: i64, sigma: f64, rng: &mut RngStream) -> Result<i64> {
    let params = DiscreteGaussianParams::new(q_int, sigma * sigma)?;
    Ok(sample_discrete_gaussian(&params, rng))
}

/// Black-box d-dimensional noise sampler, as seen by a server that links
/// against a possibly compromised randomness library.
pub trait NoiseSource {
    fn dim(&self) -> usize;
    fn sample(&mut self, rng: &mut RngStream) -> Result<Vec<f64>>;
}

/// Honest source: standard normal vectors.
#[derive(Debug, Clone, Copy)]
pub struct GaussianSource {
    pub d: usize,
}

impl NoiseSource for GaussianSource {
    fn dim(&self) -> usize {
        self.d
    }

    fn sample(&mut self, rng: &mut RngStream) -> Result<Vec<f64>> {
        sample_std_gaussian_vec(self.d, rng)
    }
}

/// Backdoored source: √(2π)·H_{w,β,γ}, matched in scale to [`GaussianSource`].
#[derive(Debug, Clone)]
pub struct PancakeSource {
    pub params: PancakeParams,
}

impl NoiseSource for PancakeSource {
    fn dim(&self) -> usize {
        self.params.d()
    }

    fn sample(&mut self, rng: &mut RngStream) -> Result<Vec<f64>> {
        let mut h = sample_hclwe(&self.params, rng)?;
        h.iter_mut().for_each(|x| *x *= SQRT_2PI);
        Ok(h)
    }
}

/// An element of SO(d), checked for orthogonality on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Rotation(DMatrix<f64>);

impl Rotation {
    pub fn new(q: DMatrix<f64>) -> Result<Self> {
        if q.nrows() != q.ncols() {
            return Err(Error::DimensionMismatch {
                expected: q.nrows(),
                actual: q.ncols(),
            });
        }
        let d = q.nrows();
        let deviation = (q.transpose() * &q - DMatrix::<f64>::identity(d, d))
            .abs()
            .max();
        if deviation.is_nan() || deviation > 1e-8 {
            return Err(Error::NotOrthogonal { deviation });
        }
        Ok(Self(q))
    }

    pub fn identity(d: usize) -> Self {
        Self(DMatrix::identity(d, d))
    }

    pub fn random(d: usize, rng: &mut RngStream) -> Result<Self> {
        if d > MAX_ROTATION_DIM {
            return Err(Error::param(
                "d",
                format!("dense rotations are limited to d <= {MAX_ROTATION_DIM}, got {d}"),
            ));
        }
        Ok(Self(sample_rotation(d, rng)?))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    fn apply(&self, v: Vec<f64>) -> Vec<f64> {
        (&self.0 * DVector::from_vec(v)).data.into()
    }
}

/// q + σ·Q·r with r drawn once from `source`.
pub fn rotated_noise_mechanism<S: NoiseSource + ?Sized>(
    q: &QueryResult,
    sigma: f64,
    rotation: &Rotation,
    source: &mut S,
    rng: &mut RngStream,
) -> Result<QueryResult> {
    check_positive("sigma", sigma)?;
    check_dim(rotation.dim(), q.len())?;
    check_dim(rotation.dim(), source.dim())?;
    let r = source.sample(rng)?;
    check_dim(rotation.dim(), r.len())?;
    Ok(q.perturbed(&rotation.apply(r), sigma))
}

/// Where the rotation of [`NoiseRotatedMechanism`] comes from.
#[derive(Debug, Clone, Default)]
pub enum RotationMode {
    /// A fresh Haar rotation on every invocation.
    #[default]
    PerCall,
    /// One rotation fixed at installation time.
    Fixed(Rotation),
}

/// Gaussian mechanism whose noise is rotated before use.
#[derive(Debug, Clone)]
pub struct NoiseRotatedMechanism<S> {
    pub sigma: f64,
    pub mode: RotationMode,
    pub source: S,
}

impl<S: NoiseSource> NoiseRotatedMechanism<S> {
    pub fn new(sigma: f64, source: S) -> Self {
        Self {
            sigma,
            mode: RotationMode::default(),
            source,
        }
    }

    pub fn with_rotation(sigma: f64, rotation: Rotation, source: S) -> Self {
        Self {
            sigma,
            mode: RotationMode::Fixed(rotation),
            source,
        }
    }

    pub fn apply(&mut self, q: &QueryResult, rng: &mut RngStream) -> Result<QueryResult> {
        match &self.mode {
            RotationMode::PerCall => {
                let rotation = Rotation::random(self.source.dim(), rng)?;
                rotated_noise_mechanism(q, self.sigma, &rotation, &mut self.source, rng)
            }
            RotationMode::Fixed(rotation) => {
                rotated_noise_mechanism(q, self.sigma, rotation, &mut self.source, rng)
            }
        }
    }
}

/// Roles in a distributed round. Servers `0..n_backdoored` run the pancake
/// mechanism, the last `n_colluding` share their view with the attacker,
/// the rest are honest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DistributedConfig {
    pub n_servers: usize,
    pub n_backdoored: usize,
    pub n_colluding: usize,
    pub threshold: usize,
}

impl DistributedConfig {
    pub fn new(
        n_servers: usize,
        n_backdoored: usize,
        n_colluding: usize,
        threshold: usize,
    ) -> Result<Self> {
        if n_servers == 0 {
            return Err(Error::param("n_servers", "must be at least 1"));
        }
        if n_backdoored + n_colluding > n_servers {
            return Err(Error::param(
                "n_colluding",
                format!("n_backdoored + n_colluding = {} exceeds n_servers = {n_servers}", n_backdoored + n_colluding),
            ));
        }
        if threshold == 0 || threshold > n_servers {
            return Err(Error::param(
                "threshold",
                format!("must lie in [1, {n_servers}], got {threshold}"),
            ));
        }
        Ok(Self {
            n_servers,
            n_backdoored,
            n_colluding,
            threshold,
        })
    }

    pub fn is_backdoored(&self, i: usize) -> bool {
        i < self.n_backdoored
    }

    pub fn is_colluding(&self, i: usize) -> bool {
        i >= self.n_servers - self.n_colluding
    }
}

/// What the colluding servers learn.
#[derive(Debug, Clone, PartialEq)]
pub struct ColluderView {
    /// The aggregate minus the colluders' own perturbed outputs.
    pub residual: QueryResult,
    /// Each backdoored server's individual output; present only when the
    /// colluders meet the secret-sharing threshold.
    pub recovered_backdoored: Option<Vec<QueryResult>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundOutcome {
    pub aggregate: QueryResult,
    /// Absent when no server colludes.
    pub colluder_view: Option<ColluderView>,
    /// Simulation record: the noise each server added, in server order.
    pub server_noise: Vec<QueryResult>,
}

/// One round of the distributed Gaussian mechanism with `n_backdoored`
/// servers replaced by the pancake mechanism.
pub fn distributed_round(
    cfg: &DistributedConfig,
    local_qs: &[QueryResult],
    sigma: f64,
    pp: &PancakeParams,
    rng: &mut RngStream,
) -> Result<RoundOutcome> {
    check_dim(cfg.n_servers, local_qs.len())?;
    check_positive("sigma", sigma)?;
    let d = pp.d();
    for q in local_qs {
        check_dim(d, q.len())?;
    }

    let mut outputs = Vec::with_capacity(cfg.n_servers);
    let mut server_noise = Vec::with_capacity(cfg.n_servers);
    for (i, q) in local_qs.iter().enumerate() {
        let (noise, scale) = if cfg.is_backdoored(i) {
            (sample_hclwe(pp, rng)?, SQRT_2PI * sigma)
        } else {
            (sample_std_gaussian_vec(d, rng)?, sigma)
        };
        outputs.push(q.perturbed(&noise, scale));
        server_noise.push(QueryResult(noise.iter().map(|n| n * scale).collect()));
    }

    let sum = |range: &mut dyn Iterator<Item = &QueryResult>| -> Vec<f64> {
        let mut acc = vec![0.0; d];
        for y in range {
            acc.iter_mut().zip(y.values()).for_each(|(a, v)| *a += v);
        }
        acc
    };
    let aggregate = QueryResult(sum(&mut outputs.iter()));

    let colluder_view = if cfg.n_colluding == 0 {
        None
    } else {
        let own = sum(&mut outputs.iter().enumerate().filter(|(i, _)| cfg.is_colluding(*i)).map(|(_, y)| y));
        let residual = QueryResult(
            aggregate
                .values()
                .iter()
                .zip(&own)
                .map(|(a, o)| a - o)
                .collect(),
        );
        let recovered_backdoored = (cfg.n_colluding >= cfg.threshold)
            .then(|| outputs[..cfg.n_backdoored].to_vec());
        Some(ColluderView {
            residual,
            recovered_backdoored,
        })
    };

    Ok(RoundOutcome {
        aggregate,
        colluder_view,
        server_noise,
    })
}

/// An honest second server re-noising a (possibly backdoored) release.
pub fn central_relay(y1: &QueryResult, sigma: f64, rng: &mut RngStream) -> Result<QueryResult> {
    check_positive("sigma", sigma)?;
    let noise = sample_std_gaussian_vec(y1.len(), rng)?;
    Ok(y1.perturbed(&noise, sigma))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MechanismKind {
    Gm,
    Gpm,
    GpmRotated,
    RelayGpm,
}

impl MechanismKind {
    pub fn label(&self) -> &'static str {
        match self {
            MechanismKind::Gm => "gm",
            MechanismKind::Gpm => "gpm",
            MechanismKind::GpmRotated => "gpm-rotated",
            MechanismKind::RelayGpm => "relay-gpm",
        }
    }


    pub fn apply(
        &self,
        q: &QueryResult,
        cfg: &MechanismConfig,
        pp: &PancakeParams,
        rng: &mut RngStream,
    ) -> Result<QueryResult> {
        match self {
            MechanismKind::Gm => gm(q, cfg, rng),
            MechanismKind::Gpm => gpm(q, cfg, pp, rng),
            MechanismKind::GpmRotated => {
                let source = PancakeSource { params: pp.clone() };
                NoiseRotatedMechanism::new(cfg.sigma, source).apply(q, rng)
            }
            MechanismKind::RelayGpm => {
                let y1 = gpm(q, cfg, pp, rng)?;
                central_relay(&y1, cfg.sigma, rng)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::sample_uniform_sphere;

    fn unit(d: usize, i: usize) -> Vec<f64> {
        let mut v = vec![0.0; d];
        v[i] = 1.0;
        v
    }

    fn mean_var(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        (m, xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0))
    }

    struct CountingSource<S> {
        inner: S,
        calls: usize,
    }

    impl<S: NoiseSource> NoiseSource for CountingSource<S> {
        fn dim(&self) -> usize {
            self.inner.dim()
        }
        fn sample(&mut self, rng: &mut RngStream) -> Result<Vec<f64>> {
            self.calls += 1;
            self.inner.sample(rng)
        }
    }

    #[test]
    fn query_result_validation() {
        assert!(QueryResult::new(vec![]).is_err());
        assert!(QueryResult::new(vec![1.0, f64::NAN]).is_err());
        assert!(QueryResult::new(vec![1.0, f64::INFINITY]).is_err());
        assert!(MechanismConfig::new(0, 1.0, 1.0).is_err());
        assert!(MechanismConfig::new(2, 0.0, 1.0).is_err());
        assert!(MechanismConfig::new(2, 1.0, -1.0).is_err());
    }

    #[test]
    fn gm_noise_moments() {
        let d = 100_000;
        let cfg = MechanismConfig::new(d, 1.0, 1.0).unwrap();
        let y = gm(&QueryResult::zeros(d).unwrap(), &cfg, &mut RngStream::new(1, 0)).unwrap();
        let ms = y.values().iter().map(|x| x * x).sum::<f64>() / d as f64;
        assert!((ms - 1.0).abs() < 0.03, "{ms}");
    }

    #[test]
    fn gm_vanishing_noise() {
        let q = QueryResult::new(vec![1.5, -2.0, 1e3]).unwrap();
        let cfg = MechanismConfig::new(3, 1e-12, 1.0).unwrap();
        let y = gm(&q, &cfg, &mut RngStream::new(2, 0)).unwrap();
        assert!(y.l2_distance(&q) < 1e-10);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let cfg = MechanismConfig::new(3, 1.0, 1.0).unwrap();
        let q = QueryResult::zeros(2).unwrap();
        let mut rng = RngStream::new(3, 0);
        assert_eq!(
            gm(&q, &cfg, &mut rng),
            Err(Error::DimensionMismatch { expected: 3, actual: 2 })
        );
        let pp = PancakeParams::new(unit(2, 0), 0.1, 4.0).unwrap();
        assert!(gpm(&QueryResult::zeros(3).unwrap(), &cfg, &pp, &mut rng).is_err());
    }

    #[test]
    fn gpm_off_key_scale_matches_sigma() {
        let sigma = 1.7;
        let cfg = MechanismConfig::new(2, sigma, 1.0).unwrap();
        let pp = PancakeParams::new(unit(2, 0), 0.01, 4.0).unwrap();
        let q = QueryResult::zeros(2).unwrap();
        let mut rng = RngStream::new(4, 0);
        let xs: Vec<f64> = (0..100_000)
            .map(|_| gpm(&q, &cfg, &pp, &mut rng).unwrap().values()[1])
            .collect();
        let (_, v) = mean_var(&xs);
        assert!((v.sqrt() / sigma - 1.0).abs() < 0.02);
    }

    #[test]
    fn gm_and_gpm_share_moments() {
        let d = 8;
        let cfg = MechanismConfig::new(d, 1.0, 1.0).unwrap();
        let mut rng = RngStream::new(5, 0);
        let w = sample_uniform_sphere(d, &mut rng).unwrap();
        let pp = PancakeParams::new(w, 1e-3, 2.0 * (d as f64).sqrt()).unwrap();
        let q = QueryResult::zeros(d).unwrap();
        let n = 1_000_000;
        let mut gm_sum = vec![0.0; d];
        let mut gm_sq = vec![0.0; d];
        let mut gpm_sum = vec![0.0; d];
        let mut gpm_sq = vec![0.0; d];
        for _ in 0..n {
            let a = gm(&q, &cfg, &mut rng).unwrap();
            let b = gpm(&q, &cfg, &pp, &mut rng).unwrap();
            for j in 0..d {
                gm_sum[j] += a.values()[j];
                gm_sq[j] += a.values()[j].powi(2);
                gpm_sum[j] += b.values()[j];
                gpm_sq[j] += b.values()[j].powi(2);
            }
        }
        for j in 0..d {
            assert!((gm_sum[j] - gpm_sum[j]).abs() / (n as f64) < 0.01);
            let (a, b) = (gm_sq[j] / n as f64, gpm_sq[j] / n as f64);
            assert!((a - b).abs() < 0.01, "coord {j}: {a} vs {b}");
        }
    }

    #[test]
    fn dgm_examples() {
        let mut rng = RngStream::new(6, 0);
        let sevens = (0..10_000)
            .filter(|_| dgm(7, 1e-4, &mut rng).unwrap() == 7)
            .count();
        assert!(sevens as f64 / 10_000.0 >= 0.999);
        assert!(dgm(0, f64::NAN, &mut rng).is_err());
    }

    #[test]
    fn rotation_validation() {
        let mut m = DMatrix::<f64>::identity(3, 3);
        m[(0, 1)] = 0.1;
        assert!(matches!(Rotation::new(m), Err(Error::NotOrthogonal { .. })));
        assert!(Rotation::new(DMatrix::<f64>::zeros(2, 3)).is_err());
        assert!(Rotation::new(DMatrix::<f64>::identity(4, 4)).is_ok());
    }

    #[test]
    fn noise_source_consulted_once_per_call() {
        let d = 5;
        let mut source = CountingSource {
            inner: GaussianSource { d },
            calls: 0,
        };
        let q = QueryResult::zeros(d).unwrap();
        let mut rng = RngStream::new(7, 0);
        let rot = Rotation::random(d, &mut rng).unwrap();
        for k in 1..=4 {
            rotated_noise_mechanism(&q, 1.0, &rot, &mut source, &mut rng).unwrap();
            assert_eq!(source.calls, k);
        }
        let mut mech = NoiseRotatedMechanism::new(1.0, source);
        mech.apply(&q, &mut rng).unwrap();
        assert_eq!(mech.source.calls, 5);
    }

    #[test]
    fn identity_rotation_reproduces_gpm() {
        let d = 6;
        let mut rng = RngStream::new(8, 0);
        let w = sample_uniform_sphere(d, &mut rng).unwrap();
        let pp = PancakeParams::new(w, 1e-3, 5.0).unwrap();
        let q = QueryResult::new(vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let cfg = MechanismConfig::new(d, 0.8, 1.0).unwrap();
        let a = gpm(&q, &cfg, &pp, &mut RngStream::new(9, 0)).unwrap();
        let mut source = PancakeSource { params: pp };
        let b = rotated_noise_mechanism(&q, 0.8, &Rotation::identity(d), &mut source, &mut RngStream::new(9, 0))
            .unwrap();
        assert!(a.l2_distance(&b) < 1e-12);
    }

    #[test]
    fn distributed_config_validation() {
        assert!(DistributedConfig::new(3, 2, 2, 1).is_err());
        assert!(DistributedConfig::new(3, 1, 1, 0).is_err());
        assert!(DistributedConfig::new(3, 1, 1, 4).is_err());
        assert!(DistributedConfig::new(0, 0, 0, 1).is_err());
        let c = DistributedConfig::new(5, 1, 1, 3).unwrap();
        assert!(c.is_backdoored(0) && !c.is_backdoored(1));
        assert!(c.is_colluding(4) && !c.is_colluding(3));
    }

    #[test]
    fn honest_round_variance() {
        let d = 10_000;
        let cfg = DistributedConfig::new(3, 0, 0, 2).unwrap();
        let pp = PancakeParams::new(unit(d, 0), 0.1, 4.0).unwrap();
        let qs = vec![QueryResult::zeros(d).unwrap(); 3];
        let out = distributed_round(&cfg, &qs, 1.0, &pp, &mut RngStream::new(10, 0)).unwrap();
        assert!(out.colluder_view.is_none());
        let (_, v) = mean_var(out.aggregate.values());
        assert!((v / 3.0 - 1.0).abs() < 0.05, "{v}");
    }

    #[test]
    fn sub_threshold_view_hides_backdoored_outputs() {
        let d = 10_000;
        let cfg = DistributedConfig::new(5, 1, 1, 3).unwrap();
        let mut rng = RngStream::new(11, 0);
        let w = sample_uniform_sphere(d, &mut rng).unwrap();
        let pp = PancakeParams::new(w, 1e-4, 200.0).unwrap();
        let qs: Vec<QueryResult> = (0..5)
            .map(|i| QueryResult::new(vec![i as f64; d]).unwrap())
            .collect();
        let out = distributed_round(&cfg, &qs, 1.0, &pp, &mut rng).unwrap();
        let view = out.colluder_view.unwrap();
        assert!(view.recovered_backdoored.is_none());
        // residual = Σ_{non-colluding} q + honest noise + backdoored noise
        let honest: Vec<f64> = (0..d)
            .map(|j| {
                view.residual.values()[j] - (0.0 + 1.0 + 2.0 + 3.0) - out.server_noise[0].values()[j]
            })
            .collect();
        let (_, v) = mean_var(&honest);
        assert!((v / 3.0 - 1.0).abs() < 0.05, "{v}");
    }

    #[test]
    fn threshold_collusion_recovers_backdoored_outputs() {
        let d = 4;
        let cfg = DistributedConfig::new(5, 2, 3, 3).unwrap();
        let pp = PancakeParams::new(unit(d, 1), 1e-3, 4.0).unwrap();
        let qs = vec![QueryResult::new(vec![1.0; d]).unwrap(); 5];
        let out = distributed_round(&cfg, &qs, 1.0, &pp, &mut RngStream::new(12, 0)).unwrap();
        let rec = out.colluder_view.unwrap().recovered_backdoored.unwrap();
        assert_eq!(rec.len(), 2);
        for (i, y) in rec.iter().enumerate() {
            for j in 0..d {
                assert!((y.values()[j] - 1.0 - out.server_noise[i].values()[j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn two_server_round_equals_central_relay() {
        let d = 16;
        let mut rng = RngStream::new(13, 0);
        let w = sample_uniform_sphere(d, &mut rng).unwrap();
        let pp = PancakeParams::new(w, 1e-4, 8.0).unwrap();
        let q = QueryResult::new((0..d).map(|i| i as f64).collect()).unwrap();
        let cfg = DistributedConfig::new(2, 1, 0, 2).unwrap();
        let qs = vec![q.clone(), QueryResult::zeros(d).unwrap()];
        let round = distributed_round(&cfg, &qs, 0.9, &pp, &mut RngStream::new(14, 0)).unwrap();

        let mut relay_rng = RngStream::new(14, 0);
        let mcfg = MechanismConfig::new(d, 0.9, 1.0).unwrap();
        let y1 = gpm(&q, &mcfg, &pp, &mut relay_rng).unwrap();
        let y = central_relay(&y1, 0.9, &mut relay_rng).unwrap();
        assert!(round.aggregate.l2_distance(&y) < 1e-12);
    }

    #[test]
    fn relay_vanishing_noise() {
        let y1 = QueryResult::new(vec![0.25, -3.0]).unwrap();
        let y = central_relay(&y1, 1e-12, &mut RngStream::new(15, 0)).unwrap();
        assert!(y.l2_distance(&y1) < 1e-10);
    }

    #[test]
    fn round_is_order_invariant_in_moments() {
        let d = 2_000;
        let cfg = DistributedConfig::new(3, 0, 0, 2).unwrap();
        let pp = PancakeParams::new(unit(d, 0), 0.1, 4.0).unwrap();
        let qs: Vec<QueryResult> = [1.0, -2.0, 5.0]
            .iter()
            .map(|&c| QueryResult::new(vec![c; d]).unwrap())
            .collect();
        let mut rev = qs.clone();
        rev.reverse();
        let a = distributed_round(&cfg, &qs, 1.0, &pp, &mut RngStream::new(16, 0)).unwrap();
        let b = distributed_round(&cfg, &rev, 1.0, &pp, &mut RngStream::new(17, 0)).unwrap();
        let (ma, va) = mean_var(a.aggregate.values());
        let (mb, vb) = mean_var(b.aggregate.values());
        assert!((ma - mb).abs() < 0.2);
        assert!((va / vb - 1.0).abs() < 0.15);
    }

    #[test]
    fn mechanisms_reproducible_from_stream_state() {
        let d = 32;
        let mut rng = RngStream::new(18, 0);
        let w = sample_uniform_sphere(d, &mut rng).unwrap();
        let pp = PancakeParams::new(w, 1e-4, 8.0).unwrap();
        let cfg = MechanismConfig::new(d, 2.0, 1.0).unwrap();
        let q = QueryResult::zeros(d).unwrap();
        let snap = rng.clone();
        let a = gpm(&q, &cfg, &pp, &mut rng).unwrap();
        let b = gpm(&q, &cfg, &pp, &mut snap.clone()).unwrap();
        assert_eq!(a, b);
        let mut m1 = NoiseRotatedMechanism::new(1.0, GaussianSource { d });
        let mut m2 = NoiseRotatedMechanism::new(1.0, GaussianSource { d });
        assert_eq!(
            m1.apply(&q, &mut snap.clone()).unwrap(),
            m2.apply(&q, &mut snap.clone()).unwrap()
        );
    }
}
