use pancake_core::accounting::gm_calibrate_sigma;
use pancake_core::attacks::{covertness_test_battery, run_attack_trials, FixedPair, KeyPolicy, QueryPairSource};
use pancake_core::distributions::PancakeParams;
use pancake_core::experiments::{bench_sampling, bounds_curve, l2_error_experiment, HistQuerySpec};
use pancake_core::mechanisms::{
    distributed_round, DistributedConfig, MechanismConfig, MechanismKind, QueryResult,
};
use pancake_core::RngStream;

use crate::args::Command;
use crate::config::{read_query_pair, KeyChoice, RunConfig};
use crate::error::CliResult;
use crate::output::{opt, Report};

const KEY_STREAM: u64 = u64::MAX;

pub fn dispatch(cfg: &RunConfig) -> CliResult<()> {
    let report = match cfg.command {
        Command::Calibrate => calibrate(cfg)?,
        Command::Sample => sample(cfg)?,
        Command::Attack => attack(cfg)?,
        Command::Bounds => bounds(cfg)?,
        Command::L2 => l2(cfg)?,
        Command::Bench => bench(cfg)?,
        Command::CovertTest => covert_test(cfg)?,
        Command::Distributed => distributed(cfg)?,
    };
    report.finish(cfg)
}

fn root_rng(cfg: &RunConfig) -> RngStream {
    RngStream::new(cfg.seed, 0)
}

/// One installation key, drawn from a stream reserved for it.
fn fixed_key(cfg: &RunConfig) -> CliResult<PancakeParams> {
    Ok(cfg.shape()?.with_random_key(cfg.d, &mut root_rng(cfg).fork(KEY_STREAM))?)
}

fn key_policy(cfg: &RunConfig) -> CliResult<KeyPolicy> {
    Ok(match cfg.key_policy {
        KeyChoice::Fresh => KeyPolicy::FreshPerTrial(cfg.shape()?),
        KeyChoice::Fixed => KeyPolicy::Fixed(fixed_key(cfg)?),
    })
}

fn calibrate(cfg: &RunConfig) -> CliResult<Report> {
    let sigma = gm_calibrate_sigma(cfg.delta_sens, cfg.eps_star, cfg.delta_star)?;
    let mut r = Report::new(cfg, &["delta_sens", "eps_star", "delta_star", "sigma"])?;
    r.row([cfg.delta_sens, cfg.eps_star, cfg.delta_star, sigma]);
    Ok(r)
}

fn sample(cfg: &RunConfig) -> CliResult<Report> {
    let mcfg = MechanismConfig::new(cfg.d, cfg.sigma, cfg.delta_sens)?;
    let pp = fixed_key(cfg)?;
    let zero = QueryResult::zeros(cfg.d)?;
    let mut rng = root_rng(cfg);
    let mut columns = vec!["i".to_string()];
    columns.extend((0..cfg.d).map(|j| format!("x_{j}")));
    let columns: Vec<&str> = columns.iter().map(String::as_str).collect();
    let mut r = Report::new(cfg, &columns)?;
    for i in 0..cfg.n_samples {
        let y = cfg.mechanism.apply(&zero, &mcfg, &pp, &mut rng)?;
        r.row(std::iter::once(i.to_string()).chain(y.values().iter().map(f64::to_string)));
    }
    Ok(r)
}

fn attack(cfg: &RunConfig) -> CliResult<Report> {
    let mcfg = MechanismConfig::new(cfg.d, cfg.sigma, cfg.delta_sens)?;
    let keys = key_policy(cfg)?;
    let source: Box<dyn QueryPairSource> = match &cfg.query_pair {
        Some(path) => {
            let (q0, q1) = read_query_pair(path)?;
            Box::new(FixedPair::new(QueryResult::new(q0)?, QueryResult::new(q1)?)?)
        }
        None => Box::new(HistQuerySpec::new(cfg.d, cfg.n_records, cfg.neighbour)?),
    };
    let rep = run_attack_trials(source.as_ref(), cfg.mechanism, &mcfg, &keys, cfg.trials, &root_rng(cfg))?;
    eprintln!(
        "{}: {}/{} successes ({:.1} ms)",
        cfg.mechanism.label(),
        rep.successes,
        rep.trials,
        rep.elapsed_ms
    );
    let mut r = Report::new(
        cfg,
        &[
            "d", "beta", "gamma", "eps_star", "delta_star", "trials", "successes", "rate", "ci_lo", "ci_hi",
            "theory_bound_mean",
        ],
    )?;
    r.row([
        cfg.d.to_string(),
        cfg.beta.to_string(),
        cfg.gamma.to_string(),
        cfg.eps_star.to_string(),
        cfg.delta_star.to_string(),
        rep.trials.to_string(),
        rep.successes.to_string(),
        rep.success_rate.to_string(),
        rep.wilson_ci_95.0.to_string(),
        rep.wilson_ci_95.1.to_string(),
        opt(rep.theoretical_lower_bound),
    ]);
    Ok(r)
}

fn bounds(cfg: &RunConfig) -> CliResult<Report> {
    let rows = bounds_curve(cfg.beta, cfg.gamma, cfg.t, &cfg.deltas, cfg.delta_sens, cfg.sigma)?;
    let mut r = Report::new(cfg, &["delta", "eps_gm", "eps_gpm_lower", "eps_gpm_upper", "vacuous_flag"])?;
    for row in rows {
        r.row([
            row.delta.to_string(),
            opt(row.eps_gm),
            opt(row.eps_gpm_lower),
            opt(row.eps_gpm_upper),
            u8::from(row.vacuous).to_string(),
        ]);
    }
    Ok(r)
}

fn l2(cfg: &RunConfig) -> CliResult<Report> {
    let keys = key_policy(cfg)?;
    let mut mechs = vec![MechanismKind::Gm, MechanismKind::Gpm];
    if !mechs.contains(&cfg.mechanism) {
        mechs.push(cfg.mechanism);
    }
    let mut r = Report::new(
        cfg,
        &["d", "eps_star", "delta_star", "sigma", "mechanism", "trials", "mean", "ci_lo", "ci_hi", "expect"],
    )?;
    let root = root_rng(cfg);
    for (k, mech) in mechs.into_iter().enumerate() {
        let rep = l2_error_experiment(cfg.d, cfg.eps_star, cfg.delta_star, mech, &keys, cfg.trials, &root.fork(k as u64))?;
        r.row([
            rep.d.to_string(),
            cfg.eps_star.to_string(),
            cfg.delta_star.to_string(),
            rep.sigma.to_string(),
            mech.label().to_string(),
            rep.trials.to_string(),
            rep.mean.to_string(),
            rep.ci_95.0.to_string(),
            rep.ci_95.1.to_string(),
            rep.expected_gm.to_string(),
        ]);
    }
    Ok(r)
}

fn bench(cfg: &RunConfig) -> CliResult<Report> {
    let pp = fixed_key(cfg)?;
    let (g, p) = bench_sampling(cfg.d, cfg.sigma, &pp, cfg.batches, cfg.batch_size, &mut root_rng(cfg))?;
    let mut r = Report::new(cfg, &["mechanism", "d", "batch_size", "batches", "median_ms", "mean_ms", "ratio_to_gm"])?;
    for b in [&g, &p] {
        r.row([
            b.mechanism.clone(),
            b.d.to_string(),
            b.batch_size.to_string(),
            b.batches.to_string(),
            b.median_ms.to_string(),
            b.mean_ms.to_string(),
            (b.median_ms / g.median_ms).to_string(),
        ]);
    }
    Ok(r)
}

fn covert_test(cfg: &RunConfig) -> CliResult<Report> {
    let pp = fixed_key(cfg)?;
    let rep = covertness_test_battery(cfg.n_samples, cfg.d, &pp, cfg.sigma, cfg.directions, &mut root_rng(cfg))?;
    eprintln!(
        "verdict: {:?} ({} rejections at α = {}); secret direction p = {}",
        rep.verdict, rep.rejections, rep.corrected_alpha, rep.secret_p_value
    );
    let mut r = Report::new(cfg, &["direction", "p_value", "corrected_alpha", "rejected"])?;
    for (i, p) in rep.direction_p_values.iter().enumerate() {
        r.row([format!("random-{i}"), p.to_string(), rep.corrected_alpha.to_string(), u8::from(*p < rep.corrected_alpha).to_string()]);
    }
    r.row([
        "secret".to_string(),
        rep.secret_p_value.to_string(),
        rep.corrected_alpha.to_string(),
        u8::from(rep.secret_p_value < rep.corrected_alpha).to_string(),
    ]);
    Ok(r)
}

fn variance(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0).max(1.0)
}

fn distributed(cfg: &RunConfig) -> CliResult<Report> {
    let dcfg = DistributedConfig::new(cfg.servers, cfg.backdoored, cfg.colluding, cfg.threshold)?;
    let pp = fixed_key(cfg)?;
    let qs = vec![QueryResult::zeros(cfg.d)?; cfg.servers];
    let out = distributed_round(&dcfg, &qs, cfg.sigma, &pp, &mut root_rng(cfg))?;
    let honest = (cfg.servers - cfg.backdoored - cfg.colluding) as f64;
    let (residual_var, recovered) = match &out.colluder_view {
        Some(view) => {
            let honest_part: Vec<f64> = (0..cfg.d)
                .map(|j| {
                    view.residual.values()[j]
                        - out.server_noise[..cfg.backdoored].iter().map(|n| n.values()[j]).sum::<f64>()
                })
                .collect();
            (
                Some(variance(&honest_part)),
                view.recovered_backdoored.as_ref().map_or(0, Vec::len),
            )
        }
        None => (None, 0),
    };
    let mut r = Report::new(
        cfg,
        &[
            "servers", "backdoored", "colluding", "threshold", "d", "sigma", "aggregate_var", "residual_honest_var",
            "expected_honest_var", "recovered_outputs",
        ],
    )?;
    r.row([
        cfg.servers.to_string(),
        cfg.backdoored.to_string(),
        cfg.colluding.to_string(),
        cfg.threshold.to_string(),
        cfg.d.to_string(),
        cfg.sigma.to_string(),
        variance(out.aggregate.values()).to_string(),
        opt(residual_var),
        (honest * cfg.sigma * cfg.sigma).to_string(),
        recovered.to_string(),
    ]);
    Ok(r)
}
