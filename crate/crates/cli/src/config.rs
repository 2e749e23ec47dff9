use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use pancake_core::accounting::gm_calibrate_sigma;
use pancake_core::distributions::PancakeShape;
use pancake_core::experiments::NeighbourRule;
use pancake_core::mechanisms::MechanismKind;
use serde::Serialize;

use crate::args::{Cli, Command, Opts};
use crate::error::{CliError, CliResult};

pub const DEFAULT_DELTAS: [f64; 7] = [0.01, 0.05, 0.1, 0.2, 0.3, 0.4, 0.49];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum KeyChoice {
    Fresh,
    Fixed,
}

/// Fully resolved and validated run parameters. Serialised into the
/// header line of every output.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub subcommand: &'static str,
    pub d: usize,
    pub eps_star: f64,
    pub delta_star: f64,
    pub delta_sens: f64,
    pub sigma: f64,
    pub sigma_calibrated: bool,
    pub beta: f64,
    pub gamma: f64,
    pub t: f64,
    pub trials: u64,
    pub seed: u64,
    pub mechanism: MechanismKind,
    pub key_policy: KeyChoice,
    pub n_records: usize,
    pub neighbour: NeighbourRule,
    pub query_pair: Option<PathBuf>,
    pub deltas: Vec<f64>,
    pub n_samples: usize,
    pub directions: usize,
    pub batches: usize,
    pub batch_size: usize,
    pub servers: usize,
    pub backdoored: usize,
    pub colluding: usize,
    pub threshold: usize,
    #[serde(skip)]
    pub command: Command,
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

/// Reads `key = value` lines; `#` starts a comment. Dashes in keys are
/// treated as underscores.
pub fn parse_config_text(text: &str) -> CliResult<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::config(format!("config line {}: expected `key = value`", no + 1)))?;
        let key = key.trim().replace('-', "_");
        let value = value.trim().to_string();
        if key.is_empty() || value.is_empty() {
            return Err(CliError::config(format!("config line {}: empty key or value", no + 1)));
        }
        if map.insert(key.clone(), value).is_some() {
            return Err(CliError::config(format!("config line {}: duplicate key `{key}`", no + 1)));
        }
    }
    Ok(map)
}

fn read_config_file(path: &Path) -> CliResult<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::io(format!("reading config {}", path.display()), e))?;
    parse_config_text(&text)
}

/// Flag value if given, otherwise the file value parsed as `T`.
fn take<T>(flag: Option<T>, file: &mut BTreeMap<String, String>, key: &str) -> CliResult<Option<T>>
where
    T: FromStr,
    T::Err: Display,
{
    let from_file = file.remove(key);
    if flag.is_some() {
        return Ok(flag);
    }
    from_file
        .map(|v| {
            v.parse::<T>()
                .map_err(|e| CliError::config(format!("{key}: cannot parse `{v}`: {e}")))
        })
        .transpose()
}

fn require(cond: bool, field: &str, msg: impl Display) -> CliResult<()> {
    if cond {
        Ok(())
    } else {
        Err(CliError::config(format!("{field}: {msg}")))
    }
}

fn parse_deltas(s: &str) -> CliResult<Vec<f64>> {
    s.split(',')
        .map(|x| {
            x.trim()
                .parse::<f64>()
                .map_err(|e| CliError::config(format!("deltas: cannot parse `{x}`: {e}")))
        })
        .collect()
}

/// Reads the two-line query-pair file format.
pub fn read_query_pair(path: &Path) -> CliResult<(Vec<f64>, Vec<f64>)> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::io(format!("reading query pair {}", path.display()), e))?;
    parse_query_pair(&text)
}

pub fn parse_query_pair(text: &str) -> CliResult<(Vec<f64>, Vec<f64>)> {
    let lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
    if lines.len() != 2 {
        return Err(CliError::config(format!(
            "query_pair: expected 2 non-empty lines, found {}",
            lines.len()
        )));
    }
    let parse = |l: &str| -> CliResult<Vec<f64>> {
        l.split_whitespace()
            .map(|x| {
                x.parse::<f64>()
                    .map_err(|e| CliError::config(format!("query_pair: cannot parse `{x}`: {e}")))
            })
            .collect()
    };
    let (q0, q1) = (parse(lines[0])?, parse(lines[1])?);
    if q0.len() != q1.len() {
        return Err(CliError::config(format!(
            "query_pair: line lengths differ ({} vs {})",
            q0.len(),
            q1.len()
        )));
    }
    if q0.iter().chain(&q1).any(|v| !v.is_finite()) {
        return Err(CliError::config("query_pair: values must be finite"));
    }
    Ok((q0, q1))
}

impl RunConfig {
    pub fn resolve(cli: &Cli) -> CliResult<Self> {
        let mut file = match &cli.opts.config {
            Some(p) => read_config_file(p)?,
            None => BTreeMap::new(),
        };
        let cfg = Self::merge(cli.command, cli.opts.clone(), &mut file)?;
        if let Some(key) = file.keys().next() {
            return Err(CliError::config(format!("unknown config key `{key}`")));
        }
        Ok(cfg)
    }

    fn merge(command: Command, o: Opts, f: &mut BTreeMap<String, String>) -> CliResult<Self> {
        let query_pair: Option<PathBuf> = take(o.query_pair, f, "query_pair")?;
        let d_given: Option<usize> = take(o.d, f, "d")?;
        let d = match (&query_pair, d_given) {
            (Some(p), given) => {
                let (q0, _) = read_query_pair(p)?;
                if let Some(d) = given {
                    require(d == q0.len(), "d", format!("{d} does not match query pair length {}", q0.len()))?;
                }
                q0.len()
            }
            (None, given) => given.unwrap_or(256),
        };
        require(d >= 1, "d", "must be at least 1")?;

        let eps_star = take(o.eps_star, f, "eps_star")?.unwrap_or(1.0);
        require(eps_star.is_finite() && eps_star > 0.0, "eps_star", "must be positive")?;
        let delta_star = take(o.delta_star, f, "delta_star")?.unwrap_or(1e-10);
        require(delta_star > 0.0 && delta_star < 1.0, "delta_star", format!("must lie in (0,1), got {delta_star}"))?;
        let delta_sens = take(o.delta_sens, f, "delta_sens")?.unwrap_or(1.0);
        require(delta_sens.is_finite() && delta_sens > 0.0, "delta_sens", "must be positive")?;
        let sigma_given: Option<f64> = take(o.sigma, f, "sigma")?;
        if let Some(s) = sigma_given {
            require(s.is_finite() && s > 0.0, "sigma", "must be positive")?;
        }

        let beta = take(o.beta, f, "beta")?.unwrap_or(1e-4);
        let gamma = take(o.gamma, f, "gamma")?.unwrap_or_else(|| PancakeShape::default_gamma(d));
        require(beta.is_finite() && beta > 0.0, "beta", "must be positive")?;
        require(gamma.is_finite() && gamma > 0.0, "gamma", "must be positive")?;
        let t = take(o.t, f, "t")?.unwrap_or(0.25);
        require(t.is_finite(), "t", "must be finite")?;

        let trials = take(o.trials, f, "trials")?.unwrap_or(100);
        require(trials >= 1, "trials", "must be at least 1")?;
        let seed = take(o.seed, f, "seed")?.unwrap_or(0);
        let out = take(o.out, f, "out")?;

        let mechanism: String = take(o.mechanism, f, "mechanism")?.unwrap_or_else(|| "gpm".into());
        let mitigation: String = take(o.mitigation, f, "mitigation")?.unwrap_or_else(|| "none".into());
        let mechanism = match (mechanism.as_str(), mitigation.as_str()) {
            ("gm", "none") => MechanismKind::Gm,
            ("gpm", "none") => MechanismKind::Gpm,
            ("gpm", "rotate") => MechanismKind::GpmRotated,
            ("gpm", "relay") => MechanismKind::RelayGpm,
            ("gm", "rotate" | "relay") => {
                return Err(CliError::config("mitigation: only applies to mechanism gpm"))
            }
            ("gm" | "gpm", other) => {
                return Err(CliError::config(format!("mitigation: expected none|rotate|relay, got `{other}`")))
            }
            (other, _) => return Err(CliError::config(format!("mechanism: expected gm|gpm, got `{other}`"))),
        };
        let key_policy = match take::<String>(o.key_policy, f, "key_policy")?.as_deref() {
            None | Some("fresh") => KeyChoice::Fresh,
            Some("fixed") => KeyChoice::Fixed,
            Some(other) => return Err(CliError::config(format!("key_policy: expected fresh|fixed, got `{other}`"))),
        };

        let n_records = take(o.n_records, f, "n_records")?.unwrap_or(1000);
        require(n_records >= 1, "n_records", "must be at least 1")?;
        let neighbour = match take::<String>(o.neighbour, f, "neighbour")?.as_deref() {
            None | Some("remove") => NeighbourRule::RemoveOne,
            Some("add") => NeighbourRule::AddOne,
            Some(other) => return Err(CliError::config(format!("neighbour: expected remove|add, got `{other}`"))),
        };
        if query_pair.is_none() && command == Command::Attack {
            require(d >= 2, "d", "histogram queries need d >= 2")?;
        }

        let deltas = match take::<String>(o.deltas, f, "deltas")? {
            Some(s) => parse_deltas(&s)?,
            None => DEFAULT_DELTAS.to_vec(),
        };
        require(!deltas.is_empty(), "deltas", "must be non-empty")?;
        for &x in &deltas {
            require(x > 0.0 && x < 0.5, "deltas", format!("values must lie in (0,0.5), got {x}"))?;
        }

        let default_samples = if command == Command::Sample { 10 } else { 10_000 };
        let n_samples = take(o.n_samples, f, "n_samples")?.unwrap_or(default_samples);
        require(n_samples >= 1, "n_samples", "must be at least 1")?;
        if command == Command::CovertTest {
            require(n_samples >= 100, "n_samples", "covert-test needs at least 100 samples")?;
        }
        let directions = take(o.directions, f, "directions")?.unwrap_or(50);
        require(directions >= 1, "directions", "must be at least 1")?;
        let batches = take(o.batches, f, "batches")?.unwrap_or(20);
        require(batches >= 1, "batches", "must be at least 1")?;
        let batch_size = take(o.batch_size, f, "batch_size")?.unwrap_or(100);
        require(batch_size >= 1, "batch_size", "must be at least 1")?;

        let servers = take(o.servers, f, "servers")?.unwrap_or(5);
        let backdoored = take(o.backdoored, f, "backdoored")?.unwrap_or(1);
        let colluding = take(o.colluding, f, "colluding")?.unwrap_or(1);
        let threshold = take(o.threshold, f, "threshold")?.unwrap_or(3);
        require(servers >= 1, "servers", "must be at least 1")?;
        require(backdoored + colluding <= servers, "colluding", "backdoored + colluding exceeds servers")?;
        require((1..=servers).contains(&threshold), "threshold", format!("must lie in [1, {servers}]"))?;

        let (sigma, sigma_calibrated) = match sigma_given {
            Some(s) => (s, false),
            None => (gm_calibrate_sigma(delta_sens, eps_star, delta_star)?, true),
        };

        Ok(Self {
            subcommand: command.name(),
            d,
            eps_star,
            delta_star,
            delta_sens,
            sigma,
            sigma_calibrated,
            beta,
            gamma,
            t,
            trials,
            seed,
            mechanism,
            key_policy,
            n_records,
            neighbour,
            query_pair,
            deltas,
            n_samples,
            directions,
            batches,
            batch_size,
            servers,
            backdoored,
            colluding,
            threshold,
            command,
            out,
        })
    }

    pub fn shape(&self) -> CliResult<PancakeShape> {
        Ok(PancakeShape::new(self.beta, self.gamma)?)
    }
}
