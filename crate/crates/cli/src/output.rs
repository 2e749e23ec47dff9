use std::fmt::Write as _;
use std::io::Write as _;
use std::path::PathBuf;

use serde_json::json;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;
pub const OUT_DIR_ENV: &str = "PANCAKE_OUT_DIR";

/// A CSV artifact built in memory and written in one go.
#[derive(Debug)]
pub struct Report {
    text: String,
}

impl Report {
    pub fn new(cfg: &RunConfig, columns: &[&str]) -> CliResult<Self> {
        let header = json!({
            "schema": format!("pancake-{}/v{SCHEMA_VERSION}", cfg.subcommand),
            "seed": cfg.seed,
            "config": cfg,
        });
        let header = serde_json::to_string(&header)
            .map_err(|e| CliError::config(format!("serialising header: {e}")))?;
        Ok(Self {
            text: format!("# {header}\n{}\n", columns.join(",")),
        })
    }

    pub fn row<I, T>(&mut self, fields: I)
    where
        I: IntoIterator<Item = T>,
        T: std::fmt::Display,
    {
        let mut first = true;
        for f in fields {
            if !first {
                self.text.push(',');
            }
            let _ = write!(self.text, "{f}");
            first = false;
        }
        self.text.push('\n');
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    /// Writes to `--out`, else `$PANCAKE_OUT_DIR/<subcommand>.csv`, else
    /// stdout. A file left half-written is removed.
    pub fn finish(self, cfg: &RunConfig) -> CliResult<()> {
        match destination(cfg) {
            Some(path) => {
                if let Err(e) = std::fs::write(&path, &self.text) {
                    let _ = std::fs::remove_file(&path);
                    return Err(CliError::io(format!("writing {}", path.display()), e));
                }
                Ok(())
            }
            None => std::io::stdout()
                .lock()
                .write_all(self.text.as_bytes())
                .map_err(|e| CliError::io("writing stdout", e)),
        }
    }
}

pub fn destination(cfg: &RunConfig) -> Option<PathBuf> {
    cfg.out.clone().or_else(|| {
        std::env::var_os(OUT_DIR_ENV).map(|dir| PathBuf::from(dir).join(format!("{}.csv", cfg.subcommand)))
    })
}

/// Formats an optional number, empty when absent.
pub fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}
