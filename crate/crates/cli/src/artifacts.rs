//! Output files. Every JSON record carries [`Provenance`]; every CSV starts with a
//! `#` comment line carrying the same fields.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::CliError;

pub const TOOL: &str = "ionsep";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub config_hash: String,
    pub master_seed: u64,
}

impl Provenance {
    pub fn of(cfg: &ExperimentConfig) -> Self {
        Self { tool: TOOL.into(), version: VERSION.into(), config_hash: cfg.hash(), master_seed: cfg.master_seed }
    }

    fn comment(&self) -> String {
        format!("# {} {} config_hash={} master_seed={}\n", self.tool, self.version, self.config_hash, self.master_seed)
    }
}

/// A record stamped with provenance, flattened into one JSON object.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Stamped<T> {
    #[serde(flatten)]
    pub provenance: Provenance,
    #[serde(flatten)]
    pub record: T,
}

pub struct OutDir {
    pub root: PathBuf,
    pub provenance: Provenance,
}

impl OutDir {
    pub fn create(cfg: &ExperimentConfig) -> Result<Self, CliError> {
        let root = cfg.output_dir.clone();
        fs::create_dir_all(&root)
            .map_err(|e| CliError::Config(format!("output directory {} is not writable: {e}", root.display())))?;
        Ok(Self { root, provenance: Provenance::of(cfg) })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    fn write(&self, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        let path = self.path(name);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
        }
        fs::write(&path, bytes).map_err(|e| io_error(&path, e))?;
        Ok(path)
    }

    pub fn json<T: Serialize>(&self, name: &str, record: &T) -> Result<PathBuf, CliError> {
        let stamped = Stamped { provenance: self.provenance.clone(), record };
        let mut text = serde_json::to_string_pretty(&stamped).map_err(|e| CliError::Run(e.to_string()))?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    pub fn jsonl<T: Serialize>(&self, name: &str, records: &[T]) -> Result<PathBuf, CliError> {
        let mut out = Vec::new();
        for r in records {
            let stamped = Stamped { provenance: self.provenance.clone(), record: r };
            serde_json::to_writer(&mut out, &stamped).map_err(|e| CliError::Run(e.to_string()))?;
            out.push(b'\n');
        }
        self.write(name, &out)
    }

    /// CSV with a provenance comment line, then the header, then the rows.
    pub fn csv(&self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<PathBuf, CliError> {
        let mut out = self.provenance.comment().into_bytes();
        {
            let mut w = csv::Writer::from_writer(&mut out);
            w.write_record(header).map_err(|e| CliError::Run(e.to_string()))?;
            for r in rows {
                w.write_record(r).map_err(|e| CliError::Run(e.to_string()))?;
            }
            w.flush().map_err(|e| CliError::Run(e.to_string()))?;
        }
        self.write(name, &out)
    }
}

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::Run(format!("cannot write {}: {e}", path.display()))
}

/// Shortest round-trip decimal form; empty for missing values.
pub fn num(v: f64) -> String {
    format!("{v:e}")
}

pub fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// Reads a JSON artifact, ignoring provenance and unknown fields.
pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text =
        fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// `writeln!` to stderr that never panics.
pub fn note(msg: &str) {
    let _ = writeln!(std::io::stderr(), "{msg}");
}
