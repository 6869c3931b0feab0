use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numerical(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 4,
        }
    }

    pub fn to_json(&self) -> String {
        let (kind, message) = match self {
            CliError::Config(m) => ("config", m),
            CliError::Numerical(m) => ("numerical", m),
            CliError::Io(m) => ("io", m),
        };
        serde_json::json!({ "error": { "kind": kind, "message": message } }).to_string()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) | CliError::Numerical(m) | CliError::Io(m) => f.write_str(m),
        }
    }
}

impl From<pecs_core::Error> for CliError {
    fn from(e: pecs_core::Error) -> Self {
        use pecs_core::Error as E;
        match e {
            E::Numerical(_) | E::Degenerate(_) => CliError::Numerical(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Config(format!("invalid JSON: {e}"))
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Embedded in every artifact so it can be regenerated.
#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub tool: &'static str,
    pub version: &'static str,
    pub config_hash: String,
    pub seed: u64,
}

impl Provenance {
    pub fn new<C: Serialize>(config: &C, seed: u64) -> CliResult<Self> {
        let canonical = serde_json::to_string(config)?;
        Ok(Self {
            tool: "pecs",
            version: env!("CARGO_PKG_VERSION"),
            config_hash: hex::encode(Sha256::digest(canonical.as_bytes())),
            seed,
        })
    }

    pub fn csv_comment(&self) -> String {
        format!("# {} {} config={} seed={}\n", self.tool, self.version, self.config_hash, self.seed)
    }
}

pub struct OutDir {
    root: PathBuf,
    pub provenance: Provenance,
}

impl OutDir {
    pub fn create(root: &Path, provenance: Provenance) -> CliResult<Self> {
        fs::create_dir_all(root).map_err(|e| CliError::Io(format!("{}: {e}", root.display())))?;
        Ok(Self { root: root.to_path_buf(), provenance })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    /// Writes via a temporary file in the same directory and renames it.
    pub fn write(&self, name: &str, contents: &str) -> CliResult<PathBuf> {
        let dest = self.path(name);
        if let Some(dir) = dest.parent() {
            fs::create_dir_all(dir)?;
        }
        let tmp = dest.with_file_name(format!(".{}.tmp", dest.file_name().and_then(|n| n.to_str()).unwrap_or("out")));
        let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", dest.display()));
        let mut f = fs::File::create(&tmp).map_err(io)?;
        f.write_all(contents.as_bytes()).map_err(io)?;
        f.sync_all().map_err(io)?;
        fs::rename(&tmp, &dest).map_err(io)?;
        Ok(dest)
    }

    pub fn csv(&self, name: &str, body: &str) -> CliResult<PathBuf> {
        self.write(name, &(self.provenance.csv_comment() + body))
    }

    /// Adds a `provenance` field to `value` (which must serialize to an object).
    pub fn json<T: Serialize>(&self, name: &str, value: &T) -> CliResult<PathBuf> {
        let mut v = serde_json::to_value(value)?;
        match v.as_object_mut() {
            Some(obj) => {
                obj.insert("provenance".into(), serde_json::to_value(&self.provenance)?);
            }
            None => return Err(CliError::Numerical(format!("{name}: artifact is not a JSON object"))),
        }
        self.write(name, &(serde_json::to_string_pretty(&v)? + "\n"))
    }
}

pub struct Log {
    pub quiet: bool,
    pub json: bool,
}

impl Log {
    pub fn info(&self, msg: &str) {
        if self.quiet {
            return;
        }
        if self.json {
            eprintln!("{}", serde_json::json!({ "level": "info", "msg": msg }));
        } else {
            eprintln!("{msg}");
        }
    }
}
