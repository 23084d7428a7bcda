use std::env;
use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::args::Format;

pub const OUTPUT_DIR_VAR: &str = "QPC_OUTPUT_DIR";

#[derive(Debug)]
pub enum CliError {
    /// Bad flags or values; exit status 64.
    Usage(String),
    /// A documented bound was exceeded; exit status 1.
    Bound(String),
    /// Anything else that went wrong at run time; exit status 1.
    Runtime(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Bound(m) => write!(f, "bound violated: {m}"),
            CliError::Runtime(m) => write!(f, "error: {m}"),
        }
    }
}

impl From<qpc_core::QpcError> for CliError {
    fn from(e: qpc_core::QpcError) -> Self {
        use qpc_core::QpcError::*;
        match e {
            LengthOutOfRange(_)
            | LengthMismatch { .. }
            | EmptyBitString
            | InvalidBit(_)
            | ProbabilityOutOfRange(_)
            | InvalidParameter(_) => CliError::Usage(e.to_string()),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Where a command writes its artifact.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Destination {
    Stdout,
    File(PathBuf),
}

impl Destination {
    pub fn resolve(output: Option<&Path>, default_name: &str) -> Self {
        let dir = env::var_os(OUTPUT_DIR_VAR).map(PathBuf::from);
        match output {
            Some(p) if p == Path::new("-") => Destination::Stdout,
            Some(p) if p.is_relative() => Destination::File(dir.map_or_else(|| p.to_path_buf(), |d| d.join(p))),
            Some(p) => Destination::File(p.to_path_buf()),
            None => Destination::File(dir.unwrap_or_default().join(default_name)),
        }
    }

    pub fn is_stdout(&self) -> bool {
        matches!(self, Destination::Stdout)
    }

    pub fn write(&self, bytes: &[u8]) -> CliResult<()> {
        match self {
            Destination::Stdout => {
                let mut out = io::stdout().lock();
                out.write_all(bytes)?;
                out.flush()?;
            }
            Destination::File(path) => {
                if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                    fs::create_dir_all(parent)?;
                }
                fs::write(path, bytes)
                    .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))?;
                eprintln!("wrote {}", path.display());
            }
        }
        Ok(())
    }
}

pub fn require_format(format: Format, allowed: &[Format], command: &str) -> CliResult<()> {
    if allowed.contains(&format) {
        Ok(())
    } else {
        Err(CliError::Usage(format!("{command} cannot emit {}", format.extension())))
    }
}

pub fn json_bytes<T: Serialize>(value: &T) -> CliResult<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

pub fn csv_bytes<R: Serialize>(rows: &[R]) -> CliResult<Vec<u8>> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for row in rows {
        writer.serialize(row)?;
    }
    writer.into_inner().map_err(|e| CliError::Runtime(e.to_string()))
}
