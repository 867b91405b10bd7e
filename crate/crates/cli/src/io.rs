//! Exit codes, report output and staged writes.

use std::error::Error;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

pub const EXIT_OK: u8 = 0;
pub const EXIT_INVALID: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_IO: u8 = 3;

#[derive(Debug, Error)]
#[error("{message}")]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn invalid(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INVALID,
            message: message.into(),
        }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    /// Exit 3 when an I/O error sits anywhere in the source chain, else 1.
    pub fn from_error(e: &(dyn Error + 'static)) -> Self {
        let mut cur: Option<&(dyn Error + 'static)> = Some(e);
        let mut code = EXIT_INVALID;
        while let Some(err) = cur {
            if err.is::<std::io::Error>() {
                code = EXIT_IO;
                break;
            }
            cur = err.source();
        }
        Self {
            code,
            message: e.to_string(),
        }
    }
}

/// Lets `?` convert any library error.
pub trait OrCli<T> {
    fn cli(self) -> Result<T, CliError>;
}

impl<T, E: Error + 'static> OrCli<T> for Result<T, E> {
    fn cli(self) -> Result<T, CliError> {
        self.map_err(|e| CliError::from_error(&e))
    }
}

pub fn to_json<T: Serialize>(value: &T, pretty: bool) -> Result<String, CliError> {
    let text = if pretty {
        serde_json::to_string_pretty(value)
    } else {
        serde_json::to_string(value)
    };
    text.cli()
}

/// Prints the report, or writes it to `out` when given.
pub fn emit<T: Serialize>(value: &T, out: Option<&Path>, pretty: bool) -> Result<(), CliError> {
    let text = to_json(value, pretty)?;
    match out {
        Some(path) => write_file(path, format!("{text}\n").as_bytes()),
        None => {
            use std::io::Write;
            let mut stdout = std::io::stdout().lock();
            match writeln!(stdout, "{text}").and_then(|_| stdout.flush()) {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(CliError::from_error(&e)),
                _ => Ok(()),
            }
        }
    }
}

fn sibling(path: &Path, tag: &str) -> PathBuf {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!(".{name}.{tag}-{}", std::process::id()))
}

/// Writes through a temporary sibling and renames, so a failed write never
/// leaves a truncated file behind.
pub fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).cli()?;
    }
    let tmp = sibling(path, "partial");
    let result = fs::write(&tmp, bytes).and_then(|_| fs::rename(&tmp, path));
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result.cli()
}

/// Runs `build` against an empty staging directory and moves its entries
/// into `out` only when it succeeds. Existing entries of the same name are
/// replaced; other files in `out` are left alone.
pub fn staged_dir<T>(out: &Path, build: impl FnOnce(&Path) -> Result<T, CliError>) -> Result<T, CliError> {
    let stage = sibling(out, "staging");
    if stage.exists() {
        fs::remove_dir_all(&stage).cli()?;
    }
    fs::create_dir_all(&stage).cli()?;
    let result = build(&stage).and_then(|value| {
        fs::create_dir_all(out).cli()?;
        for entry in fs::read_dir(&stage).cli()? {
            let entry = entry.cli()?;
            let target = out.join(entry.file_name());
            if target.is_dir() {
                fs::remove_dir_all(&target).cli()?;
            }
            fs::rename(entry.path(), &target).cli()?;
        }
        Ok(value)
    });
    let _ = fs::remove_dir_all(&stage);
    result
}
