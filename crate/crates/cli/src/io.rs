use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};

use parabolic::Error;
use serde::Serialize;
use serde_json::Value;

/// Failure classes and their exit codes.
#[derive(Debug)]
pub enum Failure {
    /// Bad flags, config or input files.
    Config(String),
    /// A result did not certify.
    Certification(String),
    /// A size, time or node limit stopped the work.
    SolverLimit(String),
    Internal(String),
    /// Already printed; exit with this code.
    Reported(u8),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Certification(_) => 3,
            Failure::SolverLimit(_) => 4,
            Failure::Internal(_) => 1,
            Failure::Reported(c) => *c,
        }
    }

    pub fn message(&self) -> Option<&str> {
        match self {
            Failure::Config(m) | Failure::Certification(m) | Failure::SolverLimit(m) | Failure::Internal(m) => Some(m),
            Failure::Reported(_) => None,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Size { .. } | Error::Scale(_) => Failure::SolverLimit(e.to_string()),
            Error::Model(_) => Failure::Internal(e.to_string()),
            _ => Failure::Config(e.to_string()),
        }
    }
}

pub fn config_err(context: impl Display, e: impl Display) -> Failure {
    Failure::Config(format!("{context}: {e}"))
}

pub fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| config_err(path.display(), e))
}

pub fn require_file(path: &Path) -> Result<(), Failure> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Failure::Config(format!("{}: no such file", path.display())))
    }
}

pub fn write(path: &Path, text: &str) -> Result<(), Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| config_err(dir.display(), e))?;
    }
    fs::write(path, text).map_err(|e| config_err(path.display(), e))
}

pub fn pretty<T: Serialize>(value: &T) -> Result<String, Failure> {
    serde_json::to_string_pretty(value)
        .map(|s| s + "\n")
        .map_err(|e| Failure::Internal(e.to_string()))
}

/// Writes to `path`, or to stdout when absent.
pub fn emit(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => write(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// `<path>.timing.json`, holding everything that varies between runs.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".timing.json");
    PathBuf::from(s)
}

pub fn write_sidecar(path: &Path, timing: Value) -> Result<(), Failure> {
    write(&sidecar_path(path), &pretty(&timing)?)
}

/// Reals with an optional multiple of π: `1.5`, `pi`, `-pi/2`, `3pi/2`, `2*pi`.
pub fn parse_real(s: &str) -> Result<f64, String> {
    let t = s.trim().to_ascii_lowercase();
    let Some(at) = t.find("pi") else {
        return t.parse().map_err(|_| format!("'{s}' is not a number"));
    };
    let (head, tail) = (&t[..at], &t[at + 2..]);
    let head = head.trim_end_matches('*');
    let coef = match head {
        "" | "+" => 1.0,
        "-" => -1.0,
        h => h.parse::<f64>().map_err(|_| format!("'{s}' is not a number"))?,
    };
    let den = match tail {
        "" => 1.0,
        t => t
            .strip_prefix('/')
            .and_then(|d| d.parse::<f64>().ok())
            .ok_or_else(|| format!("'{s}' is not a number"))?,
    };
    Ok(coef * std::f64::consts::PI / den)
}
