//! Artifact writers. Every file records the artifact version and resolved config.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{Map, Value};

use crate::config::Config;
use crate::CliError;

pub fn header_lines(cfg: &Config) -> String {
    format!("# telegraph {}\n# config: {}\n", telegraph::VERSION, cfg.resolved_json())
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Runtime(format!("cannot write {}: {e}", path.display()))
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

/// Write a CSV with the comment header, a column line and `rows`.
pub fn write_csv(dir: &Path, name: &str, cfg: &Config, columns: &str, rows: &[String]) -> Result<PathBuf, CliError> {
    ensure_dir(dir)?;
    let path = dir.join(name);
    let mut text = header_lines(cfg);
    text.push_str(columns);
    text.push('\n');
    for r in rows {
        text.push_str(r);
        text.push('\n');
    }
    fs::write(&path, text).map_err(|e| io_err(&path, e))?;
    Ok(path)
}

/// Write `body` (an object) with `version` and `config` fields prepended.
pub fn write_json(dir: &Path, name: &str, cfg: &Config, body: Value) -> Result<PathBuf, CliError> {
    ensure_dir(dir)?;
    let path = dir.join(name);
    let mut obj = Map::new();
    obj.insert("version".into(), Value::String(telegraph::VERSION.into()));
    obj.insert("config".into(), serde_json::to_value(cfg).expect("config serializes"));
    match body {
        Value::Object(m) => obj.extend(m),
        other => {
            obj.insert("result".into(), other);
        }
    }
    let mut text = serde_json::to_string_pretty(&Value::Object(obj)).expect("json serializes");
    text.push('\n');
    fs::write(&path, text).map_err(|e| io_err(&path, e))?;
    Ok(path)
}

/// Strip `#` comment lines from a CSV, returning the column line and data rows.
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>), CliError> {
    let text =
        fs::read_to_string(path).map_err(|e| CliError::Runtime(format!("cannot read {}: {e}", path.display())))?;
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let cols = lines
        .next()
        .ok_or_else(|| CliError::Runtime(format!("{} has no column line", path.display())))?
        .split(',')
        .map(str::to_string)
        .collect();
    let rows = lines.map(|l| l.split(',').map(str::to_string).collect()).collect();
    Ok((cols, rows))
}

/// Shortest round-trip form, switching to exponent notation far from unity.
pub fn num(x: f64) -> String {
    if x == 0.0 {
        "0".into()
    } else if x.is_finite() && (1e-4..1e7).contains(&x.abs()) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}
