//! Merging a JSON config file into the argument list.
//!
//! Config keys become flags inserted right after the subcommand name. Keys
//! whose flag also appears on the command line are dropped, so flags win.

use std::ffi::OsString;
use std::path::PathBuf;

use serde_json::Value;

use crate::io::{config_err, read, Failure};

const SUBCOMMANDS: [&str; 7] = ["fit", "verify", "table", "relax", "census", "report", "zigzag-gen"];

fn config_path(argv: &[OsString]) -> Option<PathBuf> {
    let mut it = argv.iter().skip(1);
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().map(PathBuf::from);
        }
        if let Some(p) = s.strip_prefix("--config=") {
            return Some(PathBuf::from(p));
        }
    }
    None
}

fn scalar(v: &Value, key: &str) -> Result<String, Failure> {
    match v {
        Value::String(s) => Ok(s.clone()),
        Value::Number(n) => Ok(n.to_string()),
        _ => Err(Failure::Config(format!("config key '{key}': expected a string or number"))),
    }
}

/// Flags for one config object, in key order, leaving out those in `given`.
pub fn config_flags(doc: &Value, given: &[String]) -> Result<Vec<String>, Failure> {
    let obj = doc
        .as_object()
        .ok_or_else(|| Failure::Config("config file must hold a JSON object".into()))?;
    let mut out = Vec::new();
    for (key, v) in obj {
        if key == "config" || key == "command" {
            continue;
        }
        let flag = format!("--{}", key.replace('_', "-"));
        if given.iter().any(|g| *g == flag || g.starts_with(&format!("{flag}="))) {
            continue;
        }
        match v {
            // one occurrence per inner array
            Value::Array(items) if items.iter().all(Value::is_array) => {
                for group in items {
                    out.push(flag.clone());
                    for item in group.as_array().into_iter().flatten() {
                        out.push(scalar(item, key)?);
                    }
                }
            }
            Value::Bool(true) => out.push(flag),
            Value::Bool(false) | Value::Null => {}
            Value::Array(items) => {
                out.push(flag);
                for item in items {
                    out.push(scalar(item, key)?);
                }
            }
            other => {
                out.push(flag);
                out.push(scalar(other, key)?);
            }
        }
    }
    Ok(out)
}

pub fn merged_args(argv: Vec<OsString>) -> Result<Vec<OsString>, Failure> {
    let Some(path) = config_path(&argv) else {
        return Ok(argv);
    };
    let text = read(&path)?;
    let doc: Value = serde_json::from_str(&text).map_err(|e| config_err(path.display(), e))?;
    let given: Vec<String> = argv.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    let flags = config_flags(&doc, &given)?;
    let Some(at) = argv
        .iter()
        .position(|a| SUBCOMMANDS.contains(&a.to_string_lossy().as_ref()))
    else {
        return Ok(argv);
    };
    let mut out = argv[..=at].to_vec();
    out.extend(flags.into_iter().map(OsString::from));
    out.extend_from_slice(&argv[at + 1..]);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn flags_from_object() {
        let doc = json!({"eps": 0.1, "domain": [0, "pi"], "swap_growth": true, "no-lift": false});
        assert_eq!(
            config_flags(&doc, &[]).unwrap(),
            vec!["--domain", "0", "pi", "--eps", "0.1", "--swap-growth"]
        );
        let given = vec!["--eps=1".to_string()];
        assert_eq!(config_flags(&doc, &given).unwrap(), vec!["--domain", "0", "pi", "--swap-growth"]);
        let boxed = json!({"domain": [[0, 1], [-1, 1]]});
        assert_eq!(
            config_flags(&boxed, &[]).unwrap(),
            vec!["--domain", "0", "1", "--domain", "-1", "1"]
        );
        assert!(config_flags(&json!([1]), &[]).is_err());
        assert!(config_flags(&json!({"eps": {"a": 1}}), &[]).is_err());
    }
}
