//! Flat `key = value` configuration files.
//!
//! Keys are dotted paths into a command's settings (`extract.iterations`,
//! `setup.train.epochs`). Values are numbers, `true`/`false`, comma-separated
//! lists of numbers, or bare strings. `#` starts a comment.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::exit::UsageError;

pub fn parse(text: &str, origin: &str) -> Result<Vec<(String, String)>, UsageError> {
    let mut out = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| UsageError(format!("{origin}:{}: expected key = value", k + 1)))?;
        let key = key.trim();
        if key.is_empty() {
            return Err(UsageError(format!("{origin}:{}: empty key", k + 1)));
        }
        out.push((key.to_string(), value.trim().to_string()));
    }
    Ok(out)
}

/// A `--set key=value` override.
pub fn parse_override(s: &str) -> Result<(String, String), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected key=value, got {s:?}"))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

fn scalar(s: &str) -> Value {
    match s {
        "true" => return Value::Bool(true),
        "false" => return Value::Bool(false),
        _ => {}
    }
    if let Ok(i) = s.parse::<i64>() {
        return Value::from(i);
    }
    match s.parse::<f64>() {
        Ok(x) if x.is_finite() => Value::from(x),
        _ => Value::String(s.to_string()),
    }
}

fn value_for(existing: &Value, raw: &str) -> Value {
    match existing {
        Value::Array(_) if raw.is_empty() => Value::Array(Vec::new()),
        Value::Array(_) => Value::Array(raw.split(',').map(|x| scalar(x.trim())).collect()),
        Value::String(_) => Value::String(raw.to_string()),
        // Optional settings start out as null.
        Value::Null if raw == "none" => Value::Null,
        _ => scalar(raw),
    }
}

fn set_path(root: &mut Value, key: &str, raw: &str) -> Result<(), UsageError> {
    let mut node = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let map: &mut Map<String, Value> = node
            .as_object_mut()
            .ok_or_else(|| UsageError(format!("unknown setting {key:?}")))?;
        let slot = map.get_mut(*part).ok_or_else(|| UsageError(format!("unknown setting {key:?}")))?;
        if i + 1 == parts.len() {
            *slot = value_for(slot, raw);
            return Ok(());
        }
        node = slot;
    }
    Ok(())
}

/// `defaults` with every pair applied in order.
pub fn apply<T: Serialize + DeserializeOwned>(defaults: &T, pairs: &[(String, String)]) -> Result<T, UsageError> {
    let mut tree = serde_json::to_value(defaults).expect("settings serialize");
    for (k, v) in pairs {
        set_path(&mut tree, k, v)?;
    }
    serde_json::from_value(tree).map_err(|e| UsageError(format!("bad setting value: {e}")))
}

/// Settings from an optional file followed by command-line overrides.
pub fn load<T: Serialize + DeserializeOwned>(
    defaults: &T,
    file: Option<&Path>,
    overrides: &[(String, String)],
) -> anyhow::Result<T> {
    let mut pairs = Vec::new();
    if let Some(path) = file {
        let text = std::fs::read_to_string(path).map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))?;
        pairs.extend(parse(&text, &path.display().to_string())?);
    }
    pairs.extend(overrides.iter().cloned());
    Ok(apply(defaults, &pairs)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ilens_core::ExtractConfig;

    #[test]
    fn nested_keys_and_comments() {
        let text = "# extraction\niterations = 50\nsmooth_eps = 0.001 # smoothed\nenable_noise=false\n";
        let cfg = apply(&ExtractConfig::default(), &parse(text, "t").unwrap()).unwrap();
        assert_eq!(cfg.iterations, 50);
        assert_eq!(cfg.smooth_eps, Some(0.001));
        assert!(!cfg.enable_noise);
    }

    #[test]
    fn rejects_unknown_and_malformed() {
        assert!(apply(&ExtractConfig::default(), &[("nope".into(), "1".into())]).is_err());
        assert!(apply(&ExtractConfig::default(), &[("iterations".into(), "many".into())]).is_err());
        assert!(parse("just words", "t").is_err());
    }
}
