use std::fs;
use std::path::Path;

use serde_json::Value;

use crate::error::{Error, Result};
use crate::trainer::RunConfig;

/// Parses `key.path=value`. The value is read as JSON when it parses as JSON
/// and as a bare string otherwise.
pub fn parse_override(spec: &str) -> Result<(String, Value)> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::config(spec, "override must look like key.path=value"))?;
    let key = key.trim();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(Error::config(
            spec,
            "override key has an empty path segment",
        ));
    }
    let raw = raw.trim();
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    Ok((key.to_string(), value))
}

fn apply_override(doc: &mut Value, key: &str, value: Value) -> Result<()> {
    let mut cur = doc;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = cur.as_object_mut().ok_or_else(|| {
            Error::config(
                parts[..i].join("."),
                "cannot override inside a non-object value",
            )
        })?;
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        cur = obj
            .entry(part.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    unreachable!("override key has at least one segment")
}

/// Turns a JSON document plus overrides into a validated config.
pub fn config_from_value(mut doc: Value, overrides: &[String]) -> Result<RunConfig> {
    if !doc.is_object() {
        return Err(Error::config("<root>", "config must be a JSON object"));
    }
    for o in overrides {
        let (key, value) = parse_override(o)?;
        apply_override(&mut doc, &key, value)?;
    }
    let config: RunConfig = serde_path_to_error::deserialize(doc).map_err(|e| {
        let path = e.path().to_string();
        let path = if path == "." {
            "<root>".to_string()
        } else {
            path
        };
        Error::config(path, e.inner().to_string())
    })?;
    config.validate()?;
    Ok(config)
}

pub fn parse_config_str(text: &str, overrides: &[String]) -> Result<RunConfig> {
    let doc: Value =
        serde_json::from_str(text).map_err(|e| Error::config("<root>", e.to_string()))?;
    config_from_value(doc, overrides)
}

/// Reads a config file, applies defaults and `key=value` overrides (overrides
/// win over file values), and validates every bound.
pub fn load_config(path: &Path, overrides: &[String]) -> Result<RunConfig> {
    let text = fs::read_to_string(path).map_err(|e| {
        Error::config(
            path.display().to_string(),
            format!("cannot read config: {e}"),
        )
    })?;
    parse_config_str(&text, overrides)
}

/// Canonical JSON form of a config; loading it back yields the same config.
pub fn normalized_json(config: &RunConfig) -> String {
    serde_json::to_string_pretty(config).expect("config serialises")
}
