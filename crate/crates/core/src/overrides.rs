//! `key=value` configuration overrides applied through a config's serde form.

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

/// Applies `key=value` lines (`#` comments and blank lines ignored) to a
/// copy of `cfg`. Nested fields use dotted keys such as `detection.k=2.5`;
/// values are JSON, except that string fields take the text as is.
pub fn apply_overrides<T: Serialize + DeserializeOwned>(cfg: &T, text: &str) -> Result<T, String> {
    let mut doc = serde_json::to_value(cfg).map_err(|e| e.to_string())?;
    for line in text.lines().map(str::trim) {
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("expected key=value, got '{line}'"))?;
        let (key, value) = (key.trim(), value.trim());
        let mut slot = &mut doc;
        for part in key.split('.') {
            slot = slot
                .get_mut(part)
                .ok_or_else(|| format!("unknown config key '{key}'"))?;
        }
        *slot = match slot {
            Value::String(_) => Value::String(value.trim_matches('"').to_string()),
            _ => serde_json::from_str(value)
                .map_err(|_| format!("bad value for '{key}': {value}"))?,
        };
    }
    serde_json::from_value(doc).map_err(|e| e.to_string())
}
