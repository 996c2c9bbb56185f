//! Data ingestion and report emission.

use kldsel::Error;
use serde_json::{Map, Value};
use std::fs;
use std::path::Path;

/// Reads one numeric observation per line. Blank lines and `#` comments
/// are skipped; a single non-numeric first line is accepted as a header.
/// Any other non-numeric line is a data error naming the line number.
pub fn read_observations(path: &Path) -> Result<Vec<f64>, Error> {
    let raw = fs::read_to_string(path)
        .map_err(|e| Error::Domain(format!("cannot read {}: {e}", path.display())))?;
    let mut values = Vec::new();
    let mut first_content_line = true;
    for (idx, line) in raw.lines().enumerate() {
        let trimmed = line.trim();
        let data = match trimmed.find('#') {
            Some(0) => continue,
            Some(pos) => trimmed[..pos].trim(),
            None => trimmed,
        };
        if data.is_empty() {
            continue;
        }
        match data.parse::<f64>() {
            Ok(v) if v.is_finite() => values.push(v),
            Ok(v) => {
                return Err(Error::Domain(format!(
                    "non-finite observation {v} on line {}",
                    idx + 1
                )))
            }
            Err(_) if first_content_line => {} // header
            Err(_) => {
                return Err(Error::Domain(format!(
                    "non-numeric value {data:?} on line {}",
                    idx + 1
                )))
            }
        }
        first_content_line = false;
    }
    if values.is_empty() {
        return Err(Error::Domain(format!("{} contains no observations", path.display())));
    }
    Ok(values)
}

/// Observations as nonnegative integers (required by the count models).
pub fn as_counts(values: &[f64]) -> Result<Vec<u64>, Error> {
    values
        .iter()
        .map(|&v| {
            if v >= 0.0 && v.fract() == 0.0 && v <= u64::MAX as f64 {
                Ok(v as u64)
            } else {
                Err(Error::Domain(format!("observation {v} is not a nonnegative integer")))
            }
        })
        .collect()
}

/// Rounds every JSON number to nine significant digits, in place.
/// Non-finite values become null.
pub fn round_numbers(value: &mut Value) {
    match value {
        Value::Number(n) => {
            if let Some(f) = n.as_f64() {
                if n.is_f64() {
                    *value = match serde_json::Number::from_f64(round_sig(f)) {
                        Some(rounded) => Value::Number(rounded),
                        None => Value::Null,
                    };
                }
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_numbers),
        Value::Object(map) => map.values_mut().for_each(round_numbers),
        _ => {}
    }
}

/// Nearest double with nine significant decimal digits.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.8e}").parse().unwrap_or(x)
}

/// Formats a float for CSV output with nine significant digits.
pub fn format_csv(x: f64) -> String {
    if x.is_finite() {
        format!("{}", round_sig(x))
    } else {
        "nan".to_string()
    }
}

/// Writes to the path, or to standard output when no path is given.
/// Reports are LF-terminated.
pub fn emit(out: Option<&Path>, content: &str) -> Result<(), Error> {
    match out {
        Some(path) => fs::write(path, content)
            .map_err(|e| Error::Domain(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

/// Assembles the standard report envelope `{manifest, config, results}`.
pub fn report(
    command: &str,
    seed: Option<u64>,
    out: Option<&Path>,
    timestamps: Option<(String, String)>,
    config: Value,
    results: Value,
) -> Value {
    let mut manifest = Map::new();
    manifest.insert("command".into(), Value::String(command.to_string()));
    manifest.insert("version".into(), Value::String(env!("CARGO_PKG_VERSION").to_string()));
    if let Some(seed) = seed {
        manifest.insert("seed".into(), Value::Number(seed.into()));
    }
    if let Some(path) = out {
        manifest.insert("output".into(), Value::String(path.display().to_string()));
    }
    if let Some((start, end)) = timestamps {
        manifest.insert("started_at".into(), Value::String(start));
        manifest.insert("finished_at".into(), Value::String(end));
    }
    let mut root = Map::new();
    root.insert("manifest".into(), Value::Object(manifest));
    root.insert("config".into(), config);
    root.insert("results".into(), results);
    let mut value = Value::Object(root);
    round_numbers(&mut value);
    value
}

/// Serializes a report with a trailing newline.
pub fn to_json_string(value: &Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serialization");
    s.push('\n');
    s
}

/// Flattens a results object into `key,value` CSV rows (dotted nested
/// keys, indexed array elements), for commands whose natural shape is a
/// record rather than a table.
pub fn kv_csv(results: &Value) -> String {
    let mut rows = vec!["key,value".to_string()];
    flatten("", results, &mut rows);
    let mut text = rows.join("\n");
    text.push('\n');
    text
}

fn flatten(prefix: &str, value: &Value, rows: &mut Vec<String>) {
    let key = |suffix: &str| {
        if prefix.is_empty() {
            suffix.to_string()
        } else {
            format!("{prefix}.{suffix}")
        }
    };
    match value {
        Value::Object(map) => {
            for (k, v) in map {
                flatten(&key(k), v, rows);
            }
        }
        Value::Array(items) => {
            for (i, v) in items.iter().enumerate() {
                flatten(&key(&i.to_string()), v, rows);
            }
        }
        Value::Number(n) => {
            let rendered = n.as_f64().map_or_else(|| n.to_string(), |f| format_csv(round_sig(f)));
            rows.push(format!("{prefix},{rendered}"));
        }
        Value::Bool(b) => rows.push(format!("{prefix},{b}")),
        Value::String(s) => rows.push(format!("{prefix},{s}")),
        Value::Null => rows.push(format!("{prefix},")),
    }
}
