//! Canonical JSON output.
//!
//! Every file the toolkit writes goes through here so that identical inputs
//! produce identical bytes: object keys are sorted, floats are printed with
//! exactly six decimals and integers verbatim.

use serde::Serialize;
use serde_json::{Map, Number, Value};

use crate::error::{Error, Result};

/// Serializes `value` as indented canonical JSON with a trailing newline.
pub fn to_canonical_pretty<T: Serialize>(value: &T) -> Result<String> {
    let value = to_value(value)?;
    let mut out = String::new();
    write_value(&mut out, &value, Some(0));
    out.push('\n');
    Ok(out)
}

/// Serializes `value` as one canonical JSON line (no trailing newline).
pub fn to_canonical_line<T: Serialize>(value: &T) -> Result<String> {
    let value = to_value(value)?;
    let mut out = String::new();
    write_value(&mut out, &value, None);
    Ok(out)
}

fn to_value<T: Serialize>(value: &T) -> Result<Value> {
    serde_json::to_value(value).map_err(|e| Error::InvalidConfig(format!("serialization: {e}")))
}

/// Formats a float with six decimals, folding negative zero.
pub fn format_float(x: f64) -> String {
    let s = format!("{x:.6}");
    if s == "-0.000000" {
        "0.000000".to_string()
    } else {
        s
    }
}

fn write_number(out: &mut String, n: &Number) {
    if n.is_f64() {
        out.push_str(&format_float(n.as_f64().unwrap_or(0.0)));
    } else {
        out.push_str(&n.to_string());
    }
}

fn write_string(out: &mut String, s: &str) {
    // serde_json's escaping is already canonical for a given string.
    out.push_str(&serde_json::to_string(s).expect("string serialization is infallible"));
}

fn newline(out: &mut String, indent: Option<usize>) {
    if let Some(level) = indent {
        out.push('\n');
        for _ in 0..level {
            out.push_str("  ");
        }
    }
}

fn write_value(out: &mut String, value: &Value, indent: Option<usize>) {
    let inner = indent.map(|l| l + 1);
    match value {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => write_number(out, n),
        Value::String(s) => write_string(out, s),
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            // Arrays of scalars stay on one line; they are mostly bboxes and
            // confidence vectors.
            let flat = items.iter().all(|v| !v.is_array() && !v.is_object());
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                    if flat && indent.is_some() {
                        out.push(' ');
                    }
                }
                if !flat {
                    newline(out, inner);
                }
                write_value(out, item, if flat { None } else { inner });
            }
            if !flat {
                newline(out, indent);
            }
            out.push(']');
        }
        Value::Object(map) => write_object(out, map, indent),
    }
}

fn write_object(out: &mut String, map: &Map<String, Value>, indent: Option<usize>) {
    if map.is_empty() {
        out.push_str("{}");
        return;
    }
    let inner = indent.map(|l| l + 1);
    let mut keys: Vec<&String> = map.keys().collect();
    keys.sort();
    out.push('{');
    for (i, key) in keys.into_iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        newline(out, inner);
        write_string(out, key);
        out.push(':');
        if indent.is_some() {
            out.push(' ');
        }
        write_value(out, &map[key], inner);
    }
    newline(out, indent);
    out.push('}');
}
