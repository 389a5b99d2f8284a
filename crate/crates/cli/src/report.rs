//! JSON and CSV rendering with values rounded to 12 significant digits.

use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use estc_core::{Bispinor, SpinorBlock, C64};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

pub const SIGNIFICANT_DIGITS: usize = 12;

/// Rounds to [`SIGNIFICANT_DIGITS`] significant digits; `-0.0` becomes `0.0`, non-finite values pass through.
pub fn round_sig(x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    if !x.is_finite() {
        return x;
    }
    let s = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x);
    s.parse().expect("formatted float parses")
}

pub fn complex(z: C64) -> Value {
    json!([round_sig(z.re), round_sig(z.im)])
}

pub fn bispinor(a: &Bispinor) -> Value {
    Value::Array(a.iter().map(|z| complex(*z)).collect())
}

pub fn block(m: &SpinorBlock) -> Value {
    Value::Array(m.0.iter().map(|row| Value::Array(row.iter().map(|z| complex(*z)).collect())).collect())
}

/// Serializes any value and rounds every float in it.
pub fn rounded<T: Serialize>(v: &T) -> Result<Value> {
    let mut value = serde_json::to_value(v)?;
    round_value(&mut value);
    Ok(value)
}

pub fn round_value(v: &mut Value) {
    match v {
        Value::Number(n) if !(n.is_i64() || n.is_u64()) => {
            if let Some(x) = n.as_f64() {
                *v = json!(round_sig(x));
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_value),
        Value::Object(map) => map.values_mut().for_each(round_value),
        _ => {}
    }
}

/// Pretty JSON followed by a newline.
pub fn to_json_text(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values always serialize");
    s.push('\n');
    s
}

pub fn write_json(path: &Path, v: &Value) -> Result<()> {
    std::fs::write(path, to_json_text(v)).with_context(|| format!("writing {}", path.display()))
}

pub fn print_json(v: &Value) -> Result<()> {
    let mut out = std::io::stdout().lock();
    out.write_all(to_json_text(v).as_bytes())?;
    Ok(())
}

/// Renders a float for CSV output.
pub fn csv_float(x: f64) -> String {
    let r = round_sig(x);
    if r.is_nan() {
        "nan".into()
    } else {
        format!("{r}")
    }
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

pub fn sha256_text(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}
