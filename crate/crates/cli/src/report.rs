//! Report envelope and deterministic serialization.

use std::fmt::Write as _;

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

pub const SCHEMA_VERSION: u32 = 1;
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

pub fn config_hash(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, Serialize)]
pub struct Envelope<T: Serialize> {
    pub command: String,
    pub config_hash: String,
    pub tool_version: String,
    pub schema_version: u32,
    pub seed: u64,
    pub status: String,
    pub result: T,
}

/// JSON with object keys sorted and every float printed with 17 significant
/// digits, so equal inputs give byte-identical files.
pub fn canonical_json<T: Serialize>(v: &T) -> serde_json::Result<String> {
    let value = serde_json::to_value(v)?;
    let mut out = String::new();
    write_value(&mut out, &value, 0);
    out.push('\n');
    Ok(out)
}

fn indent(out: &mut String, depth: usize) {
    out.push('\n');
    for _ in 0..depth {
        out.push_str("  ");
    }
}

fn write_value(out: &mut String, v: &Value, depth: usize) {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                write!(out, "{i}").unwrap();
            } else if let Some(u) = n.as_u64() {
                write!(out, "{u}").unwrap();
            } else {
                write!(out, "{}", format_float(n.as_f64().expect("finite number"))).unwrap();
            }
        }
        Value::String(s) => out.push_str(&serde_json::to_string(s).expect("string")),
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            // Short arrays of scalars stay on one line.
            if items.len() <= 4 && items.iter().all(|x| !x.is_array() && !x.is_object()) {
                out.push('[');
                for (j, x) in items.iter().enumerate() {
                    if j > 0 {
                        out.push_str(", ");
                    }
                    write_value(out, x, depth);
                }
                out.push(']');
                return;
            }
            out.push('[');
            for (j, x) in items.iter().enumerate() {
                if j > 0 {
                    out.push(',');
                }
                indent(out, depth + 1);
                write_value(out, x, depth + 1);
            }
            indent(out, depth);
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (j, k) in keys.iter().enumerate() {
                if j > 0 {
                    out.push(',');
                }
                indent(out, depth + 1);
                out.push_str(&serde_json::to_string(k).expect("key"));
                out.push_str(": ");
                write_value(out, &map[*k], depth + 1);
            }
            indent(out, depth);
            out.push('}');
        }
    }
}

pub fn format_float(x: f64) -> String {
    if x == 0.0 {
        // Keeps -0.0 and 0.0 apart without a sign on the exponent.
        return if x.is_sign_negative() { "-0.0".into() } else { "0.0".into() };
    }
    format!("{x:.16e}")
}

/// CSV text from a header and rows of already formatted cells.
pub fn csv_table(header: &[&str], rows: &[Vec<String>]) -> csv::Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv is utf-8"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn keys_are_sorted_and_floats_fixed() {
        let v = json!({"b": 1, "a": [0.1, 2.0, -3], "c": {"z": null, "y": true}});
        let s = canonical_json(&v).unwrap();
        assert_eq!(
            s,
            "{\n  \"a\": [1.0000000000000001e-1, 2.0000000000000000e0, -3],\n  \"b\": 1,\n  \"c\": {\n    \"y\": true,\n    \"z\": null\n  }\n}\n"
        );
        let back: Value = serde_json::from_str(&s).unwrap();
        assert_eq!(back["a"][0].as_f64(), Some(0.1));
    }

    #[test]
    fn floats_round_trip() {
        for x in [std::f64::consts::PI, 1e-300, -2.5e17, 0.1 + 0.2, f64::MIN_POSITIVE] {
            assert_eq!(format_float(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn hash_is_sha256() {
        assert_eq!(config_hash(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    #[test]
    fn csv_quotes_when_needed() {
        let s = csv_table(&["a", "b"], &[vec!["1".into(), "x,y".into()]]).unwrap();
        assert_eq!(s, "a,b\n1,\"x,y\"\n");
    }
}
