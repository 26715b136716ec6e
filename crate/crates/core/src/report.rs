//! Canonical report serialization: JSON with sorted keys and floats printed
//! with 17 significant digits, and flat CSV tables.

use std::io::Write;

use serde::Serialize;
use serde_json::Value;

use crate::error::Result;

/// Serializes `value` as canonical JSON followed by a newline.
pub fn to_canonical_json<T: Serialize>(value: &T) -> Result<String> {
    let tree = serde_json::to_value(value)?;
    let mut out = String::new();
    write_value(&tree, 0, &mut out);
    out.push('\n');
    Ok(out)
}

/// Float text shared by JSON and CSV output; non-finite values have no
/// representation and become `None`.
pub fn format_float(x: f64) -> Option<String> {
    if !x.is_finite() {
        return None;
    }
    if x == 0.0 {
        return Some("0.0".into());
    }
    Some(format!("{x:.16e}"))
}

fn write_value(v: &Value, depth: usize, out: &mut String) {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if n.is_f64() {
                out.push_str(&format_float(n.as_f64().unwrap()).unwrap_or_else(|| "null".into()));
            } else {
                out.push_str(&n.to_string());
            }
        }
        Value::String(s) => out.push_str(&Value::String(s.clone()).to_string()),
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            let scalar = items.iter().all(|i| !i.is_array() && !i.is_object());
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                    if scalar {
                        out.push(' ');
                    }
                }
                if !scalar {
                    newline(depth + 1, out);
                }
                write_value(item, depth + 1, out);
            }
            if !scalar {
                newline(depth, out);
            }
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
            for (i, key) in keys.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                newline(depth + 1, out);
                out.push_str(&Value::String((*key).clone()).to_string());
                out.push_str(": ");
                write_value(&map[key.as_str()], depth + 1, out);
            }
            newline(depth, out);
            out.push('}');
        }
    }
}

fn newline(depth: usize, out: &mut String) {
    out.push('\n');
    for _ in 0..depth {
        out.push_str("  ");
    }
}

/// A header plus rows of optional floats; missing cells stay empty.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Option<f64>>) {
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(&self.header)?;
        for row in &self.rows {
            writer.write_record(row.iter().map(|c| cell(*c)))?;
        }
        writer.flush()?;
        let bytes = writer.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        w.write_all(self.to_csv()?.as_bytes())?;
        Ok(())
    }
}

fn cell(x: Option<f64>) -> String {
    match x {
        Some(v) if v.is_finite() && v == v.trunc() && v.abs() < 1e15 => format!("{}", v as i64),
        Some(v) => format_float(v).unwrap_or_default(),
        None => String::new(),
    }
}

#[cfg(test)]
mod tests {
    use std::collections::HashMap;

    use super::*;

    #[test]
    fn keys_are_sorted_and_floats_fixed_width() {
        let mut m = HashMap::new();
        m.insert("zeta", vec![1.0 / 3.0, 0.0]);
        m.insert("alpha", vec![f64::NAN]);
        let text = to_canonical_json(&m).unwrap();
        assert!(text.find("\"alpha\"").unwrap() < text.find("\"zeta\"").unwrap());
        assert!(text.contains("3.3333333333333331e-1"));
        assert!(text.contains("[null]"));
        let parsed: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(parsed["zeta"][0].as_f64().unwrap(), 1.0 / 3.0);
    }

    #[test]
    fn round_trip_is_exact() {
        let xs = [0.1, 1e-300, -2.5e17, std::f64::consts::PI, 5e-324];
        for x in xs {
            let s = format_float(x).unwrap();
            assert_eq!(s.parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn csv_table() {
        let mut t = Table::new(&["l", "value"]);
        t.push(vec![Some(0.0), None]);
        t.push(vec![Some(1.0), Some(0.25)]);
        assert_eq!(t.to_csv().unwrap(), "l,value\n0,\n1,2.5000000000000000e-1\n");
    }
}
