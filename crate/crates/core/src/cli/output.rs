//! Deterministic report files. Every float is printed with 17 significant
//! digits in scientific notation, so identical runs give identical bytes.

use std::fmt::Write as _;
use std::io;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::currents::{NonlocalReport, VerificationEntry};

pub fn float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        // Not representable in JSON; CSV uses the same spelling.
        "null".into()
    }
}

/// Pretty JSON with keys in lexicographic order.
pub fn to_json<T: Serialize>(value: &T) -> Result<String, serde_json::Error> {
    let v = serde_json::to_value(value)?;
    let mut out = String::new();
    write_value(&v, 0, &mut out);
    out.push('\n');
    Ok(out)
}

fn write_value(v: &Value, indent: usize, out: &mut String) {
    let pad = |n: usize, out: &mut String| out.extend(std::iter::repeat_n(' ', n));
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                let _ = write!(out, "{i}");
            } else if let Some(u) = n.as_u64() {
                let _ = write!(out, "{u}");
            } else {
                out.push_str(&float(n.as_f64().unwrap_or(f64::NAN)));
            }
        }
        Value::String(s) => out.push_str(&Value::String(s.clone()).to_string()),
        Value::Array(a) if a.is_empty() => out.push_str("[]"),
        Value::Array(a) => {
            out.push_str("[\n");
            for (i, x) in a.iter().enumerate() {
                pad(indent + 2, out);
                write_value(x, indent + 2, out);
                out.push_str(if i + 1 < a.len() { ",\n" } else { "\n" });
            }
            pad(indent, out);
            out.push(']');
        }
        Value::Object(o) if o.is_empty() => out.push_str("{}"),
        Value::Object(o) => {
            out.push_str("{\n");
            for (i, (k, x)) in o.iter().enumerate() {
                pad(indent + 2, out);
                out.push_str(&Value::String(k.clone()).to_string());
                out.push_str(": ");
                write_value(x, indent + 2, out);
                out.push_str(if i + 1 < o.len() { ",\n" } else { "\n" });
            }
            pad(indent, out);
            out.push('}');
        }
    }
}

fn csv_writer(path: &Path) -> io::Result<csv::Writer<std::fs::File>> {
    Ok(csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(path)?)
}

/// File name for a current: brackets and other punctuation become `_`.
pub fn file_stem(name: &str) -> String {
    name.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' }).collect::<String>()
}

/// `t,current,Q,divergence_l2,divergence_linf`, one row per slice of the
/// charge series. The divergence is empty on slices it is not defined for.
pub fn write_current_csv(path: &Path, e: &VerificationEntry) -> io::Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["t", "current", "Q", "divergence_l2", "divergence_linf"])?;
    for &(t, q) in &e.charge_series {
        let div = e.divergence_series.iter().find(|r| r.t == t);
        let (l2, li) = div.map_or((String::new(), String::new()), |r| (float(r.l2), float(r.linf)));
        w.write_record([float(t), e.current.clone(), float(q), l2, li])?;
    }
    w.flush()
}

pub fn write_nonlocal_csv(path: &Path, r: &NonlocalReport) -> io::Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["t1", "value"])?;
    for v in &r.values {
        w.write_record([float(v.time), float(v.value)])?;
    }
    w.flush()
}

/// Rows of a convergence table.
pub fn write_table_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> io::Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_have_seventeen_digits() {
        assert_eq!(float(0.1), "1.0000000000000001e-1");
        assert_eq!(float(-2.0), "-2.0000000000000000e0");
        assert_eq!(float(f64::NAN), "null");
    }

    #[test]
    fn json_is_sorted_and_parses_back() {
        let v = serde_json::json!({"b": [1, 2.5], "a": {"x": null, "s": "q\""}, "e": []});
        let s = to_json(&v).unwrap();
        assert!(s.find("\"a\"").unwrap() < s.find("\"b\"").unwrap());
        assert!(s.contains("2.5000000000000000e0"));
        let back: Value = serde_json::from_str(&s).unwrap();
        assert_eq!(back, v);
    }

    #[test]
    fn stems_are_portable() {
        assert_eq!(file_stem("H[0]"), "H_0_");
        assert_eq!(file_stem("T-gen"), "T-gen");
    }
}
