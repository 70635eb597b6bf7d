//! Per-step trace records and their CSV / JSON-lines renderings.
//!
//! Numbers are written by hand rather than through a float formatter so
//! that integral values never come out in exponent notation and the bytes
//! depend only on the values.

use std::io::{self, Write};

use serde::Serialize;

use crate::scenario::TraceFormat;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRecord {
    /// Block height, or round in network mode.
    pub k: u64,
    /// Total supply.
    pub y: i64,
    pub n_k: usize,
    pub tx_count: usize,
    /// One value per registered check, in column order.
    pub values: Vec<f64>,
    /// Share of nodes on the most common head (network mode only).
    pub agreement: Option<f64>,
}

/// Renders a real the same way on every platform: integral values as
/// integers, everything else in shortest round-trip decimal.
pub fn format_number(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else if v.fract() == 0.0 && v.abs() < 1e18 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

fn json_number(v: f64) -> String {
    if v.is_finite() {
        format_number(v)
    } else {
        "null".into()
    }
}

pub fn csv_header(columns: &[String]) -> String {
    let mut h = String::from("k,y,n_k,tx_count");
    for c in columns {
        h.push(',');
        h.push_str(c);
    }
    h.push_str(",agreement");
    h
}

pub fn write_csv<W: Write>(out: &mut W, columns: &[String], records: &[TraceRecord]) -> io::Result<()> {
    writeln!(out, "{}", csv_header(columns))?;
    for r in records {
        write!(out, "{},{},{},{}", r.k, r.y, r.n_k, r.tx_count)?;
        for v in &r.values {
            write!(out, ",{}", format_number(*v))?;
        }
        match r.agreement {
            Some(a) => writeln!(out, ",{}", format_number(a))?,
            None => writeln!(out, ",")?,
        }
    }
    Ok(())
}

pub fn write_jsonl<W: Write>(out: &mut W, columns: &[String], records: &[TraceRecord]) -> io::Result<()> {
    for r in records {
        write!(out, "{{\"k\":{},\"y\":{},\"n_k\":{},\"tx_count\":{}", r.k, r.y, r.n_k, r.tx_count)?;
        for (c, v) in columns.iter().zip(&r.values) {
            let key = serde_json::to_string(c).map_err(io::Error::other)?;
            write!(out, ",{key}:{}", json_number(*v))?;
        }
        match r.agreement {
            Some(a) => writeln!(out, ",\"agreement\":{}}}", json_number(a))?,
            None => writeln!(out, ",\"agreement\":null}}")?,
        }
    }
    Ok(())
}

pub fn write_trace<W: Write>(
    out: &mut W,
    format: TraceFormat,
    columns: &[String],
    records: &[TraceRecord],
) -> io::Result<()> {
    match format {
        TraceFormat::Csv => write_csv(out, columns, records),
        TraceFormat::Jsonl => write_jsonl(out, columns, records),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(k: u64) -> TraceRecord {
        TraceRecord {
            k,
            y: 2_099_999_997_690_000,
            n_k: 3,
            tx_count: 1,
            values: vec![0.0, 0.25],
            agreement: None,
        }
    }

    #[test]
    fn empty_csv_is_header_only() {
        let mut out = Vec::new();
        write_csv(&mut out, &["positivity".into()], &[]).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "k,y,n_k,tx_count,positivity,agreement\n");
    }

    #[test]
    fn rows_and_json_lines() {
        let cols = vec!["a".to_string(), "b".to_string()];
        let mut out = Vec::new();
        write_csv(&mut out, &cols, &[rec(1), rec(2), rec(3)]).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[1], "1,2099999997690000,3,1,0,0.25,");

        let mut out = Vec::new();
        let mut r = rec(1);
        r.agreement = Some(1.0);
        write_jsonl(&mut out, &cols, &[r]).unwrap();
        let line = String::from_utf8(out).unwrap();
        let v: serde_json::Value = serde_json::from_str(line.trim()).unwrap();
        assert_eq!(v["y"], 2_099_999_997_690_000_i64);
        assert_eq!(v["b"], 0.25);
        assert_eq!(v["agreement"], 1);
    }

    #[test]
    fn no_exponents() {
        assert_eq!(format_number(2.1e15), "2100000000000000");
        assert_eq!(format_number(1e-7), "0.0000001");
        assert_eq!(format_number(-3.0), "-3");
    }
}
