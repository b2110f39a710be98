//! Number formatting and vector (de)serialization.
//!
//! Vectors travel as JSON arrays or as one value per line. Machine-readable
//! output carries 17 significant digits; text output is rounded to 6.

use std::io::{self, Write};
use std::str::FromStr;

use serde::ser::SerializeSeq;
use serde::Serializer;

use crate::{Error, Result, Scalar};

/// `v` with `digits` significant digits, positional when the exponent is
/// moderate and scientific otherwise.
pub fn fmt_sig(v: f64, digits: usize) -> String {
    if !v.is_finite() {
        return if v.is_nan() {
            "NaN".into()
        } else if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    if v == 0.0 {
        return "0".into();
    }
    let digits = digits.max(1);
    // Exponent after rounding, read off scientific formatting.
    let sci = format!("{:.*e}", digits - 1, v);
    let exp: i32 = sci[sci.find('e').unwrap() + 1..].parse().unwrap();
    if (-5..=15).contains(&exp) {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        format!("{v:.decimals$}")
    } else {
        sci
    }
}

pub fn fmt17(v: f64) -> String {
    fmt_sig(v, 17)
}

pub fn fmt6(v: f64) -> String {
    fmt_sig(v, 6)
}

/// A JSON number token carrying 17 significant digits (`null` if not finite).
pub fn json_num(v: f64) -> serde_json::Value {
    if !v.is_finite() {
        return serde_json::Value::Null;
    }
    serde_json::Value::Number(serde_json::Number::from_str(&fmt17(v)).expect("formatted float parses"))
}

pub fn ser_sig17<T: Scalar, S: Serializer>(v: &T, s: S) -> std::result::Result<S::Ok, S::Error> {
    serde::Serialize::serialize(&json_num(v.as_f64()), s)
}

pub fn ser_seq_sig17<T: Scalar, S: Serializer>(vs: &[T], s: S) -> std::result::Result<S::Ok, S::Error> {
    let mut seq = s.serialize_seq(Some(vs.len()))?;
    for v in vs {
        seq.serialize_element(&json_num(v.as_f64()))?;
    }
    seq.end()
}

/// Parse a vector given either as a JSON array or as one value per line
/// (blank lines and `#` comments ignored).
pub fn parse_vector(text: &str) -> Result<Vec<f64>> {
    let trimmed = text.trim_start();
    if trimmed.starts_with('[') {
        return serde_json::from_str::<Vec<f64>>(trimmed).map_err(|e| Error::Parse(e.to_string()));
    }
    text.lines()
        .enumerate()
        .map(|(i, l)| (i, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, l)| l.parse::<f64>().map_err(|_| Error::Parse(format!("line {}: {l:?}", i + 1))))
        .collect()
}

pub fn write_lines<T: Scalar, W: Write>(values: &[T], mut out: W) -> io::Result<()> {
    for v in values {
        writeln!(out, "{}", fmt17(v.as_f64()))?;
    }
    out.flush()
}

pub fn to_json_array<T: Scalar>(values: &[T]) -> String {
    let arr: Vec<_> = values.iter().map(|v| json_num(v.as_f64())).collect();
    serde_json::Value::Array(arr).to_string()
}
