//! Unit-suffix parsing for human-facing spec files.
//!
//! Internally everything is bytes, seconds, FLOPs, and tokens. Spec files
//! may write rates and sizes either as raw numbers in base units or as
//! strings with an explicit decimal suffix, e.g. `"312 TFLOP/s"`,
//! `"2 TB/s"`, `"80 GB"`. Suffixes are decimal (K = 1e3, ..., P = 1e15).

use serde::{Deserialize, Deserializer, Serializer};

/// Parses `"80 GB"`, `"2e12"`, `"312 TFLOP/s"` and the like into a base-unit
/// value. The unit word after the prefix (`B`, `FLOP`, `FLOPs`) and a
/// trailing `/s` are accepted and ignored; only the scale prefix matters.
pub fn parse_quantity(s: &str) -> Result<f64, String> {
    let s = s.trim();
    if s.is_empty() {
        return Err("empty quantity".to_string());
    }
    // Split numeric head from the suffix.
    let split = s
        .char_indices()
        .find(|(_, c)| !matches!(c, '0'..='9' | '.' | '-' | '+' | 'e' | 'E'))
        // 'e'/'E' may start a suffix like "EB"; re-check below.
        .map(|(i, _)| i)
        .unwrap_or(s.len());
    let (mut head, mut tail) = s.split_at(split);
    // "2e12" parses fully as the head; "2eB" should not. If the head fails
    // to parse and ends with an exponent marker, move it to the suffix.
    if head.parse::<f64>().is_err() && (head.ends_with('e') || head.ends_with('E')) {
        let cut = head.len() - 1;
        tail = &s[cut..];
        head = &s[..cut];
    }
    let value: f64 = head
        .parse()
        .map_err(|_| format!("bad number in quantity `{s}`"))?;
    let suffix = tail.trim();
    if suffix.is_empty() {
        return Ok(value);
    }
    let mut chars = suffix.chars();
    let first = chars.next().unwrap();
    let (scale, rest) = match first {
        'K' | 'k' => (1e3, chars.as_str()),
        'M' => (1e6, chars.as_str()),
        'G' | 'g' => (1e9, chars.as_str()),
        'T' | 't' => (1e12, chars.as_str()),
        'P' => (1e15, chars.as_str()),
        _ => (1.0, suffix),
    };
    let rest = rest.trim_start();
    let rest = rest.strip_suffix("/s").unwrap_or(rest).trim_end();
    match rest {
        "" | "B" | "FLOP" | "FLOPs" | "FLOPS" | "flop" | "flops" | "b" => Ok(value * scale),
        _ => Err(format!("unrecognized unit `{suffix}` in quantity `{s}`")),
    }
}

/// A base-unit f64 that deserializes from either a number or a suffixed
/// string. Serializes as a plain number so round-trips are exact.
pub fn deserialize_quantity<'de, D>(deserializer: D) -> Result<f64, D::Error>
where
    D: Deserializer<'de>,
{
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(f64),
        Int(i64),
        Str(String),
    }
    match Raw::deserialize(deserializer)? {
        Raw::Num(v) => Ok(v),
        Raw::Int(v) => Ok(v as f64),
        Raw::Str(s) => parse_quantity(&s).map_err(serde::de::Error::custom),
    }
}

pub fn deserialize_quantity_opt<'de, D>(deserializer: D) -> Result<Option<f64>, D::Error>
where
    D: Deserializer<'de>,
{
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(f64),
        Int(i64),
        Str(String),
    }
    match Option::<Raw>::deserialize(deserializer)? {
        None => Ok(None),
        Some(Raw::Num(v)) => Ok(Some(v)),
        Some(Raw::Int(v)) => Ok(Some(v as f64)),
        Some(Raw::Str(s)) => parse_quantity(&s)
            .map(Some)
            .map_err(serde::de::Error::custom),
    }
}

pub fn serialize_quantity<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_f64(*v)
}

pub fn serialize_quantity_opt<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
    match v {
        Some(v) => s.serialize_f64(*v),
        None => s.serialize_none(),
    }
}
