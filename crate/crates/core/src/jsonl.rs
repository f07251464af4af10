//! JSONL reading and canonical JSON writing.
//!
//! Canonical form: object keys sorted, floats printed with 17 significant
//! digits (`%.17g` layout), one record per LF-terminated line.

use std::collections::HashSet;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum JsonlError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: record {id}: {message}")]
    Invariant {
        line: usize,
        id: String,
        message: String,
    },
    #[error("line {line}: duplicate record {id}")]
    Duplicate { line: usize, id: String },
    #[error("serialization failed: {0}")]
    Serialize(String),
}

/// A typed JSONL record with checkable invariants.
pub trait Record: Serialize + DeserializeOwned {
    fn record_id(&self) -> String;

    fn validate(&self) -> Result<(), String> {
        Ok(())
    }

    /// Key that must be unique within a single file.
    fn unique_key(&self) -> Option<String> {
        None
    }
}

pub fn read_jsonl<T: Record>(path: impl AsRef<Path>) -> Result<Vec<T>, JsonlError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| JsonlError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_jsonl_from(BufReader::new(file)).map_err(|e| match e {
        JsonlError::Io { source, .. } => JsonlError::Io {
            path: path.display().to_string(),
            source,
        },
        other => other,
    })
}

/// Reads records in order, validating each one. Blank lines are skipped.
pub fn read_jsonl_from<T: Record, R: BufRead>(reader: R) -> Result<Vec<T>, JsonlError> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|source| JsonlError::Io {
            path: String::new(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let record: T = serde_json::from_str(&line).map_err(|e| JsonlError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        record.validate().map_err(|message| JsonlError::Invariant {
            line: line_no,
            id: record.record_id(),
            message,
        })?;
        if let Some(key) = record.unique_key() {
            if !seen.insert(key.clone()) {
                return Err(JsonlError::Duplicate { line: line_no, id: key });
            }
        }
        out.push(record);
    }
    Ok(out)
}

pub fn write_jsonl<'a, T, I>(path: impl AsRef<Path>, records: I) -> Result<(), JsonlError>
where
    T: Serialize + 'a,
    I: IntoIterator<Item = &'a T>,
{
    let path = path.as_ref();
    let io_err = |source| JsonlError::Io {
        path: path.display().to_string(),
        source,
    };
    let file = File::create(path).map_err(io_err)?;
    let mut w = BufWriter::new(file);
    for rec in records {
        let line = to_canonical_string(rec)?;
        w.write_all(line.as_bytes()).map_err(io_err)?;
        w.write_all(b"\n").map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

/// Writes a single canonical JSON document followed by a newline.
pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<(), JsonlError> {
    let path = path.as_ref();
    let mut text = to_canonical_string(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|source| JsonlError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T, JsonlError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| JsonlError::Io {
        path: path.display().to_string(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| JsonlError::Parse {
        line: e.line(),
        message: e.to_string(),
    })
}

pub fn to_canonical_string<T: Serialize + ?Sized>(value: &T) -> Result<String, JsonlError> {
    let value = serde_json::to_value(value).map_err(|e| JsonlError::Serialize(e.to_string()))?;
    let value = sort_keys(value);
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, G17Formatter);
    value
        .serialize(&mut ser)
        .map_err(|e| JsonlError::Serialize(e.to_string()))?;
    String::from_utf8(buf).map_err(|e| JsonlError::Serialize(e.to_string()))
}

fn sort_keys(value: Value) -> Value {
    match value {
        Value::Object(map) => {
            let mut entries: Vec<(String, Value)> = map.into_iter().collect();
            entries.sort_by(|a, b| a.0.cmp(&b.0));
            Value::Object(
                entries
                    .into_iter()
                    .map(|(k, v)| (k, sort_keys(v)))
                    .collect(),
            )
        }
        Value::Array(items) => Value::Array(items.into_iter().map(sort_keys).collect()),
        other => other,
    }
}

struct G17Formatter;

impl serde_json::ser::Formatter for G17Formatter {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        writer.write_all(format_g17(value).as_bytes())
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        writer.write_all(format_g17(f64::from(value)).as_bytes())
    }
}

/// Formats a finite float like C's `%.17g`.
pub fn format_g17(value: f64) -> String {
    if value == 0.0 {
        return if value.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{value:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    let (sign, mantissa) = match mantissa.strip_prefix('-') {
        Some(rest) => ("-", rest),
        None => ("", mantissa),
    };
    let digits: String = mantissa.chars().filter(|c| *c != '.').collect();

    if !(-4..17).contains(&exp) {
        let mut m = format!("{}.{}", &digits[..1], &digits[1..]);
        trim_fraction(&mut m);
        let exp_sign = if exp < 0 { '-' } else { '+' };
        return format!("{sign}{m}e{exp_sign}{:02}", exp.abs());
    }

    let mut s = if exp >= 0 {
        let point = exp as usize + 1;
        format!("{}.{}", &digits[..point], &digits[point..])
    } else {
        format!("0.{}{}", "0".repeat((-exp - 1) as usize), digits)
    };
    trim_fraction(&mut s);
    format!("{sign}{s}")
}

fn trim_fraction(s: &mut String) {
    if s.contains('.') {
        while s.ends_with('0') {
            s.pop();
        }
        if s.ends_with('.') {
            s.pop();
        }
    }
}
