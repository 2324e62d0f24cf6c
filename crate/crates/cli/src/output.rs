//! Tables, number formatting and file emission.

use crate::Failure;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// Nine significant digits, no locale, trailing zeros dropped. Plain
/// decimal for exponents in `[-5, 15)`, scientific otherwise.
pub fn fmt9(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.into();
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..15).contains(&exp) {
        let digits: String = mantissa.chars().filter(char::is_ascii_digit).collect();
        let body = if exp >= 0 {
            let whole = exp as usize + 1;
            if whole >= digits.len() {
                digits.clone() + &"0".repeat(whole - digits.len())
            } else {
                format!("{}.{}", &digits[..whole], &digits[whole..])
            }
        } else {
            format!("0.{}{digits}", "0".repeat((-exp - 1) as usize))
        };
        let sign = if x < 0.0 { "-" } else { "" };
        format!("{sign}{}", trim_zeros(body))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa.to_string()))
    }
}

fn trim_zeros(mut s: String) -> String {
    if s.contains('.') {
        while s.ends_with('0') {
            s.pop();
        }
        if s.ends_with('.') {
            s.pop();
        }
    }
    s
}

/// Rounds every float in a JSON tree to nine significant digits.
pub fn round_json(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().expect("f64 number");
            fmt9(x).parse::<f64>().ok().and_then(serde_json::Number::from_f64).map_or(Value::Null, Value::Number)
        }
        Value::Array(items) => Value::Array(items.into_iter().map(round_json).collect()),
        Value::Object(map) => Value::Object(map.into_iter().map(|(k, v)| (k, round_json(v))).collect()),
        other => other,
    }
}

pub fn to_json_string<T: Serialize>(value: &T) -> Result<String, Failure> {
    let v = serde_json::to_value(value).map_err(|e| Failure::Io(format!("cannot serialize output: {e}")))?;
    let mut s = serde_json::to_string_pretty(&round_json(v)).map_err(|e| Failure::Io(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    Int(u64),
    Real(f64),
}

impl Cell {
    fn text(self) -> String {
        match self {
            Cell::Int(i) => i.to_string(),
            Cell::Real(x) => fmt9(x),
        }
    }

    fn json(self) -> Value {
        match self {
            Cell::Int(i) => Value::from(i),
            Cell::Real(x) => Value::from(x),
        }
    }
}

/// A header plus rows; written as CSV or as a JSON array of objects.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub headers: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(headers: &[&'static str]) -> Self {
        Self { headers: headers.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }

    pub fn csv_string(&self) -> Result<String, Failure> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let fail = |e: csv::Error| Failure::Io(format!("csv: {e}"));
        w.write_record(&self.headers).map_err(fail)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|c| c.text())).map_err(fail)?;
        }
        let bytes = w.into_inner().map_err(|e| Failure::Io(format!("csv: {e}")))?;
        String::from_utf8(bytes).map_err(|e| Failure::Io(e.to_string()))
    }

    pub fn json_value(&self) -> Value {
        Value::Array(
            self.rows
                .iter()
                .map(|row| Value::Object(self.headers.iter().zip(row).map(|(h, c)| (h.to_string(), c.json())).collect()))
                .collect(),
        )
    }

    /// Writes `<dir>/<stem>.csv` and/or `<dir>/<stem>.json`.
    pub fn write(&self, dir: &Path, stem: &str, formats: &[Format]) -> Result<Vec<PathBuf>, Failure> {
        let mut written = Vec::new();
        for format in formats {
            let (path, body) = match format {
                Format::Csv => (dir.join(format!("{stem}.csv")), self.csv_string()?),
                Format::Json => (dir.join(format!("{stem}.json")), to_json_string(&self.json_value())?),
            };
            write_file(&path, &body)?;
            written.push(path);
        }
        Ok(written)
    }
}

pub fn write_file(path: &Path, body: &str) -> Result<(), Failure> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Failure::Io(format!("cannot create {}: {e}", parent.display())))?;
    }
    fs::write(path, body).map_err(|e| Failure::Io(format!("cannot write {}: {e}", path.display())))
}
