//! Self-describing result tables in CSV or JSON.

use std::io::Write;

use serde_json::{json, Map, Value as Json};
use sha2::{Digest, Sha256};

use crate::config::{Format, JobConfig};

#[derive(Clone, Debug, PartialEq)]
pub enum Value {
    Float(f64),
    Int(usize),
    Bool(bool),
    Text(String),
    Empty,
}

impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value::Float(v)
    }
}

impl From<usize> for Value {
    fn from(v: usize) -> Self {
        Value::Int(v)
    }
}

impl From<bool> for Value {
    fn from(v: bool) -> Self {
        Value::Bool(v)
    }
}

impl From<&str> for Value {
    fn from(v: &str) -> Self {
        Value::Text(v.to_string())
    }
}

impl From<String> for Value {
    fn from(v: String) -> Self {
        Value::Text(v)
    }
}

impl<T: Into<Value>> From<Option<T>> for Value {
    fn from(v: Option<T>) -> Self {
        v.map_or(Value::Empty, Into::into)
    }
}

/// Shortest digits that round-trip, switching to exponent form far from 1.
pub fn format_float(v: f64) -> String {
    if v == 0.0 || (1e-5..1e16).contains(&v.abs()) || !v.is_finite() {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

impl Value {
    fn csv(&self) -> String {
        match self {
            Value::Float(v) => format_float(*v),
            Value::Int(v) => v.to_string(),
            Value::Bool(v) => v.to_string(),
            Value::Text(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
            Value::Text(s) => s.clone(),
            Value::Empty => String::new(),
        }
    }

    fn json(&self) -> Json {
        match self {
            Value::Float(v) if v.is_finite() => json!(v),
            Value::Float(v) => json!(v.to_string()),
            Value::Int(v) => json!(v),
            Value::Bool(v) => json!(v),
            Value::Text(s) => json!(s),
            Value::Empty => Json::Null,
        }
    }
}

/// Ordered `(column, value)` pairs.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Row(pub Vec<(&'static str, Value)>);

impl Row {
    pub fn push(&mut self, column: &'static str, v: impl Into<Value>) {
        self.0.push((column, v.into()));
    }
}

pub fn config_hash(config: &JobConfig) -> String {
    hex::encode(Sha256::digest(config.canonical_json().as_bytes()))
}

/// Writes rows (all sharing the first row's columns) with metadata.
pub fn write_table(w: &mut dyn Write, config: &JobConfig, rows: &[Row]) -> std::io::Result<()> {
    let command = config.command.map_or("", |c| c.name());
    match config.format() {
        Format::Csv => {
            writeln!(w, "# tool: permadyn {}", env!("CARGO_PKG_VERSION"))?;
            writeln!(w, "# command: {command}")?;
            writeln!(w, "# config-sha256: {}", config_hash(config))?;
            writeln!(w, "# config: {}", config.canonical_json())?;
            if let Some(first) = rows.first() {
                let header: Vec<&str> = first.0.iter().map(|(c, _)| *c).collect();
                writeln!(w, "{}", header.join(","))?;
            }
            for row in rows {
                let cells: Vec<String> = row.0.iter().map(|(_, v)| v.csv()).collect();
                writeln!(w, "{}", cells.join(","))?;
            }
        }
        Format::Json => {
            let rows: Vec<Json> = rows
                .iter()
                .map(|r| Json::Object(r.0.iter().map(|(c, v)| (c.to_string(), v.json())).collect::<Map<_, _>>()))
                .collect();
            let doc = json_document(config, "rows", Json::Array(rows));
            writeln!(w, "{}", serde_json::to_string_pretty(&doc).expect("serializable"))?;
        }
    }
    Ok(())
}

/// `{tool, command, config_sha256, config, <key>: body}`.
pub fn json_document(config: &JobConfig, key: &str, body: Json) -> Json {
    let mut doc = Map::new();
    doc.insert("tool".into(), json!(format!("permadyn {}", env!("CARGO_PKG_VERSION"))));
    doc.insert("command".into(), json!(config.command.map_or("", |c| c.name())));
    doc.insert("config_sha256".into(), json!(config_hash(config)));
    doc.insert("config".into(), serde_json::to_value(config).expect("serializable"));
    doc.insert(key.into(), body);
    Json::Object(doc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for v in [0.1, 1.0 / 3.0, 2e-9, -7.5e20, 0.0, 123456.789, f64::MIN_POSITIVE, 0.316559] {
            let s = format_float(v);
            assert_eq!(s.parse::<f64>().unwrap(), v, "{s}");
        }
        assert_eq!(format_float(0.5), "0.5");
        assert_eq!(format_float(2e-9), "2e-9");
    }

    #[test]
    fn csv_quotes_text() {
        assert_eq!(Value::from("a,b").csv(), "\"a,b\"");
        assert_eq!(Value::from("say \"hi\", ok").csv(), "\"say \"\"hi\"\", ok\"");
        assert_eq!(Value::Empty.csv(), "");
        assert_eq!(Value::from(None::<f64>).csv(), "");
    }
}
