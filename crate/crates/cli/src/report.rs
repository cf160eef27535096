//! Tables with a metadata header, written as CSV or JSON. Files are written
//! to a temporary sibling and renamed only when complete.

use std::io::Write;
use std::path::Path;

use cdp_core::error::{CdpError, Result};
use serde_json::{json, Map, Value};

use crate::config::Format;

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
    Missing,
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Self::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Self::Int(v as i64)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Self::Missing, Self::Num)
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Self::Text(v)
    }
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Self::Num(v) if v.is_nan() => "nan".into(),
            Self::Num(v) if v.is_infinite() => if *v > 0.0 { "inf" } else { "-inf" }.into(),
            Self::Num(v) => format!("{v}"),
            Self::Int(v) => v.to_string(),
            Self::Text(s) => s.clone(),
            Self::Missing => "NA".into(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Self::Num(v) if v.is_finite() => json!(v),
            Self::Num(v) if v.is_nan() => json!("nan"),
            Self::Num(v) => json!(if *v > 0.0 { "inf" } else { "-inf" }),
            Self::Int(v) => json!(v),
            Self::Text(s) => json!(s),
            Self::Missing => Value::Null,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

/// Ordered `key: value` pairs printed as `# key: value` header lines.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Metadata(pub Vec<(String, Value)>);

impl Metadata {
    pub fn new(command: &str, config_hash: &str) -> Self {
        let mut m = Self::default();
        m.set("cdp_version", json!(env!("CARGO_PKG_VERSION")));
        m.set("command", json!(command));
        m.set("config_sha256", json!(config_hash));
        m
    }

    pub fn set(&mut self, key: &str, value: Value) {
        match self.0.iter_mut().find(|(k, _)| k == key) {
            Some(slot) => slot.1 = value,
            None => self.0.push((key.into(), value)),
        }
    }

    fn header(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.0 {
            let shown = match v {
                Value::String(t) => t.clone(),
                other => other.to_string(),
            };
            s.push_str(&format!("# {k}: {shown}\n"));
        }
        s
    }

    fn json(&self) -> Value {
        Value::Object(self.0.iter().cloned().collect::<Map<_, _>>())
    }
}

pub struct Report {
    pub metadata: Metadata,
    pub tables: Vec<Table>,
}

fn table_csv(t: &Table) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| CdpError::Io(std::io::Error::other(e));
    w.write_record(&t.columns).map_err(io)?;
    for row in &t.rows {
        w.write_record(row.iter().map(Cell::csv)).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| CdpError::Io(std::io::Error::other(e.to_string())))?;
    Ok(String::from_utf8(bytes).expect("utf-8 cells"))
}

fn table_json(t: &Table) -> Value {
    let rows: Vec<Value> = t
        .rows
        .iter()
        .map(|r| {
            Value::Object(
                t.columns
                    .iter()
                    .cloned()
                    .zip(r.iter().map(Cell::json))
                    .collect::<Map<_, _>>(),
            )
        })
        .collect();
    Value::Array(rows)
}

/// Writes `contents` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| CdpError::Io(e.error))?;
    Ok(())
}

impl Report {
    pub fn single(metadata: Metadata, table: Table) -> Self {
        Self {
            metadata,
            tables: vec![table],
        }
    }

    pub fn render_json(&self) -> String {
        let mut doc = Map::new();
        doc.insert("metadata".into(), self.metadata.json());
        if let [t] = self.tables.as_slice() {
            doc.insert(t.name.clone(), table_json(t));
        } else {
            doc.insert(
                "tables".into(),
                Value::Object(self.tables.iter().map(|t| (t.name.clone(), table_json(t))).collect()),
            );
        }
        let mut s = serde_json::to_string_pretty(&Value::Object(doc)).expect("json");
        s.push('\n');
        s
    }

    /// CSV text of every table, each preceded by the header and a table name.
    pub fn render_csv(&self) -> Result<String> {
        let mut s = self.metadata.header();
        let many = self.tables.len() > 1;
        for t in &self.tables {
            if many {
                s.push_str(&format!("# table: {}\n", t.name));
            }
            s.push_str(&table_csv(t)?);
        }
        Ok(s)
    }

    /// Standard output when `path` is `None`; a file for one table or JSON;
    /// a directory of `<table>.csv` files otherwise.
    pub fn write(&self, path: Option<&Path>, format: Format) -> Result<()> {
        match (path, format) {
            (None, Format::Json) => print!("{}", self.render_json()),
            (None, Format::Csv) => print!("{}", self.render_csv()?),
            (Some(p), Format::Json) => write_atomic(p, self.render_json().as_bytes())?,
            (Some(p), Format::Csv) if self.tables.len() == 1 => write_atomic(p, self.render_csv()?.as_bytes())?,
            (Some(dir), Format::Csv) => {
                // everything is rendered before the first file is touched
                let mut files = Vec::with_capacity(self.tables.len());
                for t in &self.tables {
                    let mut s = self.metadata.header();
                    s.push_str(&table_csv(t)?);
                    files.push((dir.join(format!("{}.csv", t.name)), s));
                }
                std::fs::create_dir_all(dir)?;
                for (p, s) in files {
                    write_atomic(&p, s.as_bytes())?;
                }
            }
        }
        Ok(())
    }
}
