//! CSV and JSON emission with fixed float formatting.

use std::fmt::Write as _;

use super::config::OutputFormat;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(u64),
    Float(f64),
    Text(String),
    Bool(bool),
}

impl From<u64> for Cell {
    fn from(x: u64) -> Self {
        Cell::Int(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as u64)
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Float(x)
    }
}

impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::Text(x.to_string())
    }
}

impl From<String> for Cell {
    fn from(x: String) -> Self {
        Cell::Text(x)
    }
}

impl From<bool> for Cell {
    fn from(x: bool) -> Self {
        Cell::Bool(x)
    }
}

/// 17 significant digits, enough to recover every `f64`.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Int(x) => x.to_string(),
            Cell::Float(x) => format_float(*x),
            Cell::Bool(x) => x.to_string(),
            Cell::Text(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
            Cell::Text(s) => s.clone(),
        }
    }

    fn json(&self) -> String {
        match self {
            Cell::Int(x) => x.to_string(),
            Cell::Float(x) if x.is_finite() => format_float(*x),
            Cell::Float(_) => "null".into(),
            Cell::Bool(x) => x.to_string(),
            Cell::Text(s) => serde_json::to_string(s).expect("strings serialize"),
        }
    }
}

/// Run metadata written ahead of every table.
#[derive(Debug, Clone, PartialEq)]
pub struct Metadata {
    pub entries: Vec<(String, Cell)>,
}

impl Metadata {
    pub fn new(command: &str, seed: u64, config_hash: &str) -> Self {
        Self {
            entries: vec![
                ("command".into(), command.into()),
                ("seed".into(), seed.into()),
                ("config_hash".into(), config_hash.into()),
                ("git_describe".into(), env!("COXPRICER_GIT_DESCRIBE").into()),
            ],
        }
    }

    pub fn push(&mut self, key: &str, value: impl Into<Cell>) {
        self.entries.push((key.to_string(), value.into()));
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: Vec<&'static str>) -> Self {
        Self { columns, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

pub fn render(table: &Table, meta: &Metadata, format: OutputFormat) -> String {
    match format {
        OutputFormat::Csv => render_csv(table, meta),
        OutputFormat::Json => render_json(table, meta),
    }
}

/// A `#` comment line with the metadata, the header, then one line per row.
/// An empty table gives the comment and header only.
pub fn render_csv(table: &Table, meta: &Metadata) -> String {
    let mut out = String::from("#");
    for (k, v) in &meta.entries {
        let _ = write!(out, " {k}={}", v.csv());
    }
    out.push('\n');
    out.push_str(&table.columns.join(","));
    out.push('\n');
    for row in &table.rows {
        let cells: Vec<String> = row.iter().map(Cell::csv).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// `{"metadata": {...}, "rows": [{...}, ...]}`
pub fn render_json(table: &Table, meta: &Metadata) -> String {
    let object = |pairs: &mut dyn Iterator<Item = (&str, &Cell)>| {
        let body: Vec<String> = pairs
            .map(|(k, v)| format!("{}: {}", serde_json::to_string(k).expect("strings serialize"), v.json()))
            .collect();
        format!("{{{}}}", body.join(", "))
    };
    let metadata = object(&mut meta.entries.iter().map(|(k, v)| (k.as_str(), v)));
    let rows: Vec<String> = table
        .rows
        .iter()
        .map(|row| format!("    {}", object(&mut table.columns.iter().copied().zip(row.iter()))))
        .collect();
    if rows.is_empty() {
        format!("{{\n  \"metadata\": {metadata},\n  \"rows\": []\n}}\n")
    } else {
        format!("{{\n  \"metadata\": {metadata},\n  \"rows\": [\n{}\n  ]\n}}\n", rows.join(",\n"))
    }
}
