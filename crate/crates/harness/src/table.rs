//! Result tables and their CSV form.

use std::fmt::Display;
use std::path::Path;

use crate::HarnessError;

/// Rows of one experiment kind. Metadata become `# key = value` header lines.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub metadata: Vec<(String, String)>,
}

/// Metadata keys left out of reproducibility comparisons.
pub const VOLATILE_KEYS: [&str; 1] = ["timestamp"];

impl ResultTable {
    pub fn new(columns: &[&str]) -> Self {
        ResultTable {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            metadata: Vec::new(),
        }
    }

    /// Appends a row; the cell count must match the schema.
    pub fn push(&mut self, cells: Vec<String>) {
        assert_eq!(cells.len(), self.columns.len(), "row does not match the table schema");
        self.rows.push(cells);
    }

    pub fn meta(&mut self, key: &str, value: impl Display) {
        self.metadata.push((key.to_string(), value.to_string()));
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Values of a numeric column; unparsable cells are skipped.
    pub fn numeric(&self, name: &str) -> Vec<f64> {
        match self.column(name) {
            Some(i) => self.rows.iter().filter_map(|r| r[i].parse().ok()).collect(),
            None => vec![],
        }
    }

    /// Standard metadata: config hash, versions and a timestamp.
    pub fn stamp(&mut self, kind: &str, config_hash: &str) {
        self.meta("kind", kind);
        self.meta("config_hash", config_hash);
        self.meta("anderson_harness", env!("CARGO_PKG_VERSION"));
        let secs = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        self.meta("timestamp", secs);
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.metadata {
            out.push_str(&format!("# {k} = {v}\n"));
        }
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.join(","));
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self, HarnessError> {
        let mut metadata = Vec::new();
        let mut lines = text.lines();
        let header = loop {
            match lines.next() {
                Some(l) if l.starts_with('#') => {
                    let body = l.trim_start_matches('#').trim();
                    let (k, v) = body
                        .split_once(" = ")
                        .ok_or_else(|| HarnessError::Report(format!("bad metadata line {l:?}")))?;
                    metadata.push((k.to_string(), v.to_string()));
                }
                Some(l) => break l,
                None => return Err(HarnessError::Report("missing column header".into())),
            }
        };
        let columns: Vec<String> = header.split(',').map(String::from).collect();
        let mut rows = Vec::new();
        for l in lines {
            let cells: Vec<String> = l.split(',').map(String::from).collect();
            if cells.len() != columns.len() {
                return Err(HarnessError::Report(format!("row {l:?} does not match the header")));
            }
            rows.push(cells);
        }
        Ok(ResultTable {
            columns,
            rows,
            metadata,
        })
    }

    /// The CSV without volatile metadata, for byte comparisons.
    pub fn stable_csv(&self) -> String {
        let mut t = self.clone();
        t.metadata.retain(|(k, _)| !VOLATILE_KEYS.contains(&k.as_str()));
        t.to_csv()
    }
}

/// Writes the table, creating parent directories.
pub fn emit_report(table: &ResultTable, path: &Path) -> Result<(), HarnessError> {
    let io = |e| HarnessError::Io {
        path: path.to_path_buf(),
        source: e,
    };
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(io)?;
        }
    }
    std::fs::write(path, table.to_csv()).map_err(io)
}

pub fn read_report(path: &Path) -> Result<ResultTable, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    ResultTable::from_csv(&text)
}

/// Shortest round-trip formatting of a float.
pub fn num(v: f64) -> String {
    format!("{v}")
}
