use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};
use smoothlab::io::CsvTable;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// One output file, available in both renderings.
pub struct Artifact {
    pub stem: String,
    pub table: CsvTable,
    pub json: serde_json::Value,
}

impl Artifact {
    pub fn new(stem: impl Into<String>, table: CsvTable, json: impl Serialize) -> Self {
        let json = serde_json::to_value(json).expect("outputs serialize");
        Self { stem: stem.into(), table, json }
    }

    pub fn file_name(&self, format: Format) -> String {
        match format {
            Format::Csv => format!("{}.csv", self.stem),
            Format::Json => format!("{}.json", self.stem),
        }
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => self.table.render(),
            Format::Json => json_text(&self.json),
        }
    }
}

pub fn json_text(v: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("values serialize");
    s.push('\n');
    s
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct OutputRecord {
    pub file: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Timing {
    pub wall_seconds: f64,
}

/// Provenance of one run. Everything except `timing` is a pure function of
/// the effective config and the tool version.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub subcommand: String,
    pub config_sha256: String,
    pub seed: Option<u64>,
    pub format: Format,
    pub outputs: Vec<OutputRecord>,
    pub timing: Timing,
}

pub fn write_file(dir: &Path, name: &str, text: &str) -> Result<OutputRecord, CliError> {
    let path = dir.join(name);
    std::fs::write(&path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Ok(OutputRecord { file: name.to_owned(), sha256: sha256_hex(text.as_bytes()), bytes: text.len() })
}

/// Rows of `serde_json` objects keyed by the table header, with numeric
/// cells parsed back to numbers where they are finite.
pub fn table_json(table: &CsvTable) -> serde_json::Value {
    let rows: Vec<serde_json::Value> = table
        .rows
        .iter()
        .map(|row| {
            let obj: serde_json::Map<String, serde_json::Value> = table
                .header
                .iter()
                .zip(row)
                .map(|(h, cell)| (h.clone(), cell_json(cell)))
                .collect();
            serde_json::Value::Object(obj)
        })
        .collect();
    serde_json::Value::Array(rows)
}

fn cell_json(cell: &str) -> serde_json::Value {
    if let Ok(i) = cell.parse::<i64>() {
        return i.into();
    }
    match cell {
        "true" => return true.into(),
        "false" => return false.into(),
        _ => {}
    }
    match cell.parse::<f64>() {
        Ok(x) if x.is_finite() => serde_json::Number::from_f64(x).map_or_else(|| cell.into(), Into::into),
        _ => cell.into(),
    }
}
