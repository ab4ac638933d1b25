//! On-disk layout of a decomposition: one JSON document with the factors
//! inline in the factor format, tables as separate real-table files, and the
//! trace as JSON lines.

use std::path::{Path, PathBuf};

use affinv::decompose::{Certificates, DecompositionConfig, DecompositionResult};
use affinv::io::{format_factor, format_real_table, load_real_table, parse_factor};
use affinv::{Error, Result};
use serde::{Deserialize, Serialize};

pub const RECORD_FILE: &str = "decomposition.json";
pub const TRACE_FILE: &str = "trace.jsonl";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecompositionRecord {
    pub mode: String,
    pub function: String,
    pub config: DecompositionConfig,
    pub coarse: String,
    pub refined: String,
    pub inner: String,
    /// Table files, relative to the record, one per label.
    pub f1: Vec<String>,
    pub f2: Vec<String>,
    pub f3: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub subcell: Option<Vec<u32>>,
    pub certificates: Certificates,
    pub trace: String,
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Io(format!("{}: {e}", path.display()))
}

fn write(path: &Path, body: &str) -> Result<()> {
    std::fs::write(path, body).map_err(|e| io_err(path, e))
}

/// Writes the result under `dir` and returns the record path.
pub fn save(dir: &Path, mode: &str, function: &Path, config: &DecompositionConfig, d: &DecompositionResult) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let names = |part: &str, tables: &[affinv::field::RealTable]| -> Result<Vec<String>> {
        tables
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let name = format!("{part}_label{}.txt", i + 1);
                write(&dir.join(&name), &format_real_table(t))?;
                Ok(name)
            })
            .collect()
    };
    let f1 = names("f1", &d.f1)?;
    let f2 = names("f2", &d.f2)?;
    let f3 = names("f3", &d.f3)?;
    let mut trace = String::new();
    for ev in &d.trace {
        trace.push_str(&serde_json::to_string(ev).expect("trace serializes"));
        trace.push('\n');
    }
    write(&dir.join(TRACE_FILE), &trace)?;
    let record = DecompositionRecord {
        mode: mode.to_string(),
        function: function.display().to_string(),
        config: config.clone(),
        coarse: format_factor(&d.coarse),
        refined: format_factor(&d.refined),
        inner: format_factor(&d.inner),
        f1,
        f2,
        f3,
        subcell: d.subcell.clone(),
        certificates: d.certificates.clone(),
        trace: TRACE_FILE.to_string(),
    };
    let path = dir.join(RECORD_FILE);
    write(&path, &(serde_json::to_string_pretty(&record).expect("record serializes") + "\n"))?;
    Ok(path)
}

/// Reads a record back into a result; the trace is not reloaded.
pub fn load(path: &Path) -> Result<(DecompositionRecord, DecompositionResult)> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let record: DecompositionRecord = serde_json::from_str(&text).map_err(|e| Error::Parse {
        line: e.line(),
        msg: e.to_string(),
    })?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let tables = |names: &[String]| names.iter().map(|n| load_real_table(dir.join(n))).collect::<Result<Vec<_>>>();
    let result = DecompositionResult {
        coarse: parse_factor(&record.coarse)?,
        refined: parse_factor(&record.refined)?,
        inner: parse_factor(&record.inner)?,
        f1: tables(&record.f1)?,
        f2: tables(&record.f2)?,
        f3: tables(&record.f3)?,
        subcell: record.subcell.clone(),
        certificates: record.certificates.clone(),
        trace: Vec::new(),
    };
    Ok((record, result))
}
