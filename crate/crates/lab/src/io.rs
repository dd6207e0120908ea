//! Result files: one CSV per table, `summary.json` with metadata, and the
//! resolved `config.toml`.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::json;

use crate::error::{LabError, LabResult};
use crate::experiments::{ExperimentResult, Table};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub fn write_table(table: &Table, path: &Path) -> LabResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(&table.header)?;
    for row in &table.rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_table(path: &Path) -> LabResult<(Vec<String>, Vec<Vec<String>>)> {
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.iter().map(String::from).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        rows.push(rec?.iter().map(String::from).collect());
    }
    Ok((header, rows))
}

/// The metadata sidecar.
pub fn sidecar(result: &ExperimentResult) -> serde_json::Value {
    json!({
        "kind": result.kind,
        "version": VERSION,
        "config": result.config,
        "timing": { "seconds": result.seconds },
        "tables": result.tables.iter().map(|t| format!("{}.csv", t.name)).collect::<Vec<_>>(),
        "summary": result.summary,
        "checks": result.checks,
        "passed": result.passed(),
    })
}

/// Write everything under `dir`, creating it if needed. Returns the paths.
pub fn write_result(result: &ExperimentResult, dir: &Path) -> LabResult<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| LabError::Io(format!("{}: {e}", dir.display())))?;
    let mut paths = Vec::new();
    for t in &result.tables {
        let p = dir.join(format!("{}.csv", t.name));
        write_table(t, &p)?;
        paths.push(p);
    }
    let p = dir.join("summary.json");
    fs::write(&p, serde_json::to_string_pretty(&sidecar(result))? + "\n")?;
    paths.push(p);
    let p = dir.join("config.toml");
    fs::write(&p, result.config.to_toml())?;
    paths.push(p);
    Ok(paths)
}
