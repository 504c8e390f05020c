//! Writing reports and data files with their provenance attached.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::Value;

use crate::error::Result;
use crate::harness::ExperimentReport;

/// `# seed=... config_hash=...` line placed above CSV headers.
pub fn provenance_line(seed: u64, config_hash: &str) -> String {
    format!("# seed={seed} config_hash={config_hash}\n")
}

pub fn stamp_csv(csv: &str, seed: u64, config_hash: &str) -> String {
    let mut out = provenance_line(seed, config_hash);
    out.push_str(csv);
    out
}

/// Inserts an XML comment with the provenance after the opening `<svg ...>` tag.
pub fn stamp_svg(svg: &str, seed: u64, config_hash: &str) -> String {
    let comment = format!("<!-- seed={seed} config_hash={config_hash} -->");
    match svg.find('>') {
        Some(i) => format!("{}{}{}", &svg[..=i], comment, &svg[i + 1..]),
        None => svg.to_string(),
    }
}

fn cell(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => String::new(),
        other => other.to_string(),
    }
}

/// Flattens a JSON table into CSV. Arrays of objects use the keys of the first
/// row as columns; arrays of arrays get `c0, c1, ...`.
pub fn table_to_csv(table: &Value) -> Option<String> {
    let rows = table.as_array()?;
    let first = rows.first()?;
    let mut out = String::new();
    match first {
        Value::Object(obj) => {
            let keys: Vec<&String> = obj.keys().collect();
            out.push_str(
                &keys
                    .iter()
                    .map(|k| k.as_str())
                    .collect::<Vec<_>>()
                    .join(","),
            );
            out.push('\n');
            for row in rows {
                let o = row.as_object()?;
                let line: Vec<String> = keys
                    .iter()
                    .map(|k| o.get(*k).map(cell).unwrap_or_default())
                    .collect();
                out.push_str(&line.join(","));
                out.push('\n');
            }
        }
        Value::Array(a) => {
            let header: Vec<String> = (0..a.len()).map(|i| format!("c{i}")).collect();
            out.push_str(&header.join(","));
            out.push('\n');
            for row in rows {
                let line: Vec<String> = row.as_array()?.iter().map(cell).collect();
                out.push_str(&line.join(","));
                out.push('\n');
            }
        }
        _ => return None,
    }
    Some(out)
}

/// Output directory bound to one report's provenance.
#[derive(Debug, Clone)]
pub struct ArtifactWriter {
    dir: PathBuf,
    seed: u64,
    config_hash: String,
    written: Vec<PathBuf>,
}

impl ArtifactWriter {
    pub fn new(dir: &Path, report: &ExperimentReport) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(ArtifactWriter {
            dir: dir.to_path_buf(),
            seed: report.seed,
            config_hash: report.config_hash.clone(),
            written: Vec::new(),
        })
    }

    fn put(&mut self, name: &str, contents: &str) -> Result<PathBuf> {
        let path = self.dir.join(name);
        fs::write(&path, contents)?;
        log::info!("wrote {}", path.display());
        self.written.push(path.clone());
        Ok(path)
    }

    pub fn csv(&mut self, name: &str, csv: &str) -> Result<PathBuf> {
        let stamped = stamp_csv(csv, self.seed, &self.config_hash);
        self.put(name, &stamped)
    }

    pub fn svg(&mut self, name: &str, svg: &str) -> Result<PathBuf> {
        let stamped = stamp_svg(svg, self.seed, &self.config_hash);
        self.put(name, &stamped)
    }

    /// Report as `<kind>.json` plus one CSV per tabular entry.
    pub fn report(&mut self, report: &ExperimentReport) -> Result<PathBuf> {
        for (name, table) in &report.tables {
            if let Some(csv) = table_to_csv(table) {
                self.csv(&format!("{}_{}.csv", report.kind, name), &csv)?;
            }
        }
        self.put(&format!("{}.json", report.kind), &report.to_json())
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }
}
