//! CSV writing and the run manifest written next to every output file.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{Context, Result};
use serde::Serialize;

/// Round-trip float formatting (17 significant digits).
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// A CSV table: `#` comment lines, a header row, then data rows.
pub struct Table {
    comments: Vec<String>,
    columns: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Self {
            comments: Vec::new(),
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn comment(&mut self, line: impl Into<String>) {
        self.comments.push(line.into());
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for c in &self.comments {
            out.push_str("# ");
            out.push_str(c);
            out.push('\n');
        }
        out.push_str(&format!("# columns: {}\n", self.columns.join(", ")));
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GridSpec {
    pub kind: &'static str,
    pub points: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub energy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub emin: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub emax: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub points_per_decade: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct QuadSpec {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_depth: u32,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub command_line: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    pub duration_seconds: f64,
    pub parameters: BTreeMap<String, toml::Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    pub quadrature: QuadSpec,
}

impl Manifest {
    pub fn set_duration(&mut self, elapsed: Duration) {
        self.duration_seconds = elapsed.as_secs_f64();
    }
}

pub fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".manifest");
    PathBuf::from(name)
}

/// Writes the table to `out` (plus its manifest) or to stdout.
pub fn emit(table: &Table, out: Option<&Path>, manifest: &Manifest) -> Result<()> {
    let text = table.render();
    match out {
        None => {
            let mut stdout = io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
        }
        Some(path) => {
            fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
            let sidecar = manifest_path(path);
            let body = toml::to_string(manifest).context("serializing manifest")?;
            fs::write(&sidecar, body).with_context(|| format!("writing {}", sidecar.display()))?;
        }
    }
    Ok(())
}
