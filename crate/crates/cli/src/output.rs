use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::Value;

/// A named table of formatted cells. Headers carry units, e.g. `epsilon_mhz`.
#[derive(Debug, Clone, Serialize)]
pub struct Table {
    pub name: String,
    /// Free-form `# ` lines written above the header.
    pub notes: Vec<String>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            notes: Vec::new(),
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len(), "row width for {}", self.name);
        self.rows.push(row);
    }

    pub fn note(&mut self, line: impl Into<String>) {
        self.notes.push(line.into());
    }

    fn write_csv<W: Write>(&self, out: W, manifest: Option<&str>) -> io::Result<()> {
        let mut out = out;
        if let Some(m) = manifest {
            writeln!(out, "# manifest: {m}")?;
        }
        for n in &self.notes {
            writeln!(out, "# {n}")?;
        }
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()
    }

    fn to_json(&self, manifest: Option<&str>) -> Value {
        let rows: Vec<BTreeMap<&str, &str>> = self
            .rows
            .iter()
            .map(|r| self.header.iter().map(String::as_str).zip(r.iter().map(String::as_str)).collect())
            .collect();
        serde_json::json!({
            "manifest": manifest,
            "name": self.name,
            "notes": self.notes,
            "rows": rows,
        })
    }
}

/// Shortest round-trip form; exponent notation outside [1e-4, 1e10).
pub fn num(x: f64) -> String {
    let a = x.abs();
    if a != 0.0 && a.is_finite() && !(1e-4..1e10).contains(&a) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub device: String,
    pub parameters: BTreeMap<String, Value>,
    pub outputs: Vec<String>,
    pub toolkit_version: String,
    pub parallel: bool,
    pub timestamp_unix: u64,
}

impl RunManifest {
    pub fn new(subcommand: &str, device: &str, parameters: BTreeMap<String, Value>) -> Self {
        Self {
            subcommand: subcommand.to_string(),
            device: device.to_string(),
            parameters,
            outputs: Vec::new(),
            toolkit_version: env!("CARGO_PKG_VERSION").to_string(),
            parallel: cqed_parity::exec::is_parallel(),
            timestamp_unix: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// Where a run's tables go.
#[derive(Debug, Clone)]
pub enum Sink {
    Stdout,
    /// A single-table run written to this file; the manifest goes next to it.
    File(PathBuf),
    /// One file per table in this directory, plus `manifest.json`.
    Dir(PathBuf),
}

fn write_table(table: &Table, path: Option<&Path>, manifest: Option<&str>, format: Format) -> io::Result<()> {
    let mut buf = Vec::new();
    match format {
        Format::Csv => table.write_csv(&mut buf, manifest)?,
        Format::Json => {
            serde_json::to_writer_pretty(&mut buf, &table.to_json(manifest))?;
            buf.push(b'\n');
        }
    }
    match path {
        Some(p) => fs::write(p, buf),
        None => io::stdout().lock().write_all(&buf),
    }
}

/// Writes `tables` and the manifest; returns the written paths.
pub fn emit(tables: &[Table], sink: &Sink, format: Format, mut manifest: RunManifest) -> io::Result<Vec<PathBuf>> {
    match sink {
        Sink::Stdout => {
            for t in tables {
                write_table(t, None, None, format)?;
            }
            Ok(Vec::new())
        }
        Sink::File(path) => {
            let manifest_path = sibling_manifest(path);
            let manifest_name = file_name(&manifest_path);
            let mut written = Vec::new();
            for (k, t) in tables.iter().enumerate() {
                let p = if k == 0 {
                    path.clone()
                } else {
                    suffixed(path, &t.name, format)
                };
                write_table(t, Some(&p), Some(&manifest_name), format)?;
                manifest.outputs.push(p.display().to_string());
                written.push(p);
            }
            write_manifest(&manifest_path, &manifest)?;
            written.push(manifest_path);
            Ok(written)
        }
        Sink::Dir(dir) => {
            fs::create_dir_all(dir)?;
            let mut written = Vec::new();
            for t in tables {
                let p = dir.join(format!("{}.{}", t.name, format.extension()));
                write_table(t, Some(&p), Some("manifest.json"), format)?;
                manifest.outputs.push(p.display().to_string());
                written.push(p);
            }
            let mp = dir.join("manifest.json");
            write_manifest(&mp, &manifest)?;
            written.push(mp);
            Ok(written)
        }
    }
}

fn write_manifest(path: &Path, m: &RunManifest) -> io::Result<()> {
    let mut text = serde_json::to_string_pretty(m)?;
    text.push('\n');
    fs::write(path, text)
}

fn file_name(p: &Path) -> String {
    p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn sibling_manifest(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(|s| s.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    path.with_file_name(name)
}

fn suffixed(path: &Path, suffix: &str, format: Format) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}_{suffix}.{}", format.extension()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> Table {
        let mut t = Table::new("demo", &["x_mhz", "label"]);
        t.note("demo note");
        t.push(vec![num(1.5), "a,b".to_string()]);
        t
    }

    #[test]
    fn csv_has_manifest_notes_and_header() {
        let mut buf = Vec::new();
        table().write_csv(&mut buf, Some("run.manifest.json")).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "# manifest: run.manifest.json\n# demo note\nx_mhz,label\n1.5,\"a,b\"\n");
    }

    #[test]
    fn small_and_large_numbers_use_exponents() {
        assert_eq!(num(1.5e-11), "1.5e-11");
        assert_eq!(num(0.25), "0.25");
        assert_eq!(num(1e12), "1e12");
        assert_eq!(num(-0.0), "-0");
    }

    #[test]
    fn file_sink_names() {
        let p = Path::new("/tmp/x/out.csv");
        assert_eq!(sibling_manifest(p), Path::new("/tmp/x/out.csv.manifest.json"));
        assert_eq!(suffixed(p, "drives", Format::Csv), Path::new("/tmp/x/out_drives.csv"));
    }

    #[test]
    fn json_rows_are_keyed_by_header() {
        let v = table().to_json(None);
        assert_eq!(v["rows"][0]["label"], "a,b");
        assert_eq!(v["rows"][0]["x_mhz"], "1.5");
    }
}
