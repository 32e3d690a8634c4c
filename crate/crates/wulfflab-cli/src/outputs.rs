//! Run-directory outputs: `record.json` provenance records, CSV tables, and
//! OFF mesh export.  Every command writes a record containing the echoed
//! config, a SHA-256 of the config bytes, a timestamp, and its results.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use wulfflab::shapes::TriMesh;

pub struct RunDir {
    pub path: PathBuf,
}

impl RunDir {
    pub fn create(path: &Path) -> std::io::Result<Self> {
        fs::create_dir_all(path)?;
        Ok(Self { path: path.to_path_buf() })
    }

    pub fn write(&self, name: &str, contents: &str) -> std::io::Result<PathBuf> {
        let p = self.path.join(name);
        fs::write(&p, contents)?;
        Ok(p)
    }

    /// Write `record.json`: command name, echoed config with its content
    /// hash, timestamp, and a command-specific results object.
    pub fn write_record(
        &self,
        command: &str,
        config: &Value,
        results: Value,
        warnings: Vec<String>,
    ) -> std::io::Result<PathBuf> {
        let config_bytes = serde_json::to_vec(config).expect("config serializes");
        let hash = hex(&Sha256::digest(&config_bytes));
        let record = json!({
            "tool": env!("CARGO_PKG_NAME"),
            "tool_version": env!("CARGO_PKG_VERSION"),
            "command": command,
            "timestamp": chrono::Utc::now().to_rfc3339(),
            "config": config,
            "config_sha256": hash,
            "results": results,
            "warnings": warnings,
        });
        let p = self.path.join("record.json");
        fs::write(&p, serde_json::to_string_pretty(&record).expect("record serializes"))?;
        Ok(p)
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// CSV table with a fixed header; floats are written with the shortest
/// round-trip `Display` form so identical values give identical bytes.
pub struct Csv {
    out: String,
    columns: usize,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        Self { out: format!("{}\n", header.join(",")), columns: header.len() }
    }

    pub fn row(&mut self, cells: &[CsvCell]) {
        assert_eq!(cells.len(), self.columns, "csv row width mismatch");
        let rendered: Vec<String> = cells.iter().map(CsvCell::render).collect();
        let _ = writeln!(self.out, "{}", rendered.join(","));
    }

    pub fn finish(self) -> String {
        self.out
    }
}

pub enum CsvCell {
    Int(i64),
    Float(f64),
    Text(String),
    Bool(bool),
}

impl CsvCell {
    fn render(&self) -> String {
        match self {
            CsvCell::Int(v) => v.to_string(),
            CsvCell::Float(v) => {
                if v.is_finite() {
                    v.to_string()
                } else {
                    "nan".to_string()
                }
            }
            CsvCell::Text(s) => s.clone(),
            CsvCell::Bool(b) => b.to_string(),
        }
    }
}

/// Object File Format export of a triangle mesh.
pub fn off_mesh(mesh: &TriMesh) -> String {
    let mut out = String::from("OFF\n");
    let _ = writeln!(out, "{} {} 0", mesh.vertices.len(), mesh.faces.len());
    for v in &mesh.vertices {
        let _ = writeln!(out, "{} {} {}", v.x, v.y, v.z);
    }
    for f in &mesh.faces {
        let _ = writeln!(out, "3 {} {} {}", f[0], f[1], f[2]);
    }
    out
}
