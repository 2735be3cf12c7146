//! Output files: deterministic CSV rendering, atomic writes, and the run
//! manifest.

use std::fmt::Write as _;
use std::io;
use std::path::{Path, PathBuf};

/// A file to be emitted by an experiment run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputFile {
    pub name: String,
    pub contents: String,
}

/// CSV builder with a fixed numeric format so identical runs produce
/// identical bytes: nine significant digits for linear quantities, 0.01 dB
/// for decibel columns.
pub struct Csv {
    header: Vec<String>,
    descriptions: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Csv {
    pub fn new(columns: &[(&str, &str)]) -> Self {
        Self {
            header: columns.iter().map(|(n, _)| n.to_string()).collect(),
            descriptions: columns.iter().map(|(n, d)| format!("{n}: {d}")).collect(),
            rows: Vec::new(),
        }
    }

    pub fn row(&mut self, cells: Vec<String>) {
        assert_eq!(cells.len(), self.header.len(), "column count mismatch");
        self.rows.push(cells);
    }

    pub fn number(v: f64) -> String {
        format!("{v:.9e}")
    }

    pub fn db(v: f64) -> String {
        if v.is_finite() {
            format!("{v:.2}")
        } else {
            "NaN".to_string()
        }
    }

    pub fn integer(v: usize) -> String {
        v.to_string()
    }

    pub fn text(v: &str) -> String {
        v.to_string()
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.header.join(","));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    /// Sidecar text documenting every column.
    pub fn sidecar(&self) -> String {
        let mut out = String::new();
        for d in &self.descriptions {
            let _ = writeln!(out, "{d}");
        }
        out
    }
}

/// 64-bit FNV-1a of the scenario bytes; identifies the exact configuration
/// in the run manifest.
pub fn fnv1a_hash(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

/// Write all files under `dir` atomically: each file goes to a temporary
/// sibling first and is renamed into place, so a failed run never leaves a
/// partial output behind.
pub fn write_outputs(dir: &Path, files: &[OutputFile]) -> io::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::with_capacity(files.len());
    for f in files {
        let target = dir.join(&f.name);
        let tmp = dir.join(format!("{}.tmp", f.name));
        std::fs::write(&tmp, f.contents.as_bytes())?;
        std::fs::rename(&tmp, &target)?;
        written.push(target);
    }
    Ok(written)
}
