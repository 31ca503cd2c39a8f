//! CSV tables and their `.meta` sidecars.
//!
//! Numbers are written in Rust's shortest round-trip form, so identical
//! inputs give byte-identical files. Anything run-specific that is not a
//! function of the configuration (the creation time) goes into the sidecar
//! only.

use std::fmt::Display;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use crate::error::{Error, Result};

/// Render one CSV field.
pub fn format_number(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        x.to_string()
    }
}

/// Write `header` and `rows` to `path`. Every row must have as many fields as the header.
pub fn write_csv<R: AsRef<[f64]>>(path: &Path, header: &[&str], rows: &[R]) -> Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    writeln!(out, "{}", header.join(","))?;
    for (k, row) in rows.iter().enumerate() {
        let row = row.as_ref();
        if row.len() != header.len() {
            return Err(Error::Io(format!(
                "{}: row {k} has {} fields, header has {}",
                path.display(),
                row.len(),
                header.len()
            )));
        }
        let line = row.iter().map(|&x| format_number(x)).collect::<Vec<_>>().join(",");
        writeln!(out, "{line}")?;
    }
    out.flush()?;
    Ok(())
}

/// Key/value metadata written next to a CSV file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Meta {
    entries: Vec<(String, String)>,
}

impl Meta {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, key: &str, value: impl Display) -> &mut Self {
        self.entries.push((key.to_string(), value.to_string()));
        self
    }

    /// Add every line of a `key = value` block (e.g. a resolved config) under `prefix`.
    pub fn push_block(&mut self, prefix: &str, block: &str) -> &mut Self {
        let mut section = String::new();
        for line in block.lines().map(str::trim) {
            if let Some(s) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                section = s.to_string();
            } else if let Some((k, v)) = line.split_once('=') {
                let key = format!("{prefix}.{section}.{}", k.trim());
                self.entries.push((key, v.trim().to_string()));
            }
        }
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    /// Write the entries followed by `created_unix`.
    pub fn write(&self, path: &Path) -> Result<()> {
        let mut out = BufWriter::new(fs::File::create(path)?);
        for (k, v) in &self.entries {
            writeln!(out, "{k} = {v}")?;
        }
        let now = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        writeln!(out, "created_unix = {now}")?;
        out.flush()?;
        Ok(())
    }
}

/// A CSV file and its sidecar sharing one base name inside `dir`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifact {
    pub csv: PathBuf,
    pub meta: PathBuf,
}

impl Artifact {
    pub fn new(dir: &Path, base: &str) -> Self {
        Self {
            csv: dir.join(format!("{base}.csv")),
            meta: dir.join(format!("{base}.meta")),
        }
    }

    /// Write both files, creating `dir` if needed.
    pub fn write<R: AsRef<[f64]>>(&self, header: &[&str], rows: &[R], meta: &Meta) -> Result<()> {
        if let Some(dir) = self.csv.parent() {
            fs::create_dir_all(dir)?;
        }
        write_csv(&self.csv, header, rows)?;
        meta.write(&self.meta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_is_deterministic_and_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.csv");
        let rows = vec![[0.1, 1e-300, -2.5], [f64::NAN, f64::INFINITY, 3.0]];
        write_csv(&p, &["a", "b", "c"], &rows).unwrap();
        let first = fs::read(&p).unwrap();
        write_csv(&p, &["a", "b", "c"], &rows).unwrap();
        assert_eq!(first, fs::read(&p).unwrap());
        let text = String::from_utf8(first).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("a,b,c"));
        let vals: Vec<f64> = lines.next().unwrap().split(',').map(|s| s.parse().unwrap()).collect();
        assert_eq!(vals, vec![0.1, 1e-300, -2.5]);
        assert_eq!(lines.next(), Some("nan,inf,3"));
    }

    #[test]
    fn ragged_rows_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let rows: Vec<Vec<f64>> = vec![vec![1.0, 2.0], vec![1.0]];
        assert!(write_csv(&dir.path().join("x.csv"), &["a", "b"], &rows).is_err());
    }

    #[test]
    fn artifact_writes_both_files() {
        let dir = tempfile::tempdir().unwrap();
        let a = Artifact::new(&dir.path().join("sub"), "surface");
        let mut m = Meta::new();
        m.push("seed", 7).push_block("config", "[sim]\ndt = 0.004\n");
        assert_eq!(m.get("config.sim.dt"), Some("0.004"));
        a.write(&["x"], &[[1.0]], &m).unwrap();
        let meta = fs::read_to_string(&a.meta).unwrap();
        assert!(meta.starts_with("seed = 7\nconfig.sim.dt = 0.004\ncreated_unix = "));
        assert_eq!(fs::read_to_string(&a.csv).unwrap(), "x\n1\n");
    }
}
