//! Atomic file output and fixed-format numbers.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::CliError;

/// Twelve significant digits in scientific notation, independent of locale.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.11e}")
    } else {
        format!("{x}")
    }
}

/// One produced file, as listed in the run report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FileEntry {
    pub path: String,
    /// Data rows (CSV rows after the header, script lines, JSON top-level keys).
    pub rows: usize,
    pub columns: usize,
}

/// Output directory that records every file written into it.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    pub files: Vec<FileEntry>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(root)
            .map_err(|e| CliError::Io(format!("cannot create {}: {e}", root.display())))?;
        Ok(Self {
            root: root.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.root
    }

    /// Writes through a temporary file in the same directory, then renames.
    fn write_atomic(&self, name: &str, contents: &[u8]) -> Result<PathBuf, CliError> {
        let target = self.root.join(name);
        let mut tmp = tempfile::NamedTempFile::new_in(&self.root)?;
        tmp.write_all(contents)?;
        tmp.flush()?;
        tmp.persist(&target)
            .map_err(|e| CliError::Io(format!("cannot write {}: {}", target.display(), e.error)))?;
        Ok(target)
    }

    pub fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
        let mut text = header.join(",");
        text.push('\n');
        for row in rows {
            debug_assert_eq!(row.len(), header.len());
            text.push_str(&row.join(","));
            text.push('\n');
        }
        self.write_atomic(name, text.as_bytes())?;
        self.files.push(FileEntry {
            path: name.into(),
            rows: rows.len(),
            columns: header.len(),
        });
        Ok(())
    }

    pub fn text(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        self.write_atomic(name, contents.as_bytes())?;
        self.files.push(FileEntry {
            path: name.into(),
            rows: contents.lines().count(),
            columns: 0,
        });
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let v = serde_json::to_value(value).map_err(|e| CliError::Io(e.to_string()))?;
        let keys = v.as_object().map_or(1, |o| o.len());
        let mut text = serde_json::to_string_pretty(&v).map_err(|e| CliError::Io(e.to_string()))?;
        text.push('\n');
        self.write_atomic(name, text.as_bytes())?;
        self.files.push(FileEntry {
            path: name.into(),
            rows: keys,
            columns: 0,
        });
        Ok(())
    }

    /// Writes the report last; it lists every other file but not itself.
    pub fn report<T: Serialize>(&self, value: &T) -> Result<PathBuf, CliError> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
        text.push('\n');
        self.write_atomic("report.json", text.as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(num(0.15), "1.50000000000e-1");
        assert_eq!(num(-2.0), "-2.00000000000e0");
        assert_eq!(num(1.0 / 3.0).split('e').next().unwrap().replace(['.', '-'], "").len(), 12);
    }

    #[test]
    fn files_are_listed_with_counts() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = OutputDir::create(dir.path()).unwrap();
        out.csv("a.csv", &["x", "y"], &[vec!["1".into(), "2".into()]]).unwrap();
        out.text("p.py", "a\nb\n").unwrap();
        assert_eq!(out.files[0], FileEntry { path: "a.csv".into(), rows: 1, columns: 2 });
        assert_eq!(out.files[1].rows, 2);
        assert_eq!(std::fs::read_to_string(dir.path().join("a.csv")).unwrap(), "x,y\n1,2\n");
        // Only the two named files remain: the temporaries were renamed.
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 2);
    }
}
