//! File formats: CSV tables, JSON documents and one-column sample files.
//! Every output path is resolved inside the run's output directory.

use std::fs;
use std::path::{Component, Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};

/// Output directory for one run. Relative file names only; absolute paths
/// and `..` components are refused.
#[derive(Debug, Clone)]
pub struct OutDir {
    root: PathBuf,
    written: Vec<String>,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
        if !root.is_dir() {
            return Err(Error::io(root, "not a directory"));
        }
        Ok(OutDir {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Files written so far, relative to the root, in write order.
    pub fn written(&self) -> &[String] {
        &self.written
    }

    pub fn path(&self, name: &str) -> Result<PathBuf> {
        let rel = Path::new(name);
        let ok = !name.is_empty() && rel.components().all(|c| matches!(c, Component::Normal(_)));
        if !ok {
            return Err(Error::usage(format!(
                "output name {name:?} must be a relative path inside the output directory"
            )));
        }
        Ok(self.root.join(rel))
    }

    fn record(&mut self, name: &str) {
        if !self.written.iter().any(|w| w == name) {
            self.written.push(name.to_string());
        }
    }

    pub fn write_csv<I, R>(&mut self, name: &str, header: &[&str], rows: I) -> Result<PathBuf>
    where
        I: IntoIterator<Item = R>,
        R: IntoIterator,
        R::Item: AsRef<[u8]>,
    {
        let path = self.path(name)?;
        let mut w = csv::Writer::from_path(&path).map_err(|e| Error::io(&path, e))?;
        w.write_record(header).map_err(|e| Error::io(&path, e))?;
        for row in rows {
            w.write_record(row).map_err(|e| Error::io(&path, e))?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
        self.record(name);
        Ok(path)
    }

    pub fn write_json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<PathBuf> {
        let path = self.path(name)?;
        let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::io(&path, e))?;
        text.push('\n');
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        self.record(name);
        Ok(path)
    }
}

/// Formats a float so that parsing it back gives the same value.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

/// Reads the first column of a CSV file as numbers. A first row that does
/// not parse is taken as a header; any later bad row is an error.
pub fn read_column(path: &Path) -> Result<Vec<f64>> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| Error::io(path, e))?;
        let Some(field) = rec.get(0).map(str::trim) else { continue };
        if field.is_empty() {
            continue;
        }
        match field.parse::<f64>() {
            Ok(v) if v.is_finite() => out.push(v),
            Ok(_) => return Err(Error::io(path, format!("row {}: non-finite value {field:?}", i + 1))),
            Err(_) if i == 0 => {}
            Err(_) => return Err(Error::io(path, format!("row {}: malformed number {field:?}", i + 1))),
        }
    }
    if out.is_empty() {
        return Err(Error::io(path, "no samples"));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_stay_inside() {
        let dir = tempfile::tempdir().unwrap();
        let out = OutDir::create(dir.path()).unwrap();
        assert!(out.path("curve.csv").is_ok());
        assert!(out.path("sub/curve.csv").is_ok());
        assert!(out.path("../curve.csv").is_err());
        assert!(out.path("/tmp/curve.csv").is_err());
        assert!(out.path("").is_err());
    }

    #[test]
    fn column_with_and_without_header() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.csv");
        fs::write(&p, "x\n1.5\n-2\n").unwrap();
        assert_eq!(read_column(&p).unwrap(), vec![1.5, -2.0]);
        fs::write(&p, "0.25,7\n3\n").unwrap();
        assert_eq!(read_column(&p).unwrap(), vec![0.25, 3.0]);
        fs::write(&p, "1\nbanana\n").unwrap();
        assert!(read_column(&p).unwrap_err().to_string().contains("banana"));
    }

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0 / 3.0, 2.38e-7, -5.0] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
    }
}
