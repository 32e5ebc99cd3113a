//! CSV output. Every file starts with `#` comment lines naming the table,
//! the SHA-256 of the resolved experiment description and the seed; the
//! header row and records follow.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::HarnessError;

pub struct Table {
    name: &'static str,
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

/// Shortest round-trip decimal form, so reruns print identical bytes.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x}")
    }
}

pub fn positions(p: &[usize]) -> String {
    p.iter().map(usize::to_string).collect::<Vec<_>>().join(" ")
}

impl Table {
    pub fn new(name: &'static str, header: &[&'static str]) -> Self {
        Table { name, header: header.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.header.len(), "row width for table {}", self.name);
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn to_bytes(&self, spec_hash: &str, seed: u64) -> Result<Vec<u8>, HarnessError> {
        let mut out = format!("# polarsec {}\n# spec_sha256={spec_hash}\n# seed={seed}\n", self.name).into_bytes();
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        out.extend(w.into_inner().map_err(|e| HarnessError::Io(e.into_error()))?);
        Ok(out)
    }

    /// Writes `<dir>/<name>.csv`.
    pub fn write(&self, dir: &Path, spec_hash: &str, seed: u64) -> Result<PathBuf, HarnessError> {
        fs::create_dir_all(dir)?;
        let path = dir.join(format!("{}.csv", self.name));
        fs::write(&path, self.to_bytes(spec_hash, seed)?)?;
        Ok(path)
    }
}

/// Reads a table written by [`Table::write`], skipping the comment lines.
pub fn read(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>), HarnessError> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path)?;
    let header = r.headers()?.iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.map(|r| r.iter().map(String::from).collect()))
        .collect::<Result<Vec<Vec<String>>, csv::Error>>()?;
    Ok((header, rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_print_deterministically() {
        assert_eq!(num(0.1), "0.1");
        assert_eq!(num(1.0), "1");
        assert_eq!(num(f64::INFINITY), "inf");
        assert_eq!(num(-0.0 + 0.0), "0");
        assert_eq!(num(1e-300).parse::<f64>().unwrap(), 1e-300);
    }

    #[test]
    fn write_then_read() {
        let dir = tempfile::tempdir().unwrap();
        let mut t = Table::new("demo", &["a", "b"]);
        t.push(vec!["1".into(), positions(&[3, 4])]);
        let path = t.write(dir.path(), "abc", 9).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("# polarsec demo\n# spec_sha256=abc\n# seed=9\na,b\n"));
        let (h, rows) = read(&path).unwrap();
        assert_eq!(h, vec!["a", "b"]);
        assert_eq!(rows, vec![vec!["1".to_string(), "3 4".to_string()]]);
    }
}
