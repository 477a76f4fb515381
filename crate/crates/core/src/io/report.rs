//! CSV reports with a provenance comment row.

use std::fmt::Debug;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::Result;

/// First 16 hex digits of the SHA-256 of `value`'s `Debug` rendering.
pub fn config_hash(value: &impl Debug) -> String {
    let digest = Sha256::digest(format!("{value:?}").as_bytes());
    hex::encode(&digest[..8])
}

/// A table ready to be written as CSV.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    /// `# config_hash=<hash> seed=<seed>`, then the header row, then the rows.
    pub fn to_csv(&self, hash: &str, seed: u64) -> Result<Vec<u8>> {
        let mut out = format!("# config_hash={hash} seed={seed}\n").into_bytes();
        {
            let mut w = csv::Writer::from_writer(&mut out);
            w.write_record(&self.header)?;
            for r in &self.rows {
                w.write_record(r)?;
            }
            w.flush()?;
        }
        Ok(out)
    }

    pub fn write(&self, path: &Path, hash: &str, seed: u64) -> Result<()> {
        std::fs::write(path, self.to_csv(hash, seed)?)?;
        Ok(())
    }
}

/// Reads a table written by [`Table::write`], skipping `#` comment rows.
pub fn read_table(path: &Path) -> Result<Table> {
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path)?;
    let header = reader.headers()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for rec in reader.records() {
        rows.push(rec?.iter().map(str::to_string).collect());
    }
    Ok(Table { header, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comment_then_header() {
        let mut t = Table::new(&["t", "value"]);
        t.push(vec!["1".into(), "0.5".into()]);
        let bytes = t.to_csv("abc", 4).unwrap();
        assert_eq!(
            String::from_utf8(bytes).unwrap(),
            "# config_hash=abc seed=4\nt,value\n1,0.5\n"
        );
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        assert_eq!(config_hash(&(1, "a")), config_hash(&(1, "a")));
        assert_ne!(config_hash(&(1, "a")), config_hash(&(2, "a")));
        assert_eq!(config_hash(&0).len(), 16);
    }
}
