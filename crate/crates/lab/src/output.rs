//! Machine-readable output: CSV with a `#`-prefixed preamble.
//!
//! The preamble echoes the resolved config and derived constants; it never
//! contains timestamps, so identical runs give identical bytes. `-∞` is
//! written as `-inf`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::config::{Config, Model};

/// Preamble lines shared by every output file of a run.
pub fn preamble(cfg: &Config, model: &Model, subcommand: &str, seed: u64) -> Vec<String> {
    let mut lines = vec![
        format!("bralev {subcommand}"),
        format!("seed = {seed}"),
        format!(
            "derived: lambda = {}, theta = {}, extinction_probability = {}, q1 = {}, q2 = {}",
            model.lambda, model.theta, model.extinction, model.scale.q1, model.scale.q2
        ),
    ];
    lines.extend(cfg.to_toml().lines().map(str::to_owned));
    lines
}

/// Formats a float; `-inf` and `inf` are spelled out.
pub fn num(x: f64) -> String {
    format!("{x}")
}

pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
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

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn write(&self, path: &Path, preamble: &[String]) -> anyhow::Result<PathBuf> {
        let mut out = BufWriter::new(File::create(path)?);
        for line in preamble {
            writeln!(out, "# {line}")?;
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.flush()?;
        Ok(path.to_path_buf())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn infinities_are_tokens() {
        assert_eq!(num(f64::NEG_INFINITY), "-inf");
        assert_eq!(num(0.25), "0.25");
    }

    #[test]
    fn writes_preamble_then_header() {
        let dir = tempfile::tempdir().unwrap();
        let mut t = Table::new(&["a", "b"]);
        t.push(vec!["1".into(), num(f64::NEG_INFINITY)]);
        let path = t.write(&dir.path().join("x.csv"), &["hello".into()]).unwrap();
        let text = std::fs::read_to_string(path).unwrap();
        assert_eq!(text, "# hello\na,b\n1,-inf\n");
    }
}
