//! Comma-separated tables with a `#` metadata header.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;

use super::config::Config;

/// Shortest round-trip decimal, switching to exponent form for very small or large values.
pub fn num(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || (1e-4..1e6).contains(&a) || !x.is_finite() {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
    notes: Vec<(String, String)>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Table { header: header.into_iter().map(Into::into).collect(), rows: Vec::new(), notes: Vec::new() }
    }

    pub fn row(&mut self, fields: Vec<String>) {
        debug_assert_eq!(fields.len(), self.header.len());
        self.rows.push(fields);
    }

    /// Extra `# key = value` line after the standard header.
    pub fn note(&mut self, key: &str, value: impl ToString) {
        self.notes.push((key.to_string(), value.to_string()));
    }

    pub fn write(&self, out: &Path, name: &str, cfg: &Config) -> anyhow::Result<PathBuf> {
        let path = out.join(name);
        let mut f = std::fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        write_header(&mut f, cfg)?;
        for (k, v) in &self.notes {
            writeln!(f, "# {k} = {v}")?;
        }
        let mut w = csv::Writer::from_writer(f);
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(path)
    }
}

pub fn write_header(f: &mut impl Write, cfg: &Config) -> std::io::Result<()> {
    writeln!(f, "# qpert {}", env!("CARGO_PKG_VERSION"))?;
    writeln!(f, "# model_sha256 = {}", cfg.model_hash())?;
    for line in cfg.echo().lines() {
        writeln!(f, "# config: {line}")?;
    }
    Ok(())
}

/// The `model_sha256` recorded in a file written by [`Table::write`].
pub fn recorded_hash(text: &str) -> Option<&str> {
    text.lines()
        .take_while(|l| l.starts_with('#'))
        .find_map(|l| l.strip_prefix("# model_sha256 = "))
        .map(str::trim)
}

/// Rows of a file written by [`Table::write`], skipping the metadata.
pub fn read_rows(text: &str) -> anyhow::Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let header = r.headers()?.iter().map(str::to_string).collect();
    let rows = r
        .records()
        .map(|rec| rec.map(|x| x.iter().map(str::to_string).collect()))
        .collect::<Result<_, _>>()?;
    Ok((header, rows))
}
