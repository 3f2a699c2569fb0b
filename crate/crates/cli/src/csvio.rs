//! CSV tables with a leading `#` metadata line.

use anyhow::{Context, Result};
use std::io::Write;
use std::path::{Path, PathBuf};

/// One cell of an output row; `None` is written as an empty field.
pub type Cell = Option<f64>;

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub metadata: Vec<String>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(metadata: impl Into<String>, header: &[&str]) -> Self {
        Self {
            metadata: vec![metadata.into()],
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: vec![],
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<Cell>> {
        let k = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }

    /// Writes the table; floats use the shortest round-trip representation.
    pub fn write(&self, path: &Path) -> Result<PathBuf> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        }
        let mut file =
            std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
        for m in &self.metadata {
            writeln!(file, "# {m}").with_context(|| format!("writing {}", path.display()))?;
        }
        let mut w = csv::Writer::from_writer(file);
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(
                row.iter()
                    .map(|c| c.map(|v| v.to_string()).unwrap_or_default()),
            )?;
        }
        w.flush()
            .with_context(|| format!("writing {}", path.display()))?;
        Ok(path.to_path_buf())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let metadata = text
            .lines()
            .take_while(|l| l.starts_with('#'))
            .map(|l| l.trim_start_matches('#').trim().to_string())
            .collect();
        let mut r = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let header = r.headers()?.iter().map(String::from).collect();
        let mut rows = vec![];
        for rec in r.records() {
            let rec = rec.with_context(|| format!("parsing {}", path.display()))?;
            let row = rec
                .iter()
                .map(|f| {
                    if f.is_empty() {
                        Ok(None)
                    } else {
                        f.parse::<f64>().map(Some)
                    }
                })
                .collect::<std::result::Result<_, _>>()
                .with_context(|| format!("non-numeric field in {}", path.display()))?;
            rows.push(row);
        }
        Ok(Self {
            metadata,
            header,
            rows,
        })
    }
}
