//! Artifact emission. Every file is written to a temporary file in the
//! output directory and renamed into place, and every file starts with the
//! run header.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

/// Identifies the run that produced an artifact.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Header {
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
}

impl Header {
    /// First line of every CSV and text artifact.
    pub fn comment_line(&self) -> String {
        format!(
            "# epiflow {} config_hash={} seed={}",
            self.command, self.config_hash, self.seed
        )
    }
}

pub struct ArtifactWriter {
    dir: PathBuf,
    header: Header,
    written: Vec<PathBuf>,
}

impl ArtifactWriter {
    pub fn new(dir: &Path, header: Header) -> std::io::Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            header,
            written: Vec::new(),
        })
    }

    pub fn header(&self) -> &Header {
        &self.header
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }

    fn write_atomic(&mut self, name: &str, bytes: &[u8]) -> std::io::Result<()> {
        let target = self.dir.join(name);
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir)?;
        tmp.write_all(bytes)?;
        tmp.as_file().sync_all()?;
        tmp.persist(&target).map_err(|e| e.error)?;
        self.written.push(target);
        Ok(())
    }

    /// Text with the header comment prepended.
    pub fn text(&mut self, name: &str, body: &str) -> std::io::Result<()> {
        let content = format!("{}\n{body}", self.header.comment_line());
        self.write_atomic(name, content.as_bytes())
    }

    /// A CSV table with the header comment, a column line and one line per
    /// row. Reals use the shortest representation that round-trips.
    pub fn csv(&mut self, name: &str, columns: &[String], rows: &[Vec<Cell>]) -> std::io::Result<()> {
        let mut body = String::new();
        body.push_str(&columns.join(","));
        body.push('\n');
        for row in rows {
            let cells: Vec<String> = row.iter().map(Cell::render).collect();
            body.push_str(&cells.join(","));
            body.push('\n');
        }
        self.text(name, &body)
    }

    /// A JSON document whose top level carries the header fields followed by
    /// `report`.
    pub fn json<T: Serialize>(&mut self, name: &str, report: &T) -> std::io::Result<()> {
        #[derive(Serialize)]
        struct Document<'a, T> {
            #[serde(flatten)]
            header: &'a Header,
            report: &'a T,
        }
        let mut text = serde_json::to_string_pretty(&Document {
            header: &self.header,
            report,
        })
        .map_err(std::io::Error::other)?;
        text.push('\n');
        self.write_atomic(name, text.as_bytes())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    Int(i64),
    Count(u64),
    Real(f64),
}

impl Cell {
    pub fn render(&self) -> String {
        match *self {
            Cell::Int(v) => v.to_string(),
            Cell::Count(v) => v.to_string(),
            Cell::Real(v) => {
                let mut s = String::new();
                write!(s, "{v}").expect("writing to a String");
                s
            }
        }
    }
}
