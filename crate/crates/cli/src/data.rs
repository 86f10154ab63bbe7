//! Case series ingestion: a headered `day,count` CSV on a contiguous daily
//! grid starting at day 1. Lines starting with `#` are comments.

use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("row {row}, column `{column}`: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },
    #[error("day {expected} is missing or out of order (found day {found} at row {row})")]
    Grid { expected: i64, found: i64, row: usize },
    #[error("row {row}: day {day} has negative count {count}")]
    NegativeCount { row: usize, day: i64, count: i64 },
    #[error("the case series is empty")]
    Empty,
    #[error("{0}")]
    Invalid(String),
}

/// Counts on days `1..=len`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CaseSeries {
    pub counts: Vec<u64>,
}

impl CaseSeries {
    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn days(&self) -> impl Iterator<Item = usize> + '_ {
        1..=self.counts.len()
    }
}

pub fn load_cases(path: &Path) -> Result<CaseSeries, DataError> {
    let text = std::fs::read_to_string(path).map_err(|e| DataError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_cases(&text)
}

/// Rows are numbered from 1 after the header, comments excluded.
pub fn parse_cases(text: &str) -> Result<CaseSeries, DataError> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| DataError::Parse {
        row: 0,
        column: "header".into(),
        message: e.to_string(),
    })?;
    let names: Vec<&str> = headers.iter().collect();
    if names != ["day", "count"] {
        return Err(DataError::Parse {
            row: 0,
            column: "header".into(),
            message: format!("expected `day,count`, found `{}`", names.join(",")),
        });
    }
    let mut counts = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| DataError::Parse {
            row,
            column: "record".into(),
            message: e.to_string(),
        })?;
        let field = |j: usize, column: &str| -> Result<i64, DataError> {
            let raw = record.get(j).unwrap_or("");
            raw.parse::<i64>().map_err(|e| DataError::Parse {
                row,
                column: column.into(),
                message: format!("`{raw}` is not an integer ({e})"),
            })
        };
        let day = field(0, "day")?;
        let count = field(1, "count")?;
        let expected = row as i64;
        if day != expected {
            return Err(DataError::Grid {
                expected,
                found: day,
                row,
            });
        }
        if count < 0 {
            return Err(DataError::NegativeCount { row, day, count });
        }
        counts.push(count as u64);
    }
    if counts.is_empty() {
        return Err(DataError::Empty);
    }
    Ok(CaseSeries { counts })
}
