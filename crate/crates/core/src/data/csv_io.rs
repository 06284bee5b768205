use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{RawRecord, RecordSet, Timestamp};
use crate::harness::write_atomic;
use crate::{Error, Result};

/// Which CSV columns hold the label, the timestamp and the categorical features.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CsvSchema {
    pub label_column: String,
    pub timestamp_column: String,
    /// Categorical columns in model field order; `None` takes every other
    /// column not listed in `exclude`, in header order.
    pub categorical: Option<Vec<String>>,
    pub exclude: Vec<String>,
    /// Stop after this many data rows.
    pub max_rows: Option<usize>,
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self {
            label_column: "click".into(),
            timestamp_column: "hour".into(),
            categorical: None,
            exclude: vec!["id".into()],
            max_rows: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OnError {
    #[default]
    Abort,
    Skip,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadReport {
    pub records: RecordSet,
    pub rows_read: usize,
    pub positives: usize,
    /// `(line, message)` for rows dropped under [`OnError::Skip`].
    pub skipped: Vec<(u64, String)>,
}

fn column(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers.iter().position(|h| h == name).ok_or_else(|| Error::Parse {
        line: 1,
        message: format!("missing column {name:?}"),
    })
}

/// Streams an Avazu-style CSV into raw records, preserving file order.
pub fn load_csv(path: &Path, schema: &CsvSchema, on_error: OnError) -> Result<LoadReport> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    let headers = reader.headers().map_err(|e| csv_err(path, e))?.clone();
    if headers.is_empty() {
        return Err(Error::Parse {
            line: 1,
            message: "missing header row".into(),
        });
    }
    let label_col = column(&headers, &schema.label_column)?;
    let ts_col = column(&headers, &schema.timestamp_column)?;
    let fields: Vec<String> = match &schema.categorical {
        Some(cols) => cols.clone(),
        None => headers
            .iter()
            .filter(|h| {
                *h != schema.label_column
                    && *h != schema.timestamp_column
                    && !schema.exclude.iter().any(|e| e == h)
            })
            .map(str::to_owned)
            .collect(),
    };
    let field_cols = fields
        .iter()
        .map(|f| column(&headers, f))
        .collect::<Result<Vec<_>>>()?;

    let mut report = LoadReport {
        records: RecordSet {
            fields,
            records: Vec::new(),
        },
        rows_read: 0,
        positives: 0,
        skipped: Vec::new(),
    };
    let mut row = csv::StringRecord::new();
    loop {
        if schema.max_rows.is_some_and(|m| report.rows_read >= m) {
            break;
        }
        match reader.read_record(&mut row) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => {
                let line = e.position().map(|p| p.line()).unwrap_or(0);
                let err = Error::Parse {
                    line,
                    message: e.to_string(),
                };
                match on_error {
                    OnError::Abort => return Err(err),
                    OnError::Skip => {
                        report.skipped.push((line, err.to_string()));
                        continue;
                    }
                }
            }
        }
        report.rows_read += 1;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        match parse_row(&row, label_col, ts_col, &field_cols) {
            Ok(rec) => {
                report.positives += rec.label as usize;
                report.records.records.push(rec);
            }
            Err(message) => match on_error {
                OnError::Abort => return Err(Error::Parse { line, message }),
                OnError::Skip => report.skipped.push((line, message)),
            },
        }
    }
    Ok(report)
}

fn parse_row(
    row: &csv::StringRecord,
    label_col: usize,
    ts_col: usize,
    field_cols: &[usize],
) -> std::result::Result<RawRecord, String> {
    let get = |i: usize| row.get(i).ok_or_else(|| format!("row has only {} columns", row.len()));
    let label = match get(label_col)?.trim() {
        "0" => 0,
        "1" => 1,
        other => return Err(format!("label must be 0 or 1, got {other:?}")),
    };
    let timestamp = Timestamp::parse(get(ts_col)?).map_err(|e| match e {
        Error::Parse { message, .. } => message,
        other => other.to_string(),
    })?;
    let values = field_cols
        .iter()
        .map(|&c| get(c).map(str::to_owned))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(RawRecord {
        timestamp,
        values,
        label,
    })
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Parse {
            line: 0,
            message: format!("{other:?}"),
        },
    }
}

/// Writes records as `click,hour,<fields...>` in record order.
pub fn write_csv(set: &RecordSet, path: &Path) -> Result<()> {
    let mut out = String::from("click,hour");
    for f in &set.fields {
        out.push(',');
        out.push_str(f);
    }
    out.push('\n');
    for r in &set.records {
        out.push_str(&format!("{},{}", r.label, r.timestamp));
        for v in &r.values {
            out.push(',');
            out.push_str(v);
        }
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn file(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn header_only_is_empty_not_error() {
        let f = file("id,click,hour,site\n");
        let r = load_csv(f.path(), &CsvSchema::default(), OnError::Abort).unwrap();
        assert_eq!(r.rows_read, 0);
        assert!(r.records.records.is_empty());
        assert_eq!(r.records.fields, vec!["site".to_string()]);
    }

    #[test]
    fn parses_avazu_rows() {
        let f = file("id,click,hour,C1,site\n7,1,14102100,1005,abc\n8,0,14102101,1002,def\n");
        let r = load_csv(f.path(), &CsvSchema::default(), OnError::Abort).unwrap();
        assert_eq!(r.rows_read, 2);
        assert_eq!(r.positives, 1);
        assert_eq!(r.records.fields, vec!["C1".to_string(), "site".into()]);
        assert_eq!(r.records.records[1].values, vec!["1002".to_string(), "def".into()]);
        assert_eq!(r.records.records[1].timestamp.to_string(), "14102101");
    }

    #[test]
    fn bad_label_names_its_line() {
        let f = file("click,hour,a\n1,14102100,x\n2,14102100,y\n");
        match load_csv(f.path(), &CsvSchema::default(), OnError::Abort) {
            Err(Error::Parse { line, message }) => {
                assert_eq!(line, 3);
                assert!(message.contains("label"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn skip_mode_drops_bad_rows() {
        let f = file("click,hour,a\n1,14102100,x\n1,99999999,y\n0,14102101,z\n");
        let r = load_csv(f.path(), &CsvSchema::default(), OnError::Skip).unwrap();
        assert_eq!(r.records.records.len(), 2);
        assert_eq!(r.skipped.len(), 1);
        assert_eq!(r.skipped[0].0, 3);
    }

    #[test]
    fn missing_column() {
        let f = file("click,a\n1,x\n");
        assert!(matches!(
            load_csv(f.path(), &CsvSchema::default(), OnError::Abort),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn max_rows_limits_reading() {
        let f = file("click,hour,a\n1,14102100,x\n0,14102100,y\n0,14102101,z\n");
        let schema = CsvSchema {
            max_rows: Some(2),
            ..CsvSchema::default()
        };
        let r = load_csv(f.path(), &schema, OnError::Abort).unwrap();
        assert_eq!(r.records.records.len(), 2);
    }
}
