//! Shared reader for the `#eeio-schema v1` CSV family.
//!
//! Layout of every file:
//!
//! ```text
//! #eeio-schema v1
//! #key value            (optional metadata lines)
//! header,row
//! data,rows
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::error::IngestError;

pub const SCHEMA_LINE: &str = "#eeio-schema v1";

/// A parsed file: metadata, header cells and data rows with their
/// 1-based line numbers.
#[derive(Debug)]
pub(crate) struct CsvFile {
    pub path: PathBuf,
    pub meta: BTreeMap<String, String>,
    pub header: Vec<String>,
    pub header_line: usize,
    pub rows: Vec<(usize, Vec<String>)>,
}

impl CsvFile {
    pub fn read(path: &Path) -> Result<CsvFile, IngestError> {
        let text = std::fs::read_to_string(path).map_err(|source| {
            if source.kind() == std::io::ErrorKind::NotFound {
                IngestError::MissingFile {
                    file: path.to_path_buf(),
                }
            } else {
                IngestError::Io {
                    file: path.to_path_buf(),
                    source,
                }
            }
        })?;
        Self::parse(path, &text)
    }

    pub fn parse(path: &Path, text: &str) -> Result<CsvFile, IngestError> {
        let file = path.to_path_buf();
        let text = text.strip_prefix('\u{feff}').unwrap_or(text);

        let mut meta = BTreeMap::new();
        let mut offset = 0usize;
        let mut consumed = 0usize;
        for (i, line) in text.split_inclusive('\n').enumerate() {
            let trimmed = line.trim_end_matches(['\r', '\n']);
            if i == 0 {
                if trimmed.trim() != SCHEMA_LINE {
                    return Err(IngestError::MalformedHeader {
                        file,
                        line: 1,
                        detail: format!("expected `{SCHEMA_LINE}`, found `{trimmed}`"),
                    });
                }
            } else if let Some(rest) = trimmed.strip_prefix('#') {
                let rest = rest.trim();
                let (k, v) = rest.split_once(char::is_whitespace).unwrap_or((rest, ""));
                meta.insert(k.trim().to_string(), v.trim().to_string());
            } else {
                break;
            }
            offset += 1;
            consumed += line.len();
        }

        let body = &text[consumed..];
        // the csv crate does not count skipped blank lines, so line numbers
        // are recovered from byte offsets
        let line_of = |byte: u64| {
            let mut byte = (byte as usize).min(body.len());
            // positions can point at the terminator of a skipped blank line
            while byte < body.len() && matches!(body.as_bytes()[byte], b'\n' | b'\r') {
                byte += 1;
            }
            offset + 1 + body.as_bytes()[..byte].iter().filter(|b| **b == b'\n').count()
        };
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(body.as_bytes());
        let mut header = None;
        let mut rows = Vec::new();
        for rec in reader.records() {
            let rec = rec.map_err(|e| IngestError::Csv {
                file: file.clone(),
                line: e.position().map(|p| line_of(p.byte())).unwrap_or(offset + 1),
                message: e.to_string(),
            })?;
            let line = rec.position().map(|p| line_of(p.byte())).unwrap_or(offset + 1);
            let cells: Vec<String> = rec.iter().map(str::to_string).collect();
            if cells.iter().all(|c| c.is_empty()) {
                continue;
            }
            if header.is_none() {
                header = Some((line, cells));
            } else {
                rows.push((line, cells));
            }
        }
        let (header_line, header) = header.ok_or_else(|| IngestError::MalformedHeader {
            file: file.clone(),
            line: offset + 1,
            detail: "missing header row".into(),
        })?;
        Ok(CsvFile {
            path: file,
            meta,
            header,
            header_line,
            rows,
        })
    }

    /// Checks that the header names exactly `expected`, in order.
    pub fn expect_columns(&self, expected: &[&str]) -> Result<(), IngestError> {
        let found: Vec<&str> = self.header.iter().map(String::as_str).collect();
        if found != expected {
            return Err(IngestError::MalformedHeader {
                file: self.path.clone(),
                line: self.header_line,
                detail: format!("expected columns {expected:?}, found {found:?}"),
            });
        }
        Ok(())
    }

    pub fn check_width(&self, line: usize, cells: &[String]) -> Result<(), IngestError> {
        if cells.len() != self.header.len() {
            return Err(IngestError::RaggedRow {
                file: self.path.clone(),
                line,
                expected: self.header.len(),
                found: cells.len(),
            });
        }
        Ok(())
    }

    pub fn number(&self, line: usize, column: &str, cell: &str) -> Result<f64, IngestError> {
        match cell.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(IngestError::NonNumericCell {
                file: self.path.clone(),
                line,
                column: column.to_string(),
                value: cell.to_string(),
            }),
        }
    }

    pub fn flag(&self, key: &str) -> bool {
        matches!(
            self.meta.get(key).map(|v| v.to_ascii_lowercase()),
            Some(ref v) if v == "true" || v == "yes" || v == "1"
        )
    }
}

/// Writes the schema line and metadata, followed by CSV content.
pub(crate) fn with_preamble(meta: &[(&str, String)], body: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(body.len() + 64);
    out.extend_from_slice(SCHEMA_LINE.as_bytes());
    out.push(b'\n');
    for (k, v) in meta {
        out.extend_from_slice(format!("#{k} {v}\n").as_bytes());
    }
    out.extend_from_slice(body);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_metadata_and_line_numbers() {
        let text = "#eeio-schema v1\n#currency CAD\n#allow-negative true\ncorner,a,b\nx,1,2\n\ny,\"3\",4\n";
        let f = CsvFile::parse(Path::new("t.csv"), text).unwrap();
        assert_eq!(f.meta["currency"], "CAD");
        assert!(f.flag("allow-negative"));
        assert_eq!(f.header_line, 4);
        assert_eq!(f.rows[0].0, 5);
        assert_eq!(f.rows[1].0, 7);
        assert_eq!(f.rows[1].1, vec!["y", "3", "4"]);
    }

    #[test]
    fn schema_line_is_required() {
        let err = CsvFile::parse(Path::new("t.csv"), "a,b\n1,2\n").unwrap_err();
        assert!(matches!(err, IngestError::MalformedHeader { line: 1, .. }));
    }

    #[test]
    fn nan_is_not_a_number() {
        let f = CsvFile::parse(Path::new("t.csv"), "#eeio-schema v1\na\n").unwrap();
        assert!(f.number(3, "a", "NaN").is_err());
        assert!(f.number(3, "a", "inf").is_err());
        assert_eq!(f.number(3, "a", "1e3").unwrap(), 1000.0);
    }
}
