//! CSV persistence for diagnostics, audit and other row types.

use std::fs::{File, OpenOptions};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

fn csv_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Csv(format!("{}: {e}", path.display()))
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    r.deserialize()
        .map(|row| row.map_err(|e| csv_err(path, e)))
        .collect()
}

/// Appends rows to a CSV file one at a time, flushing after each row so that
/// an interrupted run leaves only complete lines behind.
pub struct CsvSink {
    path: PathBuf,
    writer: csv::Writer<File>,
}

impl CsvSink {
    /// Creates (or truncates) `path`; the header is written with the first row.
    pub fn create(path: &Path) -> Result<Self> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        Ok(Self {
            path: path.to_path_buf(),
            writer: csv::WriterBuilder::new()
                .has_headers(true)
                .from_writer(file),
        })
    }

    /// Reopens an existing file for appending after dropping every row whose
    /// first column exceeds `t_keep`. Kept rows are copied byte for byte.
    pub fn resume(path: &Path, t_keep: f64) -> Result<Self> {
        let text = match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Self::create(path),
            Err(e) => return Err(Error::io(path, e)),
        };
        let mut kept = String::with_capacity(text.len());
        let mut lines = text.split_inclusive('\n');
        // no complete header means no row was ever written
        let Some(header) = lines.next().filter(|h| h.ends_with('\n')) else {
            return Self::create(path);
        };
        kept.push_str(header);
        for line in lines {
            if !line.ends_with('\n') {
                break; // torn final line
            }
            let first = line.split(',').next().unwrap_or("").trim();
            let t: f64 = first
                .parse()
                .map_err(|_| csv_err(path, format!("bad time value `{first}`")))?;
            if t > t_keep {
                break;
            }
            kept.push_str(line);
        }
        std::fs::write(path, &kept).map_err(|e| Error::io(path, e))?;
        let file = OpenOptions::new()
            .append(true)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        Ok(Self {
            path: path.to_path_buf(),
            writer: csv::WriterBuilder::new()
                .has_headers(false)
                .from_writer(file),
        })
    }

    pub fn push<T: Serialize>(&mut self, row: &T) -> Result<()> {
        self.writer
            .serialize(row)
            .map_err(|e| csv_err(&self.path, e))?;
        self.writer.flush().map_err(|e| Error::io(&self.path, e))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::DiagnosticsRecord;

    fn rec(t: f64) -> DiagnosticsRecord {
        DiagnosticsRecord {
            t,
            mass: 1.0,
            entropy: -0.1,
            fisher: 0.3,
            f: 0.2,
            g: -1.0 / 3.0,
            gradw_l2: 0.1,
            gradw_l4: 0.01,
            gradw_l6: 0.001,
            u_l2: 1.5,
            int_h: -2.0,
            sup_u: 4.0,
            min_v: 0.9,
            sup_w: 0.1,
        }
    }

    #[test]
    fn header_has_fixed_column_order() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        write_csv(&p, &[rec(0.0)]).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(
            text.lines().next().unwrap(),
            "t,mass,entropy,fisher,F,G,gradw_l2,gradw_l4,gradw_l6,u_l2,int_H,sup_u,min_v,sup_w"
        );
        let back: Vec<DiagnosticsRecord> = read_csv(&p).unwrap();
        assert_eq!(back, vec![rec(0.0)]);
    }

    #[test]
    fn resume_truncates_and_appends() {
        let dir = tempfile::tempdir().unwrap();
        let full = dir.path().join("full.csv");
        let part = dir.path().join("part.csv");
        let mut a = CsvSink::create(&full).unwrap();
        let mut b = CsvSink::create(&part).unwrap();
        for k in 0..6 {
            a.push(&rec(k as f64 * 0.1)).unwrap();
            if k < 5 {
                b.push(&rec(k as f64 * 0.1)).unwrap();
            }
        }
        drop(b);
        // pretend the run resumed from t = 0.2; rows after it are regenerated
        let mut b = CsvSink::resume(&part, 0.2).unwrap();
        for k in 3..6 {
            b.push(&rec(k as f64 * 0.1)).unwrap();
        }
        drop((a, b));
        assert_eq!(std::fs::read(&full).unwrap(), std::fs::read(&part).unwrap());
    }

    #[test]
    fn resume_of_an_empty_sink_starts_over() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.csv");
        drop(CsvSink::create(&path).unwrap());
        let mut s = CsvSink::resume(&path, 1.0).unwrap();
        s.push(&rec(0.5)).unwrap();
        drop(s);
        let rows: Vec<DiagnosticsRecord> = read_csv(&path).unwrap();
        assert_eq!(rows.len(), 1);
    }
}
