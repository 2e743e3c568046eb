//! CSV reading and writing for populations, snapshots and numeric tables.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use crate::error::{DpnError, Result};
use crate::mop::EvaluatedPoint;

/// Column names `prefix_1 .. prefix_count`.
pub fn numbered(prefix: &str, count: usize) -> Vec<String> {
    (1..=count).map(|i| format!("{prefix}_{i}")).collect()
}

pub fn write_table<P: AsRef<Path>>(path: P, header: &[String], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path.as_ref())?;
    w.write_record(header)?;
    for (i, row) in rows.iter().enumerate() {
        if row.len() != header.len() {
            return Err(DpnError::Dimension {
                index: i,
                expected: header.len(),
                actual: row.len(),
            });
        }
        w.write_record(row.iter().map(|v| format_f64(*v)))?;
    }
    w.flush()?;
    Ok(())
}

/// Shortest representation that parses back to the same `f64`.
pub fn format_f64(v: f64) -> String {
    format!("{v:?}")
}

/// A parsed numeric CSV file. `rows[i]` came from line `i + 2` of the file.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }
}

pub fn read_table<P: AsRef<Path>>(path: P) -> Result<Table> {
    let path = path.as_ref();
    let mut r = csv::ReaderBuilder::new()
        .flexible(true)
        .from_path(path)
        .map_err(|e| DpnError::Archive(format!("{}: {e}", path.display())))?;
    let header: Vec<String> = r.headers()?.iter().map(|s| s.trim().to_string()).collect();
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let line = i + 2;
        let rec = rec?;
        if rec.len() != header.len() {
            return Err(DpnError::Archive(format!(
                "{} line {line}: expected {} fields, found {}",
                path.display(),
                header.len(),
                rec.len()
            )));
        }
        let row = rec
            .iter()
            .map(|s| {
                s.trim().parse::<f64>().map_err(|_| {
                    DpnError::Archive(format!("{} line {line}: cannot parse '{s}'", path.display()))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(Table { header, rows })
}

/// Writes `x_1..x_n,f_1..f_k` rows.
pub fn write_population<P: AsRef<Path>>(path: P, points: &[EvaluatedPoint], n: usize, k: usize) -> Result<()> {
    let mut header = numbered("x", n);
    header.extend(numbered("f", k));
    let rows: Vec<Vec<f64>> = points
        .iter()
        .map(|p| p.x.iter().chain(&p.fx).copied().collect())
        .collect();
    write_table(path, &header, &rows)
}

/// Splits a table with `x_*` and `f_*` columns into decision and objective parts.
pub fn split_population(table: &Table) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let xs: Vec<usize> = (0..table.header.len())
        .filter(|&i| table.header[i].starts_with("x_"))
        .collect();
    let fs: Vec<usize> = (0..table.header.len())
        .filter(|&i| table.header[i].starts_with("f_"))
        .collect();
    if xs.is_empty() || fs.is_empty() {
        return Err(DpnError::Archive("population file needs x_* and f_* columns".into()));
    }
    let x = table.rows.iter().map(|r| xs.iter().map(|&i| r[i]).collect()).collect();
    let f = table.rows.iter().map(|r| fs.iter().map(|&i| r[i]).collect()).collect();
    Ok((x, f))
}

pub fn write_text<P: AsRef<Path>>(path: P, text: &str) -> Result<()> {
    let mut f = File::create(path)?;
    f.write_all(text.as_bytes())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        let rows = vec![vec![0.1, 1.0 / 3.0], vec![-2.5e-17, 7.0]];
        write_table(&p, &["a".into(), "b".into()], &rows).unwrap();
        let t = read_table(&p).unwrap();
        assert_eq!(t.header, vec!["a", "b"]);
        assert_eq!(t.rows, rows);
    }

    #[test]
    fn ragged_row_names_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.csv");
        std::fs::write(&p, "x_1,f_1\n1,2\n3\n").unwrap();
        let err = read_table(&p).unwrap_err().to_string();
        assert!(err.contains("line 3"), "{err}");
    }
}
