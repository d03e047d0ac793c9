//! CSV input and output for observation matrices.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use dcovica_core::Matrix;

use crate::error::{CliError, CliResult};

/// A numeric table read from CSV.
#[derive(Debug, Clone)]
pub struct Table {
    /// Column names, when the first row was a header.
    pub header: Option<Vec<String>>,
    pub data: Matrix,
    /// Rows dropped because they contained empty cells.
    pub dropped_rows: usize,
}

/// Reads a comma-separated numeric table.
///
/// The first row is treated as a header when any of its cells fails to parse
/// as a number. Rows with an empty cell are dropped and counted; any other
/// non-numeric cell is an error naming its 1-based line and column.
pub fn read_csv<R: Read>(reader: R) -> CliResult<Table> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let mut header = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    let mut dropped = 0;
    for (idx, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| CliError::Input(format!("line {}: {e}", idx + 1)))?;
        let line = idx + 1;
        if record.iter().all(str::is_empty) {
            continue;
        }
        if idx == 0 && record.iter().any(|c| !c.is_empty() && c.parse::<f64>().is_err()) {
            header = Some(record.iter().map(str::to_owned).collect::<Vec<_>>());
            width = Some(record.len());
            continue;
        }
        match width {
            Some(w) if w != record.len() => {
                return Err(CliError::Input(format!(
                    "line {line}: expected {w} fields, found {}",
                    record.len()
                )));
            }
            None => width = Some(record.len()),
            _ => {}
        }
        if record.iter().any(str::is_empty) {
            dropped += 1;
            continue;
        }
        let mut row = Vec::with_capacity(record.len());
        for (col, cell) in record.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| {
                CliError::Input(format!("line {line}, column {}: not a number: {cell:?}", col + 1))
            })?;
            if !v.is_finite() {
                return Err(CliError::Input(format!(
                    "line {line}, column {}: non-finite value",
                    col + 1
                )));
            }
            row.push(v);
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::Input("no complete numeric rows".into()));
    }
    let data = Matrix::from_rows(&rows).map_err(|e| CliError::Input(e.to_string()))?;
    Ok(Table { header, data, dropped_rows: dropped })
}

pub fn read_csv_file(path: &Path) -> CliResult<Table> {
    let file = File::open(path)
        .map_err(|e| CliError::Input(format!("cannot open {}: {e}", path.display())))?;
    read_csv(file)
}

/// Writes a matrix as CSV with an optional header row.
pub fn write_csv<W: Write>(writer: W, header: Option<&[String]>, m: &Matrix) -> CliResult<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    if let Some(h) = header {
        wtr.write_record(h)?;
    }
    for i in 0..m.rows() {
        wtr.write_record(m.row(i).iter().map(|v| v.to_string()))?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_csv_file(path: &Path, header: Option<&[String]>, m: &Matrix) -> CliResult<()> {
    write_csv(File::create(path)?, header, m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_detected_and_missing_rows_dropped() {
        let text = "a,b\n1,2\n,3\n4.5,-6e1\n";
        let t = read_csv(text.as_bytes()).unwrap();
        assert_eq!(t.header.unwrap(), vec!["a", "b"]);
        assert_eq!(t.dropped_rows, 1);
        assert_eq!(t.data.rows(), 2);
        assert_eq!(t.data[(1, 1)], -60.0);
    }

    #[test]
    fn headerless_input() {
        let t = read_csv("1,2\n3,4\n".as_bytes()).unwrap();
        assert!(t.header.is_none());
        assert_eq!(t.data.rows(), 2);
    }

    #[test]
    fn bad_cell_reports_position() {
        let err = read_csv("a,b\n1,2\n3,x\n".as_bytes()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 3") && msg.contains("column 2"), "{msg}");
    }

    #[test]
    fn ragged_rows_rejected() {
        assert!(read_csv("1,2\n3\n".as_bytes()).is_err());
    }

    #[test]
    fn round_trip_is_exact() {
        let m = Matrix::from_rows(&[[0.1, 1.0 / 3.0], [-2.5e-300, 7.0]]).unwrap();
        let mut buf = Vec::new();
        write_csv(&mut buf, None, &m).unwrap();
        let back = read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.data, m);
    }
}
