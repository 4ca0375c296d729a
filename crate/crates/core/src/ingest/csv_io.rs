use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use csv::{ReaderBuilder, StringRecord, Trim, WriterBuilder};

use super::{DatasetProfile, RawColumn, RawTable};
use crate::dataset::{ColumnKind, ColumnarTable};
use crate::error::{Error, Result};

/// Parses one CSV cell as a real.
///
/// The empty token is NaN and `Infinity` / `-Infinity` are the infinities.
/// Returns `None` for tokens that are not numbers at all.
pub fn parse_cell(token: &str) -> Option<f64> {
    match token {
        "" => Some(f64::NAN),
        "Infinity" | "inf" => Some(f64::INFINITY),
        "-Infinity" | "-inf" => Some(f64::NEG_INFINITY),
        t => t.parse::<f64>().ok(),
    }
}

/// Formats a real with 17 significant digits, the inverse of [`parse_cell`].
pub fn format_real(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else if v == f64::INFINITY {
        "Infinity".into()
    } else if v == f64::NEG_INFINITY {
        "-Infinity".into()
    } else {
        format!("{v:.16e}")
    }
}

fn reader<R: Read>(input: R) -> csv::Reader<R> {
    ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(Trim::All)
        .from_reader(input)
}

struct Scan {
    header: StringRecord,
    numeric: Vec<bool>,
    label: usize,
    n_rows: usize,
}

fn is_repeated_header(record: &StringRecord, header: &StringRecord) -> bool {
    record.len() == header.len() && record.iter().zip(header.iter()).all(|(a, b)| a == b)
}

fn scan<R: Read>(input: R, label_column: &str) -> Result<Scan> {
    let mut rdr = reader(input);
    let header = rdr.headers()?.clone();
    let label = header
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| Error::MissingColumn(label_column.to_string()))?;
    let mut numeric = vec![true; header.len()];
    numeric[label] = false;
    let mut n_rows = 0;
    let mut record = StringRecord::new();
    while rdr.read_record(&mut record)? {
        if record.len() != header.len() {
            return Err(Error::RaggedRow {
                line: record.position().map_or(0, |p| p.line()),
                expected: header.len(),
                found: record.len(),
            });
        }
        if is_repeated_header(&record, &header) {
            continue;
        }
        for (j, cell) in record.iter().enumerate() {
            if numeric[j] && parse_cell(cell).is_none() {
                numeric[j] = false;
            }
        }
        n_rows += 1;
    }
    Ok(Scan {
        header,
        numeric,
        label,
        n_rows,
    })
}

fn fill<R: Read>(input: R, scan: &Scan) -> Result<RawTable> {
    let mut cols: Vec<RawColumn> = scan
        .numeric
        .iter()
        .map(|&num| {
            if num {
                RawColumn::Numeric(Vec::with_capacity(scan.n_rows))
            } else {
                RawColumn::Categorical(Vec::with_capacity(scan.n_rows))
            }
        })
        .collect();
    let mut rdr = reader(input);
    let mut record = StringRecord::new();
    while rdr.read_record(&mut record)? {
        if is_repeated_header(&record, &scan.header) {
            continue;
        }
        for (col, cell) in cols.iter_mut().zip(record.iter()) {
            match col {
                RawColumn::Numeric(v) => v.push(parse_cell(cell).unwrap_or(f64::NAN)),
                RawColumn::Categorical(v) => v.push(cell.to_string()),
            }
        }
    }
    let columns = scan
        .header
        .iter()
        .zip(cols)
        .enumerate()
        .map(|(j, (name, col))| {
            let kind = if j == scan.label {
                ColumnKind::Label
            } else if scan.numeric[j] {
                ColumnKind::Numeric
            } else {
                ColumnKind::Categorical
            };
            (name.to_string(), kind, col)
        })
        .collect();
    RawTable::new(columns)
}

/// Reads a header-first, comma-delimited file.
///
/// A column is numeric when every one of its cells parses with
/// [`parse_cell`]; otherwise all its cells are kept as categorical tokens.
/// The profile's label column is always read as tokens. Rows that repeat
/// the header line verbatim are skipped.
pub fn load_csv(path: impl AsRef<Path>, profile: &DatasetProfile) -> Result<RawTable> {
    let path = path.as_ref();
    let open = || File::open(path).map_err(|e| Error::io(path, e));
    let scanned = scan(open()?, &profile.label_column)?;
    fill(open()?, &scanned)
}

/// [`load_csv`] over an in-memory buffer.
pub fn load_csv_bytes(data: &[u8], profile: &DatasetProfile) -> Result<RawTable> {
    let scanned = scan(data, &profile.label_column)?;
    fill(data, &scanned)
}

fn writer<W: Write>(out: W) -> csv::Writer<W> {
    WriterBuilder::new().from_writer(out)
}

pub fn write_raw_csv<W: Write>(raw: &RawTable, out: W) -> Result<()> {
    let mut w = writer(out);
    w.write_record(raw.column_names())?;
    let mut row = Vec::with_capacity(raw.n_columns());
    for i in 0..raw.n_rows() {
        row.clear();
        for j in 0..raw.n_columns() {
            row.push(match raw.column(j) {
                RawColumn::Numeric(v) => format_real(v[i]),
                RawColumn::Categorical(v) => v[i].clone(),
            });
        }
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io("<csv output>", e))?;
    Ok(())
}

/// Writes features then the label column (as class names).
pub fn write_table_csv<W: Write>(table: &ColumnarTable, out: W) -> Result<()> {
    let mut w = writer(out);
    let mut header: Vec<&str> = table.feature_names();
    header.push(table.label_name());
    w.write_record(&header)?;
    let mut row = Vec::with_capacity(header.len());
    for i in 0..table.n_rows() {
        row.clear();
        row.extend(table.features().map(|c| format_real(c[i])));
        row.push(table.class_names()[table.labels()[i] as usize].clone());
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io("<csv output>", e))?;
    Ok(())
}
