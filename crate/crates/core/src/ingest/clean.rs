use std::collections::HashSet;
use std::hash::{DefaultHasher, Hash, Hasher};

use super::{DatasetProfile, RawColumn, RawTable, StageRecord};
use crate::dataset::{first_occurrence_mask, ColumnKind};
use crate::error::{Error, Result};

fn days_from_civil(year: i64, month: i64, day: i64) -> i64 {
    // proleptic Gregorian, days relative to 1970-01-01
    let y = if month <= 2 { year - 1 } else { year };
    let era = y.div_euclid(400);
    let yoe = y - era * 400;
    let mp = (month + 9) % 12;
    let doy = (153 * mp + 2) / 5 + day - 1;
    let doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    era * 146_097 + doe - 719_468
}

fn is_leap(year: i64) -> bool {
    (year % 4 == 0 && year % 100 != 0) || year % 400 == 0
}

fn days_in_month(year: i64, month: i64) -> i64 {
    match month {
        1 | 3 | 5 | 7 | 8 | 10 | 12 => 31,
        4 | 6 | 9 | 11 => 30,
        _ if is_leap(year) => 29,
        _ => 28,
    }
}

/// Seconds since 1970-01-01T00:00:00Z for a UTC calendar time.
pub fn epoch_seconds(year: i64, month: i64, day: i64, hour: i64, minute: i64, second: i64) -> Result<i64> {
    let check = |ok: bool, what: &str, v: i64| {
        if ok {
            Ok(())
        } else {
            Err(Error::CalendarRange(format!("{what} = {v}")))
        }
    };
    check((1..=12).contains(&month), "month", month)?;
    check((1..=days_in_month(year, month)).contains(&day), "day", day)?;
    check((0..24).contains(&hour), "hour", hour)?;
    check((0..60).contains(&minute), "minute", minute)?;
    check((0..60).contains(&second), "second", second)?;
    Ok(days_from_civil(year, month, day) * 86_400 + hour * 3_600 + minute * 60 + second)
}

fn merged_column(raw: &RawTable, names: &[String]) -> Result<Vec<f64>> {
    let mut parts = Vec::with_capacity(6);
    for name in names {
        match raw.column_by_name(name) {
            Some(RawColumn::Numeric(v)) => parts.push(v),
            Some(RawColumn::Categorical(_)) => {
                return Err(Error::CalendarRange(format!("component `{name}` is not numeric")))
            }
            None => return Err(Error::MissingColumn(name.clone())),
        }
    }
    let mut out = Vec::with_capacity(raw.n_rows());
    for i in 0..raw.n_rows() {
        let cells: Vec<f64> = parts.iter().map(|p| p[i]).collect();
        if cells.iter().any(|c| !c.is_finite()) {
            // left for the invalid-row stage
            out.push(f64::NAN);
            continue;
        }
        if let Some(c) = cells.iter().find(|c| c.fract() != 0.0) {
            return Err(Error::CalendarRange(format!("non-integer component {c} on row {i}")));
        }
        let c: Vec<i64> = cells.iter().map(|&c| c as i64).collect();
        out.push(epoch_seconds(c[0], c[1], c[2], c[3], c[4], c[5])? as f64);
    }
    Ok(out)
}

/// Replaces the twelve start/end calendar component columns with two
/// epoch-second columns. A no-op when the profile has no merge rule.
pub fn merge_timestamps(raw: &RawTable, profile: &DatasetProfile) -> Result<RawTable> {
    let Some(merge) = &profile.timestamp_merge else {
        return Ok(raw.clone());
    };
    let start = merged_column(raw, &merge.start)?;
    let end = merged_column(raw, &merge.end)?;
    let mut start = Some(start);
    let mut end = Some(end);

    let mut columns = Vec::with_capacity(raw.n_columns() - 10);
    for (j, schema) in raw.schema().iter().enumerate() {
        if merge.start.contains(&schema.name) {
            if let Some(v) = start.take() {
                columns.push((merge.start_name.clone(), ColumnKind::Timestamp, RawColumn::Numeric(v)));
            }
        } else if merge.end.contains(&schema.name) {
            if let Some(v) = end.take() {
                columns.push((merge.end_name.clone(), ColumnKind::Timestamp, RawColumn::Numeric(v)));
            }
        } else {
            columns.push((schema.name.clone(), schema.kind, raw.column(j).clone()));
        }
    }
    RawTable::new(columns)
}

/// Removes every column named in the profile's drop list. Names that are
/// not present are noted in the record and otherwise ignored.
pub fn drop_columns_by_name(raw: &RawTable, profile: &DatasetProfile) -> Result<(RawTable, StageRecord)> {
    if let Some(label) = profile.drop_columns.iter().find(|n| {
        **n == profile.label_column
            || raw
                .position(n)
                .is_some_and(|j| raw.schema()[j].kind == ColumnKind::Label)
    }) {
        return Err(Error::DropLabel(label.clone()));
    }
    let drop: HashSet<&str> = profile.drop_columns.iter().map(String::as_str).collect();
    let keep: Vec<usize> = (0..raw.n_columns())
        .filter(|&j| !drop.contains(raw.schema()[j].name.as_str()))
        .collect();
    let removed: Vec<String> = raw
        .schema()
        .iter()
        .filter(|s| drop.contains(s.name.as_str()))
        .map(|s| s.name.clone())
        .collect();
    let absent: Vec<&str> = profile
        .drop_columns
        .iter()
        .filter(|n| raw.position(n).is_none())
        .map(String::as_str)
        .collect();
    let out = raw.select_columns(&keep);
    let mut details = format!("dropped {}", removed.len());
    if !absent.is_empty() {
        details.push_str(&format!("; not present: {}", absent.join(", ")));
    }
    let mut record = StageRecord::between("drop_columns_by_name", raw, &out, details);
    record.removed_columns = removed;
    Ok((out, record))
}

/// Removes rows holding NaN or an infinity in any numeric column, or an
/// empty token in any categorical column.
pub fn drop_invalid_rows(raw: &RawTable) -> (RawTable, StageRecord) {
    let mut keep = vec![true; raw.n_rows()];
    let (mut nan_rows, mut inf_rows) = (0usize, 0usize);
    for j in 0..raw.n_columns() {
        match raw.column(j) {
            RawColumn::Numeric(v) => {
                for (k, x) in keep.iter_mut().zip(v) {
                    if *k && !x.is_finite() {
                        *k = false;
                        if x.is_nan() {
                            nan_rows += 1;
                        } else {
                            inf_rows += 1;
                        }
                    }
                }
            }
            RawColumn::Categorical(v) => {
                for (k, t) in keep.iter_mut().zip(v) {
                    if *k && t.is_empty() {
                        *k = false;
                        nan_rows += 1;
                    }
                }
            }
        }
    }
    let out = raw.filter_rows(&keep);
    let details = format!(
        "removed {} rows ({nan_rows} missing/NaN, {inf_rows} infinite)",
        nan_rows + inf_rows
    );
    let record = StageRecord::between("drop_invalid_rows", raw, &out, details);
    (out, record)
}

fn hash_raw_row(raw: &RawTable, i: usize) -> u64 {
    let mut h = DefaultHasher::new();
    for j in 0..raw.n_columns() {
        match raw.column(j) {
            RawColumn::Numeric(v) => v[i].to_bits().hash(&mut h),
            RawColumn::Categorical(v) => v[i].hash(&mut h),
        }
    }
    h.finish()
}

fn raw_rows_equal(raw: &RawTable, a: usize, b: usize) -> bool {
    (0..raw.n_columns()).all(|j| match raw.column(j) {
        RawColumn::Numeric(v) => v[a].to_bits() == v[b].to_bits(),
        RawColumn::Categorical(v) => v[a] == v[b],
    })
}

/// Keeps the first occurrence of every distinct row; survivors keep their
/// relative order. Numeric cells compare bitwise.
pub fn drop_duplicate_rows(raw: &RawTable) -> (RawTable, StageRecord) {
    let keep = first_occurrence_mask(raw.n_rows(), |i| hash_raw_row(raw, i), |a, b| raw_rows_equal(raw, a, b));
    let out = raw.filter_rows(&keep);
    let details = format!("removed {} duplicate rows", raw.n_rows() - out.n_rows());
    let record = StageRecord::between("drop_duplicate_rows", raw, &out, details);
    (out, record)
}

fn is_constant(col: &RawColumn) -> bool {
    match col {
        RawColumn::Numeric(v) => v.windows(2).all(|w| w[0] == w[1]),
        RawColumn::Categorical(v) => v.windows(2).all(|w| w[0] == w[1]),
    }
}

/// Removes feature columns whose values are all identical. The label column
/// is never removed, and a table without rows is left alone.
pub fn drop_zero_variance_columns(raw: &RawTable) -> (RawTable, StageRecord) {
    let mut keep = Vec::with_capacity(raw.n_columns());
    let mut removed = Vec::new();
    for (j, schema) in raw.schema().iter().enumerate() {
        if schema.kind != ColumnKind::Label && raw.n_rows() > 0 && is_constant(raw.column(j)) {
            removed.push(schema.name.clone());
        } else {
            keep.push(j);
        }
    }
    let out = raw.select_columns(&keep);
    let details = if removed.is_empty() {
        "removed 0 columns".to_string()
    } else {
        format!("removed {} columns: {}", removed.len(), removed.join(", "))
    };
    let mut record = StageRecord::between("drop_zero_variance_columns", raw, &out, details);
    record.removed_columns = removed;
    (out, record)
}
