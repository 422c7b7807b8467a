//! Dataset CSV files: header `x1,...,xp,y`, one observation per row.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use vimp_core::datagen::Dataset;
use vimp_core::nalgebra::{DMatrix, DVector};

use crate::error::{CliError, CliResult};

pub fn write_dataset(data: &Dataset, path: &Path) -> CliResult<()> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| CliError::io(path, e);
    let p = data.p();
    let header: Vec<String> = (1..=p).map(|j| format!("x{j}")).chain(["y".to_string()]).collect();
    writeln!(w, "{}", header.join(",")).map_err(io)?;
    for r in 0..data.n() {
        let row: Vec<String> = (0..p).map(|j| data.x[(r, j)].to_string()).chain([data.y[r].to_string()]).collect();
        writeln!(w, "{}", row.join(",")).map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn read_dataset(path: &Path) -> CliResult<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let names: Vec<&str> = headers.iter().collect();
    if names.len() < 2 {
        return Err(CliError::input(path, "expected columns x1..xp,y"));
    }
    let p = names.len() - 1;
    for (j, name) in names.iter().enumerate() {
        let expected = if j == p { "y".to_string() } else { format!("x{}", j + 1) };
        if *name != expected {
            return Err(CliError::input(path, format!("column {}: expected '{expected}', found '{name}'", j + 1)));
        }
    }

    let mut values: Vec<f64> = Vec::new();
    let mut rows = 0;
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(rows + 2, |pos| pos.line() as usize);
        for (j, cell) in record.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| {
                CliError::input(path, format!("line {line}, column {} ('{}'): cannot parse '{cell}' as a number", j + 1, names[j]))
            })?;
            if !v.is_finite() {
                return Err(CliError::input(path, format!("line {line}, column {} ('{}'): value is not finite", j + 1, names[j])));
            }
            values.push(v);
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(CliError::input(path, "no data rows"));
    }
    let all = DMatrix::from_row_slice(rows, p + 1, &values);
    let x = all.columns(0, p).into_owned();
    let y = DVector::from_iterator(rows, all.column(p).iter().copied());
    Ok(Dataset::new(x, y)?)
}

/// First `n - n/2` rows for training, the rest for validation.
pub fn split_half(data: &Dataset) -> CliResult<(Dataset, Dataset)> {
    let n = data.n();
    if n < 2 {
        return Err(CliError::Compute(vimp_core::VimpError::InsufficientData(
            "need at least two rows to split into training and validation".into(),
        )));
    }
    let cut = n - n / 2;
    let part = |start: usize, len: usize| {
        Dataset::new(data.x.rows(start, len).into_owned(), data.y.rows(start, len).into_owned())
    };
    Ok((part(0, cut)?, part(cut, n - cut)?))
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    let location = e.position().map(|p| format!("line {}: ", p.line())).unwrap_or_default();
    match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::io(path, io),
        csv::ErrorKind::UnequalLengths { expected_len, len, .. } => {
            CliError::input(path, format!("{location}expected {expected_len} fields, found {len}"))
        }
        other => CliError::input(path, format!("{location}{other:?}")),
    }
}
