//! CSV ingestion of datasets and tabular output of results.
//!
//! Values are written with 17 significant digits, so a dataset survives a
//! write/load round trip bit for bit.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::simulate::{ResultRow, SummaryRow};

/// A column given by header name or by zero-based position.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ColumnRef {
    Index(usize),
    Name(String),
}

impl ColumnRef {
    fn resolve(&self, header: Option<&[String]>, width: usize) -> Result<usize> {
        match self {
            ColumnRef::Index(i) if *i < width => Ok(*i),
            ColumnRef::Index(i) => Err(Error::input(format!("column index {i} out of range for {width} columns"))),
            ColumnRef::Name(name) => match header {
                Some(h) => h
                    .iter()
                    .position(|c| c == name)
                    .ok_or_else(|| Error::input(format!("column \"{name}\" not found in header"))),
                None => Err(Error::input(format!("column \"{name}\" named but the file has no header"))),
            },
        }
    }
}

impl std::fmt::Display for ColumnRef {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ColumnRef::Index(i) => write!(f, "#{i}"),
            ColumnRef::Name(n) => write!(f, "\"{n}\""),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FeatureColumns {
    /// Every column except the response and the label column.
    #[default]
    AllOthers,
    Columns(Vec<ColumnRef>),
}

/// How to read a dataset from CSV.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CsvSchema {
    pub response_column: ColumnRef,
    pub feature_columns: FeatureColumns,
    /// Optional column of row identifiers, carried through as dataset labels.
    pub label_column: Option<ColumnRef>,
    pub has_header: bool,
    /// Center each feature at its mean and divide by its sample standard deviation.
    pub standardize: bool,
}

impl Default for CsvSchema {
    fn default() -> Self {
        CsvSchema {
            response_column: ColumnRef::Name("y".into()),
            feature_columns: FeatureColumns::AllOthers,
            label_column: None,
            has_header: true,
            standardize: false,
        }
    }
}

impl CsvSchema {
    pub fn with_response(response: ColumnRef) -> Self {
        CsvSchema { response_column: response, ..Default::default() }
    }
}

fn parse_error(location: String, message: impl Into<String>) -> Error {
    Error::Parse { location, message: message.into() }
}

fn csv_error(source: &str, e: csv::Error) -> Error {
    let location = match e.position() {
        Some(pos) => format!("{source}: line {}", pos.line()),
        None => source.to_string(),
    };
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        csv::ErrorKind::UnequalLengths { expected_len, len, .. } => {
            parse_error(location, format!("ragged row with {len} fields, expected {expected_len}"))
        }
        other => parse_error(location, format!("{other:?}")),
    }
}

/// Load a dataset from a CSV file.
pub fn load_dataset(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })?;
    read_dataset(file, schema, &path.display().to_string())
}

/// Parse a dataset from any reader; `source` names it in error messages.
pub fn read_dataset(reader: impl Read, schema: &CsvSchema, source: &str) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(schema.has_header)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Option<Vec<String>> = if schema.has_header {
        Some(rdr.headers().map_err(|e| csv_error(source, e))?.iter().map(str::to_string).collect())
    } else {
        None
    };

    let mut records = Vec::new();
    for rec in rdr.records() {
        records.push(rec.map_err(|e| csv_error(source, e))?);
    }
    let width = match (&header, records.first()) {
        (Some(h), _) => h.len(),
        (None, Some(r)) => r.len(),
        (None, None) => 0,
    };
    if records.is_empty() {
        return Err(parse_error(source.to_string(), "no data rows"));
    }

    let hdr = header.as_deref();
    let resp = schema.response_column.resolve(hdr, width).map_err(|e| locate(source, e))?;
    let label = match &schema.label_column {
        Some(c) => Some(c.resolve(hdr, width).map_err(|e| locate(source, e))?),
        None => None,
    };
    let features: Vec<usize> = match &schema.feature_columns {
        FeatureColumns::AllOthers => (0..width).filter(|&j| j != resp && Some(j) != label).collect(),
        FeatureColumns::Columns(cols) => cols
            .iter()
            .map(|c| c.resolve(hdr, width))
            .collect::<Result<_>>()
            .map_err(|e| locate(source, e))?,
    };
    if features.contains(&resp) {
        return Err(Error::input(format!(
            "{source}: response column {} is also listed as a feature",
            schema.response_column
        )));
    }
    if features.is_empty() {
        return Err(Error::input(format!("{source}: no feature columns")));
    }

    let column_name = |j: usize| hdr.map_or_else(|| format!("#{j}"), |h| format!("\"{}\"", h[j]));
    let first_line = if schema.has_header { 2 } else { 1 };
    let (n, p) = (records.len(), features.len());
    let mut x = nalgebra::DMatrix::zeros(n, p);
    let mut y = Vec::with_capacity(n);
    let mut labels = Vec::new();
    for (i, rec) in records.iter().enumerate() {
        let line = rec.position().map_or(first_line + i as u64, |pos| pos.line());
        let cell = |j: usize| -> Result<f64> {
            let raw = &rec[j];
            match raw.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(parse_error(
                    format!("{source}: line {line} (data row {}), column {}", i + 1, column_name(j)),
                    format!("non-numeric value \"{raw}\""),
                )),
            }
        };
        y.push(cell(resp)?);
        for (k, &j) in features.iter().enumerate() {
            x[(i, k)] = cell(j)?;
        }
        if let Some(j) = label {
            labels.push(rec[j].to_string());
        }
    }

    if schema.standardize {
        for (k, &feature) in features.iter().enumerate() {
            let mut col = x.column_mut(k);
            let mean = col.iter().sum::<f64>() / n as f64;
            col.iter_mut().for_each(|v| *v -= mean);
            let var = col.iter().map(|v| v * v).sum::<f64>() / (n as f64 - 1.0);
            let sd = var.sqrt();
            if !(sd > 0.0 && sd.is_finite()) {
                return Err(Error::domain(format!(
                    "{source}: feature column {} has zero variance and cannot be standardized",
                    column_name(feature)
                )));
            }
            col.iter_mut().for_each(|v| *v /= sd);
        }
    }

    let data = Dataset::new(x, y)?;
    if label.is_some() {
        data.with_labels(labels)
    } else {
        Ok(data)
    }
}

fn locate(source: &str, e: Error) -> Error {
    match e {
        Error::Input(m) => Error::Input(format!("{source}: {m}")),
        other => other,
    }
}

/// Format a value with 17 significant digits.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Write `y,x1,...,xp` with a header, one row per observation.
pub fn write_dataset(path: impl AsRef<Path>, data: &Dataset) -> Result<()> {
    let mut out = std::io::BufWriter::new(File::create(path)?);
    write_dataset_to(&mut out, data)?;
    out.flush()?;
    Ok(())
}

pub fn write_dataset_to(out: &mut impl Write, data: &Dataset) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    let mut header = vec!["y".to_string()];
    header.extend((1..=data.p()).map(|j| format!("x{j}")));
    wtr.write_record(&header).map_err(|e| csv_error("output", e))?;
    let mut row = Vec::with_capacity(data.p() + 1);
    for i in 0..data.n() {
        row.clear();
        row.push(format_f64(data.y()[i]));
        row.extend(data.row(i).into_iter().map(format_f64));
        wtr.write_record(&row).map_err(|e| csv_error("output", e))?;
    }
    wtr.flush()?;
    Ok(())
}

fn write_rows<T: Serialize>(out: impl Write, rows: &[T]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    for r in rows {
        wtr.serialize(r).map_err(|e| csv_error("output", e))?;
    }
    wtr.flush()?;
    Ok(())
}

fn read_rows<T: for<'de> Deserialize<'de>>(input: impl Read, source: &str) -> Result<Vec<T>> {
    let mut rdr = csv::Reader::from_reader(input);
    rdr.deserialize().map(|r| r.map_err(|e| csv_error(source, e))).collect()
}

/// Long-format results table. The runtime column is left empty unless
/// runtimes were recorded, which keeps repeated runs byte-identical.
pub fn write_results(out: impl Write, rows: &[ResultRow]) -> Result<()> {
    write_rows(out, rows)
}

pub fn read_results(path: impl AsRef<Path>) -> Result<Vec<ResultRow>> {
    let path = path.as_ref();
    read_rows(File::open(path)?, &path.display().to_string())
}

pub fn write_summary(out: impl Write, rows: &[SummaryRow]) -> Result<()> {
    write_rows(out, rows)
}
