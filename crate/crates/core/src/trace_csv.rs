//! Trace export as CSV: `k,x1..xn,y1..ym,L,step_norm,residual_norm`.
//!
//! Floats are written in shortest round-trip form, so parsing a written
//! file gives back the exact doubles. Missing residuals are empty fields.

use std::io::{Read, Write};

use csv::{ReaderBuilder, StringRecord, WriterBuilder};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Point, RunTrace};
use crate::scalar::Scalar;

/// One parsed CSV row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct TraceRow<T> {
    pub k: usize,
    pub point: Point<T>,
    pub value: T,
    pub step_norm: T,
    pub residual_norm: Option<T>,
}

/// A trace read back from CSV. Only what the file carries: no config and no
/// residual vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceTable<T> {
    pub n: usize,
    pub m: usize,
    pub rows: Vec<TraceRow<T>>,
}

impl<T: Scalar> TraceTable<T> {
    pub fn values(&self) -> Vec<T> {
        self.rows.iter().map(|r| r.value).collect()
    }

    pub fn points(&self) -> Vec<Point<T>> {
        self.rows.iter().map(|r| r.point.clone()).collect()
    }
}

pub fn header(n: usize, m: usize) -> Vec<String> {
    let mut h = vec!["k".to_string()];
    h.extend((1..=n).map(|i| format!("x{i}")));
    h.extend((1..=m).map(|i| format!("y{i}")));
    h.extend(["L", "step_norm", "residual_norm"].map(String::from));
    h
}

pub fn write_trace<T: Scalar, W: Write>(trace: &RunTrace<T>, out: W) -> Result<()> {
    let (n, m) = trace.records()[0].point.dims();
    let mut w = WriterBuilder::new().from_writer(out);
    w.write_record(header(n, m)).map_err(csv_io)?;
    for r in trace.records() {
        let mut row = vec![r.k.to_string()];
        row.extend(r.point.concat().into_iter().map(|v| v.to_string()));
        row.push(r.value.to_string());
        row.push(r.step_norm().to_string());
        row.push(r.residual_norm.map(|v| v.to_string()).unwrap_or_default());
        w.write_record(&row).map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_io(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::MalformedTrace {
            line: 0,
            message: format!("{other:?}"),
        },
    }
}

fn malformed(line: u64, message: impl Into<String>) -> Error {
    Error::MalformedTrace {
        line,
        message: message.into(),
    }
}

/// Splits the header into `(n, m)`, requiring the exact column layout.
fn parse_header(h: &StringRecord) -> Result<(usize, usize)> {
    let cols: Vec<&str> = h.iter().collect();
    if cols.len() < 4 || cols[0] != "k" {
        return Err(malformed(1, "header must start with `k` and end with `L,step_norm,residual_norm`"));
    }
    let n = cols.iter().skip(1).take_while(|c| c.starts_with('x')).count();
    let m = cols.iter().skip(1 + n).take_while(|c| c.starts_with('y')).count();
    let expected = header(n, m);
    if cols != expected {
        return Err(malformed(1, format!("unexpected header `{}`, wanted `{}`", cols.join(","), expected.join(","))));
    }
    Ok((n, m))
}

fn parse_float<T: Scalar>(field: &str, line: u64, col: &str) -> Result<T> {
    let v: f64 = field
        .trim()
        .parse()
        .map_err(|_| malformed(line, format!("column {col}: `{field}` is not a number")))?;
    if !v.is_finite() {
        return Err(malformed(line, format!("column {col}: non-finite value `{field}`")));
    }
    T::from_f64(v).ok_or_else(|| malformed(line, format!("column {col}: `{field}` out of range")))
}

pub fn read_trace<T: Scalar, R: Read>(input: R) -> Result<TraceTable<T>> {
    let mut rdr = ReaderBuilder::new().has_headers(true).flexible(true).from_reader(input);
    let h = rdr.headers().map_err(|e| malformed(1, e.to_string()))?.clone();
    let (n, m) = parse_header(&h)?;
    let names = header(n, m);
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            malformed(line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != names.len() {
            return Err(malformed(line, format!("expected {} fields, found {}", names.len(), rec.len())));
        }
        let k: usize = rec[0]
            .trim()
            .parse()
            .map_err(|_| malformed(line, format!("column k: `{}` is not an index", &rec[0])))?;
        if k != rows.len() {
            return Err(malformed(line, format!("expected k = {}, found {k}", rows.len())));
        }
        let coords = (1..=n + m)
            .map(|i| parse_float(&rec[i], line, &names[i]))
            .collect::<Result<Vec<T>>>()?;
        let point = Point::from_concat(&coords, n).map_err(|e| malformed(line, e.to_string()))?;
        let value = parse_float(&rec[n + m + 1], line, "L")?;
        let step_norm = parse_float(&rec[n + m + 2], line, "step_norm")?;
        let res_field = &rec[n + m + 3];
        let residual_norm = if res_field.trim().is_empty() {
            None
        } else {
            Some(parse_float(res_field, line, "residual_norm")?)
        };
        rows.push(TraceRow {
            k,
            point,
            value,
            step_norm,
            residual_norm,
        });
    }
    if rows.is_empty() {
        return Err(malformed(1, "trace has a header but no rows"));
    }
    Ok(TraceTable { n, m, rows })
}
