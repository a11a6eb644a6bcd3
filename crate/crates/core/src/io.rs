//! CSV formats for matrices, features, labels and solver traces.
//!
//! Matrices and features are plain comma-separated numbers, one row per line.
//! A first line that does not parse as numbers is treated as a header.

use std::io::{Read, Write};

use crate::data::{DistanceMatrix, FeatureMatrix};
use crate::error::{Error, Result};
use crate::matrix::SimilarityMatrix;
use crate::solvers::{StepKind, StepRecord};

fn io_err(e: impl std::fmt::Display) -> Error {
    Error::RangeError(format!("csv: {e}"))
}

fn reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(r)
}

fn parse_row(rec: &csv::StringRecord, row: usize) -> Result<Option<Vec<f64>>> {
    let mut out = Vec::with_capacity(rec.len());
    for (j, field) in rec.iter().enumerate() {
        match field.parse::<f64>() {
            Ok(v) => out.push(v),
            Err(_) if row == 0 => return Ok(None),
            Err(_) => {
                return Err(Error::RangeError(format!(
                    "row {row}, column {j}: {field:?} is not a number"
                )))
            }
        }
    }
    Ok(Some(out))
}

/// Reads numeric rows, skipping a non-numeric first line.
pub fn read_rows<R: Read>(r: R) -> Result<Vec<Vec<f64>>> {
    let mut rows = Vec::new();
    for (k, rec) in reader(r).records().enumerate() {
        let rec = rec.map_err(io_err)?;
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        if let Some(row) = parse_row(&rec, k)? {
            rows.push(row);
        }
    }
    if rows.is_empty() {
        return Err(Error::Empty);
    }
    Ok(rows)
}

fn write_rows<'a, W: Write>(w: W, rows: impl Iterator<Item = &'a [f64]>) -> Result<()> {
    let mut wr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    for row in rows {
        wr.write_record(row.iter().map(|v| format!("{v:?}"))).map_err(io_err)?;
    }
    wr.flush().map_err(io_err)
}

pub fn read_matrix<R: Read>(r: R) -> Result<SimilarityMatrix> {
    SimilarityMatrix::new(read_rows(r)?)
}

/// Writes with round-trip precision.
pub fn write_matrix<W: Write>(w: W, a: &SimilarityMatrix) -> Result<()> {
    write_rows(w, a.rows())
}

pub fn read_distances<R: Read>(r: R) -> Result<DistanceMatrix> {
    DistanceMatrix::new(read_rows(r)?)
}

pub fn read_features<R: Read>(r: R) -> Result<FeatureMatrix> {
    FeatureMatrix::new(read_rows(r)?)
}

pub fn write_features<W: Write>(w: W, f: &FeatureMatrix) -> Result<()> {
    write_rows(w, f.rows())
}

/// Reads `(h, s, v)` pixel rows.
pub fn read_pixels<R: Read>(r: R) -> Result<Vec<(f64, f64, f64)>> {
    read_rows(r)?
        .into_iter()
        .enumerate()
        .map(|(i, row)| match row[..] {
            [h, s, v] => Ok((h, s, v)),
            _ => Err(Error::DimensionMismatch { expected: 3, got: row.len() }).map_err(|e| {
                Error::RangeError(format!("pixel row {i}: {e}"))
            }),
        })
        .collect()
}

/// Reads labels from a single column, or from the last column of `object,label` rows.
pub fn read_labels<R: Read>(r: R) -> Result<Vec<usize>> {
    read_rows(r)?
        .into_iter()
        .enumerate()
        .map(|(i, row)| {
            let v = *row.last().ok_or(Error::Empty)?;
            if v < 0.0 || v.fract() != 0.0 {
                return Err(Error::RangeError(format!("row {i}: label {v} is not a nonnegative integer")));
            }
            Ok(v as usize)
        })
        .collect()
}

pub fn write_labels<W: Write>(w: W, labels: &[usize]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["object", "label"]).map_err(io_err)?;
    for (i, l) in labels.iter().enumerate() {
        wr.write_record([i.to_string(), l.to_string()]).map_err(io_err)?;
    }
    wr.flush().map_err(io_err)
}

pub const TRACE_HEADER: [&str; 17] = [
    "t",
    "kind",
    "gamma",
    "gap_full",
    "gap_half",
    "f",
    "support_size",
    "s_index",
    "v_index",
    "f_after",
    "gamma_max",
    "r_s",
    "r_v",
    "a_sv",
    "support_after",
    "step_norm",
    "round",
];

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(String::new, |v| v.to_string())
}

fn num(v: f64) -> String {
    format!("{v:?}")
}

/// Writes one or more traces; `round` numbers them, starting at 1.
pub fn write_trace<'a, W: Write>(w: W, traces: impl IntoIterator<Item = &'a [StepRecord]>) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(TRACE_HEADER).map_err(io_err)?;
    for (round, trace) in traces.into_iter().enumerate() {
        for r in trace {
            wr.write_record([
                r.t.to_string(),
                r.kind.as_str().to_string(),
                num(r.gamma),
                num(r.gap),
                num(r.gap_half),
                num(r.f_before),
                r.support_before.to_string(),
                opt(r.s_index),
                opt(r.v_index),
                num(r.f_after),
                num(r.gamma_max),
                num(r.r_s),
                opt(r.r_v.map(num)),
                opt(r.a_sv.map(num)),
                r.support_after.to_string(),
                num(r.step_norm),
                (round + 1).to_string(),
            ])
            .map_err(io_err)?;
        }
    }
    wr.flush().map_err(io_err)
}

/// Reads a trace CSV, grouped by round.
pub fn read_trace<R: Read>(r: R) -> Result<Vec<Vec<StepRecord>>> {
    let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let headers = rd.headers().map_err(io_err)?.clone();
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::RangeError(format!("trace is missing column {name:?}")))
    };
    let required = ["t", "kind", "gamma", "gap_full", "gap_half", "f", "support_size", "s_index", "v_index"];
    let idx: Vec<usize> = required.iter().map(|c| col(c)).collect::<Result<_>>()?;
    let extra = |name: &str| headers.iter().position(|h| h == name);
    let (f_after, gamma_max, r_s, r_v, a_sv, support_after, step_norm, round) = (
        extra("f_after"),
        extra("gamma_max"),
        extra("r_s"),
        extra("r_v"),
        extra("a_sv"),
        extra("support_after"),
        extra("step_norm"),
        extra("round"),
    );

    let mut rounds: Vec<Vec<StepRecord>> = Vec::new();
    for (line, rec) in rd.records().enumerate() {
        let rec = rec.map_err(io_err)?;
        let field = |k: usize| rec.get(k).unwrap_or("");
        let bad = |what: &str, v: &str| Error::RangeError(format!("trace row {line}: bad {what} {v:?}"));
        let f64_at = |k: usize, what: &str| -> Result<f64> { field(k).parse().map_err(|_| bad(what, field(k))) };
        let usize_at = |k: usize, what: &str| -> Result<usize> { field(k).parse().map_err(|_| bad(what, field(k))) };
        let opt_f64 = |k: Option<usize>| -> Result<Option<f64>> {
            match k.map(field) {
                None | Some("") => Ok(None),
                Some(v) => v.parse().map(Some).map_err(|_| bad("number", v)),
            }
        };
        let opt_usize = |k: usize| -> Result<Option<usize>> {
            match field(k) {
                "" => Ok(None),
                v => v.parse().map(Some).map_err(|_| bad("index", v)),
            }
        };
        let kind = StepKind::parse(field(idx[1])).ok_or_else(|| bad("kind", field(idx[1])))?;
        let f_before = f64_at(idx[5], "f")?;
        let support_before = usize_at(idx[6], "support_size")?;
        let gap_half = f64_at(idx[4], "gap_half")?;
        let gamma = f64_at(idx[2], "gamma")?;
        let rec_out = StepRecord {
            t: usize_at(idx[0], "t")?,
            kind,
            gamma,
            gamma_max: opt_f64(gamma_max)?.unwrap_or(f64::INFINITY),
            gap: f64_at(idx[3], "gap_full")?,
            gap_half,
            f_before,
            f_after: opt_f64(f_after)?.unwrap_or(f64::NAN),
            s_index: opt_usize(idx[7])?,
            v_index: opt_usize(idx[8])?,
            r_s: opt_f64(r_s)?.unwrap_or(f_before + gap_half),
            r_v: opt_f64(r_v)?,
            a_sv: opt_f64(a_sv)?,
            support_before,
            support_after: match support_after {
                Some(k) if !field(k).is_empty() => usize_at(k, "support_after")?,
                _ => support_before,
            },
            step_norm: opt_f64(step_norm)?.unwrap_or(f64::NAN),
        };
        let r = match round {
            Some(k) if !field(k).is_empty() => usize_at(k, "round")?.max(1),
            _ => 1,
        };
        while rounds.len() < r {
            rounds.push(Vec::new());
        }
        rounds[r - 1].push(rec_out);
    }
    rounds.retain(|r| !r.is_empty());
    if rounds.is_empty() {
        return Err(Error::EmptyTrace);
    }
    Ok(rounds)
}
