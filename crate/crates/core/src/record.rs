//! Per-iteration traces and their CSV form.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format::{float17, parse_float};

/// CSV header, in column order.
pub const CSV_COLUMNS: [&str; 8] = [
    "k",
    "obj_err",
    "feas",
    "bound_obj",
    "bound_feas",
    "ineq_slack",
    "phi",
    "wall_time_s",
];

/// One trace row. Metrics refer to the iterate the rate certificate is stated
/// for: the running average for the constant schedules, the accelerated
/// sequence x̄ for the adaptive ALM and the weighted average for the adaptive
/// ADMM.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub k: usize,
    pub obj_err: Option<f64>,
    pub feas: Option<f64>,
    pub bound_obj: Option<f64>,
    pub bound_feas: Option<f64>,
    /// One-iteration inequality slack divided by the magnitude of its terms.
    pub ineq_slack: Option<f64>,
    pub phi: Option<f64>,
    pub wall_time_s: f64,
}

/// Primal blocks plus multiplier.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub blocks: Vec<Vec<f64>>,
    pub multiplier: Vec<f64>,
}

impl Point {
    pub fn single(x: Vec<f64>, multiplier: Vec<f64>) -> Self {
        Point {
            blocks: vec![x],
            multiplier,
        }
    }

    pub fn pair(y: Vec<f64>, z: Vec<f64>, multiplier: Vec<f64>) -> Self {
        Point {
            blocks: vec![y, z],
            multiplier,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub solver: String,
    pub schedule: String,
    pub seed: Option<u64>,
    pub subtol: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub meta: RunMeta,
    pub rows: Vec<TraceRow>,
    pub initial: Point,
    pub last: Point,
    /// Iterate the metrics in `rows` are measured on.
    pub certificate: Point,
    pub uniform_average: Option<Point>,
    pub weighted_average: Option<Point>,
    pub inner_iterations: usize,
    /// Largest inner-solver residual across all subproblem solves.
    pub max_inner_residual: f64,
}

/// A solver error together with the trace accumulated before it occurred.
#[derive(Debug)]
pub struct RunFailure {
    pub error: Error,
    pub partial: Box<RunRecord>,
}

impl std::fmt::Display for RunFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} (after {} iterations)",
            self.error,
            self.partial.rows.len()
        )
    }
}

impl std::error::Error for RunFailure {}

pub type RunResult = std::result::Result<RunRecord, RunFailure>;

impl RunRecord {
    pub fn last_row(&self) -> Option<&TraceRow> {
        self.rows.last()
    }

    pub fn column(&self, field: &str) -> Result<Vec<Option<f64>>> {
        let pick: fn(&TraceRow) -> Option<f64> = match field {
            "obj_err" => |r| r.obj_err,
            "feas" => |r| r.feas,
            "bound_obj" => |r| r.bound_obj,
            "bound_feas" => |r| r.bound_feas,
            "ineq_slack" => |r| r.ineq_slack,
            "phi" => |r| r.phi,
            "wall_time_s" => |r| Some(r.wall_time_s),
            other => return Err(Error::Format(format!("unknown trace column {other:?}"))),
        };
        Ok(self.rows.iter().map(pick).collect())
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        write_rows(&self.rows, w)
    }

    pub fn write_csv_file(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(f))
    }
}

fn cell(v: Option<f64>) -> String {
    v.map(float17).unwrap_or_default()
}

pub fn write_rows<W: Write>(rows: &[TraceRow], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(CSV_COLUMNS)?;
    for r in rows {
        wr.write_record([
            r.k.to_string(),
            cell(r.obj_err),
            cell(r.feas),
            cell(r.bound_obj),
            cell(r.bound_feas),
            cell(r.ineq_slack),
            cell(r.phi),
            float17(r.wall_time_s),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_rows<R: Read>(r: R) -> Result<Vec<TraceRow>> {
    let mut rd = csv::Reader::from_reader(r);
    let header: Vec<String> = rd.headers()?.iter().map(str::to_owned).collect();
    if header != CSV_COLUMNS {
        return Err(Error::Format(format!("unexpected CSV header {header:?}")));
    }
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let k = rec[0]
            .trim()
            .parse()
            .map_err(|_| Error::Format(format!("bad iteration index {:?}", &rec[0])))?;
        let num = |i: usize| -> Result<Option<f64>> {
            let s = rec[i].trim();
            if s.is_empty() {
                return Ok(None);
            }
            parse_float(s).map(Some).ok_or_else(|| {
                Error::Format(format!("bad number {s:?} in column {}", CSV_COLUMNS[i]))
            })
        };
        rows.push(TraceRow {
            k,
            obj_err: num(1)?,
            feas: num(2)?,
            bound_obj: num(3)?,
            bound_feas: num(4)?,
            ineq_slack: num(5)?,
            phi: num(6)?,
            wall_time_s: num(7)?.unwrap_or(0.0),
        });
    }
    Ok(rows)
}

pub fn read_csv_file(path: &Path) -> Result<Vec<TraceRow>> {
    read_rows(std::fs::File::open(path)?)
}
