//! CSV trajectories and JSON summaries.

use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::det::TrajectoryRecord;

use super::CliError;

pub const CSV_HEADER: &str =
    "path_id,t,l2,h1,linf,energy,sphere_residual,dist_h1_plus,dist_h1_minus";

#[derive(Debug, Serialize)]
struct Row {
    path_id: usize,
    t: f64,
    l2: f64,
    h1: f64,
    linf: f64,
    energy: f64,
    sphere_residual: f64,
    dist_h1_plus: f64,
    dist_h1_minus: f64,
}

#[derive(Debug, Serialize)]
struct StateRow {
    path_id: usize,
    t: f64,
    node: usize,
    x: f64,
    m1: f64,
    m2: f64,
    m3: f64,
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>, CliError> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .has_headers(false)
        .from_path(path)
        .map_err(|e| io_err(path, e))
}

/// Diagnostics of `(path_id, record)` pairs, rows ordered by path then time.
pub fn write_trajectories(path: &Path, records: &[(usize, &TrajectoryRecord)]) -> Result<(), CliError> {
    let mut w = writer(path)?;
    // The header is written even when there are no rows.
    w.write_record(CSV_HEADER.split(',')).map_err(|e| io_err(path, e))?;
    for (id, rec) in records {
        for (t, d) in rec.times.iter().zip(&rec.diagnostics) {
            let row = Row {
                path_id: *id,
                t: *t,
                l2: d.l2,
                h1: d.h1,
                linf: d.linf,
                energy: d.energy,
                sphere_residual: d.sphere_residual,
                dist_h1_plus: d.dist_h1_plus,
                dist_h1_minus: d.dist_h1_minus,
            };
            w.serialize(row).map_err(|e| io_err(path, e))?;
        }
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Every node of every recorded state.
pub fn write_states(path: &Path, records: &[(usize, &TrajectoryRecord)]) -> Result<(), CliError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .has_headers(true)
        .from_path(path)
        .map_err(|e| io_err(path, e))?;
    for (id, rec) in records {
        let g = rec.grid.ok_or_else(|| CliError::Runtime("record without grid".into()))?;
        for (t, s) in rec.times.iter().zip(&rec.states) {
            for (i, v) in s.values.iter().enumerate() {
                w.serialize(StateRow {
                    path_id: *id,
                    t: *t,
                    node: i,
                    x: g.node(i),
                    m1: v[0],
                    m2: v[1],
                    m3: v[2],
                })
                .map_err(|e| io_err(path, e))?;
            }
        }
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| io_err(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| io_err(path, e))
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}
