//! Curve tables on disk.
//!
//! Accuracy rows and acquisition timings live in separate files: the
//! accuracy table is a pure function of config and seed, while wall time is
//! not, and keeping them apart lets repeated runs be compared byte for byte.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::runner::{LearningCurve, Manifest};
use crate::acquisition::Strategy;
use crate::error::{Error, Result};
use crate::io::write_atomic;
use crate::learner::CurvePoint;

pub fn curve_file_name(strategy: Strategy, seed: u64) -> String {
    format!("curve_{strategy}_seed{seed}.csv")
}

pub fn timing_file_name(strategy: Strategy, seed: u64) -> String {
    format!("timing_{strategy}_seed{seed}.csv")
}

pub fn state_file_name(strategy: Strategy, seed: u64) -> String {
    format!("{strategy}_seed{seed}.bin")
}

#[derive(Debug, Serialize, Deserialize)]
struct CurveRow {
    strategy: Strategy,
    seed: u64,
    round: usize,
    labeled_count: usize,
    test_accuracy: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct TimingRow {
    strategy: Strategy,
    seed: u64,
    round: usize,
    acq_seconds: f64,
}

fn to_csv<T: Serialize>(rows: impl IntoIterator<Item = T>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).expect("in-memory csv write");
    }
    w.into_inner().expect("in-memory csv flush")
}

fn from_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::format(path, format!("{other:?}")),
    })?;
    r.deserialize()
        .enumerate()
        .map(|(i, row)| {
            row.map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                row: i + 1,
                column: String::new(),
                message: e.to_string(),
            })
        })
        .collect()
}

pub fn write_curve(dir: &Path, curve: &LearningCurve) -> Result<()> {
    let rows = curve.points.iter().map(|p| CurveRow {
        strategy: curve.strategy,
        seed: curve.seed,
        round: p.round,
        labeled_count: p.labeled_count,
        test_accuracy: p.test_accuracy,
    });
    write_atomic(&dir.join(curve_file_name(curve.strategy, curve.seed)), &to_csv(rows))
}

pub fn write_timing(dir: &Path, curve: &LearningCurve) -> Result<()> {
    let rows = curve.points.iter().map(|p| TimingRow {
        strategy: curve.strategy,
        seed: curve.seed,
        round: p.round,
        acq_seconds: p.acq_seconds,
    });
    write_atomic(&dir.join(timing_file_name(curve.strategy, curve.seed)), &to_csv(rows))
}

/// Reads a curve back. Timings are optional; missing ones read as 0.
pub fn read_curve(dir: &Path, dataset: &str, strategy: Strategy, seed: u64) -> Result<LearningCurve> {
    let path = dir.join(curve_file_name(strategy, seed));
    let rows: Vec<CurveRow> = from_csv(&path)?;
    let timing_path = dir.join(timing_file_name(strategy, seed));
    let timings: Vec<TimingRow> = if timing_path.exists() {
        from_csv(&timing_path)?
    } else {
        Vec::new()
    };
    let mut points = Vec::with_capacity(rows.len());
    for row in rows {
        if row.strategy != strategy || row.seed != seed {
            return Err(Error::format(&path, "row belongs to a different run"));
        }
        let acq_seconds = timings.iter().find(|t| t.round == row.round).map_or(0.0, |t| t.acq_seconds);
        points.push(CurvePoint {
            round: row.round,
            labeled_count: row.labeled_count,
            test_accuracy: row.test_accuracy,
            acq_seconds,
        });
    }
    Ok(LearningCurve {
        dataset: dataset.to_string(),
        strategy,
        seed,
        points,
    })
}

/// Every curve listed in a run directory's manifest, skipping runs that
/// never wrote a row.
pub fn import_results(dir: &Path) -> Result<(Manifest, Vec<LearningCurve>)> {
    let manifest = Manifest::load(dir)?;
    let mut curves = Vec::new();
    for run in &manifest.runs {
        if dir.join(&run.curve_file).exists() {
            curves.push(read_curve(dir, &manifest.dataset, run.strategy, run.seed)?);
        }
    }
    Ok((manifest, curves))
}
