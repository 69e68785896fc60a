use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::acquisition::AcquisitionKind;
use crate::error::{Error, Result};
use crate::metrics::MetricSnapshot;
use crate::planner::Pose;

/// State of the vehicle and the surrogate at the end of one decision epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub clock: f64,
    pub pose: Pose,
    /// Destination of the leg that ended this epoch; `None` for the initial epoch.
    pub destination: Option<[f64; 2]>,
    pub acquisition: AcquisitionKind,
    pub dataset_size: usize,
    pub metrics: MetricSnapshot,
}

/// One noisy measurement taken during a mission.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub z: [f64; 2],
    pub t: f64,
    pub y: f64,
}

/// Writes one JSON object per line.
pub fn write_trace<W: Write>(mut out: W, records: &[EpochRecord]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn trace_to_string(records: &[EpochRecord]) -> String {
    let mut buf = Vec::new();
    write_trace(&mut buf, records).expect("writing to memory");
    String::from_utf8(buf).expect("json is utf-8")
}

/// Reads a line-delimited trace, skipping blank lines.
pub fn read_trace<R: BufRead>(input: R) -> Result<Vec<EpochRecord>> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: EpochRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            column: e.column(),
            message: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok(out)
}

/// Metric snapshots in epoch order, checking that epochs run `0, 1, 2, ...`.
pub fn snapshots(records: &[EpochRecord]) -> Result<Vec<MetricSnapshot>> {
    records
        .iter()
        .enumerate()
        .map(|(i, r)| {
            if r.epoch == i {
                Ok(r.metrics)
            } else {
                Err(Error::Alignment(format!("record {i} carries epoch {}", r.epoch)))
            }
        })
        .collect()
}
