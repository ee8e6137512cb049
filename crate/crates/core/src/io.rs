//! JSONL readers/writers for scans, ground truth and pipeline results.
//!
//! One JSON object per line per frame; the scan schema is
//! `{"frame_id", "timestamp", "points": [{"x","y","layer","range","bearing"}], "labels": [...]}`
//! with `labels[i]` the generating object id of `points[i]` (null for noise).

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::segmentation::{Scan, ScanPoint};

#[derive(Debug, Serialize, Deserialize)]
struct PointRecord {
    x: f64,
    y: f64,
    layer: u8,
    range: f64,
    bearing: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct ScanRecord {
    frame_id: u64,
    timestamp: f64,
    points: Vec<PointRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<Option<u32>>>,
}

impl From<&Scan> for ScanRecord {
    fn from(scan: &Scan) -> Self {
        ScanRecord {
            frame_id: scan.frame_id,
            timestamp: scan.timestamp,
            points: scan
                .points
                .iter()
                .map(|p| PointRecord {
                    x: p.pos.x,
                    y: p.pos.y,
                    layer: p.layer,
                    range: p.range,
                    bearing: p.bearing,
                })
                .collect(),
            labels: scan.labels.clone(),
        }
    }
}

impl From<ScanRecord> for Scan {
    fn from(rec: ScanRecord) -> Self {
        let points = rec
            .points
            .into_iter()
            .map(|p| ScanPoint {
                pos: Point2::new(p.x, p.y),
                layer: p.layer,
                range: p.range,
                bearing: p.bearing,
            })
            .collect();
        Scan::new(rec.frame_id, rec.timestamp, points, rec.labels)
    }
}

/// Serialize items one JSON object per line.
pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line).map_err(|e| {
            Error::Parse(format!("{}:{}: {e}", path.display(), lineno + 1))
        })?;
        out.push(item);
    }
    Ok(out)
}

pub fn write_scans(path: &Path, scans: &[Scan]) -> Result<()> {
    let records: Vec<ScanRecord> = scans.iter().map(ScanRecord::from).collect();
    write_jsonl(path, &records)
}

pub fn read_scans(path: &Path) -> Result<Vec<Scan>> {
    Ok(read_jsonl::<ScanRecord>(path)?
        .into_iter()
        .map(Scan::from)
        .collect())
}
