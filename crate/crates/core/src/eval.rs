//! Metrics harness: heading-error statistics and distributions, per-state
//! trajectory errors, and tracker-identity consistency, with CSV emitters
//! shaped like the published comparison tables.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::FrameOutput;
use crate::rectfit::CriterionKind;
use crate::sim::{GroundTruth, GtFrame, GtVehicle};

/// Method column order used in every table.
pub const METHODS: [&str; 5] = ["area", "closeness", "variance", "tlinkage", "best_selection"];

/// Wrap a heading difference (degrees) into `(-45, 45]`.
///
/// Rectangle headings carry a quarter-turn ambiguity, so errors are compared
/// after picking the representative within +/-45 degrees; the wrap is
/// idempotent and maps e.g. +89 and -91 to the same value.
pub fn wrap_heading_error_deg(delta: f64) -> f64 {
    let mut d = delta.rem_euclid(180.0);
    if d > 90.0 {
        d -= 180.0;
    }
    if d > 45.0 {
        d -= 90.0;
    } else if d <= -45.0 {
        d += 90.0;
    }
    d
}

fn population_mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HeadingStats {
    pub signed_mean: f64,
    pub signed_std: f64,
    pub abs_mean: f64,
    pub abs_std: f64,
    pub count: usize,
}

fn gt_frame_map(gt: &GroundTruth) -> BTreeMap<u64, &GtFrame> {
    gt.frames.iter().map(|f| (f.frame_id, f)).collect()
}

fn gt_vehicle(frame: &GtFrame, id: u32) -> Result<&GtVehicle> {
    frame
        .vehicles
        .iter()
        .find(|v| v.id == id)
        .ok_or_else(|| {
            Error::Alignment(format!(
                "vehicle {id} not observed in ground-truth frame {}",
                frame.frame_id
            ))
        })
}

/// Per-method signed and absolute heading error statistics (degrees).
pub fn heading_error_stats(
    results: &[FrameOutput],
    gt: &GroundTruth,
) -> Result<BTreeMap<String, HeadingStats>> {
    let errors = heading_errors_by_method(results, gt)?;
    let mut out = BTreeMap::new();
    for (method, errs) in errors {
        let abs: Vec<f64> = errs.iter().map(|e| e.abs()).collect();
        let (signed_mean, signed_std) = population_mean_std(&errs);
        let (abs_mean, abs_std) = population_mean_std(&abs);
        out.insert(
            method,
            HeadingStats {
                signed_mean,
                signed_std,
                abs_mean,
                abs_std,
                count: errs.len(),
            },
        );
    }
    Ok(out)
}

/// Signed wrapped heading errors per method, aligned by frame and object.
pub fn heading_errors_by_method(
    results: &[FrameOutput],
    gt: &GroundTruth,
) -> Result<BTreeMap<String, Vec<f64>>> {
    let frames = gt_frame_map(gt);
    let mut errors: BTreeMap<String, Vec<f64>> = METHODS
        .iter()
        .map(|m| (m.to_string(), Vec::new()))
        .collect();
    for frame in results {
        let gt_frame = frames.get(&frame.frame_id).ok_or_else(|| {
            Error::Alignment(format!("frame {} missing from ground truth", frame.frame_id))
        })?;
        for det in &frame.detections {
            let Some(id) = det.gt_id else { continue };
            let vehicle = gt_vehicle(gt_frame, id)?;
            let theta_g = vehicle.theta.to_degrees();
            for cand in &det.candidates {
                let err = wrap_heading_error_deg(cand.heading.to_degrees() - theta_g);
                errors
                    .get_mut(cand.criterion.name())
                    .expect("known criterion")
                    .push(err);
            }
            let best = wrap_heading_error_deg(det.rect.heading.to_degrees() - theta_g);
            errors.get_mut("best_selection").unwrap().push(best);
        }
    }
    Ok(errors)
}

pub const DISTRIBUTION_THRESHOLDS_DEG: [f64; 6] = [0.0, 1.0, 2.0, 3.0, 4.0, 5.0];

/// Cumulative fraction of absolute errors at {0, 1, 2, 3, 4, 5} degrees;
/// the "= 0" bucket uses a 1e-9 degree tolerance.
pub fn heading_error_distribution(abs_errors: &[f64]) -> [f64; 6] {
    let mut out = [0.0; 6];
    if abs_errors.is_empty() {
        return out;
    }
    let n = abs_errors.len() as f64;
    for (i, thr) in DISTRIBUTION_THRESHOLDS_DEG.iter().enumerate() {
        let bound = if i == 0 { 1e-9 } else { *thr };
        out[i] = abs_errors.iter().filter(|&&e| e <= bound).count() as f64 / n;
    }
    out
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AxisStats {
    pub x_mean: f64,
    pub x_std: f64,
    pub y_mean: f64,
    pub y_std: f64,
    pub count: usize,
}

/// Majority vote track -> ground-truth vehicle from the per-frame
/// assignments (each matched detection's majority point label).
pub fn track_vehicle_map(results: &[FrameOutput]) -> BTreeMap<u64, u32> {
    let mut votes: BTreeMap<u64, BTreeMap<u32, usize>> = BTreeMap::new();
    for frame in results {
        for &(track_id, det_idx) in &frame.assignments {
            if let Some(gt_id) = frame.detections[det_idx].gt_id {
                *votes.entry(track_id).or_default().entry(gt_id).or_default() += 1;
            }
        }
    }
    votes
        .into_iter()
        .filter_map(|(track, counts)| {
            counts
                .into_iter()
                .max_by_key(|&(id, n)| (n, std::cmp::Reverse(id)))
                .map(|(id, _)| (track, id))
        })
        .collect()
}

/// One-to-one correspondence: each vehicle is represented by the track that
/// covers the most of its assigned frames (short duplicate tracks drop out).
pub fn vehicle_track_map(results: &[FrameOutput]) -> BTreeMap<u32, u64> {
    let mut votes: BTreeMap<(u32, u64), usize> = BTreeMap::new();
    for frame in results {
        for &(track_id, det_idx) in &frame.assignments {
            if let Some(gt_id) = frame.detections[det_idx].gt_id {
                *votes.entry((gt_id, track_id)).or_default() += 1;
            }
        }
    }
    let mut best: BTreeMap<u32, (u64, usize)> = BTreeMap::new();
    for (&(vehicle, track), &n) in &votes {
        match best.get(&vehicle) {
            Some(&(_, bn)) if bn >= n => {}
            _ => {
                best.insert(vehicle, (track, n));
            }
        }
    }
    best.into_iter().map(|(v, (t, _))| (v, t)).collect()
}

/// Per-frame absolute per-axis corner error of one track against its
/// vehicle, measured against the nearest ground-truth footprint corner (the
/// tracked corner identity is arbitrary after aspect changes).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlotPoint {
    pub frame_id: u64,
    pub timestamp: f64,
    pub track_id: u64,
    pub gt_id: u32,
    pub moving: bool,
    pub abs_err_x: f64,
    pub abs_err_y: f64,
}

pub fn trajectory_plot_points(
    results: &[FrameOutput],
    gt: &GroundTruth,
) -> Result<Vec<PlotPoint>> {
    let frames = gt_frame_map(gt);
    let correspondence: BTreeMap<u64, u32> = vehicle_track_map(results)
        .into_iter()
        .map(|(v, t)| (t, v))
        .collect();
    let mut out = Vec::new();
    for frame in results {
        let gt_frame = frames.get(&frame.frame_id).ok_or_else(|| {
            Error::Alignment(format!("frame {} missing from ground truth", frame.frame_id))
        })?;
        for state in &frame.tracks {
            if state.lifecycle != crate::tracking::Lifecycle::Confirmed {
                continue;
            }
            let Some(&gt_id) = correspondence.get(&state.id) else {
                continue;
            };
            let Some(vehicle) = gt_frame.vehicles.iter().find(|v| v.id == gt_id) else {
                continue; // vehicle unobserved this frame (spawn gap, occlusion)
            };
            let corner = vehicle
                .corners
                .iter()
                .min_by(|a, b| {
                    a.dist(state.corner).total_cmp(&b.dist(state.corner))
                })
                .unwrap();
            out.push(PlotPoint {
                frame_id: frame.frame_id,
                timestamp: frame.timestamp,
                track_id: state.id,
                gt_id,
                moving: vehicle.moving,
                abs_err_x: (state.corner.x - corner.x).abs(),
                abs_err_y: (state.corner.y - corner.y).abs(),
            });
        }
    }
    Ok(out)
}

/// Absolute corner-error statistics split by ground-truth vehicle state
/// ("stationary" / "moving").
pub fn trajectory_error_stats(
    results: &[FrameOutput],
    gt: &GroundTruth,
) -> Result<BTreeMap<String, AxisStats>> {
    let points = trajectory_plot_points(results, gt)?;
    let mut by_state: BTreeMap<String, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for p in &points {
        let state = if p.moving { "moving" } else { "stationary" };
        let entry = by_state.entry(state.to_string()).or_default();
        entry.0.push(p.abs_err_x);
        entry.1.push(p.abs_err_y);
    }
    Ok(by_state
        .into_iter()
        .map(|(state, (xs, ys))| {
            let (x_mean, x_std) = population_mean_std(&xs);
            let (y_mean, y_std) = population_mean_std(&ys);
            (
                state,
                AxisStats {
                    x_mean,
                    x_std,
                    y_mean,
                    y_std,
                    count: xs.len(),
                },
            )
        })
        .collect())
}

/// Fraction of ground-truth vehicles whose observed lifetime is covered by
/// one track ID for at least 90% of frames.
pub fn id_consistency(results: &[FrameOutput], gt: &GroundTruth) -> f64 {
    let mut observed: BTreeMap<u32, usize> = BTreeMap::new();
    for frame in &gt.frames {
        for v in &frame.vehicles {
            *observed.entry(v.id).or_default() += 1;
        }
    }
    if observed.is_empty() {
        return 1.0;
    }

    // Frames covered per (vehicle, track) through the assignments.
    let mut coverage: BTreeMap<(u32, u64), usize> = BTreeMap::new();
    for frame in results {
        for &(track_id, det_idx) in &frame.assignments {
            if let Some(gt_id) = frame.detections[det_idx].gt_id {
                *coverage.entry((gt_id, track_id)).or_default() += 1;
            }
        }
    }

    let mut consistent = 0usize;
    for (&vehicle, &n_frames) in &observed {
        let best = coverage
            .iter()
            .filter(|((v, _), _)| *v == vehicle)
            .map(|(_, &n)| n)
            .max()
            .unwrap_or(0);
        if best as f64 >= 0.9 * n_frames as f64 {
            consistent += 1;
        }
    }
    consistent as f64 / observed.len() as f64
}

// ---------------------------------------------------------------------------
// CSV emitters
// ---------------------------------------------------------------------------

pub fn heading_stats_csv(stats: &BTreeMap<String, HeadingStats>) -> String {
    let mut out =
        String::from("method,signed_mean_deg,signed_std_deg,abs_mean_deg,abs_std_deg,count\n");
    for method in METHODS {
        if let Some(s) = stats.get(method) {
            out.push_str(&format!(
                "{method},{:.4},{:.4},{:.4},{:.4},{}\n",
                s.signed_mean, s.signed_std, s.abs_mean, s.abs_std, s.count
            ));
        }
    }
    out
}

pub fn heading_distribution_csv(errors: &BTreeMap<String, Vec<f64>>) -> String {
    let mut out = String::from("method,eq0,le1,le2,le3,le4,le5\n");
    for method in METHODS {
        if let Some(errs) = errors.get(method) {
            let abs: Vec<f64> = errs.iter().map(|e| e.abs()).collect();
            let d = heading_error_distribution(&abs);
            out.push_str(&format!(
                "{method},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4}\n",
                d[0], d[1], d[2], d[3], d[4], d[5]
            ));
        }
    }
    out
}

pub fn trajectory_csv(rows: &[(String, String, AxisStats)]) -> String {
    let mut out = String::from("method,state,x_mean,x_std,y_mean,y_std,count\n");
    for (method, state, s) in rows {
        out.push_str(&format!(
            "{method},{state},{:.4},{:.4},{:.4},{:.4},{}\n",
            s.x_mean, s.x_std, s.y_mean, s.y_std, s.count
        ));
    }
    out
}

pub fn id_consistency_csv(rows: &[(String, f64)]) -> String {
    let mut out = String::from("method,id_consistency\n");
    for (method, v) in rows {
        out.push_str(&format!("{method},{v:.4}\n"));
    }
    out
}

/// Criterion name for table rows.
pub fn criterion_column(c: CriterionKind) -> &'static str {
    c.name()
}
