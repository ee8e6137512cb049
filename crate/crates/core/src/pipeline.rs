//! Per-frame pipeline: segmentation -> T-linkage -> rectangle fit selection
//! -> gated Hungarian association -> multi-model corner tracking.

use serde::{Deserialize, Serialize};

use crate::association::{build_score_matrix, hungarian, DetectionPoint};
use crate::config::PipelineConfig;
use crate::geometry::{fit_line_tls, Line2, OrientedRect, Point2};
use crate::rectfit::{evaluate_candidates, CandidateFit, CriterionKind};
use crate::segmentation::{segment_scan, Scan, Segment};
use crate::tlinkage::{sample_hypotheses, tlinkage_cluster};
use crate::tracking::{
    corner_switch_compensate, lifecycle_step, Lifecycle, Measurement, ModelKind, Track,
};

/// One fitted vehicle detection.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Detection {
    pub rect: OrientedRect,
    pub criterion: CriterionKind,
    pub selection_cost: f64,
    /// Heading and cost of every candidate, for per-criterion evaluation.
    pub candidates: Vec<CandidateSummary>,
    /// Majority ground-truth label of the segment, when the scan is labeled.
    pub gt_id: Option<u32>,
    pub n_points: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CandidateSummary {
    pub criterion: CriterionKind,
    pub heading: f64,
    pub selection_cost: f64,
}

/// Per-frame state of one live track.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrackState {
    pub id: u64,
    pub lifecycle: Lifecycle,
    pub corner: Point2,
    pub heading: f64,
    pub mixture_corner: Point2,
    pub model_probs: Vec<f64>,
    pub best_model: ModelKind,
    pub hits: u32,
    pub misses: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FrameOutput {
    pub frame_id: u64,
    pub timestamp: f64,
    pub mode: String,
    pub detections: Vec<Detection>,
    /// (track id, detection index) pairs chosen by the assignment.
    pub assignments: Vec<(u64, usize)>,
    pub tracks: Vec<TrackState>,
}

/// Stateful frame processor; feed scans in timestamp order.
pub struct Pipeline {
    cfg: PipelineConfig,
    tracks: Vec<Track>,
    next_id: u64,
    last_timestamp: Option<f64>,
}

impl Pipeline {
    pub fn new(cfg: PipelineConfig) -> Self {
        Self {
            cfg,
            tracks: Vec::new(),
            next_id: 1,
            last_timestamp: None,
        }
    }

    pub fn mode(&self) -> &'static str {
        if self.cfg.track.single_model {
            "single_cv"
        } else {
            "mma"
        }
    }

    /// Run the full pipeline over one scan, updating tracker state.
    pub fn process_frame(&mut self, scan: &Scan) -> FrameOutput {
        let dt = match self.last_timestamp {
            Some(prev) if scan.timestamp > prev => scan.timestamp - prev,
            _ => 0.0,
        };
        if dt > 0.0 {
            for track in &mut self.tracks {
                track.predict_all(dt, &self.cfg.track);
            }
        }

        let segments = segment_scan(scan, &self.cfg.segmentation);
        let detections: Vec<Detection> = segments
            .iter()
            .enumerate()
            .filter_map(|(seg_idx, seg)| {
                self.detect_segment(scan, seg, seg_idx as u64)
            })
            .collect();

        let predictions: Vec<_> = self
            .tracks
            .iter()
            .map(|t| t.prediction(&self.cfg.track))
            .collect();
        let det_points: Vec<DetectionPoint> = detections
            .iter()
            .map(|d| DetectionPoint {
                corners: d.rect.corners.to_vec(),
                heading: d.rect.heading,
            })
            .collect();
        let matrix = build_score_matrix(&predictions, &det_points, &self.cfg.assoc);
        let assignment = hungarian(&matrix);

        let mut assignments = Vec::new();
        let mut matched_tracks = vec![false; self.tracks.len()];
        for &(t_idx, d_idx) in &assignment.pairs {
            let track = &mut self.tracks[t_idx];
            let z = corner_switch_compensate(track, &detections[d_idx].rect);
            match track.mma_update(&z, &self.cfg.track) {
                Ok(()) => {
                    matched_tracks[t_idx] = true;
                    lifecycle_step(track, true, &self.cfg.track);
                    track.prev_rect = Some(detections[d_idx].rect.clone());
                    assignments.push((track.id, d_idx));
                }
                Err(_) => {
                    // Numerically unusable update: treat the pair as a miss.
                    lifecycle_step(track, false, &self.cfg.track);
                }
            }
        }
        for (t_idx, matched) in matched_tracks.iter().enumerate() {
            if !matched && !assignment.pairs.iter().any(|&(t, _)| t == t_idx) {
                lifecycle_step(&mut self.tracks[t_idx], false, &self.cfg.track);
            }
        }

        for &d_idx in &assignment.unmatched_detections {
            let det = &detections[d_idx];
            let z = Measurement {
                pos: det.rect.nearest_corner(),
                theta: det.rect.heading,
            };
            let mut track = Track::new(self.next_id, &z, &self.cfg.track);
            track.prev_rect = Some(det.rect.clone());
            assignments.push((track.id, d_idx));
            self.next_id += 1;
            self.tracks.push(track);
        }

        let mut track_states = Vec::new();
        for track in &mut self.tracks {
            if track.lifecycle == Lifecycle::Dead {
                continue;
            }
            track.record_history(scan.timestamp);
            track_states.push(TrackState {
                id: track.id,
                lifecycle: track.lifecycle,
                corner: track.fused_corner(),
                heading: track.fused_heading(),
                mixture_corner: track.mixture_corner(),
                model_probs: track.slots.iter().map(|s| s.probability).collect(),
                best_model: track.best_slot().model,
                hits: track.hits,
                misses: track.misses,
            });
        }
        self.tracks.retain(|t| t.lifecycle != Lifecycle::Dead);
        self.last_timestamp = Some(scan.timestamp);

        FrameOutput {
            frame_id: scan.frame_id,
            timestamp: scan.timestamp,
            mode: self.mode().to_string(),
            detections,
            assignments,
            tracks: track_states,
        }
    }

    /// T-linkage + rectangle selection for one segment. Returns None when
    /// the segment has no usable line structure.
    fn detect_segment(&self, scan: &Scan, seg: &Segment, seg_idx: u64) -> Option<Detection> {
        let pts: Vec<Point2> = seg
            .point_indices
            .iter()
            .map(|&i| scan.points[i].pos)
            .collect();

        // Deterministic stride subsample for the clustering stage.
        let sub: Vec<Point2> = if pts.len() > self.cfg.tlinkage_max_points {
            let stride = pts.len().div_ceil(self.cfg.tlinkage_max_points);
            pts.iter().step_by(stride).copied().collect()
        } else {
            pts.clone()
        };

        let seed = mix_seed(self.cfg.tlinkage.seed, scan.frame_id, seg_idx);
        let hyps =
            sample_hypotheses(&sub, self.cfg.tlinkage.m, self.cfg.tlinkage.tau, seed).ok()?;
        let cs = tlinkage_cluster(&sub, &hyps, &self.cfg.tlinkage);
        let dominant = cs.dominant_index?;

        // Classify the full segment against the surviving cluster lines so
        // rectangle fitting sees all inliers, not just the subsample.
        let lines: Vec<Option<Line2>> = cs
            .clusters
            .iter()
            .map(|c| {
                let cpts: Vec<Point2> = c.point_indices.iter().map(|&i| sub[i]).collect();
                fit_line_tls(&cpts).ok()
            })
            .collect();
        let mut clean = Vec::new();
        let mut dominant_pts = Vec::new();
        for p in &pts {
            let mut best: Option<(f64, usize)> = None;
            for (ci, line) in lines.iter().enumerate() {
                let Some(line) = line else { continue };
                let d = line.distance(*p);
                if d < self.cfg.tlinkage.tau && best.map(|(bd, _)| d < bd).unwrap_or(true) {
                    best = Some((d, ci));
                }
            }
            if let Some((_, ci)) = best {
                clean.push(*p);
                if ci == dominant {
                    dominant_pts.push(*p);
                }
            }
        }
        if dominant_pts.len() < 2 {
            dominant_pts = cs.clusters[dominant]
                .point_indices
                .iter()
                .map(|&i| sub[i])
                .collect();
        }
        if clean.len() < 2 {
            return None;
        }

        let candidates = evaluate_candidates(&clean, &dominant_pts, &self.cfg.rectfit).ok()?;
        let best = pick_best(&candidates);
        let chosen = &candidates[best];

        let gt_id = majority_label(scan, seg);
        Some(Detection {
            rect: chosen.rect.clone(),
            criterion: chosen.criterion,
            selection_cost: chosen.selection_cost,
            candidates: candidates
                .iter()
                .map(|c| CandidateSummary {
                    criterion: c.criterion,
                    heading: c.rect.heading,
                    selection_cost: c.selection_cost,
                })
                .collect(),
            gt_id,
            n_points: pts.len(),
        })
    }
}

/// Argmin over selection cost; the T-linkage candidate is listed first so
/// strict comparison keeps it on ties.
pub fn pick_best(candidates: &[CandidateFit]) -> usize {
    let mut best = 0;
    for (i, c) in candidates.iter().enumerate() {
        if c.selection_cost < candidates[best].selection_cost {
            best = i;
        }
    }
    best
}

fn majority_label(scan: &Scan, seg: &Segment) -> Option<u32> {
    let labels = scan.labels.as_ref()?;
    let mut counts: std::collections::BTreeMap<u32, usize> = Default::default();
    for &i in &seg.point_indices {
        if let Some(id) = labels.get(i).copied().flatten() {
            *counts.entry(id).or_default() += 1;
        }
    }
    counts
        .into_iter()
        .max_by_key(|&(id, n)| (n, std::cmp::Reverse(id)))
        .map(|(id, _)| id)
}

fn mix_seed(seed: u64, frame: u64, segment: u64) -> u64 {
    let mut h = seed
        ^ frame.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ segment.wrapping_add(1).wrapping_mul(0xD1B5_4A32_D192_ED03);
    h ^= h >> 30;
    h = h.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    h ^= h >> 27;
    h = h.wrapping_mul(0x94D0_49BB_1331_11EB);
    h ^= h >> 31;
    h
}

/// Convenience: run a fresh pipeline over a scan sequence.
pub fn process_scans(cfg: PipelineConfig, scans: &[Scan]) -> Vec<FrameOutput> {
    let mut pipeline = Pipeline::new(cfg);
    scans.iter().map(|s| pipeline.process_frame(s)).collect()
}
