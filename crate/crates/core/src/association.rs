//! Frame-to-frame assignment of detections to tracks: a gated square score
//! matrix solved exactly with the Hungarian algorithm.

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{wrap_signed, Point2};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AssocConfig {
    /// Gate threshold on the Mahalanobis form; default is the chi-square
    /// 99% quantile with 2 degrees of freedom.
    pub eps: f64,
    /// Optional penalty weight on heading difference (rad), off by default.
    pub heading_weight: f64,
    /// Sentinel cost marking gated-out / padding entries.
    pub sentinel: f64,
}

impl Default for AssocConfig {
    fn default() -> Self {
        Self {
            eps: 9.21,
            heading_weight: 0.0,
            sentinel: 1e6,
        }
    }
}

/// Square cost matrix padded with the sentinel so unmatched rows and columns
/// map to dummies.
#[derive(Debug, Clone)]
pub struct ScoreMatrix {
    pub n: usize,
    pub entries: Vec<f64>,
    pub n_tracks: usize,
    pub n_detections: usize,
    pub sentinel: f64,
}

impl ScoreMatrix {
    pub fn new(n_tracks: usize, n_detections: usize, sentinel: f64) -> Self {
        let n = n_tracks.max(n_detections);
        Self {
            n,
            entries: vec![sentinel; n * n],
            n_tracks,
            n_detections,
            sentinel,
        }
    }

    /// A plain square matrix where every row and column is real.
    pub fn from_rows(rows: Vec<Vec<f64>>, sentinel: f64) -> Self {
        let n = rows.len();
        let mut m = Self::new(n, n, sentinel);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), n, "score matrix must be square");
            for (j, &v) in row.iter().enumerate() {
                m.set(i, j, v);
            }
        }
        m
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.entries[row * self.n + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.entries[row * self.n + col] = value;
    }
}

/// Assignment result; sentinel matches are reported as unmatched.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub pairs: Vec<(usize, usize)>,
    pub unmatched_tracks: Vec<usize>,
    pub unmatched_detections: Vec<usize>,
}

/// Exact minimum-cost perfect matching on a square matrix (O(n^3) potentials
/// formulation), reduced to real pairs afterwards.
pub fn hungarian(s: &ScoreMatrix) -> Assignment {
    let row_to_col = solve_square(&s.entries, s.n);
    let mut pairs = Vec::new();
    let mut matched_tracks = vec![false; s.n_tracks];
    let mut matched_dets = vec![false; s.n_detections];
    for (row, &col) in row_to_col.iter().enumerate() {
        if row < s.n_tracks && col < s.n_detections && s.get(row, col) < s.sentinel {
            pairs.push((row, col));
            matched_tracks[row] = true;
            matched_dets[col] = true;
        }
    }
    Assignment {
        pairs,
        unmatched_tracks: (0..s.n_tracks).filter(|&t| !matched_tracks[t]).collect(),
        unmatched_detections: (0..s.n_detections).filter(|&d| !matched_dets[d]).collect(),
    }
}

/// Optimal row -> column assignment minimizing total cost.
fn solve_square(cost: &[f64], n: usize) -> Vec<usize> {
    if n == 0 {
        return Vec::new();
    }
    let inf = f64::INFINITY;
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut col_row = vec![0usize; n + 1]; // row assigned to column (1-based; 0 = none)
    let mut way = vec![0usize; n + 1];

    for row in 1..=n {
        col_row[0] = row;
        let mut j0 = 0usize;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = col_row[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[col_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if col_row[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            col_row[j0] = col_row[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut row_to_col = vec![usize::MAX; n];
    for j in 1..=n {
        if col_row[j] != 0 {
            row_to_col[col_row[j] - 1] = j - 1;
        }
    }
    row_to_col
}

/// Mahalanobis gate: `(z - H*x)' * B^-1 * (z - H*x) < eps` with
/// `B = H*P*H' + R`. Strict inequality; fails on non-PD B.
pub fn gate(
    h: &DMatrix<f64>,
    x_pred: &DVector<f64>,
    p_pred: &DMatrix<f64>,
    z: &DVector<f64>,
    r: &DMatrix<f64>,
    eps: f64,
) -> Result<bool> {
    let b = h * p_pred * h.transpose() + r;
    let chol = b.cholesky().ok_or(Error::SingularGate)?;
    let resid = z - h * x_pred;
    let stat = resid.dot(&chol.solve(&resid));
    Ok(stat < eps)
}

/// One per-model gate of a track: the slot's predicted corner and its
/// position-block innovation covariance `B`.
#[derive(Debug, Clone)]
pub struct GateCheck {
    pub pos: Point2,
    pub cov: Matrix2<f64>,
}

impl GateCheck {
    fn admits(&self, z: Point2, eps: f64) -> bool {
        let Some(chol) = self.cov.cholesky() else {
            return false;
        };
        let resid = Vector2::new(z.x - self.pos.x, z.y - self.pos.y);
        resid.dot(&chol.solve(&resid)) < eps
    }
}

/// Prediction view of a track used to build the score matrix.
#[derive(Debug, Clone)]
pub struct TrackPrediction {
    /// Fused predicted corner position (cost reference).
    pub corner: Point2,
    pub heading: f64,
    /// Per-model gates; a detection associates when any model admits it.
    pub gates: Vec<GateCheck>,
}

/// Detection view: the fitted rectangle's corners (nearest first) and its
/// heading. Keeping all corners lets a pair be scored against the corner
/// the track is actually following, so a nearest-corner identity hop does
/// not break the association.
#[derive(Debug, Clone)]
pub struct DetectionPoint {
    pub corners: Vec<Point2>,
    pub heading: f64,
}

impl DetectionPoint {
    /// Corner closest to the track's predicted corner: the measurement the
    /// corner-switch compensation will produce for this pair.
    pub fn corner_for(&self, predicted: Point2) -> Point2 {
        *self
            .corners
            .iter()
            .min_by(|a, b| a.dist(predicted).total_cmp(&b.dist(predicted)))
            .expect("detection has at least one corner")
    }
}

/// Corner-distance cost matrix with gating; gated-out pairs hold the
/// sentinel, and the matrix is padded square.
pub fn build_score_matrix(
    tracks: &[TrackPrediction],
    detections: &[DetectionPoint],
    cfg: &AssocConfig,
) -> ScoreMatrix {
    let mut m = ScoreMatrix::new(tracks.len(), detections.len(), cfg.sentinel);
    for (t, track) in tracks.iter().enumerate() {
        for (d, det) in detections.iter().enumerate() {
            let z = det.corner_for(track.corner);
            if !track.gates.iter().any(|g| g.admits(z, cfg.eps)) {
                continue;
            }
            let mut cost = track.corner.dist(z);
            if cfg.heading_weight != 0.0 {
                cost += cfg.heading_weight
                    * wrap_signed(track.heading - det.heading, std::f64::consts::FRAC_PI_2)
                        .abs();
            }
            m.set(t, d, cost.min(cfg.sentinel * 0.5));
        }
    }
    m
}
