//! Adaptive scan segmentation: range-adaptive breakpoint detection per layer
//! followed by cross-layer merging of nearby segments.

use serde::{Deserialize, Serialize};

use crate::geometry::Point2;

/// One LIDAR return. `layer`, `range` and `bearing` are sensor-frame
/// metadata; `pos` is the Cartesian position used for geometry.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ScanPoint {
    pub pos: Point2,
    pub layer: u8,
    pub range: f64,
    pub bearing: f64,
}

/// One time-stamped frame of 2D range points, sorted by (layer, bearing).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scan {
    pub frame_id: u64,
    pub timestamp: f64,
    pub points: Vec<ScanPoint>,
    /// Optional ground-truth object id per point (None for noise returns).
    pub labels: Option<Vec<Option<u32>>>,
}

impl Scan {
    /// Build a scan, sorting points (and labels) by (layer, bearing).
    pub fn new(
        frame_id: u64,
        timestamp: f64,
        points: Vec<ScanPoint>,
        labels: Option<Vec<Option<u32>>>,
    ) -> Self {
        let mut order: Vec<usize> = (0..points.len()).collect();
        order.sort_by(|&i, &j| {
            points[i]
                .layer
                .cmp(&points[j].layer)
                .then(points[i].bearing.total_cmp(&points[j].bearing))
        });
        let points = order.iter().map(|&i| points[i]).collect();
        let labels = labels.map(|l| order.iter().map(|&i| l[i]).collect());
        Self {
            frame_id,
            timestamp,
            points,
            labels,
        }
    }

    pub fn is_sorted(&self) -> bool {
        self.points.windows(2).all(|w| {
            (w[0].layer, w[0].bearing) <= (w[1].layer, w[1].bearing)
        })
    }
}

/// A set of point indices into a scan belonging to one candidate object.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Segment {
    pub point_indices: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SegmentationConfig {
    /// Constant part of the adaptive break threshold (meters).
    pub d0: f64,
    /// Range-proportional part of the break threshold.
    pub k: f64,
    /// Closest-point distance below which segments from different layers merge.
    pub merge_dist: f64,
    /// Segments smaller than this are discarded.
    pub min_points: usize,
}

impl Default for SegmentationConfig {
    fn default() -> Self {
        Self {
            d0: 0.5,
            k: 0.02,
            merge_dist: 0.5,
            min_points: 5,
        }
    }
}

struct DisjointSet {
    parent: Vec<usize>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }
    fn find(&mut self, i: usize) -> usize {
        if self.parent[i] != i {
            let root = self.find(self.parent[i]);
            self.parent[i] = root;
        }
        self.parent[i]
    }
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[rb.max(ra)] = ra.min(rb);
        }
    }
}

/// Split a scan into candidate object segments.
///
/// Consecutive same-layer points (in bearing order, closing the wrap-around)
/// join when their Euclidean gap is below `d0 + k * range`; per-layer chains
/// from different layers merge when their closest points are within
/// `merge_dist`; merged groups below `min_points` are discarded.
pub fn segment_scan(scan: &Scan, cfg: &SegmentationConfig) -> Vec<Segment> {
    if scan.points.is_empty() {
        return Vec::new();
    }

    // Per-layer chains via adaptive breakpoint detection.
    let mut chains: Vec<Vec<usize>> = Vec::new();
    let mut layer_start = 0;
    while layer_start < scan.points.len() {
        let layer = scan.points[layer_start].layer;
        let mut layer_end = layer_start;
        while layer_end < scan.points.len() && scan.points[layer_end].layer == layer {
            layer_end += 1;
        }
        let idx: Vec<usize> = (layer_start..layer_end).collect();
        let first_chain_of_layer = chains.len();
        let mut current = vec![idx[0]];
        for w in idx.windows(2) {
            let (i, j) = (w[0], w[1]);
            if joined(&scan.points[i], &scan.points[j], cfg) {
                current.push(j);
            } else {
                chains.push(std::mem::replace(&mut current, vec![j]));
            }
        }
        chains.push(current);
        // Wrap-around: the last chain of the layer may continue into the first.
        let last = chains.len() - 1;
        if last > first_chain_of_layer {
            let head = *chains[first_chain_of_layer].first().unwrap();
            let tail = *chains[last].last().unwrap();
            if joined(&scan.points[tail], &scan.points[head], cfg) {
                let tail_chain = chains.pop().unwrap();
                chains[first_chain_of_layer].splice(0..0, tail_chain);
            }
        }
        layer_start = layer_end;
    }

    // Cross-layer merge with a bounding-box prefilter.
    let boxes: Vec<[f64; 4]> = chains.iter().map(|c| bbox(scan, c)).collect();
    let mut dsu = DisjointSet::new(chains.len());
    for i in 0..chains.len() {
        for j in (i + 1)..chains.len() {
            let li = scan.points[chains[i][0]].layer;
            let lj = scan.points[chains[j][0]].layer;
            if li == lj {
                continue;
            }
            if !boxes_near(&boxes[i], &boxes[j], cfg.merge_dist) {
                continue;
            }
            if min_chain_dist(scan, &chains[i], &chains[j], cfg.merge_dist) {
                dsu.union(i, j);
            }
        }
    }

    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for (ci, chain) in chains.iter().enumerate() {
        groups
            .entry(dsu.find(ci))
            .or_default()
            .extend(chain.iter().copied());
    }

    let mut segments: Vec<Segment> = groups
        .into_values()
        .filter(|g| g.len() >= cfg.min_points)
        .map(|mut g| {
            g.sort_unstable();
            Segment { point_indices: g }
        })
        .collect();
    segments.sort_by_key(|s| s.point_indices[0]);
    segments
}

fn joined(a: &ScanPoint, b: &ScanPoint, cfg: &SegmentationConfig) -> bool {
    let threshold = cfg.d0 + cfg.k * 0.5 * (a.range + b.range);
    a.pos.dist(b.pos) < threshold
}

fn bbox(scan: &Scan, idx: &[usize]) -> [f64; 4] {
    let mut b = [f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY];
    for &i in idx {
        let p = scan.points[i].pos;
        b[0] = b[0].min(p.x);
        b[1] = b[1].max(p.x);
        b[2] = b[2].min(p.y);
        b[3] = b[3].max(p.y);
    }
    b
}

fn boxes_near(a: &[f64; 4], b: &[f64; 4], dist: f64) -> bool {
    a[0] - dist <= b[1] && b[0] - dist <= a[1] && a[2] - dist <= b[3] && b[2] - dist <= a[3]
}

fn min_chain_dist(scan: &Scan, a: &[usize], b: &[usize], threshold: f64) -> bool {
    for &i in a {
        for &j in b {
            if scan.points[i].pos.dist(scan.points[j].pos) < threshold {
                return true;
            }
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    fn point(x: f64, y: f64, layer: u8) -> ScanPoint {
        let range = x.hypot(y);
        ScanPoint {
            pos: Point2::new(x, y),
            layer,
            range,
            bearing: y.atan2(x),
        }
    }

    fn scan_of(points: Vec<ScanPoint>) -> Scan {
        Scan::new(0, 0.0, points, None)
    }

    #[test]
    fn far_separated_groups_split() {
        let mut pts = Vec::new();
        for i in 0..6 {
            pts.push(point(5.0 + i as f64 * 0.1, 1.0, 0));
        }
        for i in 0..6 {
            pts.push(point(5.0 + i as f64 * 0.1, 11.0, 0));
        }
        let cfg = SegmentationConfig {
            d0: 0.5,
            k: 0.02,
            min_points: 3,
            ..Default::default()
        };
        let segs = segment_scan(&scan_of(pts), &cfg);
        assert_eq!(segs.len(), 2);
    }

    #[test]
    fn dense_arc_stays_single() {
        // 50 points along an arc at range 10, max gap 0.1 m; the adaptive
        // threshold there is 0.5 + 0.02 * 10 = 0.7 m.
        let pts: Vec<ScanPoint> = (0..50)
            .map(|i| {
                let theta = 0.2 + i as f64 * 0.009; // 10 * 0.009 = 0.09 m arc gap
                point(10.0 * theta.cos(), 10.0 * theta.sin(), 0)
            })
            .collect();
        let segs = segment_scan(&scan_of(pts), &SegmentationConfig::default());
        assert_eq!(segs.len(), 1);
        assert_eq!(segs[0].point_indices.len(), 50);
    }

    #[test]
    fn below_min_points_discarded() {
        let pts = vec![point(5.0, 0.0, 0), point(5.0, 3.0, 0)];
        let cfg = SegmentationConfig {
            min_points: 3,
            ..Default::default()
        };
        assert!(segment_scan(&scan_of(pts), &cfg).is_empty());
    }

    #[test]
    fn empty_scan_empty_result() {
        let segs = segment_scan(&scan_of(vec![]), &SegmentationConfig::default());
        assert!(segs.is_empty());
    }

    #[test]
    fn cross_layer_merge() {
        let mut pts = Vec::new();
        for i in 0..5 {
            pts.push(point(5.0 + i as f64 * 0.1, 1.0, 0));
            pts.push(point(5.0 + i as f64 * 0.1, 1.2, 1));
        }
        let cfg = SegmentationConfig {
            min_points: 5,
            ..Default::default()
        };
        let segs = segment_scan(&scan_of(pts), &cfg);
        assert_eq!(segs.len(), 1);
        assert_eq!(segs[0].point_indices.len(), 10);
    }

    #[test]
    fn wraparound_is_joined() {
        // Points straddling the +/- pi bearing seam at range 5.
        let mut pts = Vec::new();
        for i in -4i32..=4 {
            let bearing = std::f64::consts::PI - 0.02 * i.abs() as f64;
            let bearing = if i < 0 { -bearing } else { bearing };
            pts.push(point(5.0 * bearing.cos(), 5.0 * bearing.sin(), 0));
        }
        let segs = segment_scan(&scan_of(pts), &SegmentationConfig::default());
        assert_eq!(segs.len(), 1);
    }

    #[test]
    fn partition_rigid_invariant() {
        let mut pts = Vec::new();
        for i in 0..8 {
            pts.push(point(6.0 + 0.1 * i as f64, 2.0, 0));
        }
        for i in 0..8 {
            pts.push(point(-4.0, 6.0 + 0.1 * i as f64, 1));
        }
        let cfg = SegmentationConfig::default();
        let base = segment_scan(&scan_of(pts.clone()), &cfg);

        // Transform positions only; sensor metadata remains what the
        // device reported.
        let moved: Vec<ScanPoint> = pts
            .iter()
            .map(|p| ScanPoint {
                pos: p.pos.rotated(0.7) + Point2::new(3.0, -2.0),
                ..*p
            })
            .collect();
        let transformed = segment_scan(&scan_of(moved), &cfg);
        let sets = |segs: &[Segment]| {
            segs.iter()
                .map(|s| s.point_indices.clone())
                .collect::<Vec<_>>()
        };
        assert_eq!(sets(&base), sets(&transformed));
    }

    #[test]
    fn more_permissive_d0_never_splits_more() {
        let pts: Vec<ScanPoint> = (0..30)
            .map(|i| point(8.0 + 0.23 * i as f64, 3.0 + 0.11 * (i % 5) as f64, 0))
            .collect();
        let mut last = usize::MAX;
        for d0 in [0.1, 0.3, 0.5, 0.8, 1.2] {
            let cfg = SegmentationConfig {
                d0,
                min_points: 1,
                ..Default::default()
            };
            let n = segment_scan(&scan_of(pts.clone()), &cfg).len();
            assert!(n <= last, "d0={d0} gave {n} segments, previous {last}");
            last = n;
        }
    }
}
