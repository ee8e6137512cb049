//! T-linkage clustering of segment points into line-consistent clusters.
//!
//! Each point starts as its own cluster carrying a continuous preference
//! vector over randomly sampled line hypotheses; clusters merge greedily by
//! minimal Tanimoto distance (the merged preference is the element-wise
//! minimum) until all remaining clusters are mutually orthogonal. Small
//! clusters are declared outliers and the largest survivor — the dominant
//! cluster — carries the vehicle heading.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{self, fit_line_tls, line_through, Line2, Point2};

/// Distances at or beyond `1 - ORTHOGONALITY_EPS` count as orthogonal.
const ORTHOGONALITY_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TLinkageConfig {
    /// Hypothesis budget; capped at n*(n-1)/2 when fewer pairs exist.
    pub m: usize,
    /// Inlier threshold tau (meters).
    pub tau: f64,
    /// Clusters smaller than this become outliers.
    pub min_cluster_size: usize,
    /// Hypothesis sampling seed.
    pub seed: u64,
}

impl Default for TLinkageConfig {
    fn default() -> Self {
        Self {
            m: 200,
            tau: 0.15,
            min_cluster_size: 3,
            seed: 42,
        }
    }
}

/// A set of sampled line hypotheses with the inlier threshold.
#[derive(Debug, Clone)]
pub struct HypothesisSet {
    pub lines: Vec<Line2>,
    pub tau: f64,
}

/// Continuous inlier preferences of one point (or merged cluster) against
/// every hypothesis; entries live in [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferenceVector {
    pub values: Vec<f64>,
}

impl PreferenceVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    pub fn dot(&self, other: &PreferenceVector) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    /// Element-wise minimum: the preference of a merged cluster.
    pub fn merged_min(&self, other: &PreferenceVector) -> PreferenceVector {
        PreferenceVector {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a.min(*b))
                .collect(),
        }
    }
}

/// A cluster of point indices with its merged preference vector.
#[derive(Debug, Clone)]
pub struct Cluster {
    pub point_indices: Vec<usize>,
    pub preference: PreferenceVector,
}

/// Clustering result: disjoint clusters plus outliers covering all inputs.
#[derive(Debug, Clone)]
pub struct ClusterSet {
    pub clusters: Vec<Cluster>,
    pub outlier_indices: Vec<usize>,
    /// Index into `clusters` of the largest cluster; None when everything
    /// was declared an outlier.
    pub dominant_index: Option<usize>,
}

/// Sample `m` line hypotheses through distinct random point pairs.
///
/// When `m` covers all pairs the full pair set is enumerated, so small
/// inputs are deterministic regardless of seed.
pub fn sample_hypotheses(
    points: &[Point2],
    m: usize,
    tau: f64,
    seed: u64,
) -> Result<HypothesisSet> {
    if points.len() < 2 {
        return Err(Error::DegenerateInput(
            "hypothesis sampling needs at least 2 points".into(),
        ));
    }
    if m == 0 {
        return Err(Error::DegenerateInput("hypothesis count must be >= 1".into()));
    }
    let n = points.len();
    let total_pairs = n * (n - 1) / 2;
    let mut lines = Vec::new();

    if m >= total_pairs {
        for i in 0..n {
            for j in (i + 1)..n {
                if let Ok(l) = line_through(points[i], points[j]) {
                    lines.push(l);
                }
            }
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut seen = std::collections::HashSet::with_capacity(m * 2);
        let mut attempts = 0usize;
        let max_attempts = 100 * m + 10_000;
        while lines.len() < m && attempts < max_attempts {
            attempts += 1;
            let i = rng.random_range(0..n);
            let j = rng.random_range(0..n);
            if i == j {
                continue;
            }
            let key = (i.min(j), i.max(j));
            if !seen.insert(key) {
                continue;
            }
            if let Ok(l) = line_through(points[key.0], points[key.1]) {
                lines.push(l);
            }
        }
    }

    if lines.is_empty() {
        return Err(Error::DegenerateInput(
            "all candidate point pairs are coincident".into(),
        ));
    }
    Ok(HypothesisSet { lines, tau })
}

/// Preference of one point against every hypothesis: `exp(-d/tau)` when the
/// distance is strictly below tau, otherwise 0.
pub fn preference(point: Point2, hyps: &HypothesisSet) -> PreferenceVector {
    let values = hyps
        .lines
        .iter()
        .map(|l| {
            let d = l.distance(point);
            if d < hyps.tau {
                (-d / hyps.tau).exp()
            } else {
                0.0
            }
        })
        .collect();
    PreferenceVector { values }
}

/// Tanimoto distance between two preference vectors, in [0, 1].
pub fn tanimoto(p: &PreferenceVector, q: &PreferenceVector) -> Result<f64> {
    debug_assert_eq!(p.len(), q.len());
    let dot = p.dot(q);
    let denom = p.norm_sq() + q.norm_sq() - dot;
    if denom <= 0.0 {
        return Err(Error::UndefinedDistance);
    }
    Ok((1.0 - dot / denom).clamp(0.0, 1.0))
}

/// Distance used inside the merge loop: all-zero vectors never merge.
fn merge_distance(p: &PreferenceVector, q: &PreferenceVector) -> f64 {
    tanimoto(p, q).unwrap_or(1.0)
}

/// Agglomerative T-linkage clustering.
pub fn tlinkage_cluster(
    points: &[Point2],
    hyps: &HypothesisSet,
    cfg: &TLinkageConfig,
) -> ClusterSet {
    let n = points.len();
    if n == 0 {
        return ClusterSet {
            clusters: Vec::new(),
            outlier_indices: Vec::new(),
            dominant_index: None,
        };
    }

    struct Work {
        indices: Vec<usize>,
        pref: PreferenceVector,
    }

    let mut work: Vec<Option<Work>> = points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            Some(Work {
                indices: vec![i],
                pref: preference(*p, hyps),
            })
        })
        .collect();

    // Cached symmetric distance matrix, updated incrementally on merge.
    let mut dist = vec![1.0f64; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = merge_distance(
                &work[i].as_ref().unwrap().pref,
                &work[j].as_ref().unwrap().pref,
            );
            dist[i * n + j] = d;
            dist[j * n + i] = d;
        }
    }
    let mut active: Vec<usize> = (0..n).collect();

    while active.len() > 1 {
        let mut best = (f64::INFINITY, 0usize, 0usize);
        for (ai, &i) in active.iter().enumerate() {
            for &j in &active[(ai + 1)..] {
                let d = dist[i * n + j];
                if d < best.0 {
                    best = (d, i, j);
                }
            }
        }
        if best.0 >= 1.0 - ORTHOGONALITY_EPS {
            break;
        }
        let (_, i, j) = best;
        let merged = {
            let wj = work[j].take().unwrap();
            let wi = work[i].as_mut().unwrap();
            wi.indices.extend(wj.indices);
            wi.pref = wi.pref.merged_min(&wj.pref);
            &work[i].as_ref().unwrap().pref
        };
        active.retain(|&k| k != j);
        for &k in &active {
            if k == i {
                continue;
            }
            let d = merge_distance(merged, &work[k].as_ref().unwrap().pref);
            dist[i * n + k] = d;
            dist[k * n + i] = d;
        }
    }

    let mut clusters = Vec::new();
    let mut outliers = Vec::new();
    for slot in work.into_iter().flatten() {
        if slot.indices.len() < cfg.min_cluster_size {
            outliers.extend(slot.indices);
        } else {
            let mut indices = slot.indices;
            indices.sort_unstable();
            clusters.push(Cluster {
                point_indices: indices,
                preference: slot.pref,
            });
        }
    }
    outliers.sort_unstable();
    clusters.sort_by_key(|c| c.point_indices[0]);

    let dominant_index = pick_dominant(&clusters, points);
    ClusterSet {
        clusters,
        outlier_indices: outliers,
        dominant_index,
    }
}

/// Largest cluster wins; ties break toward the smallest TLS residual
/// variance, then the lowest first point index.
fn pick_dominant(clusters: &[Cluster], points: &[Point2]) -> Option<usize> {
    let max_len = clusters.iter().map(|c| c.point_indices.len()).max()?;
    let mut best: Option<(f64, usize)> = None;
    for (ci, c) in clusters.iter().enumerate() {
        if c.point_indices.len() != max_len {
            continue;
        }
        let var = residual_variance(c, points);
        match best {
            Some((bv, _)) if bv <= var => {}
            _ => best = Some((var, ci)),
        }
    }
    best.map(|(_, ci)| ci)
}

fn residual_variance(cluster: &Cluster, points: &[Point2]) -> f64 {
    let pts: Vec<Point2> = cluster.point_indices.iter().map(|&i| points[i]).collect();
    match fit_line_tls(&pts) {
        Ok(line) => {
            let res: Vec<f64> = pts.iter().map(|p| line.distance(*p)).collect();
            geometry::population_stats(&res).1
        }
        Err(_) => 0.0,
    }
}

/// Total-least-squares heading of the dominant cluster, in `[0, pi)`.
pub fn dominant_heading(cs: &ClusterSet, points: &[Point2]) -> Result<f64> {
    let idx = cs.dominant_index.ok_or(Error::NoCluster)?;
    let pts: Vec<Point2> = cs.clusters[idx]
        .point_indices
        .iter()
        .map(|&i| points[i])
        .collect();
    Ok(fit_line_tls(&pts)?.heading())
}
