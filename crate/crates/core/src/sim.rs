//! Ray-casting multi-layer 2D LIDAR simulator.
//!
//! Casts rays from a single merged 360-degree sensor at the origin against
//! moving rectangular vehicle footprints, honoring occlusion, and emits
//! labeled scans plus per-frame ground truth. Layers differ by independent
//! range noise and per-frame bearing jitter, which reproduces the
//! cross-layer overlap artifacts of stacked mirrors.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::segmentation::{Scan, ScanPoint};
use crate::tracking::ModelKind;

/// Minimum labeled hits on each of two edge classes to call a view an
/// L-shape; below that the dominant class names the view.
const VIEW_MIN_HITS: usize = 3;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SensorSpec {
    /// Angular resolution in radians.
    pub angular_res: f64,
    pub max_range: f64,
    pub layers: u8,
    /// Gaussian range noise sigma (meters).
    pub noise_sigma: f64,
    /// Fraction of returns replaced by a uniform random range.
    pub outlier_rate: f64,
    /// Per-layer per-frame bearing offset, uniform in +/- this value (radians).
    pub bearing_jitter: f64,
}

impl Default for SensorSpec {
    fn default() -> Self {
        Self {
            angular_res: 0.25f64.to_radians(),
            max_range: 50.0,
            layers: 4,
            noise_sigma: 0.05,
            outlier_rate: 0.02,
            bearing_jitter: 0.1f64.to_radians(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum MotionSpec {
    Stationary,
    ConstVelocity { vx: f64, vy: f64 },
    ConstAcceleration { vx: f64, vy: f64, ax: f64, ay: f64 },
}

impl MotionSpec {
    pub fn model_kind(&self) -> ModelKind {
        match self {
            MotionSpec::Stationary => ModelKind::Stationary,
            MotionSpec::ConstVelocity { .. } => ModelKind::ConstVelocity,
            MotionSpec::ConstAcceleration { .. } => ModelKind::ConstAcceleration,
        }
    }

    pub fn is_moving(&self) -> bool {
        match self {
            MotionSpec::Stationary => false,
            MotionSpec::ConstVelocity { vx, vy } => vx.hypot(*vy) > 1e-9,
            MotionSpec::ConstAcceleration { vx, vy, ax, ay } => {
                vx.hypot(*vy) > 1e-9 || ax.hypot(*ay) > 1e-9
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VehicleSpec {
    pub length: f64,
    pub width: f64,
    /// Spawn pose: center position and body heading (radians).
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub motion: MotionSpec,
    pub spawn_time: f64,
    pub despawn_time: Option<f64>,
}

impl VehicleSpec {
    pub fn active_at(&self, t: f64) -> bool {
        t >= self.spawn_time && self.despawn_time.map(|d| t < d).unwrap_or(true)
    }

    /// Closed-form pose under the declared motion model.
    pub fn pose_at(&self, t: f64) -> (f64, f64, f64) {
        let rel = t - self.spawn_time;
        match self.motion {
            MotionSpec::Stationary => (self.x, self.y, self.theta),
            MotionSpec::ConstVelocity { vx, vy } => {
                (self.x + vx * rel, self.y + vy * rel, self.theta)
            }
            MotionSpec::ConstAcceleration { vx, vy, ax, ay } => (
                self.x + vx * rel + 0.5 * ax * rel * rel,
                self.y + vy * rel + 0.5 * ay * rel * rel,
                self.theta,
            ),
        }
    }

    /// Footprint corners, counter-clockwise. Edges 0-1 and 2-3 are the long
    /// sides, 1-2 the front bumper and 3-0 the rear bumper.
    pub fn corners_at(&self, t: f64) -> [Point2; 4] {
        let (cx, cy, theta) = self.pose_at(t);
        footprint_corners(cx, cy, theta, self.length, self.width)
    }
}

pub fn footprint_corners(cx: f64, cy: f64, theta: f64, length: f64, width: f64) -> [Point2; 4] {
    let (s, c) = theta.sin_cos();
    let (l2, w2) = (length / 2.0, width / 2.0);
    let dir = Point2::new(c, s);
    let perp = Point2::new(-s, c);
    let at = |a: f64, b: f64| {
        Point2::new(cx + a * dir.x + b * perp.x, cy + a * dir.y + b * perp.y)
    };
    [
        at(-l2, -w2),
        at(l2, -w2),
        at(l2, w2),
        at(-l2, w2),
    ]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub duration: f64,
    pub scan_rate: f64,
    pub sensor: SensorSpec,
    pub vehicles: Vec<VehicleSpec>,
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, why: &str| {
            Err(Error::InvalidSpec(format!("{key}: {why}")))
        };
        if self.duration.is_nan() || self.duration <= 0.0 {
            return bad("duration", "must be > 0");
        }
        if self.scan_rate.is_nan() || self.scan_rate <= 0.0 {
            return bad("scan_rate", "must be > 0");
        }
        if self.sensor.angular_res.is_nan() || self.sensor.angular_res <= 0.0 {
            return bad("sensor.angular_res_deg", "must be > 0");
        }
        if self.sensor.max_range.is_nan() || self.sensor.max_range <= 0.0 {
            return bad("sensor.max_range", "must be > 0");
        }
        if self.sensor.layers == 0 {
            return bad("sensor.layers", "must be >= 1");
        }
        if self.sensor.noise_sigma < 0.0 {
            return bad("sensor.noise_sigma", "must be >= 0");
        }
        if !(0.0..1.0).contains(&self.sensor.outlier_rate) {
            return bad("sensor.outlier_rate", "must be in [0, 1)");
        }
        if self.sensor.bearing_jitter < 0.0 {
            return bad("sensor.bearing_jitter_deg", "must be >= 0");
        }
        for (i, v) in self.vehicles.iter().enumerate() {
            if v.length.is_nan() || v.length <= 0.0 {
                return bad(&format!("vehicle.{i}.length"), "must be > 0");
            }
            if v.width.is_nan() || v.width <= 0.0 {
                return bad(&format!("vehicle.{i}.width"), "must be > 0");
            }
            if let Some(d) = v.despawn_time {
                if d <= v.spawn_time {
                    return bad(&format!("vehicle.{i}.despawn_time"), "must exceed spawn_time");
                }
            }
        }
        Ok(())
    }

    pub fn frame_count(&self) -> usize {
        (self.duration * self.scan_rate).round() as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViewType {
    LShape,
    Side,
    Rear,
}

/// Per-frame ground truth for one observed vehicle.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GtVehicle {
    pub id: u32,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub length: f64,
    pub width: f64,
    pub corners: [Point2; 4],
    pub nearest_corner: Point2,
    pub view: ViewType,
    pub motion: ModelKind,
    pub moving: bool,
    pub n_points: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GtFrame {
    pub frame_id: u64,
    pub timestamp: f64,
    pub vehicles: Vec<GtVehicle>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct GroundTruth {
    pub frames: Vec<GtFrame>,
}

/// Ray from the origin against a segment; returns the hit distance.
fn ray_segment(dir: Point2, p: Point2, q: Point2) -> Option<f64> {
    let e = q - p;
    let det = e.x * dir.y - e.y * dir.x;
    if det.abs() < 1e-15 {
        return None;
    }
    let t = (e.x * p.y - e.y * p.x) / det;
    let s = (dir.x * p.y - dir.y * p.x) / det;
    if t > 1e-9 && (0.0..=1.0).contains(&s) {
        Some(t)
    } else {
        None
    }
}

struct ActiveVehicle {
    id: u32,
    corners: [Point2; 4],
}

/// Simulate a scenario into labeled scans and per-frame ground truth.
pub fn simulate(spec: &ScenarioSpec, seed: u64) -> Result<(Vec<Scan>, GroundTruth)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = if spec.sensor.noise_sigma > 0.0 {
        Some(Normal::new(0.0, spec.sensor.noise_sigma).expect("validated sigma"))
    } else {
        None
    };
    let n_frames = spec.frame_count();
    let n_rays = (std::f64::consts::TAU / spec.sensor.angular_res).round() as usize;

    let mut scans = Vec::with_capacity(n_frames);
    let mut gt = GroundTruth::default();

    for frame in 0..n_frames {
        let t = frame as f64 / spec.scan_rate;
        let active: Vec<ActiveVehicle> = spec
            .vehicles
            .iter()
            .enumerate()
            .filter(|(_, v)| v.active_at(t))
            .map(|(id, v)| ActiveVehicle {
                id: id as u32,
                corners: v.corners_at(t),
            })
            .collect();

        let mut points = Vec::new();
        let mut labels = Vec::new();
        // Per vehicle: (long-edge hits, short-edge hits, labeled points).
        let mut hits = vec![(0usize, 0usize, 0usize); spec.vehicles.len()];

        for layer in 0..spec.sensor.layers {
            let jitter = if spec.sensor.bearing_jitter > 0.0 {
                rng.random_range(-spec.sensor.bearing_jitter..spec.sensor.bearing_jitter)
            } else {
                0.0
            };
            for ray in 0..n_rays {
                let bearing =
                    -std::f64::consts::PI + ray as f64 * spec.sensor.angular_res + jitter;
                let dir = Point2::new(bearing.cos(), bearing.sin());
                let mut best: Option<(f64, u32, usize)> = None;
                for v in &active {
                    for edge in 0..4 {
                        let p = v.corners[edge];
                        let q = v.corners[(edge + 1) % 4];
                        if let Some(d) = ray_segment(dir, p, q) {
                            if best.map(|(bd, _, _)| d < bd).unwrap_or(true) {
                                best = Some((d, v.id, edge));
                            }
                        }
                    }
                }
                let Some((dist, vid, edge)) = best else {
                    continue;
                };
                if dist > spec.sensor.max_range {
                    continue;
                }
                let h = &mut hits[vid as usize];
                if edge % 2 == 0 {
                    h.0 += 1;
                } else {
                    h.1 += 1;
                }
                let is_outlier =
                    spec.sensor.outlier_rate > 0.0 && rng.random::<f64>() < spec.sensor.outlier_rate;
                let (range, label) = if is_outlier {
                    (rng.random_range(1e-3..spec.sensor.max_range), None)
                } else {
                    let n = noise.map(|d| d.sample(&mut rng)).unwrap_or(0.0);
                    ((dist + n).max(1e-3), Some(vid))
                };
                if label.is_some() {
                    h.2 += 1;
                }
                points.push(ScanPoint {
                    pos: Point2::new(range * bearing.cos(), range * bearing.sin()),
                    layer,
                    range,
                    bearing,
                });
                labels.push(label);
            }
        }

        let mut frame_vehicles = Vec::new();
        for (vid, v) in spec.vehicles.iter().enumerate() {
            let (long_hits, short_hits, labeled) = hits[vid];
            if long_hits + short_hits == 0 {
                continue;
            }
            let (x, y, theta) = v.pose_at(t);
            let corners = v.corners_at(t);
            let nearest_corner = *corners
                .iter()
                .min_by(|a, b| a.norm().total_cmp(&b.norm()))
                .unwrap();
            let view = if long_hits >= VIEW_MIN_HITS && short_hits >= VIEW_MIN_HITS {
                ViewType::LShape
            } else if long_hits >= short_hits {
                ViewType::Side
            } else {
                ViewType::Rear
            };
            frame_vehicles.push(GtVehicle {
                id: vid as u32,
                x,
                y,
                theta,
                length: v.length,
                width: v.width,
                corners,
                nearest_corner,
                view,
                motion: v.motion.model_kind(),
                moving: v.motion.is_moving(),
                n_points: labeled,
            });
        }

        scans.push(Scan::new(frame as u64, t, points, Some(labels)));
        gt.frames.push(GtFrame {
            frame_id: frame as u64,
            timestamp: t,
            vehicles: frame_vehicles,
        });
    }

    Ok((scans, gt))
}

fn car(x: f64, y: f64, theta_deg: f64, motion: MotionSpec) -> VehicleSpec {
    VehicleSpec {
        length: 4.5,
        width: 1.8,
        x,
        y,
        theta: theta_deg.to_radians(),
        motion,
        spawn_time: 0.0,
        despawn_time: None,
    }
}

fn cv_along(speed: f64, heading_deg: f64) -> MotionSpec {
    let h = heading_deg.to_radians();
    MotionSpec::ConstVelocity {
        vx: speed * h.cos(),
        vy: speed * h.sin(),
    }
}

/// Desk-scale corpus mirroring the dataset composition at roughly 1/10
/// scale: ~535 observations over 137 frames from 6 vehicles with ~94%
/// L-shape, ~2% side-only and ~4% rear-only views.
pub fn table_i_scenario() -> ScenarioSpec {
    let mut vehicles = vec![
        // Two stationary and two outbound movers at oblique aspects: L-views.
        car(14.0, 10.0, 75.0, MotionSpec::Stationary),
        car(-10.0, -7.0, 20.0, MotionSpec::Stationary),
        car(-14.0, 11.0, 116.8, cv_along(3.2, 116.8)),
        car(12.0, -9.0, -16.9, cv_along(3.0, -16.9)),
        // Broadside above the sensor: pure side view, short-lived.
        car(0.0, 12.0, 0.0, MotionSpec::Stationary),
        // Dead ahead driving away: pure rear view, short-lived.
        car(15.0, 0.0, 0.0, cv_along(5.0, 0.0)),
    ];
    vehicles[2].despawn_time = Some(8.0); // 101 frames
    vehicles[3].despawn_time = Some(10.08); // 126 frames
    vehicles[4].despawn_time = Some(0.85); // 11 frames
    vehicles[5].despawn_time = Some(1.57); // 20 frames
    ScenarioSpec {
        duration: 10.96,
        scan_rate: 12.5,
        sensor: SensorSpec::default(),
        vehicles,
    }
}

pub fn corpus_table_i(seed: u64) -> (Vec<Scan>, GroundTruth) {
    simulate(&table_i_scenario(), seed).expect("table-i scenario is valid")
}

/// Mixed corpus for trajectory experiments: three stationary and three
/// moving vehicles (two constant-velocity, one constant-acceleration), all
/// present for the whole run.
pub fn mixed_scenario() -> ScenarioSpec {
    ScenarioSpec {
        duration: 6.4,
        scan_rate: 12.5,
        sensor: SensorSpec::default(),
        vehicles: vec![
            car(14.0, 10.0, 75.0, MotionSpec::Stationary),
            car(-10.0, -7.0, 20.0, MotionSpec::Stationary),
            car(0.0, 12.0, 40.0, MotionSpec::Stationary),
            car(-14.0, 11.0, 116.8, cv_along(3.2, 116.8)),
            car(12.0, -9.0, -16.9, cv_along(3.0, -16.9)),
            car(
                2.0,
                -16.0,
                10.0,
                MotionSpec::ConstAcceleration {
                    vx: 1.97,
                    vy: 0.35,
                    ax: -0.15,
                    ay: 0.1,
                },
            ),
        ],
    }
}

/// Three well-separated non-crossing vehicles for identity experiments.
pub fn three_vehicle_scenario() -> ScenarioSpec {
    ScenarioSpec {
        duration: 5.12,
        scan_rate: 12.5,
        sensor: SensorSpec::default(),
        vehicles: vec![
            car(14.0, 10.0, 75.0, MotionSpec::Stationary),
            car(-14.0, 11.0, 116.8, cv_along(3.2, 116.8)),
            car(12.0, -9.0, -16.9, cv_along(3.0, -16.9)),
        ],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quiet_sensor() -> SensorSpec {
        SensorSpec {
            noise_sigma: 0.0,
            outlier_rate: 0.0,
            bearing_jitter: 0.0,
            ..Default::default()
        }
    }

    #[test]
    fn broadside_vehicle_is_side_view() {
        let spec = ScenarioSpec {
            duration: 0.1,
            scan_rate: 10.0,
            sensor: quiet_sensor(),
            vehicles: vec![car(0.0, 12.0, 0.0, MotionSpec::Stationary)],
        };
        let (scans, gt) = simulate(&spec, 1).unwrap();
        assert_eq!(scans.len(), 1);
        let v = &gt.frames[0].vehicles[0];
        assert_eq!(v.view, ViewType::Side);
        // Every return lies on the near long edge y = 12 - 0.9.
        for p in &scans[0].points {
            assert!((p.pos.y - 11.1).abs() < 1e-9, "y = {}", p.pos.y);
        }
    }

    #[test]
    fn oblique_vehicle_is_l_view_on_two_edges() {
        let spec = ScenarioSpec {
            duration: 0.1,
            scan_rate: 10.0,
            sensor: quiet_sensor(),
            vehicles: vec![car(10.0, 8.0, 75.0, MotionSpec::Stationary)],
        };
        let (scans, gt) = simulate(&spec, 1).unwrap();
        let v = &gt.frames[0].vehicles[0];
        assert_eq!(v.view, ViewType::LShape);
        // Noiseless points sit exactly on the footprint boundary.
        let corners = v.corners;
        for p in &scans[0].points {
            let mut min_d = f64::INFINITY;
            for e in 0..4 {
                let (a, b) = (corners[e], corners[(e + 1) % 4]);
                min_d = min_d.min(point_segment_distance(p.pos, a, b));
            }
            assert!(min_d < 1e-9, "point {:?} off boundary by {min_d}", p.pos);
        }
    }

    fn point_segment_distance(p: Point2, a: Point2, b: Point2) -> f64 {
        let e = b - a;
        let len_sq = e.x * e.x + e.y * e.y;
        let t = (((p.x - a.x) * e.x + (p.y - a.y) * e.y) / len_sq).clamp(0.0, 1.0);
        p.dist(Point2::new(a.x + t * e.x, a.y + t * e.y))
    }

    #[test]
    fn rear_on_vehicle_is_rear_view() {
        let spec = ScenarioSpec {
            duration: 0.1,
            scan_rate: 10.0,
            sensor: quiet_sensor(),
            vehicles: vec![car(15.0, 0.0, 0.0, MotionSpec::Stationary)],
        };
        let (_, gt) = simulate(&spec, 1).unwrap();
        assert_eq!(gt.frames[0].vehicles[0].view, ViewType::Rear);
    }

    #[test]
    fn determinism_bit_identical() {
        let spec = table_i_scenario();
        let (a, _) = simulate(&spec, 99).unwrap();
        let (b, _) = simulate(&spec, 99).unwrap();
        let ser = |scans: &[Scan]| serde_json::to_string(scans).unwrap();
        assert_eq!(ser(&a), ser(&b));
    }

    #[test]
    fn no_return_beyond_range_or_inside_footprint() {
        let spec = ScenarioSpec {
            duration: 0.4,
            scan_rate: 10.0,
            sensor: quiet_sensor(),
            vehicles: vec![
                car(10.0, 8.0, 75.0, MotionSpec::Stationary),
                car(-9.0, -6.0, 30.0, MotionSpec::Stationary),
            ],
        };
        let (scans, _) = simulate(&spec, 5).unwrap();
        for scan in &scans {
            for p in &scan.points {
                assert!(p.range <= spec.sensor.max_range + 1e-9);
                for v in &spec.vehicles {
                    let c = v.corners_at(scan.timestamp);
                    assert!(
                        !strictly_inside(p.pos, &c),
                        "return {:?} inside footprint",
                        p.pos
                    );
                }
            }
        }
    }

    fn strictly_inside(p: Point2, corners: &[Point2; 4]) -> bool {
        // CCW convex polygon: inside iff left of every edge by a margin.
        (0..4).all(|i| {
            let a = corners[i];
            let b = corners[(i + 1) % 4];
            let cross = (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
            cross > 1e-9
        })
    }

    #[test]
    fn occlusion_blocks_hidden_vehicle() {
        // The near vehicle fully covers the far one in bearing.
        let spec = ScenarioSpec {
            duration: 0.1,
            scan_rate: 10.0,
            sensor: quiet_sensor(),
            vehicles: vec![
                car(8.0, 0.0, 90.0, MotionSpec::Stationary),
                car(16.0, 0.0, 90.0, MotionSpec::Stationary),
            ],
        };
        let (scans, gt) = simulate(&spec, 1).unwrap();
        let labels = scans[0].labels.as_ref().unwrap();
        assert!(labels.iter().all(|l| *l != Some(1)));
        assert_eq!(gt.frames[0].vehicles.len(), 1);
        assert_eq!(gt.frames[0].vehicles[0].id, 0);
    }

    #[test]
    fn table_i_composition() {
        let (_, gt) = corpus_table_i(42);
        assert_eq!(gt.frames.len(), 137);
        let mut counts = std::collections::BTreeMap::new();
        let mut total = 0usize;
        for f in &gt.frames {
            for v in &f.vehicles {
                *counts.entry(v.view).or_insert(0usize) += 1;
                total += 1;
            }
        }
        let frac = |v: ViewType| *counts.get(&v).unwrap_or(&0) as f64 / total as f64;
        assert!(
            (total as f64 - 535.0).abs() <= 53.5,
            "total observations {total}"
        );
        assert!((frac(ViewType::LShape) - 0.94).abs() <= 0.02, "L {}", frac(ViewType::LShape));
        assert!((frac(ViewType::Side) - 0.02).abs() <= 0.02, "side {}", frac(ViewType::Side));
        assert!((frac(ViewType::Rear) - 0.04).abs() <= 0.02, "rear {}", frac(ViewType::Rear));

        // Every tracker observed in >= 2 consecutive frames.
        let mut by_vehicle: std::collections::BTreeMap<u32, Vec<u64>> = Default::default();
        for f in &gt.frames {
            for v in &f.vehicles {
                by_vehicle.entry(v.id).or_default().push(f.frame_id);
            }
        }
        assert_eq!(by_vehicle.len(), 6);
        for (id, frames) in by_vehicle {
            let consecutive = frames.windows(2).any(|w| w[1] == w[0] + 1);
            assert!(consecutive, "vehicle {id} never seen in consecutive frames");
        }
    }
}
