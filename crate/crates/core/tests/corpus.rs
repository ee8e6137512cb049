//! Corpus-level properties that tie several stages together on simulated
//! data: per-criterion heading quality, clustering robustness under
//! outliers, and corner-switch continuity on a drive-by.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use lshape_core::config::PipelineConfig;
use lshape_core::eval;
use lshape_core::geometry::{wrap_signed, Point2};
use lshape_core::pipeline::process_scans;
use lshape_core::sim;
use lshape_core::tlinkage::{dominant_heading, sample_hypotheses, tlinkage_cluster, TLinkageConfig};

/// L-shape fixture with perpendicular Gaussian noise and a fraction of
/// uniform outliers inside the bounding box.
fn noisy_l_shape(
    heading: f64,
    sigma: f64,
    outlier_fraction: f64,
    rng: &mut ChaCha8Rng,
) -> Vec<Point2> {
    let corner = Point2::new(8.0, 5.0);
    let (s, c) = heading.sin_cos();
    let (long, short) = (4.5, 1.8);
    let (n_long, n_short) = (45usize, 18usize);
    let noise = Normal::new(0.0, sigma).unwrap();
    let mut pts = Vec::new();
    for i in 0..n_long {
        let t = (i as f64 + 0.5) / n_long as f64 * long;
        let n = if sigma > 0.0 { noise.sample(rng) } else { 0.0 };
        pts.push(Point2::new(
            corner.x + t * c - n * s,
            corner.y + t * s + n * c,
        ));
    }
    for i in 0..n_short {
        let t = (i as f64 + 0.5) / n_short as f64 * short;
        let n = if sigma > 0.0 { noise.sample(rng) } else { 0.0 };
        pts.push(Point2::new(
            corner.x - t * s + n * c,
            corner.y + t * c + n * s,
        ));
    }
    let n_inliers = pts.len() as f64;
    let n_outliers = (outlier_fraction / (1.0 - outlier_fraction) * n_inliers).round() as usize;
    for _ in 0..n_outliers {
        let a = rng.random_range(0.0..long);
        let b = rng.random_range(0.0..short);
        pts.push(Point2::new(
            corner.x + a * c - b * s,
            corner.y + a * s + b * c,
        ));
    }
    pts
}

#[test]
fn tlinkage_robust_to_outliers_across_seeds() {
    let cfg = TLinkageConfig::default();
    let tol = 3f64.to_radians();
    let mut ok = 0;
    let n_seeds = 100;
    for seed in 0..n_seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let heading = rng.random_range(0.0..std::f64::consts::PI);
        let pts = noisy_l_shape(heading, 0.05, 0.20, &mut rng);
        let hyps = sample_hypotheses(&pts, cfg.m, cfg.tau, seed ^ 0xABCD).unwrap();
        let cs = tlinkage_cluster(&pts, &hyps, &cfg);
        let Ok(est) = dominant_heading(&cs, &pts) else {
            continue;
        };
        let err = wrap_signed(est - heading, std::f64::consts::PI).abs();
        if err <= tol {
            ok += 1;
        }
    }
    assert!(ok >= 95, "only {ok}/{n_seeds} fixtures within 3 degrees");
}

/// Clean labeled corpus (no outliers): best selection must not lose to any
/// individual criterion in mean absolute heading error.
#[test]
fn best_selection_no_worse_than_each_criterion() {
    let mut scenario = sim::mixed_scenario();
    scenario.sensor.outlier_rate = 0.0;
    scenario.duration = 4.0;
    let (scans, gt) = sim::simulate(&scenario, 17).unwrap();
    let results = process_scans(PipelineConfig::default(), &scans);
    let errors = eval::heading_errors_by_method(&results, &gt).unwrap();
    let mae = |m: &str| {
        let errs = &errors[m];
        assert!(!errs.is_empty(), "no samples for {m}");
        errs.iter().map(|e| e.abs()).sum::<f64>() / errs.len() as f64
    };
    let best = mae("best_selection");
    for method in ["area", "closeness", "variance", "tlinkage"] {
        assert!(
            best <= mae(method) + 1e-9,
            "best {best:.3} vs {method} {:.3}",
            mae(method)
        );
    }
    assert!(best < 2.0, "best selection MAE {best:.3} deg");
}

/// Drive-by in which the nearest corner identity flips; the compensated
/// track must stay continuous (no jump beyond twice the inter-frame motion).
#[test]
fn drive_by_corner_flip_stays_continuous() {
    let speed = 6.0;
    let scenario = sim::ScenarioSpec {
        duration: 5.0,
        scan_rate: 12.5,
        sensor: sim::SensorSpec::default(),
        vehicles: vec![sim::VehicleSpec {
            length: 4.5,
            width: 1.8,
            x: -15.0,
            y: 6.0,
            theta: 0.0,
            motion: sim::MotionSpec::ConstVelocity { vx: speed, vy: 0.0 },
            spawn_time: 0.0,
            despawn_time: None,
        }],
    };
    let (scans, gt) = sim::simulate(&scenario, 23).unwrap();

    // The fixture must actually exercise a nearest-corner identity flip.
    let mut flips = 0;
    for w in gt.frames.windows(2) {
        let (a, b) = (&w[0].vehicles[0], &w[1].vehicles[0]);
        let step = ((b.x - a.x).powi(2) + (b.y - a.y).powi(2)).sqrt();
        if a.nearest_corner.dist(b.nearest_corner) > 3.0 * step {
            flips += 1;
        }
    }
    assert!(flips >= 1, "fixture produced no corner flip");

    let results = process_scans(PipelineConfig::default(), &scans);
    let dt = 0.08;
    let max_step = 2.0 * speed * dt;
    let mut corners: Vec<(u64, Point2)> = Vec::new();
    for frame in &results {
        for t in &frame.tracks {
            corners.push((t.id, t.corner));
        }
    }
    let main_id = corners
        .iter()
        .map(|(id, _)| *id)
        .fold(std::collections::BTreeMap::<u64, usize>::new(), |mut m, id| {
            *m.entry(id).or_default() += 1;
            m
        })
        .into_iter()
        .max_by_key(|&(_, n)| n)
        .unwrap()
        .0;
    let track: Vec<Point2> = corners
        .iter()
        .filter(|(id, _)| *id == main_id)
        .map(|(_, p)| *p)
        .collect();
    assert!(track.len() > 40);
    for w in track.windows(2) {
        let jump = w[0].dist(w[1]);
        assert!(
            jump <= max_step,
            "trajectory jump {jump:.2} m exceeds {max_step:.2} m"
        );
    }
}

#[test]
fn id_consistency_on_three_vehicle_corpus() {
    let (scans, gt) = sim::simulate(&sim::three_vehicle_scenario(), 31).unwrap();
    let results = process_scans(PipelineConfig::default(), &scans);
    assert_eq!(eval::id_consistency(&results, &gt), 1.0);
}
