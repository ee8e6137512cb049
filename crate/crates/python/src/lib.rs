//! Python bindings exposing the main types and operations: line fitting,
//! T-linkage clustering, rectangle selection, Hungarian assignment, the
//! scan simulator and the full per-frame pipeline.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use lshape_core::association::{hungarian as solve_assignment, ScoreMatrix};
use lshape_core::config::PipelineConfig;
use lshape_core::geometry::{self, OrientedRect, Point2};
use lshape_core::pipeline;
use lshape_core::rectfit::{self, CriterionKind, RectFitConfig};
use lshape_core::segmentation::{segment_scan, Scan, SegmentationConfig};
use lshape_core::sim::ScenarioSpec;
use lshape_core::tlinkage::{self, PreferenceVector, TLinkageConfig};

fn err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_points(points: Vec<(f64, f64)>) -> Vec<Point2> {
    points.into_iter().map(|(x, y)| Point2::new(x, y)).collect()
}

fn rect_dict<'py>(py: Python<'py>, rect: &OrientedRect) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("heading", rect.heading)?;
    d.set_item(
        "corners",
        rect.corners.iter().map(|c| (c.x, c.y)).collect::<Vec<_>>(),
    )?;
    d.set_item("nearest_corner_index", rect.nearest_corner_index)?;
    let nc = rect.nearest_corner();
    d.set_item("nearest_corner", (nc.x, nc.y))?;
    d.set_item("criterion_score", rect.criterion_score)?;
    d.set_item("min_width_applied", rect.min_width_applied)?;
    Ok(d)
}

fn parse_criterion(name: &str) -> PyResult<CriterionKind> {
    match name {
        "area" => Ok(CriterionKind::Area),
        "closeness" => Ok(CriterionKind::Closeness),
        "variance" => Ok(CriterionKind::Variance),
        other => Err(PyValueError::new_err(format!(
            "unknown search criterion {other:?} (expected area/closeness/variance)"
        ))),
    }
}

/// Total-least-squares line fit. Returns (a, b, c, heading) with the line
/// normalized as a*x + b*y + c = 0 and heading in [0, pi).
#[pyfunction]
fn fit_line_tls(points: Vec<(f64, f64)>) -> PyResult<(f64, f64, f64, f64)> {
    let line = geometry::fit_line_tls(&to_points(points)).map_err(err)?;
    Ok((line.a, line.b, line.c, line.heading()))
}

/// Perpendicular distance from a point to the line (a, b, c).
#[pyfunction]
fn point_line_distance(point: (f64, f64), line: (f64, f64, f64)) -> PyResult<f64> {
    let l = geometry::Line2::new(line.0, line.1, line.2).map_err(err)?;
    Ok(l.distance(Point2::new(point.0, point.1)))
}

/// Tanimoto distance between two preference vectors.
#[pyfunction]
fn tanimoto(p: Vec<f64>, q: Vec<f64>) -> PyResult<f64> {
    if p.len() != q.len() {
        return Err(PyValueError::new_err("length mismatch"));
    }
    tlinkage::tanimoto(
        &PreferenceVector { values: p },
        &PreferenceVector { values: q },
    )
    .map_err(err)
}

type AssignmentTuple = (Vec<(usize, usize)>, Vec<usize>, Vec<usize>);

/// Minimum-cost assignment on a square cost matrix. Returns
/// (pairs, unmatched_rows, unmatched_cols).
#[pyfunction]
fn hungarian(costs: Vec<Vec<f64>>) -> PyResult<AssignmentTuple> {
    let n = costs.len();
    for row in &costs {
        if row.len() != n {
            return Err(PyValueError::new_err("cost matrix must be square"));
        }
    }
    let m = ScoreMatrix::from_rows(costs, 1e12);
    let a = solve_assignment(&m);
    Ok((a.pairs, a.unmatched_tracks, a.unmatched_detections))
}

/// T-linkage clustering of 2D points. Returns a dict with `clusters`
/// (lists of point indices), `outliers` and `dominant_heading`.
#[pyfunction]
#[pyo3(signature = (points, m=200, tau=0.15, min_cluster_size=3, seed=42))]
fn tlinkage_cluster<'py>(
    py: Python<'py>,
    points: Vec<(f64, f64)>,
    m: usize,
    tau: f64,
    min_cluster_size: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let pts = to_points(points);
    let cfg = TLinkageConfig {
        m,
        tau,
        min_cluster_size,
        seed,
    };
    let hyps = tlinkage::sample_hypotheses(&pts, cfg.m, cfg.tau, cfg.seed).map_err(err)?;
    let cs = tlinkage::tlinkage_cluster(&pts, &hyps, &cfg);
    let d = PyDict::new(py);
    d.set_item(
        "clusters",
        cs.clusters
            .iter()
            .map(|c| c.point_indices.clone())
            .collect::<Vec<_>>(),
    )?;
    d.set_item("outliers", cs.outlier_indices.clone())?;
    d.set_item("dominant_index", cs.dominant_index)?;
    d.set_item(
        "dominant_heading",
        tlinkage::dominant_heading(&cs, &pts).ok(),
    )?;
    Ok(d)
}

/// Search-based rectangle fit under one criterion (area/closeness/variance).
#[pyfunction]
#[pyo3(signature = (points, criterion, step_deg=1.0))]
fn search_fit<'py>(
    py: Python<'py>,
    points: Vec<(f64, f64)>,
    criterion: &str,
    step_deg: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = RectFitConfig {
        step_deg,
        ..Default::default()
    };
    let rect = rectfit::search_fit(&to_points(points), parse_criterion(criterion)?, &cfg)
        .map_err(err)?;
    rect_dict(py, &rect)
}

/// Multi-criteria fit: evaluates area, closeness, variance and the
/// T-linkage heading candidate, returning the lowest residual-variance one.
#[pyfunction]
#[pyo3(signature = (points, dominant_points, step_deg=1.0))]
fn best_selection<'py>(
    py: Python<'py>,
    points: Vec<(f64, f64)>,
    dominant_points: Vec<(f64, f64)>,
    step_deg: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = RectFitConfig {
        step_deg,
        ..Default::default()
    };
    let fit = rectfit::best_selection(&to_points(points), &to_points(dominant_points), &cfg)
        .map_err(err)?;
    let d = rect_dict(py, &fit.rect)?;
    d.set_item("criterion", fit.criterion.name())?;
    d.set_item("selection_cost", fit.selection_cost)?;
    Ok(d)
}

/// Count of segments found in a scan given as JSONL scan-record text.
#[pyfunction]
fn segment_scan_json(scan_json: &str) -> PyResult<Vec<Vec<usize>>> {
    let scan = scan_from_json(scan_json)?;
    Ok(segment_scan(&scan, &SegmentationConfig::default())
        .into_iter()
        .map(|s| s.point_indices)
        .collect())
}

/// Simulate a scenario given in the flat key-value format. Returns
/// (scan_jsonl_lines, ground_truth_jsonl_lines).
#[pyfunction]
#[pyo3(signature = (scenario_text, seed=42))]
fn simulate_scenario(scenario_text: &str, seed: u64) -> PyResult<(Vec<String>, Vec<String>)> {
    let spec = ScenarioSpec::from_kv_text(scenario_text).map_err(err)?;
    let (scans, gt) = lshape_core::sim::simulate(&spec, seed).map_err(err)?;
    let scan_lines = scans
        .iter()
        .map(scan_to_json)
        .collect::<PyResult<Vec<_>>>()?;
    let gt_lines = gt
        .frames
        .iter()
        .map(|f| serde_json::to_string(f).map_err(err))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((scan_lines, gt_lines))
}

/// The bundled desk-scale corpus scenario, as scenario-file text.
#[pyfunction]
fn table_i_scenario_text() -> String {
    lshape_core::sim::table_i_scenario().to_kv_string()
}

// Scan JSONL conversion mirrors the records used by the file I/O path.
fn scan_from_json(line: &str) -> PyResult<Scan> {
    #[derive(serde::Deserialize)]
    struct PointRecord {
        x: f64,
        y: f64,
        layer: u8,
        range: f64,
        bearing: f64,
    }
    #[derive(serde::Deserialize)]
    struct ScanRecord {
        frame_id: u64,
        timestamp: f64,
        points: Vec<PointRecord>,
        #[serde(default)]
        labels: Option<Vec<Option<u32>>>,
    }
    let rec: ScanRecord = serde_json::from_str(line).map_err(err)?;
    let points = rec
        .points
        .into_iter()
        .map(|p| lshape_core::ScanPoint {
            pos: Point2::new(p.x, p.y),
            layer: p.layer,
            range: p.range,
            bearing: p.bearing,
        })
        .collect();
    Ok(Scan::new(rec.frame_id, rec.timestamp, points, rec.labels))
}

fn scan_to_json(scan: &Scan) -> PyResult<String> {
    #[derive(serde::Serialize)]
    struct PointRecord {
        x: f64,
        y: f64,
        layer: u8,
        range: f64,
        bearing: f64,
    }
    #[derive(serde::Serialize)]
    struct ScanRecord {
        frame_id: u64,
        timestamp: f64,
        points: Vec<PointRecord>,
        #[serde(skip_serializing_if = "Option::is_none")]
        labels: Option<Vec<Option<u32>>>,
    }
    let rec = ScanRecord {
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
    };
    serde_json::to_string(&rec).map_err(err)
}

/// Stateful detection + tracking pipeline fed one scan (JSONL line) at a
/// time; returns the frame output as a JSON string.
#[pyclass]
struct Pipeline {
    inner: pipeline::Pipeline,
}

#[pymethods]
impl Pipeline {
    #[new]
    #[pyo3(signature = (config_text=None))]
    fn new(config_text: Option<&str>) -> PyResult<Self> {
        let cfg = match config_text {
            Some(text) => PipelineConfig::from_kv_text(text).map_err(err)?,
            None => PipelineConfig::default(),
        };
        Ok(Self {
            inner: pipeline::Pipeline::new(cfg),
        })
    }

    fn mode(&self) -> &'static str {
        self.inner.mode()
    }

    fn process_frame_json(&mut self, scan_json: &str) -> PyResult<String> {
        let scan = scan_from_json(scan_json)?;
        let out = self.inner.process_frame(&scan);
        serde_json::to_string(&out).map_err(err)
    }
}

#[pymodule]
fn lshape(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(fit_line_tls, m)?)?;
    m.add_function(wrap_pyfunction!(point_line_distance, m)?)?;
    m.add_function(wrap_pyfunction!(tanimoto, m)?)?;
    m.add_function(wrap_pyfunction!(hungarian, m)?)?;
    m.add_function(wrap_pyfunction!(tlinkage_cluster, m)?)?;
    m.add_function(wrap_pyfunction!(search_fit, m)?)?;
    m.add_function(wrap_pyfunction!(best_selection, m)?)?;
    m.add_function(wrap_pyfunction!(segment_scan_json, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(table_i_scenario_text, m)?)?;
    m.add_class::<Pipeline>()?;
    Ok(())
}
