//! Oriented rectangle fitting.
//!
//! Three search criteria (area, closeness, variance) scan headings over
//! `[0, pi/2)`; a fourth candidate takes its heading from the T-linkage
//! dominant cluster. The winner is the candidate with the smallest variance
//! of absolute residuals against the dominant cluster's support line.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    canonical_heading, fit_line_tls, population_stats, wrap_signed, OrientedRect, Point2,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriterionKind {
    Area,
    Closeness,
    Variance,
    #[serde(rename = "tlinkage")]
    TLinkage,
}

impl CriterionKind {
    pub const ALL: [CriterionKind; 4] = [
        CriterionKind::TLinkage,
        CriterionKind::Area,
        CriterionKind::Closeness,
        CriterionKind::Variance,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            CriterionKind::Area => "area",
            CriterionKind::Closeness => "closeness",
            CriterionKind::Variance => "variance",
            CriterionKind::TLinkage => "tlinkage",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RectFitConfig {
    /// Heading search step in degrees.
    pub step_deg: f64,
    /// Minimum rectangle width; degenerate (collinear) clusters are widened
    /// to this so downstream corner tracking never sees a zero-area box.
    pub min_width: f64,
    /// Clamp for the closeness criterion's inverse distances.
    pub closeness_dmin: f64,
}

impl Default for RectFitConfig {
    fn default() -> Self {
        Self {
            step_deg: 1.0,
            min_width: 0.1,
            closeness_dmin: 0.01,
        }
    }
}

/// A fitted rectangle with the criterion that produced it and its
/// residual-variance selection cost.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitResult {
    pub rect: OrientedRect,
    pub criterion: CriterionKind,
    pub selection_cost: f64,
}

/// One of the four candidates considered by [`best_selection`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CandidateFit {
    pub criterion: CriterionKind,
    pub rect: OrientedRect,
    pub selection_cost: f64,
}

fn project_bounds(points: &[Point2], heading: f64) -> (f64, f64, f64, f64) {
    let (s, c) = heading.sin_cos();
    let (mut min_u, mut max_u) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut min_v, mut max_v) = (f64::INFINITY, f64::NEG_INFINITY);
    for p in points {
        let u = c * p.x + s * p.y;
        let v = -s * p.x + c * p.y;
        min_u = min_u.min(u);
        max_u = max_u.max(u);
        min_v = min_v.min(v);
        max_v = max_v.max(v);
    }
    (min_u, max_u, min_v, max_v)
}

/// Widen any extent below `min_width`, growing away from the sensor at the
/// origin (which projects to (0, 0) in the rotated frame).
fn widen_bounds(
    mut min_u: f64,
    mut max_u: f64,
    mut min_v: f64,
    mut max_v: f64,
    min_width: f64,
) -> (f64, f64, f64, f64, bool) {
    let mut applied = false;
    let mut widen = |lo: &mut f64, hi: &mut f64| {
        if *hi - *lo >= min_width {
            return;
        }
        applied = true;
        if 0.0 <= *lo {
            // Sensor on the low side: push the far bound out.
            *hi = *lo + min_width;
        } else if 0.0 >= *hi {
            *lo = *hi - min_width;
        } else {
            let c = 0.5 * (*lo + *hi);
            *lo = c - 0.5 * min_width;
            *hi = c + 0.5 * min_width;
        }
    };
    widen(&mut min_u, &mut max_u);
    widen(&mut min_v, &mut max_v);
    (min_u, max_u, min_v, max_v, applied)
}

/// Bounding rectangle of the points in the frame rotated by `heading`.
pub fn rect_from_heading(points: &[Point2], heading: f64) -> Result<OrientedRect> {
    if points.is_empty() {
        return Err(Error::DegenerateInput(
            "rectangle needs at least one point".into(),
        ));
    }
    let heading = canonical_heading(heading);
    let (min_u, max_u, min_v, max_v) = project_bounds(points, heading);
    Ok(OrientedRect::from_bounds(heading, min_u, max_u, min_v, max_v))
}

fn rect_with_min_width(points: &[Point2], heading: f64, cfg: &RectFitConfig) -> Result<OrientedRect> {
    if points.is_empty() {
        return Err(Error::DegenerateInput(
            "rectangle needs at least one point".into(),
        ));
    }
    let heading = canonical_heading(heading);
    let (min_u, max_u, min_v, max_v) = project_bounds(points, heading);
    let (min_u, max_u, min_v, max_v, applied) =
        widen_bounds(min_u, max_u, min_v, max_v, cfg.min_width);
    let mut rect = OrientedRect::from_bounds(heading, min_u, max_u, min_v, max_v);
    rect.min_width_applied = applied;
    Ok(rect)
}

fn score_at(points: &[Point2], heading: f64, criterion: CriterionKind, cfg: &RectFitConfig) -> f64 {
    let (s, c) = heading.sin_cos();
    let n = points.len();
    let mut us = Vec::with_capacity(n);
    let mut vs = Vec::with_capacity(n);
    let (mut min_u, mut max_u) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut min_v, mut max_v) = (f64::INFINITY, f64::NEG_INFINITY);
    for p in points {
        let u = c * p.x + s * p.y;
        let v = -s * p.x + c * p.y;
        min_u = min_u.min(u);
        max_u = max_u.max(u);
        min_v = min_v.min(v);
        max_v = max_v.max(v);
        us.push(u);
        vs.push(v);
    }
    match criterion {
        CriterionKind::Area => -((max_u - min_u) * (max_v - min_v)),
        CriterionKind::Closeness => {
            let mut score = 0.0;
            for i in 0..n {
                let du = (max_u - us[i]).min(us[i] - min_u);
                let dv = (max_v - vs[i]).min(vs[i] - min_v);
                score += 1.0 / du.min(dv).max(cfg.closeness_dmin);
            }
            score
        }
        CriterionKind::Variance => {
            let mut du_group = Vec::new();
            let mut dv_group = Vec::new();
            for i in 0..n {
                let du = (max_u - us[i]).min(us[i] - min_u);
                let dv = (max_v - vs[i]).min(vs[i] - min_v);
                if du < dv {
                    du_group.push(du);
                } else {
                    dv_group.push(dv);
                }
            }
            -(population_stats(&du_group).1 + population_stats(&dv_group).1)
        }
        CriterionKind::TLinkage => unreachable!("TLinkage is not a search criterion"),
    }
}

/// Search-based rectangle fit over headings `{0, step, ...} < pi/2`.
///
/// Collinear inputs do not fail: the zero-width box is widened to
/// `cfg.min_width` and flagged.
pub fn search_fit(
    points: &[Point2],
    criterion: CriterionKind,
    cfg: &RectFitConfig,
) -> Result<OrientedRect> {
    if points.is_empty() {
        return Err(Error::DegenerateInput(
            "search fit needs at least one point".into(),
        ));
    }
    if criterion == CriterionKind::TLinkage {
        return Err(Error::DegenerateInput(
            "tlinkage candidate is built from the dominant heading, not a search".into(),
        ));
    }
    let step = cfg.step_deg.to_radians();
    if step.is_nan() || step <= 0.0 || step > std::f64::consts::FRAC_PI_2 {
        return Err(Error::Config(format!(
            "rectfit.step_deg out of range: {}",
            cfg.step_deg
        )));
    }
    let mut best = (f64::NEG_INFINITY, 0.0);
    let mut theta = 0.0;
    while theta < std::f64::consts::FRAC_PI_2 {
        let score = score_at(points, theta, criterion, cfg);
        if score > best.0 {
            best = (score, theta);
        }
        theta += step;
    }
    let mut rect = rect_with_min_width(points, best.1, cfg)?;
    rect.criterion_score = best.0;
    Ok(rect)
}

/// Variance of absolute perpendicular residuals from the dominant points to
/// the rectangle support line matching the dominant heading (the nearer of
/// the two parallel edges).
pub fn selection_cost(rect: &OrientedRect, dominant_points: &[Point2]) -> Result<f64> {
    if dominant_points.len() < 2 {
        return Err(Error::DegenerateInput(
            "selection cost needs at least 2 dominant points".into(),
        ));
    }
    let dom_heading = fit_line_tls(dominant_points)?.heading();
    let lines = rect.support_lines();
    // Edges 0/1 run along `heading`, edges 2/3 along `heading + pi/2`.
    let d_head = wrap_signed(rect.heading - dom_heading, std::f64::consts::PI).abs();
    let d_perp = wrap_signed(
        rect.heading + std::f64::consts::FRAC_PI_2 - dom_heading,
        std::f64::consts::PI,
    )
    .abs();
    let pair = if d_head <= d_perp {
        [&lines[0], &lines[1]]
    } else {
        [&lines[2], &lines[3]]
    };
    let cost = pair
        .iter()
        .map(|line| {
            let res: Vec<f64> = dominant_points.iter().map(|p| line.distance(*p)).collect();
            let (mean, var) = population_stats(&res);
            (mean, var)
        })
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, var)| var)
        .unwrap();
    Ok(cost)
}

/// Evaluate all four candidate rectangles against the dominant cluster.
pub fn evaluate_candidates(
    points: &[Point2],
    dominant_points: &[Point2],
    cfg: &RectFitConfig,
) -> Result<Vec<CandidateFit>> {
    let dom_heading = fit_line_tls(dominant_points)?.heading();
    let mut out = Vec::with_capacity(4);
    for criterion in CriterionKind::ALL {
        let rect = match criterion {
            CriterionKind::TLinkage => rect_with_min_width(points, dom_heading, cfg)?,
            c => search_fit(points, c, cfg)?,
        };
        let cost = selection_cost(&rect, dominant_points)?;
        out.push(CandidateFit {
            criterion,
            rect,
            selection_cost: cost,
        });
    }
    Ok(out)
}

/// Pick the candidate with the smallest selection cost; ties favor the
/// T-linkage candidate (evaluated first).
pub fn best_selection(
    points: &[Point2],
    dominant_points: &[Point2],
    cfg: &RectFitConfig,
) -> Result<FitResult> {
    let candidates = evaluate_candidates(points, dominant_points, cfg)?;
    let mut best = 0;
    for (i, c) in candidates.iter().enumerate() {
        if c.selection_cost < candidates[best].selection_cost {
            best = i;
        }
    }
    let chosen = &candidates[best];
    Ok(FitResult {
        rect: chosen.rect.clone(),
        criterion: chosen.criterion,
        selection_cost: chosen.selection_cost,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn unit_square() -> Vec<Point2> {
        vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(0.0, 1.0),
        ]
    }

    fn l_shape(heading: f64, long: f64, short: f64, n_long: usize, n_short: usize) -> Vec<Point2> {
        let (s, c) = heading.sin_cos();
        let (ps, pc) = (heading + std::f64::consts::FRAC_PI_2).sin_cos();
        let corner = Point2::new(6.0, 4.0);
        let mut pts = Vec::new();
        for i in 0..n_long {
            let t = (i as f64 + 0.5) / n_long as f64 * long;
            pts.push(Point2::new(corner.x + t * c, corner.y + t * s));
        }
        for i in 0..n_short {
            let t = (i as f64 + 0.5) / n_short as f64 * short;
            pts.push(Point2::new(corner.x + t * pc, corner.y + t * ps));
        }
        pts
    }

    #[test]
    fn area_fit_unit_square() {
        let rect = search_fit(&unit_square(), CriterionKind::Area, &RectFitConfig::default())
            .unwrap();
        let mod90 = rect.heading % std::f64::consts::FRAC_PI_2;
        assert!(mod90 < 1e-9 || (std::f64::consts::FRAC_PI_2 - mod90) < 1e-9);
        assert_abs_diff_eq!(rect.area(), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn area_fit_rotated_square() {
        let phi = 30f64.to_radians();
        let pts: Vec<Point2> = unit_square().iter().map(|p| p.rotated(phi)).collect();
        let cfg = RectFitConfig::default();
        let rect = search_fit(&pts, CriterionKind::Area, &cfg).unwrap();
        let err = wrap_signed(rect.heading - phi, std::f64::consts::FRAC_PI_2).abs();
        assert!(err <= cfg.step_deg.to_radians() + 1e-9, "err {err}");
    }

    #[test]
    fn closeness_recovers_l_shape_sides() {
        let heading = 20f64.to_radians();
        let pts = l_shape(heading, 4.5, 1.8, 45, 18);
        let cfg = RectFitConfig::default();
        let rect = search_fit(&pts, CriterionKind::Closeness, &cfg).unwrap();
        let err = wrap_signed(rect.heading - heading, std::f64::consts::FRAC_PI_2).abs();
        assert!(err <= cfg.step_deg.to_radians() + 1e-9, "err {err}");
    }

    #[test]
    fn rect_from_heading_unit_square() {
        let rect = rect_from_heading(&unit_square(), 0.0).unwrap();
        assert_abs_diff_eq!(rect.corners[0].x, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(rect.corners[0].y, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(rect.corners[2].x, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(rect.corners[2].y, 1.0, epsilon = 1e-12);
        assert_eq!(rect.nearest_corner_index, 0);
    }

    #[test]
    fn rect_from_heading_single_point_degenerate() {
        let p = Point2::new(3.0, -2.0);
        let rect = rect_from_heading(&[p], 0.7).unwrap();
        assert_abs_diff_eq!(rect.area(), 0.0, epsilon = 1e-18);
        for c in &rect.corners {
            assert_abs_diff_eq!(c.x, p.x, epsilon = 1e-12);
            assert_abs_diff_eq!(c.y, p.y, epsilon = 1e-12);
        }
    }

    #[test]
    fn rect_from_heading_diagonal_circumscribes() {
        let rect = rect_from_heading(&unit_square(), std::f64::consts::FRAC_PI_4).unwrap();
        let (l, w) = rect.edge_lengths();
        let sqrt2 = 2f64.sqrt();
        assert_abs_diff_eq!(l, sqrt2, epsilon = 1e-9);
        assert_abs_diff_eq!(w, sqrt2, epsilon = 1e-9);
    }

    #[test]
    fn selection_cost_examples() {
        // Points exactly on a support line: zero residual variance.
        let pts: Vec<Point2> = (0..10)
            .map(|i| Point2::new(2.0 + i as f64 * 0.3, 5.0))
            .collect();
        let rect = rect_from_heading(
            &[pts.clone(), vec![Point2::new(2.0, 6.0)]].concat(),
            0.0,
        )
        .unwrap();
        assert_abs_diff_eq!(selection_cost(&rect, &pts).unwrap(), 0.0, epsilon = 1e-15);

        // Constant residuals (parallel offset): still zero variance.
        let offset: Vec<Point2> = (0..10)
            .map(|i| Point2::new(2.0 + i as f64 * 0.3, 5.1))
            .collect();
        assert_abs_diff_eq!(
            selection_cost(&rect, &offset).unwrap(),
            0.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn selection_cost_hand_value() {
        // Dominant points with residuals {0, 0.1, 0.2} against the near edge:
        // population variance 0.0066667.
        let dom = vec![
            Point2::new(1.0, 5.0),
            Point2::new(4.0, 5.1),
            Point2::new(7.0, 5.2),
        ];
        let frame = vec![
            Point2::new(0.0, 5.0),
            Point2::new(8.0, 5.0),
            Point2::new(0.0, 7.0),
            Point2::new(8.0, 7.0),
        ];
        let rect = rect_from_heading(&frame, 0.0).unwrap();
        assert_abs_diff_eq!(
            selection_cost(&rect, &dom).unwrap(),
            0.02f64 / 3.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn best_selection_consensus_on_clean_l() {
        let heading = 35f64.to_radians();
        let pts = l_shape(heading, 4.5, 1.8, 45, 18);
        let long_side: Vec<Point2> = pts[..45].to_vec();
        let cfg = RectFitConfig::default();
        let fit = best_selection(&pts, &long_side, &cfg).unwrap();
        let err = wrap_signed(fit.rect.heading - heading, std::f64::consts::FRAC_PI_2).abs();
        assert!(err <= cfg.step_deg.to_radians() + 1e-9);
    }

    #[test]
    fn best_selection_cost_is_argmin() {
        let heading = 62f64.to_radians();
        let pts = l_shape(heading, 4.2, 1.7, 40, 16);
        let long_side: Vec<Point2> = pts[..40].to_vec();
        let cfg = RectFitConfig::default();
        let fit = best_selection(&pts, &long_side, &cfg).unwrap();
        for cand in evaluate_candidates(&pts, &long_side, &cfg).unwrap() {
            assert!(fit.selection_cost <= cand.selection_cost + 1e-15);
        }
    }

    #[test]
    fn side_mirror_outlier_prefers_uncontaminated_candidate() {
        let heading = 15f64.to_radians();
        let mut pts = l_shape(heading, 4.5, 1.8, 45, 18);
        let clean_long: Vec<Point2> = pts[..45].to_vec();
        // A side-mirror-like stray protruding 0.3 m toward the sensor near
        // the far end of the long side.
        let (s, c) = heading.sin_cos();
        let corner = Point2::new(6.0, 4.0);
        let (t, off) = (4.0, -0.3);
        pts.push(Point2::new(
            corner.x + t * c - off * s,
            corner.y + t * s + off * c,
        ));

        let cfg = RectFitConfig::default();
        let var_rect = search_fit(&pts, CriterionKind::Variance, &cfg).unwrap();
        let var_err = wrap_signed(var_rect.heading - heading, std::f64::consts::FRAC_PI_2).abs();
        let best = best_selection(&pts, &clean_long, &cfg).unwrap();
        let best_err =
            wrap_signed(best.rect.heading - heading, std::f64::consts::FRAC_PI_2).abs();
        assert!(
            best_err < var_err,
            "best {:.3} deg vs variance {:.3} deg",
            best_err.to_degrees(),
            var_err.to_degrees()
        );
    }

    #[test]
    fn side_only_view_still_returns_rectangle() {
        // A single visible side: collinear points.
        let pts: Vec<Point2> = (0..30)
            .map(|i| Point2::new(4.0 + i as f64 * 0.15, 7.0))
            .collect();
        let cfg = RectFitConfig::default();
        let fit = best_selection(&pts, &pts, &cfg).unwrap();
        assert!(fit.rect.min_width_applied);
        let (l, w) = fit.rect.edge_lengths();
        assert!(l > 4.0);
        assert_abs_diff_eq!(w, cfg.min_width, epsilon = 1e-9);
        // The sensor is below the side; the box must grow away from it.
        assert!(fit.rect.corners.iter().all(|c| c.y >= 7.0 - 1e-9));
        let err = wrap_signed(fit.rect.heading, std::f64::consts::FRAC_PI_2).abs();
        assert!(err < 1e-6);
    }

    #[test]
    fn area_monotone_in_step() {
        let pts = l_shape(0.6, 4.0, 1.6, 35, 14);
        let mut last = f64::INFINITY;
        for step in [16.0, 8.0, 4.0, 2.0, 1.0, 0.5] {
            let cfg = RectFitConfig {
                step_deg: step,
                ..Default::default()
            };
            let rect = search_fit(&pts, CriterionKind::Area, &cfg).unwrap();
            assert!(rect.area() <= last + 1e-12, "step {step}");
            last = rect.area();
        }
    }

    #[test]
    fn search_rotation_equivariant() {
        let pts = l_shape(0.0, 4.5, 1.8, 45, 18);
        let cfg = RectFitConfig::default();
        let step = cfg.step_deg.to_radians();
        for phi_deg in [10.0f64, 33.0, 78.0] {
            let phi = phi_deg.to_radians();
            let rotated: Vec<Point2> = pts.iter().map(|p| p.rotated(phi)).collect();
            for criterion in [
                CriterionKind::Area,
                CriterionKind::Closeness,
                CriterionKind::Variance,
            ] {
                let h0 = search_fit(&pts, criterion, &cfg).unwrap().heading;
                let h1 = search_fit(&rotated, criterion, &cfg).unwrap().heading;
                let err = wrap_signed(h1 - h0 - phi, std::f64::consts::FRAC_PI_2).abs();
                assert!(
                    err <= step + 1e-9,
                    "{criterion:?} phi {phi_deg}: err {err}"
                );
            }
        }
    }
}
