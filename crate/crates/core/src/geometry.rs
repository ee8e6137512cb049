//! Core 2D geometric types shared by all pipeline stages.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum separation (meters) for two points to define a line.
pub const COINCIDENT_EPS: f64 = 1e-12;

/// A 2D point in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist(&self, other: Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// Distance from the origin (the sensor position).
    pub fn norm(&self) -> f64 {
        self.x.hypot(self.y)
    }

    /// Rotation about the origin by `phi` radians.
    pub fn rotated(&self, phi: f64) -> Point2 {
        let (s, c) = phi.sin_cos();
        Point2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl std::ops::Add for Point2 {
    type Output = Point2;
    fn add(self, rhs: Point2) -> Point2 {
        Point2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl std::ops::Sub for Point2 {
    type Output = Point2;
    fn sub(self, rhs: Point2) -> Point2 {
        Point2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

/// Canonicalize a line direction angle into `[0, pi)`.
pub fn canonical_heading(theta: f64) -> f64 {
    let mut t = theta.rem_euclid(std::f64::consts::PI);
    if t >= std::f64::consts::PI {
        t -= std::f64::consts::PI;
    }
    t
}

/// Signed angular difference `a - b` wrapped into `(-period/2, period/2]`.
pub fn wrap_signed(delta: f64, period: f64) -> f64 {
    let mut d = delta.rem_euclid(period);
    if d > period / 2.0 {
        d -= period;
    }
    d
}

/// A normalized homogeneous line `a*x + b*y + c = 0` with `a^2 + b^2 = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Line2 {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl Line2 {
    /// Build a line from raw coefficients, normalizing the normal vector.
    pub fn new(a: f64, b: f64, c: f64) -> Result<Self> {
        let n = a.hypot(b);
        if n < COINCIDENT_EPS || !n.is_finite() {
            return Err(Error::DegenerateInput(
                "line normal has zero length".into(),
            ));
        }
        Ok(Self {
            a: a / n,
            b: b / n,
            c: c / n,
        })
    }

    /// Line with the given direction angle passing through `p`.
    pub fn from_heading_through(heading: f64, p: Point2) -> Self {
        let (s, c) = heading.sin_cos();
        // direction (c, s) => normal (-s, c)
        let (a, b) = (-s, c);
        Self {
            a,
            b,
            c: -(a * p.x + b * p.y),
        }
    }

    /// Direction angle of the line in `[0, pi)`.
    pub fn heading(&self) -> f64 {
        canonical_heading((-self.a).atan2(self.b))
    }

    pub fn distance(&self, p: Point2) -> f64 {
        (self.a * p.x + self.b * p.y + self.c).abs()
    }
}

/// Line through two distinct points.
pub fn line_through(p: Point2, q: Point2) -> Result<Line2> {
    if p.dist(q) <= COINCIDENT_EPS {
        return Err(Error::DegenerateInput(format!(
            "points ({}, {}) and ({}, {}) are coincident",
            p.x, p.y, q.x, q.y
        )));
    }
    let d = q - p;
    Line2::new(-d.y, d.x, d.y * p.x - d.x * p.y)
}

/// Perpendicular distance from a point to a normalized line.
pub fn point_line_distance(p: Point2, l: &Line2) -> f64 {
    l.distance(p)
}

/// Total-least-squares line fit minimizing perpendicular residuals.
///
/// The fitted direction is the major axis of the centered scatter matrix,
/// so vertical structures fit exactly like horizontal ones.
pub fn fit_line_tls(points: &[Point2]) -> Result<Line2> {
    if points.len() < 2 {
        return Err(Error::DegenerateInput(
            "line fit needs at least 2 points".into(),
        ));
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.x).sum::<f64>() / n;
    let my = points.iter().map(|p| p.y).sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for p in points {
        let dx = p.x - mx;
        let dy = p.y - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx + syy < COINCIDENT_EPS {
        return Err(Error::DegenerateInput(
            "all points coincident in line fit".into(),
        ));
    }
    let heading = canonical_heading(0.5 * (2.0 * sxy).atan2(sxx - syy));
    Ok(Line2::from_heading_through(
        heading,
        Point2::new(mx, my),
    ))
}

/// Mean and population variance of a slice.
pub(crate) fn population_stats(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var)
}

/// An oriented rectangle candidate.
///
/// Corners are stored counter-clockwise; `nearest_corner_index` points at the
/// corner closest to the sensor origin, which is the tracked reference point.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OrientedRect {
    /// Direction of the rectangle's u-axis, canonicalized to `[0, pi)`.
    pub heading: f64,
    pub corners: [Point2; 4],
    pub nearest_corner_index: usize,
    pub criterion_score: f64,
    /// True when a degenerate (collinear) cluster was widened to the
    /// configured minimum width.
    pub min_width_applied: bool,
}

impl OrientedRect {
    /// Axis-aligned bounds of the projected points in the frame rotated by
    /// `heading`, rebuilt into world-frame corners.
    pub(crate) fn from_bounds(
        heading: f64,
        min_u: f64,
        max_u: f64,
        min_v: f64,
        max_v: f64,
    ) -> Self {
        let heading = canonical_heading(heading);
        let (s, c) = heading.sin_cos();
        let unrot = |u: f64, v: f64| Point2::new(c * u - s * v, s * u + c * v);
        let corners = [
            unrot(min_u, min_v),
            unrot(max_u, min_v),
            unrot(max_u, max_v),
            unrot(min_u, max_v),
        ];
        let nearest_corner_index = corners
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| a.norm().total_cmp(&b.norm()))
            .map(|(i, _)| i)
            .unwrap();
        Self {
            heading,
            corners,
            nearest_corner_index,
            criterion_score: 0.0,
            min_width_applied: false,
        }
    }

    pub fn nearest_corner(&self) -> Point2 {
        self.corners[self.nearest_corner_index]
    }

    /// Side lengths `(along heading, across heading)`.
    pub fn edge_lengths(&self) -> (f64, f64) {
        (
            self.corners[0].dist(self.corners[1]),
            self.corners[1].dist(self.corners[2]),
        )
    }

    pub fn area(&self) -> f64 {
        let (l, w) = self.edge_lengths();
        l * w
    }

    pub fn center(&self) -> Point2 {
        let mut x = 0.0;
        let mut y = 0.0;
        for c in &self.corners {
            x += c.x;
            y += c.y;
        }
        Point2::new(x / 4.0, y / 4.0)
    }

    /// Shoelace signed area; positive for counter-clockwise corners.
    pub fn signed_area(&self) -> f64 {
        let c = &self.corners;
        let mut acc = 0.0;
        for i in 0..4 {
            let j = (i + 1) % 4;
            acc += c[i].x * c[j].y - c[j].x * c[i].y;
        }
        0.5 * acc
    }

    /// Support lines of the four edges: two along `heading` (edges 0-1 and
    /// 3-2) followed by two along `heading + pi/2` (edges 0-3 and 1-2).
    pub fn support_lines(&self) -> [Line2; 4] {
        let h = self.heading;
        let hp = h + std::f64::consts::FRAC_PI_2;
        [
            Line2::from_heading_through(h, self.corners[0]),
            Line2::from_heading_through(h, self.corners[2]),
            Line2::from_heading_through(hp, self.corners[0]),
            Line2::from_heading_through(hp, self.corners[2]),
        ]
    }
}
