//! Bezier evaluation and planar polyline self-intersection.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Orientation tolerance, applied after the polyline is normalised to a unit box.
pub const ORIENT_EPS: f64 = 1e-9;

/// Consecutive points closer than this are treated as one.
pub const DISTINCT_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn lerp(self, other: Point2, t: f64) -> Point2 {
        Point2::new(
            self.x + (other.x - self.x) * t,
            self.y + (other.y - self.y) * t,
        )
    }

    pub fn dist(self, other: Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl From<(f64, f64)> for Point2 {
    fn from((x, y): (f64, f64)) -> Self {
        Point2::new(x, y)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum CurveError {
    #[error("control polygon needs at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("curve parameter {0} outside [0, 1]")]
    ParameterOutOfRange(f64),
    #[error("non-finite coordinate in input")]
    NonFinite,
}

/// An open polyline of at least two pairwise-distinct consecutive points.
#[derive(Debug, Clone, PartialEq)]
pub struct Polyline(Vec<Point2>);

impl Polyline {
    /// Drops consecutive duplicates (within [`DISTINCT_EPS`]) and checks what is left.
    pub fn new(points: Vec<Point2>) -> Result<Self, CurveError> {
        if points.iter().any(|p| !p.is_finite()) {
            return Err(CurveError::NonFinite);
        }
        let points = dedup_consecutive(&points);
        if points.len() < 2 {
            return Err(CurveError::TooFewPoints(points.len()));
        }
        Ok(Polyline(points))
    }

    pub fn points(&self) -> &[Point2] {
        &self.0
    }

    pub fn into_points(self) -> Vec<Point2> {
        self.0
    }

    pub fn length(&self) -> f64 {
        self.0.windows(2).map(|w| w[0].dist(w[1])).sum()
    }

    pub fn is_self_intersecting(&self) -> bool {
        is_self_intersecting(&self.0)
    }
}

/// Evaluates the Bezier curve of `polygon` at `t` by de Casteljau's algorithm.
pub fn bezier_point(polygon: &[Point2], t: f64) -> Result<Point2, CurveError> {
    if polygon.len() < 2 {
        return Err(CurveError::TooFewPoints(polygon.len()));
    }
    if !(0.0..=1.0).contains(&t) {
        return Err(CurveError::ParameterOutOfRange(t));
    }
    Ok(de_casteljau(polygon, t))
}

fn de_casteljau(polygon: &[Point2], t: f64) -> Point2 {
    // exact interpolation at both ends
    if t == 0.0 {
        return polygon[0];
    }
    if t == 1.0 {
        return polygon[polygon.len() - 1];
    }
    let mut work = polygon.to_vec();
    for level in (1..work.len()).rev() {
        for i in 0..level {
            work[i] = work[i].lerp(work[i + 1], t);
        }
    }
    work[0]
}

/// Samples `n + 1` points at `t = i / n`.
pub fn sample_curve(polygon: &[Point2], n: usize) -> Result<Vec<Point2>, CurveError> {
    if polygon.len() < 2 {
        return Err(CurveError::TooFewPoints(polygon.len()));
    }
    let n = n.max(1);
    Ok((0..=n)
        .map(|i| {
            let t = if i == n { 1.0 } else { i as f64 / n as f64 };
            de_casteljau(polygon, t)
        })
        .collect())
}

pub fn point_segment_distance(p: Point2, a: Point2, b: Point2) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    p.dist(Point2::new(a.x + t * dx, a.y + t * dy))
}

pub fn distance_to_polyline(p: Point2, poly: &[Point2]) -> f64 {
    poly.windows(2)
        .map(|w| point_segment_distance(p, w[0], w[1]))
        .fold(f64::INFINITY, f64::min)
}

pub(crate) fn dedup_consecutive(points: &[Point2]) -> Vec<Point2> {
    let mut out: Vec<Point2> = Vec::with_capacity(points.len());
    for &p in points {
        match out.last() {
            Some(&q) if q.dist(p) <= DISTINCT_EPS => {}
            _ => out.push(p),
        }
    }
    out
}

/// Maps the points into the unit box (longest side = 1) so one epsilon fits all scales.
fn normalise(points: &[Point2]) -> Vec<Point2> {
    let (mut min_x, mut min_y) = (f64::INFINITY, f64::INFINITY);
    let (mut max_x, mut max_y) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in points {
        min_x = min_x.min(p.x);
        min_y = min_y.min(p.y);
        max_x = max_x.max(p.x);
        max_y = max_y.max(p.y);
    }
    let extent = (max_x - min_x).max(max_y - min_y);
    let scale = if extent > 0.0 { 1.0 / extent } else { 1.0 };
    points
        .iter()
        .map(|p| Point2::new((p.x - min_x) * scale, (p.y - min_y) * scale))
        .collect()
}

fn orient_sign(a: Point2, b: Point2, c: Point2) -> i8 {
    let o = (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
    if o > ORIENT_EPS {
        1
    } else if o < -ORIENT_EPS {
        -1
    } else {
        0
    }
}

fn within_box(a: Point2, b: Point2, p: Point2) -> bool {
    p.x >= a.x.min(b.x) - ORIENT_EPS
        && p.x <= a.x.max(b.x) + ORIENT_EPS
        && p.y >= a.y.min(b.y) - ORIENT_EPS
        && p.y <= a.y.max(b.y) + ORIENT_EPS
}

/// Closed-segment intersection test: proper crossings, touching and collinear overlap all count.
pub(crate) fn segments_intersect(p1: Point2, p2: Point2, q1: Point2, q2: Point2) -> bool {
    let d1 = orient_sign(q1, q2, p1);
    let d2 = orient_sign(q1, q2, p2);
    let d3 = orient_sign(p1, p2, q1);
    let d4 = orient_sign(p1, p2, q2);
    if d1 * d2 < 0 && d3 * d4 < 0 {
        return true;
    }
    (d1 == 0 && within_box(q1, q2, p1))
        || (d2 == 0 && within_box(q1, q2, p2))
        || (d3 == 0 && within_box(p1, p2, q1))
        || (d4 == 0 && within_box(p1, p2, q2))
}

/// Adjacent segments a-b, b-c overlap only when c doubles back along a-b.
fn folds_back(a: Point2, b: Point2, c: Point2) -> bool {
    orient_sign(a, b, c) == 0 && (b.x - a.x) * (c.x - b.x) + (b.y - a.y) * (c.y - b.y) < 0.0
}

/// True iff two non-adjacent segments touch, cross or overlap, or two adjacent
/// segments fold back onto each other.
pub fn is_self_intersecting(points: &[Point2]) -> bool {
    let pts = normalise(&dedup_consecutive(points));
    let segs = pts.len().saturating_sub(1);
    for i in 0..segs {
        if i + 2 <= segs && folds_back(pts[i], pts[i + 1], pts[i + 2]) {
            return true;
        }
        for j in (i + 2)..segs {
            if segments_intersect(pts[i], pts[i + 1], pts[j], pts[j + 1]) {
                return true;
            }
        }
    }
    false
}

/// Same test for a closed polygon: the closing segment last→first is included and
/// the first and last segments count as adjacent.
pub fn is_closed_polygon_self_intersecting(points: &[Point2]) -> bool {
    let mut pts = dedup_consecutive(points);
    while pts.len() > 1 && pts[0].dist(pts[pts.len() - 1]) <= DISTINCT_EPS {
        pts.pop();
    }
    let n = pts.len();
    if n < 3 {
        return true;
    }
    let pts = normalise(&pts);
    let at = |i: usize| pts[i % n];
    for i in 0..n {
        if folds_back(at(i), at(i + 1), at(i + 2)) {
            return true;
        }
        for j in (i + 2)..n {
            if i == 0 && j == n - 1 {
                continue;
            }
            if segments_intersect(at(i), at(i + 1), at(j), at(j + 1)) {
                return true;
            }
        }
    }
    false
}
