//! The evolvable membrane representation.
//!
//! A genome is a Bezier control polygon whose first and last points are fixed
//! at (1,0) (base contact) and (0,1) (axis contact). Only the interior points
//! are encoded, together with the base radius and the height at the axis. The
//! unit square is stretched so that x spans the base radius and y the height.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curve::{self, Point2};

pub const BASE_RADIUS_RANGE_MM: (f64, f64) = (25.0, 40.0);
pub const HEIGHT_RANGE_MM: (f64, f64) = (30.0, 60.0);
pub const CONTROL_POINT_COUNT_RANGE: (usize, usize) = (2, 6);
pub const COMPONENT_RANGE: (f64, f64) = (0.0, 1.0);

pub const BASE_ANCHOR: Point2 = Point2::new(1.0, 0.0);
pub const AXIS_ANCHOR: Point2 = Point2::new(0.0, 1.0);

/// Polyline density used for the self-intersection check.
pub const DEFAULT_INTERSECTION_SAMPLES: usize = 128;
pub const DEFAULT_MAX_ATTEMPTS: usize = 1000;
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error, PartialEq)]
pub enum GenomeError {
    #[error("{field} = {value} outside [{min}, {max}]")]
    OutOfRange {
        field: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },
    #[error("{0} control points, expected 2 to 6")]
    ControlPointCount(usize),
    #[error("sampled curve self-intersects")]
    SelfIntersecting,
    #[error("no valid genome after {0} attempts")]
    RetriesExhausted(usize),
    #[error("unsupported genome format version {0}")]
    UnsupportedVersion(u32),
    #[error("genome parse error: {0}")]
    Parse(String),
}

impl GenomeError {
    pub fn code(&self) -> &'static str {
        match self {
            GenomeError::OutOfRange { .. } | GenomeError::ControlPointCount(_) => "range-violation",
            GenomeError::SelfIntersecting => "self-intersecting",
            GenomeError::RetriesExhausted(_) => "retries-exhausted",
            GenomeError::UnsupportedVersion(_) => "unsupported-version",
            GenomeError::Parse(_) => "parse-error",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Genome {
    base_radius: f64,
    height: f64,
    control_points: Vec<Point2>,
}

/// The full polygon, anchors included. Always `v + 2` points.
#[derive(Debug, Clone, PartialEq)]
pub struct FullControlPolygon(Vec<Point2>);

impl FullControlPolygon {
    pub fn points(&self) -> &[Point2] {
        &self.0
    }
}

/// A sampled meridian curve in millimetres: `x` is radial, `y` axial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profile(pub Vec<Point2>);

impl Profile {
    pub fn points(&self) -> &[Point2] {
        &self.0
    }
}

fn check_range(field: &'static str, value: f64, (min, max): (f64, f64)) -> Result<(), GenomeError> {
    if value.is_finite() && value >= min && value <= max {
        Ok(())
    } else {
        Err(GenomeError::OutOfRange {
            field,
            value,
            min,
            max,
        })
    }
}

impl Genome {
    /// Checks the parameter bounds only; see [`Genome::validate`] for the full check.
    pub fn new(
        base_radius: f64,
        height: f64,
        control_points: Vec<Point2>,
    ) -> Result<Self, GenomeError> {
        check_range("base_radius_mm", base_radius, BASE_RADIUS_RANGE_MM)?;
        check_range("height_mm", height, HEIGHT_RANGE_MM)?;
        let v = control_points.len();
        if v < CONTROL_POINT_COUNT_RANGE.0 || v > CONTROL_POINT_COUNT_RANGE.1 {
            return Err(GenomeError::ControlPointCount(v));
        }
        for p in &control_points {
            check_range("control_point.x", p.x, COMPONENT_RANGE)?;
            check_range("control_point.y", p.y, COMPONENT_RANGE)?;
        }
        Ok(Genome {
            base_radius,
            height,
            control_points,
        })
    }

    /// Bounds plus the self-intersection check on the sampled curve.
    pub fn validated(
        base_radius: f64,
        height: f64,
        control_points: Vec<Point2>,
    ) -> Result<Self, GenomeError> {
        let g = Genome::new(base_radius, height, control_points)?;
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<(), GenomeError> {
        if self.is_self_intersecting(DEFAULT_INTERSECTION_SAMPLES) {
            Err(GenomeError::SelfIntersecting)
        } else {
            Ok(())
        }
    }

    pub fn base_radius(&self) -> f64 {
        self.base_radius
    }

    pub fn height(&self) -> f64 {
        self.height
    }

    pub fn control_points(&self) -> &[Point2] {
        &self.control_points
    }

    pub fn v(&self) -> usize {
        self.control_points.len()
    }

    pub fn full_polygon(&self) -> FullControlPolygon {
        let mut pts = Vec::with_capacity(self.v() + 2);
        pts.push(BASE_ANCHOR);
        pts.extend_from_slice(&self.control_points);
        pts.push(AXIS_ANCHOR);
        FullControlPolygon(pts)
    }

    /// Unit-square sample of the curve. Intersection is affine-invariant, so
    /// testing here is equivalent to testing the scaled profile.
    pub fn sampled_unit_curve(&self, samples: usize) -> Vec<Point2> {
        curve::sample_curve(self.full_polygon().points(), samples)
            .expect("full polygon always has at least 4 points")
    }

    pub fn is_self_intersecting(&self, samples: usize) -> bool {
        curve::is_self_intersecting(&self.sampled_unit_curve(samples))
    }

    /// `samples + 1` curve points scaled to millimetres.
    pub fn to_profile(&self, samples: usize) -> Profile {
        let samples = samples.max(16);
        let mut pts: Vec<Point2> = self
            .sampled_unit_curve(samples)
            .into_iter()
            .map(|p| Point2::new(p.x * self.base_radius, p.y * self.height))
            .collect();
        // anchors map exactly, independent of sampling
        pts[0] = Point2::new(self.base_radius, 0.0);
        pts[samples] = Point2::new(0.0, self.height);
        Profile(pts)
    }

    pub fn to_text(&self) -> String {
        serde_json::to_string_pretty(&GenomeDoc::from(self)).expect("genome serialises")
    }

    /// Single-line form, for journals.
    pub fn to_line(&self) -> String {
        serde_json::to_string(&GenomeDoc::from(self)).expect("genome serialises")
    }

    pub fn from_text(text: &str) -> Result<Self, GenomeError> {
        let doc: GenomeDoc =
            serde_json::from_str(text).map_err(|e| GenomeError::Parse(e.to_string()))?;
        Genome::try_from(doc)
    }

    pub(crate) fn with_control_points(&self, control_points: Vec<Point2>) -> Genome {
        Genome {
            base_radius: self.base_radius,
            height: self.height,
            control_points,
        }
    }
}

/// On-disk layout of a genome.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct GenomeDoc {
    format_version: u32,
    base_radius_mm: f64,
    height_mm: f64,
    control_points: Vec<[f64; 2]>,
}

impl From<&Genome> for GenomeDoc {
    fn from(g: &Genome) -> Self {
        GenomeDoc {
            format_version: FORMAT_VERSION,
            base_radius_mm: g.base_radius,
            height_mm: g.height,
            control_points: g.control_points.iter().map(|p| [p.x, p.y]).collect(),
        }
    }
}

impl TryFrom<GenomeDoc> for Genome {
    type Error = GenomeError;

    fn try_from(doc: GenomeDoc) -> Result<Self, Self::Error> {
        if doc.format_version != FORMAT_VERSION {
            return Err(GenomeError::UnsupportedVersion(doc.format_version));
        }
        Genome::validated(
            doc.base_radius_mm,
            doc.height_mm,
            doc.control_points
                .into_iter()
                .map(|[x, y]| Point2::new(x, y))
                .collect(),
        )
    }
}

impl<'de> Deserialize<'de> for Genome {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let doc = GenomeDoc::deserialize(deserializer)?;
        Genome::try_from(doc).map_err(serde::de::Error::custom)
    }
}

impl Serialize for Genome {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        GenomeDoc::from(self).serialize(s)
    }
}

pub(crate) fn random_point<R: Rng + ?Sized>(rng: &mut R) -> Point2 {
    Point2::new(rng.random::<f64>(), rng.random::<f64>())
}

pub(crate) fn random_control_points<R: Rng + ?Sized>(rng: &mut R) -> Vec<Point2> {
    let v = rng.random_range(CONTROL_POINT_COUNT_RANGE.0..=CONTROL_POINT_COUNT_RANGE.1);
    (0..v).map(|_| random_point(rng)).collect()
}

/// Uniform draw within the parameter ranges; self-intersecting draws are redrawn.
pub fn random_genome<R: Rng + ?Sized>(rng: &mut R) -> Result<Genome, GenomeError> {
    random_genome_with(rng, DEFAULT_MAX_ATTEMPTS, DEFAULT_INTERSECTION_SAMPLES)
}

pub fn random_genome_with<R: Rng + ?Sized>(
    rng: &mut R,
    max_attempts: usize,
    samples: usize,
) -> Result<Genome, GenomeError> {
    for _ in 0..max_attempts {
        let base_radius = rng.random_range(BASE_RADIUS_RANGE_MM.0..=BASE_RADIUS_RANGE_MM.1);
        let height = rng.random_range(HEIGHT_RANGE_MM.0..=HEIGHT_RANGE_MM.1);
        let g = Genome::new(base_radius, height, random_control_points(rng))?;
        if !g.is_self_intersecting(samples) {
            return Ok(g);
        }
    }
    Err(GenomeError::RetriesExhausted(max_attempts))
}

/// Redraws only the control points, keeping radius and height.
pub(crate) fn reinit_control_points<R: Rng + ?Sized>(
    g: &Genome,
    rng: &mut R,
) -> Result<Genome, GenomeError> {
    for _ in 0..DEFAULT_MAX_ATTEMPTS {
        let candidate = g.with_control_points(random_control_points(rng));
        if candidate.validate().is_ok() {
            return Ok(candidate);
        }
    }
    Err(GenomeError::RetriesExhausted(DEFAULT_MAX_ATTEMPTS))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn g(v: usize) -> Genome {
        let pts = (0..v)
            .map(|i| Point2::new(0.8 - 0.1 * i as f64, 0.2 + 0.1 * i as f64))
            .collect();
        Genome::validated(30.0, 40.0, pts).unwrap()
    }

    #[test]
    fn seeded_genome_in_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let g = random_genome(&mut rng).unwrap();
        assert!((25.0..=40.0).contains(&g.base_radius()));
        assert!((30.0..=60.0).contains(&g.height()));
        assert!((2..=6).contains(&g.v()));
        let poly = g.full_polygon();
        assert_eq!(poly.points()[0], BASE_ANCHOR);
        assert_eq!(*poly.points().last().unwrap(), AXIS_ANCHOR);
    }

    #[test]
    fn full_polygon_lengths() {
        assert_eq!(g(2).full_polygon().points().len(), 4);
        assert_eq!(g(6).full_polygon().points().len(), 8);
        let genome = g(4);
        assert_eq!(
            &genome.full_polygon().points()[1..5],
            genome.control_points()
        );
    }

    #[test]
    fn profile_endpoints() {
        let genome = g(3);
        let p = genome.to_profile(128);
        assert_eq!(p.points().len(), 129);
        assert_eq!(p.points()[0], Point2::new(30.0, 0.0));
        assert_eq!(p.points()[128], Point2::new(0.0, 40.0));
        let p2 = genome.to_profile(256);
        assert_eq!(p2.points()[0], p.points()[0]);
        assert_eq!(p2.points()[256], p.points()[128]);
    }

    #[test]
    fn symmetric_cubic_midpoint() {
        // (1,0),(.5,.5),(.5,.5),(0,1) at t=1/2: (1+3*.5+3*.5+0)/8 = 0.5
        let genome = Genome::validated(
            30.0,
            40.0,
            vec![Point2::new(0.5, 0.5), Point2::new(0.5, 0.5)],
        )
        .unwrap();
        let p = genome.to_profile(128);
        let mid = p.points()[64];
        let x = (1.0 + 3.0 * 0.5 + 3.0 * 0.5) / 8.0;
        let y = (3.0 * 0.5 + 3.0 * 0.5 + 1.0) / 8.0;
        assert!((mid.x - 30.0 * x).abs() < 1e-12);
        assert!((mid.y - 40.0 * y).abs() < 1e-12);
    }

    #[test]
    fn text_round_trip_and_errors() {
        let genome = g(5);
        assert_eq!(Genome::from_text(&genome.to_text()).unwrap(), genome);
        assert_eq!(Genome::from_text(&genome.to_line()).unwrap(), genome);

        let bad_r = genome
            .to_text()
            .replace("\"base_radius_mm\": 30.0", "\"base_radius_mm\": 50.0");
        let err = Genome::from_text(&bad_r).unwrap_err();
        assert_eq!(err.code(), "range-violation");

        let one = r#"{"format_version":1,"base_radius_mm":30,"height_mm":40,"control_points":[[0.5,0.5]]}"#;
        assert_eq!(
            Genome::from_text(one).unwrap_err(),
            GenomeError::ControlPointCount(1)
        );

        let garbage = Genome::from_text("base_radius = ").unwrap_err();
        assert_eq!(garbage.code(), "parse-error");

        let v2 = r#"{"format_version":2,"base_radius_mm":30,"height_mm":40,"control_points":[[0.5,0.5],[0.2,0.2]]}"#;
        assert_eq!(
            Genome::from_text(v2).unwrap_err(),
            GenomeError::UnsupportedVersion(2)
        );
    }

    #[test]
    fn bounds_rejected() {
        assert!(Genome::new(24.9, 40.0, vec![Point2::new(0.5, 0.5); 2]).is_err());
        assert!(Genome::new(30.0, 61.0, vec![Point2::new(0.5, 0.5); 2]).is_err());
        assert!(Genome::new(30.0, 40.0, vec![Point2::new(1.5, 0.5); 2]).is_err());
        assert!(Genome::new(30.0, 40.0, vec![Point2::new(0.5, 0.5); 7]).is_err());
    }

    #[test]
    fn exhausted_sampler_reports() {
        // zero attempts cannot succeed
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(
            random_genome_with(&mut rng, 0, 128),
            Err(GenomeError::RetriesExhausted(0))
        );
    }
}
