//! Fitness records and evaluators.
//!
//! Fitness is the mean peak retention force over a fixed number of repeats,
//! entered by hand. For desk runs a geometric proxy stands in: it is a
//! surrogate scored in `[0, 1]`, not a force, and is reported as such.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curve::{self, Point2};
use crate::genome::{Genome, Profile};
use crate::mesh::{GripperSolid, MeshError};

pub const DEFAULT_REPEATS: usize = 5;
pub const DEFAULT_BALL_RADIUS_MM: f64 = 25.0;
pub const DEFAULT_BAND_MM: f64 = 2.0;
/// Apex region narrower than this fraction of the ball radius counts as a pocket.
pub const POCKET_RADIUS_FRACTION: f64 = 0.4;
const ARC_SAMPLES: usize = 2048;

#[derive(Debug, Error, PartialEq)]
pub enum FitnessError {
    #[error("record already holds {0} repeats")]
    Overfull(usize),
    #[error("force must be non-negative, got {0}")]
    NegativeForce(f64),
    #[error("force must be finite")]
    NonFinite,
    #[error("proxy supports only ball targets, got {0:?}")]
    UnsupportedTarget(TargetShape),
    #[error("invalid proxy settings: {0}")]
    InvalidSettings(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitnessRecord {
    pub id: String,
    pub repeats: Vec<f64>,
    pub required: usize,
}

impl FitnessRecord {
    pub fn new(id: impl Into<String>, required: usize) -> Self {
        FitnessRecord {
            id: id.into(),
            repeats: Vec::with_capacity(required),
            required,
        }
    }

    pub fn record_repeat(&mut self, force: f64) -> Result<(), FitnessError> {
        if !force.is_finite() {
            return Err(FitnessError::NonFinite);
        }
        if force < 0.0 {
            return Err(FitnessError::NegativeForce(force));
        }
        if self.repeats.len() >= self.required {
            return Err(FitnessError::Overfull(self.required));
        }
        self.repeats.push(force);
        Ok(())
    }

    pub fn is_complete(&self) -> bool {
        self.repeats.len() == self.required
    }

    /// Arithmetic mean, once all repeats are in.
    pub fn mean(&self) -> Option<f64> {
        self.is_complete()
            .then(|| self.repeats.iter().sum::<f64>() / self.repeats.len() as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetShape {
    Ball,
    Cube,
    Star,
    Coin,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetObject {
    pub shape: TargetShape,
    pub size_mm: f64,
}

impl Default for TargetObject {
    fn default() -> Self {
        TargetObject {
            shape: TargetShape::Ball,
            size_mm: DEFAULT_BALL_RADIUS_MM,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProxyWeights {
    pub contact: f64,
    pub interlock: f64,
    pub pocket: f64,
}

impl Default for ProxyWeights {
    fn default() -> Self {
        ProxyWeights {
            contact: 1.0 / 3.0,
            interlock: 1.0 / 3.0,
            pocket: 1.0 / 3.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProxySettings {
    pub target: TargetObject,
    pub weights: ProxyWeights,
    pub band_mm: f64,
}

impl Default for ProxySettings {
    fn default() -> Self {
        ProxySettings {
            target: TargetObject::default(),
            weights: ProxyWeights::default(),
            band_mm: DEFAULT_BAND_MM,
        }
    }
}

impl ProxySettings {
    pub fn validate(&self) -> Result<(), FitnessError> {
        let w = self.weights;
        let parts = [w.contact, w.interlock, w.pocket];
        if parts.iter().any(|x| !(0.0..=1.0).contains(x)) {
            return Err(FitnessError::InvalidSettings(
                "weights must be in [0,1]".into(),
            ));
        }
        if (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(FitnessError::InvalidSettings(
                "weights must sum to 1".into(),
            ));
        }
        if !(self.target.size_mm > 0.0) {
            return Err(FitnessError::InvalidSettings(
                "target size must be positive".into(),
            ));
        }
        if !(self.band_mm > 0.0) {
            return Err(FitnessError::InvalidSettings(
                "band must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// The three grip-mechanism terms and their weighted sum, all in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProxyBreakdown {
    pub contact: f64,
    pub interlock: f64,
    pub pocket: f64,
    pub score: f64,
}

/// Proxy score of a meshable gripper. The solid is only a witness of
/// printability; the score is computed from the meridian profile.
pub fn proxy_fitness(
    _solid: &GripperSolid,
    profile: &Profile,
    settings: &ProxySettings,
) -> Result<ProxyBreakdown, FitnessError> {
    proxy_components(profile, settings)
}

/// Rigid seating of the profile (as a cap lowered along the axis) over a ball
/// resting on the platform, evaluated in the meridian plane.
pub fn proxy_components(
    profile: &Profile,
    settings: &ProxySettings,
) -> Result<ProxyBreakdown, FitnessError> {
    if settings.target.shape != TargetShape::Ball {
        return Err(FitnessError::UnsupportedTarget(settings.target.shape));
    }
    settings.validate()?;
    let rho = settings.target.size_mm;
    let band = settings.band_mm;
    let pts = profile.points();

    let lift = seat_offset(pts, rho);
    let world: Vec<Point2> = pts.iter().map(|p| Point2::new(p.x, p.y + lift)).collect();

    let mut upper_hits = 0usize;
    let mut theta_max: Option<f64> = None;
    for k in 0..ARC_SAMPLES {
        let theta = PI * (k as f64 + 0.5) / ARC_SAMPLES as f64;
        let b = Point2::new(rho * theta.sin(), rho + rho * theta.cos());
        if curve::distance_to_polyline(b, &world) <= band {
            if theta < FRAC_PI_2 {
                upper_hits += 1;
            }
            theta_max = Some(theta);
        }
    }
    let contact = upper_hits as f64 / (ARC_SAMPLES / 2) as f64;
    let interlock = theta_max
        .map(|t| ((t - FRAC_PI_2) / FRAC_PI_2).clamp(0.0, 1.0))
        .unwrap_or(0.0);
    let pocket = (apex_pocket_depth(pts, POCKET_RADIUS_FRACTION * rho) / rho).clamp(0.0, 1.0);
    let w = settings.weights;
    let score = (w.contact * contact + w.interlock * interlock + w.pocket * pocket).clamp(0.0, 1.0);
    Ok(ProxyBreakdown {
        contact,
        interlock,
        pocket,
        score,
    })
}

/// Lowest lift of the base plane above the platform at which no profile point
/// with radius below `rho` is inside the ball.
fn seat_offset(pts: &[Point2], rho: f64) -> f64 {
    let clearance = |p: Point2| rho + (rho * rho - p.x * p.x).max(0.0).sqrt() - p.y;
    let mut lift: f64 = 0.0;
    for w in pts.windows(2) {
        let (a, b) = (w[0], w[1]);
        // restrict to the part of the segment with radius <= rho
        let (mut s0, mut s1) = (0.0f64, 1.0f64);
        let dx = b.x - a.x;
        if dx.abs() < 1e-15 {
            if a.x > rho {
                continue;
            }
        } else {
            let s_rho = (rho - a.x) / dx;
            if dx > 0.0 {
                s1 = s1.min(s_rho);
            } else {
                s0 = s0.max(s_rho);
            }
            if s0 > s1 {
                continue;
            }
        }
        let at = |s: f64| a.lerp(b, s);
        // clearance is concave along the segment
        let (mut lo, mut hi) = (s0, s1);
        for _ in 0..100 {
            let m1 = lo + (hi - lo) / 3.0;
            let m2 = hi - (hi - lo) / 3.0;
            if clearance(at(m1)) < clearance(at(m2)) {
                lo = m1;
            } else {
                hi = m2;
            }
        }
        let best = clearance(at(0.5 * (lo + hi)))
            .max(clearance(at(s0)))
            .max(clearance(at(s1)));
        lift = lift.max(best);
    }
    lift
}

/// Axial extent of the run of profile next to the apex that stays within
/// `max_radius` of the axis.
fn apex_pocket_depth(pts: &[Point2], max_radius: f64) -> f64 {
    let Some(&apex) = pts.last() else {
        return 0.0;
    };
    if apex.x >= max_radius {
        return 0.0;
    }
    let (mut lo, mut hi) = (apex.y, apex.y);
    for w in pts.windows(2).rev() {
        let (a, b) = (w[0], w[1]);
        if a.x < max_radius {
            lo = lo.min(a.y);
            hi = hi.max(a.y);
        } else {
            let t = (max_radius - b.x) / (a.x - b.x);
            let y = b.y + t * (a.y - b.y);
            lo = lo.min(y);
            hi = hi.max(y);
            break;
        }
    }
    hi - lo
}

/// Result of asking an evaluator for a gripper's fitness.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Evaluation {
    Pending,
    Fitness(f64),
}

/// The fitness contract. Meshing failures arrive as `Err` and always score 0.
pub trait Evaluator {
    fn evaluate(
        &mut self,
        id: &str,
        genome: &Genome,
        solid: Result<&GripperSolid, &MeshError>,
    ) -> Evaluation;
}

#[derive(Debug, Clone)]
pub struct ProxyEvaluator {
    pub settings: ProxySettings,
    pub profile_samples: usize,
}

impl Default for ProxyEvaluator {
    fn default() -> Self {
        ProxyEvaluator::new(ProxySettings::default())
    }
}

impl ProxyEvaluator {
    pub fn new(settings: ProxySettings) -> Self {
        ProxyEvaluator {
            settings,
            profile_samples: 128,
        }
    }

    pub fn score(&self, genome: &Genome, solid: Result<&GripperSolid, &MeshError>) -> f64 {
        match solid {
            Err(_) => 0.0,
            Ok(solid) => {
                let profile = genome.to_profile(self.profile_samples.max(16));
                proxy_fitness(solid, &profile, &self.settings)
                    .map(|b| b.score)
                    .unwrap_or(0.0)
            }
        }
    }
}

impl Evaluator for ProxyEvaluator {
    fn evaluate(
        &mut self,
        _id: &str,
        genome: &Genome,
        solid: Result<&GripperSolid, &MeshError>,
    ) -> Evaluation {
        Evaluation::Fitness(self.score(genome, solid))
    }
}

/// Hand-entered repeats, keyed by gripper id.
#[derive(Debug, Clone)]
pub struct ManualEvaluator {
    pub records: BTreeMap<String, FitnessRecord>,
    pub repeats: usize,
}

impl Default for ManualEvaluator {
    fn default() -> Self {
        ManualEvaluator {
            records: BTreeMap::new(),
            repeats: DEFAULT_REPEATS,
        }
    }
}

impl ManualEvaluator {
    pub fn record_repeat(&mut self, id: &str, force: f64) -> Result<&FitnessRecord, FitnessError> {
        let repeats = self.repeats;
        let rec = self
            .records
            .entry(id.to_string())
            .or_insert_with(|| FitnessRecord::new(id, repeats));
        rec.record_repeat(force)?;
        Ok(rec)
    }
}

impl Evaluator for ManualEvaluator {
    fn evaluate(
        &mut self,
        id: &str,
        _genome: &Genome,
        solid: Result<&GripperSolid, &MeshError>,
    ) -> Evaluation {
        if solid.is_err() {
            return Evaluation::Fitness(0.0);
        }
        match self.records.get(id).and_then(FitnessRecord::mean) {
            Some(mean) => Evaluation::Fitness(mean),
            None => Evaluation::Pending,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{assemble, MeshSettings};

    fn arc(radius: f64, n: usize) -> Vec<Point2> {
        (0..=n)
            .map(|i| {
                let a = FRAC_PI_2 * i as f64 / n as f64;
                Point2::new(radius * a.cos(), radius * a.sin())
            })
            .collect()
    }

    #[test]
    fn record_lifecycle() {
        let mut r = FitnessRecord::new("g0c0", 5);
        for f in [28.0, 30.0, 29.0] {
            r.record_repeat(f).unwrap();
        }
        assert_eq!(r.mean(), None);
        r.record_repeat(29.0).unwrap();
        r.record_repeat(29.0).unwrap();
        assert!(r.is_complete());
        assert_eq!(r.mean(), Some(29.0));
        assert_eq!(r.record_repeat(1.0), Err(FitnessError::Overfull(5)));
        let mut fresh = FitnessRecord::new("x", 5);
        assert_eq!(
            fresh.record_repeat(-1.0),
            Err(FitnessError::NegativeForce(-1.0))
        );
        assert_eq!(fresh.record_repeat(f64::NAN), Err(FitnessError::NonFinite));
    }

    #[test]
    fn manual_evaluator_pending_then_mean() {
        let g = Genome::validated(
            30.0,
            40.0,
            vec![Point2::new(0.6, 0.5), Point2::new(0.3, 0.8)],
        )
        .unwrap();
        let solid = assemble(&g, &MeshSettings::for_fitness()).unwrap();
        let mut ev = ManualEvaluator::default();
        for f in [28.0, 30.0, 29.0] {
            ev.record_repeat("a", f).unwrap();
        }
        assert_eq!(ev.evaluate("a", &g, Ok(&solid)), Evaluation::Pending);
        ev.record_repeat("a", 29.0).unwrap();
        ev.record_repeat("a", 29.0).unwrap();
        assert_eq!(ev.evaluate("a", &g, Ok(&solid)), Evaluation::Fitness(29.0));
        let err = MeshError::ProfileTooShort;
        assert_eq!(ev.evaluate("b", &g, Err(&err)), Evaluation::Fitness(0.0));
        let mut proxy = ProxyEvaluator::default();
        assert_eq!(proxy.evaluate("b", &g, Err(&err)), Evaluation::Fitness(0.0));
    }

    #[test]
    fn flat_disc_scores_low() {
        let p = Profile(vec![Point2::new(30.0, 0.0), Point2::new(0.0, 0.0)]);
        let b = proxy_components(&p, &ProxySettings::default()).unwrap();
        // the band touches the ball only near its top: theta < acos(1 - 2/25)
        let expected = (1.0f64 - 2.0 / 25.0).acos() / FRAC_PI_2;
        assert!((b.contact - expected).abs() < 2e-3, "{b:?}");
        assert_eq!(b.interlock, 0.0);
        assert_eq!(b.pocket, 0.0);
    }

    #[test]
    fn concentric_cap_contacts_everywhere() {
        let rho = DEFAULT_BALL_RADIUS_MM;
        let p = Profile(arc(rho + DEFAULT_BAND_MM / 2.0, 512));
        let b = proxy_components(&p, &ProxySettings::default()).unwrap();
        assert!(b.contact > 0.99, "{b:?}");
        assert!(b.interlock < 0.1, "{b:?}");
    }

    #[test]
    fn pocket_grows_with_depth() {
        let mut last = -1.0;
        for depth in [0.0, 2.0, 5.0, 9.0, 14.0, 20.0, 30.0] {
            let top = 40.0;
            let p = Profile(vec![
                Point2::new(30.0, 0.0),
                Point2::new(20.0, top - depth),
                Point2::new(5.0, top - depth),
                Point2::new(5.0, top - 0.5),
                Point2::new(0.0, top),
            ]);
            let b = proxy_components(&p, &ProxySettings::default()).unwrap();
            assert!(b.pocket >= last, "depth {depth}: {b:?}");
            last = b.pocket;
        }
        assert!(last > 0.9);
    }

    #[test]
    fn non_ball_target_rejected() {
        let p = Profile(arc(30.0, 16));
        let s = ProxySettings {
            target: TargetObject {
                shape: TargetShape::Cube,
                size_mm: 25.0,
            },
            ..ProxySettings::default()
        };
        assert_eq!(
            proxy_components(&p, &s),
            Err(FitnessError::UnsupportedTarget(TargetShape::Cube))
        );
        let bad = ProxySettings {
            weights: ProxyWeights {
                contact: 0.5,
                interlock: 0.5,
                pocket: 0.5,
            },
            ..ProxySettings::default()
        };
        assert!(bad.validate().is_err());
    }
}
