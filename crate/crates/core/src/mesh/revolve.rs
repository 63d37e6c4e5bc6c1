use std::f64::consts::TAU;

use super::{validate_mesh, MeshError, TriangleMesh};
use crate::curve::{self, Point2};
use crate::genome::{Genome, Profile};

pub const WALL_THICKNESS_MM: f64 = 1.0;
pub const BASE_THICKNESS_MM: f64 = 1.0;
pub const BASE_INNER_RADIUS_MM: f64 = 15.0;
/// Profile points closer than this to the axis collapse onto it.
pub const POLE_EPS_MM: f64 = 1e-6;
pub const MIN_ANGULAR_SEGMENTS: usize = 8;

/// Below this cosine between the vertex bisector and the segment normal the
/// mitred offset is rejected as an unprintable sharp feature.
const MIN_MITER_COS: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshSettings {
    pub profile_samples: usize,
    pub angular_segments: usize,
    pub wall_thickness: f64,
}

impl Default for MeshSettings {
    fn default() -> Self {
        MeshSettings {
            profile_samples: 128,
            angular_segments: 64,
            wall_thickness: WALL_THICKNESS_MM,
        }
    }
}

impl MeshSettings {
    /// Coarser mesh used while scoring.
    pub fn for_fitness() -> Self {
        MeshSettings {
            angular_segments: 32,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GripperSolid {
    pub membrane: TriangleMesh,
    pub base: TriangleMesh,
    pub combined: TriangleMesh,
    pub section: CrossSection,
}

/// Meridian section of the membrane wall.
///
/// `outer` runs from the base contact `(r, 0)` to the axis `(0, h)`. `inner` is
/// the inward offset in the same direction, clipped to start on the base plane
/// and to end on the axis.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossSection {
    pub outer: Vec<Point2>,
    pub inner: Vec<Point2>,
    pub thickness: f64,
}

enum Ring {
    Pole(u32),
    Ring(u32),
}

/// Revolves an open meridian chain (radial, axial) about the z axis. Winding is
/// outward when the solid lies to the left of the chain's direction of travel.
pub fn revolve(profile: &[Point2], angular_segments: usize) -> Result<TriangleMesh, MeshError> {
    revolve_chain(profile, angular_segments, false)
}

pub fn revolve_chain(
    chain: &[Point2],
    angular_segments: usize,
    closed: bool,
) -> Result<TriangleMesh, MeshError> {
    if angular_segments < MIN_ANGULAR_SEGMENTS {
        return Err(MeshError::TooFewSegments {
            min: MIN_ANGULAR_SEGMENTS,
            got: angular_segments,
        });
    }
    if let Some((index, p)) = chain.iter().enumerate().find(|(_, p)| p.x < -POLE_EPS_MM) {
        return Err(MeshError::NegativeRadius { index, radius: p.x });
    }
    let snapped: Vec<Point2> = chain
        .iter()
        .map(|p| {
            if p.x < POLE_EPS_MM {
                Point2::new(0.0, p.y)
            } else {
                *p
            }
        })
        .collect();
    let mut pts = curve::dedup_consecutive(&snapped);
    if closed && pts.len() > 2 && pts[0].dist(pts[pts.len() - 1]) <= curve::DISTINCT_EPS {
        pts.pop();
    }
    if pts.len() < 2 {
        return Err(MeshError::ProfileTooShort);
    }

    let n = angular_segments;
    let mut mesh = TriangleMesh::default();
    let mut rings = Vec::with_capacity(pts.len());
    for p in &pts {
        let start = mesh.vertices.len() as u32;
        if p.x == 0.0 {
            mesh.vertices.push([0.0, 0.0, p.y]);
            rings.push(Ring::Pole(start));
        } else {
            for j in 0..n {
                let theta = TAU * j as f64 / n as f64;
                let (s, c) = theta.sin_cos();
                mesh.vertices.push([p.x * c, p.x * s, p.y]);
            }
            rings.push(Ring::Ring(start));
        }
    }

    let spans = if closed { pts.len() } else { pts.len() - 1 };
    for i in 0..spans {
        let a = &rings[i];
        let b = &rings[(i + 1) % pts.len()];
        for j in 0..n as u32 {
            let jn = (j + 1) % n as u32;
            match (a, b) {
                (Ring::Ring(a0), Ring::Ring(b0)) => {
                    mesh.triangles.push([a0 + j, a0 + jn, b0 + j]);
                    mesh.triangles.push([a0 + jn, b0 + jn, b0 + j]);
                }
                (Ring::Pole(p), Ring::Ring(b0)) => {
                    mesh.triangles.push([*p, b0 + jn, b0 + j]);
                }
                (Ring::Ring(a0), Ring::Pole(p)) => {
                    mesh.triangles.push([a0 + j, a0 + jn, *p]);
                }
                (Ring::Pole(_), Ring::Pole(_)) => {}
            }
        }
    }
    Ok(mesh)
}

fn left_normal(a: Point2, b: Point2) -> Point2 {
    let len = a.dist(b);
    Point2::new(-(b.y - a.y) / len, (b.x - a.x) / len)
}

fn collision(p: Point2) -> MeshError {
    MeshError::OffsetCollision { at_mm: (p.x, p.y) }
}

/// Offsets the profile inward by `thickness` and closes the wall section.
pub fn cross_section(profile: &Profile, thickness: f64) -> Result<CrossSection, MeshError> {
    let outer = curve::dedup_consecutive(profile.points());
    if outer.len() < 2 {
        return Err(MeshError::ProfileTooShort);
    }
    if let Some((index, p)) = outer.iter().enumerate().find(|(_, p)| p.x < -POLE_EPS_MM) {
        return Err(MeshError::NegativeRadius { index, radius: p.x });
    }
    if curve::is_self_intersecting(&outer) {
        return Err(MeshError::SelfIntersectingProfile);
    }

    let normals: Vec<Point2> = outer.windows(2).map(|w| left_normal(w[0], w[1])).collect();
    let last = outer.len() - 1;
    let mut offset = Vec::with_capacity(outer.len());
    for (i, &p) in outer.iter().enumerate() {
        let dir = if i == 0 {
            normals[0]
        } else if i == last {
            normals[last - 1]
        } else {
            let (n0, n1) = (normals[i - 1], normals[i]);
            let m = Point2::new(n0.x + n1.x, n0.y + n1.y);
            let len = m.x.hypot(m.y);
            if len < 1e-12 {
                return Err(collision(p));
            }
            let m = Point2::new(m.x / len, m.y / len);
            let c = m.x * n1.x + m.y * n1.y;
            if c < MIN_MITER_COS {
                return Err(collision(p));
            }
            Point2::new(m.x / c, m.y / c)
        };
        offset.push(Point2::new(
            p.x + thickness * dir.x,
            p.y + thickness * dir.y,
        ));
    }
    for i in 0..last {
        let (a, b) = (outer[i], outer[i + 1]);
        let (qa, qb) = (offset[i], offset[i + 1]);
        if (qb.x - qa.x) * (b.x - a.x) + (qb.y - qa.y) * (b.y - a.y) <= 0.0 {
            return Err(collision(a));
        }
    }

    let inner = clip_to_axis(clip_to_base(offset)?)?;
    if inner.len() < 2 {
        return Err(collision(outer[0]));
    }
    let min_clearance = thickness * (1.0 - 1e-6);
    for &q in &inner {
        if q.y < -1e-9 || q.x < -POLE_EPS_MM {
            return Err(collision(q));
        }
        if curve::distance_to_polyline(q, &outer) < min_clearance {
            return Err(collision(q));
        }
    }

    let mut ring: Vec<Point2> = outer.clone();
    ring.extend(inner.iter().rev().copied());
    if curve::is_closed_polygon_self_intersecting(&ring) {
        return Err(collision(inner[inner.len() - 1]));
    }
    Ok(CrossSection {
        outer,
        inner,
        thickness,
    })
}

/// Starts the offset curve on the base plane `z = 0`.
fn clip_to_base(mut q: Vec<Point2>) -> Result<Vec<Point2>, MeshError> {
    if q[0].y > 0.0 {
        q.insert(0, Point2::new(q[0].x, 0.0));
        return Ok(q);
    }
    if q[0].y == 0.0 {
        return Ok(q);
    }
    let k = q
        .windows(2)
        .position(|w| w[0].y < 0.0 && w[1].y >= 0.0)
        .ok_or_else(|| collision(q[0]))?;
    let (a, b) = (q[k], q[k + 1]);
    let t = -a.y / (b.y - a.y);
    let mut out = vec![Point2::new(a.x + t * (b.x - a.x), 0.0)];
    out.extend_from_slice(&q[k + 1..]);
    Ok(curve::dedup_consecutive(&out))
}

/// Ends the offset curve on the axis `x = 0`.
fn clip_to_axis(mut q: Vec<Point2>) -> Result<Vec<Point2>, MeshError> {
    let end = q[q.len() - 1];
    if end.x.abs() <= POLE_EPS_MM {
        let n = q.len();
        q[n - 1].x = 0.0;
        return Ok(q);
    }
    if end.x > 0.0 {
        // extend along the last segment if it heads for the axis
        let prev = q[q.len() - 2];
        let dx = end.x - prev.x;
        let z = if dx < -1e-12 {
            end.y + (end.y - prev.y) * (-end.x / dx)
        } else {
            end.y
        };
        q.push(Point2::new(0.0, z));
        return Ok(q);
    }
    let k = q
        .iter()
        .rposition(|p| p.x >= 0.0)
        .ok_or_else(|| collision(end))?;
    if q[..k].iter().any(|p| p.x < -POLE_EPS_MM) {
        return Err(collision(end));
    }
    let (a, b) = (q[k], q[k + 1]);
    let t = a.x / (a.x - b.x);
    q.truncate(k + 1);
    q.push(Point2::new(0.0, a.y + t * (b.y - a.y)));
    Ok(curve::dedup_consecutive(&q))
}

fn membrane_chain(section: &CrossSection) -> Vec<Point2> {
    let mut chain: Vec<Point2> = section.inner.iter().rev().copied().collect();
    chain.extend_from_slice(&section.outer);
    chain
}

/// Closed membrane: outer surface, inward-offset inner surface and the rim ring
/// on the base plane.
pub fn shell(
    profile: &Profile,
    thickness: f64,
    angular_segments: usize,
) -> Result<TriangleMesh, MeshError> {
    let section = cross_section(profile, thickness)?;
    revolve_chain(&membrane_chain(&section), angular_segments, false)
}

/// Annular base ring: outer radius `base_radius`, inner radius 15 mm, 1 mm thick,
/// occupying `-1 <= z <= 0`.
pub fn make_base(base_radius: f64, angular_segments: usize) -> Result<TriangleMesh, MeshError> {
    if base_radius.is_nan() || base_radius <= BASE_INNER_RADIUS_MM {
        return Err(MeshError::BaseTooSmall(base_radius));
    }
    let r0 = BASE_INNER_RADIUS_MM;
    let loop_pts = [
        Point2::new(r0, -BASE_THICKNESS_MM),
        Point2::new(base_radius, -BASE_THICKNESS_MM),
        Point2::new(base_radius, 0.0),
        Point2::new(r0, 0.0),
    ];
    revolve_chain(&loop_pts, angular_segments, true)
}

pub fn assemble(genome: &Genome, settings: &MeshSettings) -> Result<GripperSolid, MeshError> {
    let profile = genome.to_profile(settings.profile_samples);
    assemble_profile(&profile, settings).map_err(|e| match e {
        MeshError::Unprintable(_) => e,
        other => MeshError::Unprintable(Box::new(other)),
    })
}

pub(crate) fn assemble_profile(
    profile: &Profile,
    settings: &MeshSettings,
) -> Result<GripperSolid, MeshError> {
    let section = cross_section(profile, settings.wall_thickness)?;
    let base_radius = section.outer[0].x;
    let rim = section.inner[0];
    if rim.x <= BASE_INNER_RADIUS_MM + POLE_EPS_MM {
        return Err(MeshError::BaseTooSmall(rim.x));
    }
    let n = settings.angular_segments;
    let membrane = revolve_chain(&membrane_chain(&section), n, false)?;
    let base = make_base(base_radius, n)?;

    let mut chain: Vec<Point2> = section.inner.iter().rev().copied().collect();
    chain.extend_from_slice(&[
        Point2::new(BASE_INNER_RADIUS_MM, 0.0),
        Point2::new(BASE_INNER_RADIUS_MM, -BASE_THICKNESS_MM),
        Point2::new(base_radius, -BASE_THICKNESS_MM),
    ]);
    chain.extend_from_slice(&section.outer);
    let combined = revolve_chain(&chain, n, false)?;

    let report = validate_mesh(&combined);
    if !report.is_valid_solid() {
        return Err(MeshError::Invalid(format!(
            "watertight={} oriented={} degenerate={} volume={}",
            report.watertight, report.oriented, report.degenerate_triangles, report.signed_volume
        )));
    }
    Ok(GripperSolid {
        membrane,
        base,
        combined,
        section,
    })
}

/// Solid bounded by the outer membrane surface and a 1 mm plate of the base
/// radius: the external silhouette used for shape comparison.
pub fn envelope(profile: &Profile, angular_segments: usize) -> Result<TriangleMesh, MeshError> {
    let outer = profile.points();
    let base_radius = outer.first().ok_or(MeshError::ProfileTooShort)?.x;
    let mut chain = vec![
        Point2::new(0.0, -BASE_THICKNESS_MM),
        Point2::new(base_radius, -BASE_THICKNESS_MM),
    ];
    chain.extend_from_slice(outer);
    revolve_chain(&chain, angular_segments, false)
}
