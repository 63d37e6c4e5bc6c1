//! Triangle meshes for printable grippers.
//!
//! The axis of revolution is `z`; the base plane is `z = 0` with the base ring
//! occupying `-1 <= z <= 0` below it.

mod revolve;
pub mod stl;

use std::collections::HashMap;

use serde::Serialize;
use thiserror::Error;

pub use revolve::{
    assemble, cross_section, envelope, make_base, revolve, revolve_chain, shell, CrossSection,
    GripperSolid, MeshSettings, BASE_INNER_RADIUS_MM, BASE_THICKNESS_MM, POLE_EPS_MM,
    WALL_THICKNESS_MM,
};

pub type Vec3 = [f64; 3];

#[derive(Debug, Error, PartialEq)]
pub enum MeshError {
    #[error("profile point {index} has negative radial coordinate {radius}")]
    NegativeRadius { index: usize, radius: f64 },
    #[error("need at least {min} angular segments, got {got}")]
    TooFewSegments { min: usize, got: usize },
    #[error("profile needs at least 2 distinct points")]
    ProfileTooShort,
    #[error("wall offset collides with itself or the outer surface near {at_mm:?} mm")]
    OffsetCollision { at_mm: (f64, f64) },
    #[error("profile self-intersects")]
    SelfIntersectingProfile,
    #[error("base radius {0} mm must exceed the 15 mm mount radius")]
    BaseTooSmall(f64),
    #[error("assembled mesh failed validation: {0}")]
    Invalid(String),
    #[error("unprintable design: {0}")]
    Unprintable(Box<MeshError>),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TriangleMesh {
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[u32; 3]>,
}

fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn norm(a: Vec3) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

impl TriangleMesh {
    pub fn triangle_points(&self, t: usize) -> [Vec3; 3] {
        let [a, b, c] = self.triangles[t];
        [
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        ]
    }

    /// Unnormalised face normal (length = twice the area).
    pub fn face_normal(&self, t: usize) -> Vec3 {
        let [a, b, c] = self.triangle_points(t);
        cross(sub(b, a), sub(c, a))
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        0.5 * norm(self.face_normal(t))
    }

    pub fn surface_area(&self) -> f64 {
        (0..self.triangles.len())
            .map(|t| self.triangle_area(t))
            .sum()
    }

    /// Divergence-theorem volume; positive when the faces wind outward.
    pub fn signed_volume(&self) -> f64 {
        (0..self.triangles.len())
            .map(|t| {
                let [a, b, c] = self.triangle_points(t);
                let bc = cross(b, c);
                a[0] * bc[0] + a[1] * bc[1] + a[2] * bc[2]
            })
            .sum::<f64>()
            / 6.0
    }

    /// Appends `other`, re-indexing its triangles. No welding.
    pub fn append(&mut self, other: &TriangleMesh) {
        let offset = self.vertices.len() as u32;
        self.vertices.extend_from_slice(&other.vertices);
        self.triangles.extend(
            other
                .triangles
                .iter()
                .map(|t| [t[0] + offset, t[1] + offset, t[2] + offset]),
        );
    }

    pub fn scaled(&self, factor: f64) -> TriangleMesh {
        TriangleMesh {
            vertices: self
                .vertices
                .iter()
                .map(|v| [v[0] * factor, v[1] * factor, v[2] * factor])
                .collect(),
            triangles: self.triangles.clone(),
        }
    }

    /// Rotation about the z axis.
    pub fn rotated_z(&self, angle: f64) -> TriangleMesh {
        let (s, c) = angle.sin_cos();
        TriangleMesh {
            vertices: self
                .vertices
                .iter()
                .map(|v| [c * v[0] - s * v[1], s * v[0] + c * v[1], v[2]])
                .collect(),
            triangles: self.triangles.clone(),
        }
    }

    pub fn translated(&self, d: Vec3) -> TriangleMesh {
        TriangleMesh {
            vertices: self
                .vertices
                .iter()
                .map(|v| [v[0] + d[0], v[1] + d[1], v[2] + d[2]])
                .collect(),
            triangles: self.triangles.clone(),
        }
    }
}

pub const DEGENERATE_AREA_MM2: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeshReport {
    pub vertex_count: usize,
    pub triangle_count: usize,
    pub edge_count: usize,
    pub watertight: bool,
    pub oriented: bool,
    pub boundary_edges: usize,
    pub non_manifold_edges: usize,
    pub degenerate_triangles: usize,
    pub euler_characteristic: i64,
    pub signed_volume: f64,
    pub surface_area: f64,
    pub bbox_min: Vec3,
    pub bbox_max: Vec3,
}

impl MeshReport {
    /// Watertight, oriented, no degenerate faces, positive volume.
    pub fn is_valid_solid(&self) -> bool {
        self.watertight
            && self.oriented
            && self.degenerate_triangles == 0
            && self.signed_volume > 0.0
    }
}

pub fn validate_mesh(m: &TriangleMesh) -> MeshReport {
    // directed edge -> count
    let mut directed: HashMap<(u32, u32), u32> = HashMap::with_capacity(m.triangles.len() * 3);
    for t in &m.triangles {
        for k in 0..3 {
            *directed.entry((t[k], t[(k + 1) % 3])).or_insert(0) += 1;
        }
    }
    let mut undirected: HashMap<(u32, u32), (u32, u32)> = HashMap::with_capacity(directed.len());
    for (&(a, b), &n) in &directed {
        let e = undirected.entry((a.min(b), a.max(b))).or_insert((0, 0));
        if a < b {
            e.0 += n;
        } else {
            e.1 += n;
        }
    }
    let mut boundary = 0;
    let mut non_manifold = 0;
    let mut oriented = true;
    for &(fwd, back) in undirected.values() {
        match fwd + back {
            1 => boundary += 1,
            2 => {}
            _ => non_manifold += 1,
        }
        if fwd > 1 || back > 1 {
            oriented = false;
        }
    }

    let mut used = vec![false; m.vertices.len()];
    for t in &m.triangles {
        for &i in t {
            used[i as usize] = true;
        }
    }
    let mut bbox_min = [f64::INFINITY; 3];
    let mut bbox_max = [f64::NEG_INFINITY; 3];
    for (v, _) in m.vertices.iter().zip(&used).filter(|(_, u)| **u) {
        for k in 0..3 {
            bbox_min[k] = bbox_min[k].min(v[k]);
            bbox_max[k] = bbox_max[k].max(v[k]);
        }
    }
    let vertex_count = used.iter().filter(|u| **u).count();
    let degenerate = (0..m.triangles.len())
        .filter(|&t| m.triangle_area(t) <= DEGENERATE_AREA_MM2)
        .count();

    MeshReport {
        vertex_count,
        triangle_count: m.triangles.len(),
        edge_count: undirected.len(),
        watertight: boundary == 0 && non_manifold == 0 && !m.triangles.is_empty(),
        oriented,
        boundary_edges: boundary,
        non_manifold_edges: non_manifold,
        degenerate_triangles: degenerate,
        euler_characteristic: vertex_count as i64 - undirected.len() as i64
            + m.triangles.len() as i64,
        signed_volume: m.signed_volume(),
        surface_area: m.surface_area(),
        bbox_min,
        bbox_max,
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    /// Axis-aligned cube, outward winding.
    pub fn cube(side: f64) -> TriangleMesh {
        let s = side;
        let vertices = vec![
            [0.0, 0.0, 0.0],
            [s, 0.0, 0.0],
            [s, s, 0.0],
            [0.0, s, 0.0],
            [0.0, 0.0, s],
            [s, 0.0, s],
            [s, s, s],
            [0.0, s, s],
        ];
        let quads = [
            [0, 3, 2, 1],
            [4, 5, 6, 7],
            [0, 1, 5, 4],
            [1, 2, 6, 5],
            [2, 3, 7, 6],
            [3, 0, 4, 7],
        ];
        let mut triangles = Vec::new();
        for q in quads {
            triangles.push([q[0], q[1], q[2]]);
            triangles.push([q[0], q[2], q[3]]);
        }
        TriangleMesh {
            vertices,
            triangles,
        }
    }
}
