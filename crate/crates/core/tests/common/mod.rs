//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use membrane_core::campaign::{Campaign, Status};
use membrane_core::genome::{
    BASE_RADIUS_RANGE_MM, COMPONENT_RANGE, CONTROL_POINT_COUNT_RANGE, HEIGHT_RANGE_MM,
};
use membrane_core::mesh::revolve;
use membrane_core::{Genome, Point2, TriangleMesh};

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Bezier point from the explicit Bernstein sum.
pub fn bernstein(poly: &[Point2], t: f64) -> Point2 {
    let n = poly.len() - 1;
    let (mut x, mut y) = (0.0, 0.0);
    for (i, p) in poly.iter().enumerate() {
        let b = binomial(n, i) * t.powi(i as i32) * (1.0 - t).powi((n - i) as i32);
        x += b * p.x;
        y += b * p.y;
    }
    Point2::new(x, y)
}

fn cross(o: Point2, a: Point2, b: Point2) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

fn on_segment(a: Point2, b: Point2, p: Point2) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

fn segments_meet(a: Point2, b: Point2, c: Point2, d: Point2) -> bool {
    let (d1, d2) = (cross(c, d, a), cross(c, d, b));
    let (d3, d4) = (cross(a, b, c), cross(a, b, d));
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment(c, d, a))
        || (d2 == 0.0 && on_segment(c, d, b))
        || (d3 == 0.0 && on_segment(a, b, c))
        || (d4 == 0.0 && on_segment(a, b, d))
}

/// Exact-sign brute force over all non-adjacent segment pairs.
pub fn brute_force_self_intersects(pts: &[Point2]) -> bool {
    let n = pts.len().saturating_sub(1);
    (0..n).any(|i| ((i + 2)..n).any(|j| segments_meet(pts[i], pts[i + 1], pts[j], pts[j + 1])))
}

/// Samples the full control polygon of `g` at `t = i / n` with the Bernstein oracle.
pub fn oracle_curve(g: &Genome, n: usize) -> Vec<Point2> {
    let poly = g.full_polygon();
    (0..=n)
        .map(|i| bernstein(poly.points(), i as f64 / n as f64))
        .collect()
}

pub fn bounds_violation(g: &Genome) -> Option<String> {
    let inside = |v: f64, (lo, hi): (f64, f64)| v >= lo && v <= hi;
    if !inside(g.base_radius(), BASE_RADIUS_RANGE_MM) {
        return Some(format!("r = {}", g.base_radius()));
    }
    if !inside(g.height(), HEIGHT_RANGE_MM) {
        return Some(format!("h = {}", g.height()));
    }
    let v = g.v();
    if v < CONTROL_POINT_COUNT_RANGE.0 || v > CONTROL_POINT_COUNT_RANGE.1 {
        return Some(format!("v = {v}"));
    }
    g.control_points()
        .iter()
        .find(|p| !inside(p.x, COMPONENT_RANGE) || !inside(p.y, COMPONENT_RANGE))
        .map(|p| format!("control point {p:?}"))
}

/// UV sphere centred at the origin; latitude rings at equal polar-angle steps.
pub fn sphere(radius: f64, rings: usize, segments: usize) -> TriangleMesh {
    let meridian: Vec<Point2> = (0..=rings)
        .map(|k| {
            let theta = PI * k as f64 / rings as f64;
            let x = if k == 0 || k == rings {
                0.0
            } else {
                radius * theta.sin()
            };
            Point2::new(x, -radius * theta.cos())
        })
        .collect();
    revolve(&meridian, segments).unwrap()
}

/// Triangles of a binary STL as f32 vertex triples, parsed byte by byte.
pub fn parse_binary_stl(bytes: &[u8]) -> Vec<[[f32; 3]; 3]> {
    assert!(bytes.len() >= 84, "short file");
    let n = u32::from_le_bytes(bytes[80..84].try_into().unwrap()) as usize;
    assert_eq!(
        bytes.len(),
        84 + 50 * n,
        "length disagrees with triangle count"
    );
    let f = |at: usize| f32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
    (0..n)
        .map(|t| {
            let base = 84 + 50 * t + 12;
            let mut tri = [[0.0f32; 3]; 3];
            for (v, vert) in tri.iter_mut().enumerate() {
                for (c, x) in vert.iter_mut().enumerate() {
                    *x = f(base + 12 * v + 4 * c);
                }
            }
            tri
        })
        .collect()
}

/// Deterministic force for repeat `r` of child `i` in generation `g`.
pub fn synthetic_force(g: usize, i: usize, r: usize) -> f64 {
    1.0 + 0.75 * g as f64 + 0.5 * i as f64 + 0.1 * r as f64
}

/// Records every missing repeat and advances until the campaign completes.
pub fn drive_manual(c: &mut Campaign) {
    loop {
        let g = c.state().current;
        let pending: Vec<(usize, usize)> = c
            .generation(g)
            .unwrap()
            .children
            .iter()
            .enumerate()
            .filter(|(_, ch)| ch.unprintable.is_none())
            .map(|(i, ch)| (i, ch.record.repeats.len()))
            .collect();
        for (i, have) in pending {
            for r in have..c.state().repeats {
                c.record_fitness(g, i, synthetic_force(g, i, r)).unwrap();
            }
        }
        match c.state().status {
            Status::Complete => return,
            Status::ReadyToAdvance => {
                c.advance().unwrap();
            }
            Status::AwaitingFitness => panic!("generation {g} still pending"),
        }
    }
}
